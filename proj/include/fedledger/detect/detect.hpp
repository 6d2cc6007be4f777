#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedledger/fl/protocol.hpp"
#include "fedledger/nn/dataset.hpp"
#include "fedledger/nn/model.hpp"

namespace fedledger::detect {

struct AgentScore {
  std::string agent_id;
  double avg_l2 = 0.0;              // mean restricted L2 over qualifying rounds
  int qualifying_appearances = 0;
  bool insufficient_signal = false; // absent from every qualifying round
};

struct DetectionReport {
  int kappa = 0;
  int assumed_adversaries = 0;            // m
  std::vector<double> backdoor_losses;    // one per round, replay order
  std::vector<int> qualifying_rounds;     // strict decreases vs previous round
  // Restricted L2 of every selected agent, aligned with qualifying_rounds.
  std::vector<std::map<std::string, double>> per_round_l2;
  std::vector<AgentScore> ranking;        // descending avg_l2, ties by id
  std::vector<std::string> flagged;       // top-m of ranking
  bool no_signal = false;                 // zero qualifying rounds

  // Plain-text ranking summary (what adjudication reads).
  std::string to_text() const;
  std::string to_json() const;
  static DetectionReport from_json(const std::string& text);
};

// Post-hoc forensics over a finished run: replays the stored global models,
// tracks the backdoor loss, and in every round where it strictly decreased
// attributes the movement to agents via the diagonal Fisher information of
// the poisoned validation set. Each qualifying round contributes the L2
// norm of every selected agent's update restricted to the kappa largest
// Fisher entries (ties broken toward lower indices); agents are ranked by
// their average. Agents never seen in a qualifying round rank last with
// value 0 and an insufficient-signal mark.
DetectionReport detect(const std::vector<fl::RoundRecord>& rounds,
                       const nn::ModelConfig& arch,
                       const nn::LabeledDataset& poisoned_val, int kappa,
                       int assumed_adversaries);

// Indices of the kappa largest entries, value-descending with lower index
// winning ties. Exposed for oracle tests.
std::vector<Eigen::Index> top_k_indices(const Eigen::VectorXd& values,
                                        int kappa);

// L2 norm of delta restricted to the given coordinates.
double restricted_l2(const Eigen::VectorXf& delta,
                     const std::vector<Eigen::Index>& coords);

// Equal-share split after a seeded shuffle.
std::vector<nn::LabeledDataset> iid_split(const nn::LabeledDataset& data,
                                          int parts, std::uint64_t seed);

// Per class: proportions from Dirichlet(concentration * 1_K) via gamma
// draws, counts by largest remainder, samples dealt after a seeded shuffle.
// Partitions are disjoint and cover the input.
std::vector<nn::LabeledDataset> dirichlet_split(const nn::LabeledDataset& data,
                                                int parts,
                                                double concentration,
                                                std::uint64_t seed);

}  // namespace fedledger::detect
