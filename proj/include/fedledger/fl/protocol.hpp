#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedledger/chain/chaincode.hpp"
#include "fedledger/chain/scheduler.hpp"
#include "fedledger/contract/contract.hpp"
#include "fedledger/fl/aggregate.hpp"
#include "fedledger/logstore/logstore.hpp"
#include "fedledger/nn/dataset.hpp"
#include "fedledger/nn/model.hpp"

namespace fedledger::fl {

struct AgentSpec {
  std::string agent_id;
  nn::LabeledDataset dataset;
  bool is_corrupt = false;

  std::int64_t sample_count() const { return dataset.size(); }
};

struct FLConfig {
  int rounds = 1;                  // R
  int agents = 1;                  // K
  double corrupt_fraction = 0.0;   // F
  double selection_fraction = 1.0; // C
  int local_epochs = 1;            // E
  int local_batch = 32;            // B
  float local_lr = 0.02f;
  float eta = 1.0f;                // server learning rate
  int kappa = 1000;
  std::uint64_t seed = 0;
  AggregatorKind aggregator = AggregatorKind::kFedAvg;

  void validate() const;
  // ceil(C*K) with a tolerance for binary fractions like 1/3.
  int selected_per_round() const;
};

// Everything one round produced. updates hold the agents' actual float
// deltas (what detection ranks); the wire may have carried only their signs.
struct RoundRecord {
  int round_index = 0;
  std::vector<std::string> selected;  // sorted agent ids
  std::map<std::string, Eigen::VectorXf> updates;
  std::map<std::string, std::int64_t> weights;
  Eigen::VectorXf global_before;
  Eigen::VectorXf increment;
  Eigen::VectorXf global_after;
  AggregatorKind aggregator = AggregatorKind::kFedAvg;
  float eta = 1.0f;
};

// Selected agent indices for one round, sorted; uniform without
// replacement, deterministic in (config.seed, round_index) alone.
std::vector<int> sample_agents(const FLConfig& config, int round_index);

// Local training: initializes from the global parameters, runs E epochs of
// SGD at batch size B, returns delta = trained - global. E == 0 yields the
// zero vector. Honest and corrupt agents share this code path; they differ
// only in dataset content.
Eigen::VectorXf local_update(const AgentSpec& agent,
                             const nn::ModelConfig& arch,
                             const Eigen::VectorXf& global,
                             const FLConfig& config, std::uint64_t round_seed);

// Wiring for a chain-backed run. contract and logstore may be null (the
// corresponding phases are skipped); chaincode and scheduler are required.
struct ProtocolEnv {
  chain::FlChaincode* chaincode = nullptr;
  chain::Scheduler* scheduler = nullptr;
  contract::PublicContract* contract = nullptr;
  logstore::LogStore* logstore = nullptr;
  std::map<std::string, std::string> credentials;
  nn::LabeledDataset validation;  // for leave-one-out metrics
  bool compute_loo = true;
};

struct ProtocolResult {
  std::vector<RoundRecord> rounds;
  Eigen::VectorXf final_params;
  // Mean commit-minus-submit ticks of each worker's shard uploads.
  std::map<std::string, double> avg_upload_latency;
  int aggregation_events = 0;  // completion notifications observed
};

// The multi-round protocol: sample, announce, train, upload through the
// chaincode, commit digests to the public contract, aggregate on-chain,
// publish log records, advance the global model. Transport failures carry
// the round index.
ProtocolResult run_protocol(const FLConfig& config, const nn::ModelConfig& arch,
                            const std::vector<AgentSpec>& agents,
                            const Eigen::VectorXf& initial_params,
                            ProtocolEnv& env);

}  // namespace fedledger::fl
