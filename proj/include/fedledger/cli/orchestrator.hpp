#pragma once

#include <filesystem>
#include <string>

#include "fedledger/cli/config.hpp"
#include "fedledger/contract/contract.hpp"
#include "fedledger/fl/protocol.hpp"

namespace fedledger::cli {

// Agent population derived from a config: synthetic data, the configured
// split, trojan poisoning of the first corrupt_count ids, and the clean and
// poisoned validation sets. Everything is a pure function of the config.
struct Population {
  std::vector<fl::AgentSpec> agents;
  nn::LabeledDataset validation;           // clean
  nn::LabeledDataset poisoned_validation;  // empty when no attack
};

Population build_population(const ExperimentConfig& config);

struct RunSummary {
  std::filesystem::path run_dir;
  // "ok" (detection emitted), "attack-absent" (no adversary configured) or
  // "attack-failed" (backdoor accuracy below the efficacy gate, detection
  // vacuous).
  std::string status;
  double final_accuracy = 0.0;
  double final_loss = 0.0;
  double backdoor_accuracy = -1.0;  // -1 when no attack ran
  int aggregation_events = 0;
  bool detection_ran = false;
  std::vector<std::string> flagged;
};

// Full pipeline into a fresh run directory: synthesize data, split, poison,
// run the chain-backed protocol, evaluate, detect, emit every artifact.
// The directory gets a MANIFEST marked incomplete first and complete last,
// so an aborted run is always recognizable. Refuses a directory that
// already holds a MANIFEST.
RunSummary run_experiment(const ExperimentConfig& config,
                          const std::filesystem::path& run_dir);

struct AuditOutcome {
  int claim_id = 0;
  std::string status;  // terminal claim status, or "suspended"
  std::string loser;   // empty while suspended
  contract::Currency forfeited = 0;
  std::filesystem::path transcript_path;
};

// Adjudication against stored artifacts only (no retraining): open claim,
// verify the accused's commitments against the log store, grant access,
// replay detection from the logged updates, settle. Writes a transcript and
// the post-settlement contract snapshot under <run_dir>/audit/; run
// artifacts are never modified.
AuditOutcome audit_run(const std::filesystem::path& run_dir,
                       const std::string& accused, const std::string& accuser,
                       int kappa_override = 0, int adversaries_override = 0);

// (Re)generates the plot-ready CSV tables under <run_dir>/reports and
// returns a human-readable summary of them.
std::string write_reports(const std::filesystem::path& run_dir);

}  // namespace fedledger::cli
