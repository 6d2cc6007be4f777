#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedledger/chain/scheduler.hpp"
#include "fedledger/codec/wire.hpp"
#include "fedledger/contract/contract.hpp"
#include "fedledger/detect/trojan.hpp"
#include "fedledger/fl/protocol.hpp"
#include "fedledger/nn/model.hpp"

namespace fedledger::cli {

struct DatasetConfig {
  int train_count = 4000;
  int val_count = 512;
  float noise_std = 0.15f;
};

struct SplitConfig {
  std::string kind = "iid";  // "iid" or "dirichlet"
  double concentration = 0.5;
};

struct EconomyConfig {
  contract::Currency initial_balance = 1000 * contract::kUnit;
  contract::Currency deposit = 100 * contract::kUnit;
  contract::Currency reward_base = 1 * contract::kUnit;
  contract::Currency reward_bonus = contract::kUnit / 2;
};

// Whole-experiment knobs, loaded from a strict JSON file: unknown keys are
// field-level errors, as is any module precondition violation. The schema
// and every default live in FORMATS.md.
struct ExperimentConfig {
  fl::FLConfig fl;
  nn::ModelConfig model;
  DatasetConfig dataset;
  SplitConfig split;
  detect::TrojanSpec trojan = detect::TrojanSpec::plus_pattern(0, 7);
  double poison_fraction = 1.0;
  chain::SchedulerConfig scheduler;
  bool scheduler_seed_set = false;  // absent -> derived from fl.seed
  std::uint64_t scheduler_seed = 0;
  int chunk_chars = codec::kDefaultChunkChars;
  bool shared_counter = false;
  EconomyConfig economy;

  static ExperimentConfig from_json_string(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
  // Normalized form: every field explicit, so two configs that parse equal
  // serialize identically.
  std::string to_json_string() const;

  void validate() const;

  // ceil(F * K) with the same representation slack the sampler uses.
  int corrupt_count() const;
  std::uint64_t effective_scheduler_seed() const;
  // "agent0".."agent9", zero-padded to the width of K-1. The first
  // corrupt_count() ids are the adversaries.
  std::vector<std::string> agent_ids() const;
};

}  // namespace fedledger::cli
