#pragma once

#include <cstdint>
#include <vector>

#include "fedledger/util/rng.hpp"

namespace fedledger::chain {

// Deterministic stand-in for transaction-submission timing. The scheduler
// decides, from a seed alone, how uploads interleave (how many share one
// snapshot) and which submissions are discarded as synthetic conflicts, so
// every contention scenario is replayable.
struct SchedulerConfig {
  double conflict_rate = 0.0;  // chance a submission fails as mvcc-conflict
  int max_group = 4;           // max transactions simulated on one snapshot
  bool shuffle_jobs = true;    // randomize per-worker submission order
};

class Scheduler {
 public:
  explicit Scheduler(std::uint64_t seed, SchedulerConfig config = {});

  // Number of transactions to simulate against the next shared snapshot.
  int next_group_size();
  // One seeded fault-injection decision.
  bool inject_conflict();
  // Seeded permutation of 0..count-1 (identity when shuffling is off).
  std::vector<std::size_t> job_order(std::size_t count);

  const SchedulerConfig& config() const { return config_; }

 private:
  SchedulerConfig config_;
  Rng rng_;
};

}  // namespace fedledger::chain
