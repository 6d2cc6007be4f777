#include "fedledger/chain/scheduler.hpp"

#include <numeric>

#include "fedledger/error.hpp"

namespace fedledger::chain {

Scheduler::Scheduler(std::uint64_t seed, SchedulerConfig config)
    : config_(config), rng_(seed) {
  if (config_.max_group < 1) {
    throw PreconditionError("scheduler: max_group must be >= 1");
  }
  if (config_.conflict_rate < 0.0 || config_.conflict_rate >= 1.0) {
    throw PreconditionError("scheduler: conflict_rate must be in [0,1)");
  }
}

int Scheduler::next_group_size() {
  if (config_.max_group == 1) return 1;
  return 1 + static_cast<int>(rng_.next_below(
                 static_cast<std::uint64_t>(config_.max_group)));
}

bool Scheduler::inject_conflict() {
  if (config_.conflict_rate == 0.0) return false;
  return rng_.next_unit() < config_.conflict_rate;
}

std::vector<std::size_t> Scheduler::job_order(std::size_t count) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config_.shuffle_jobs) rng_.shuffle(order);
  return order;
}

}  // namespace fedledger::chain
