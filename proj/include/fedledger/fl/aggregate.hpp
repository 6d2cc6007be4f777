#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>

namespace fedledger::fl {

enum class AggregatorKind { kFedAvg, kSignAgg };

// Wire names: "fedavg" and "signsgd".
std::string to_string(AggregatorKind kind);
AggregatorKind aggregator_from_string(const std::string& name);

// Weighted-average increment: eta * (sum_k n_k * delta_k) / (sum_k n_k).
// Accumulates in double regardless of the float32 inputs; the caller adds
// the result to the current global parameters. Weight keys must equal
// update keys and every weight must be positive.
Eigen::VectorXf fed_avg_increment(
    const std::map<std::string, Eigen::VectorXf>& updates,
    const std::map<std::string, std::int64_t>& weights, float eta);

// Majority-vote increment: eta * sign(sum_k sign(delta_k)) element-wise.
// Both sign levels break zero upward (sign(0) = +1), which is the only
// choice representable in the two-symbol wire alphabet, so every output
// entry is exactly -eta or +eta.
Eigen::VectorXf sign_agg_increment(
    const std::map<std::string, Eigen::VectorXf>& updates, float eta);

}  // namespace fedledger::fl
