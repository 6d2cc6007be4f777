#include "fedledger/fl/aggregate.hpp"

#include "fedledger/error.hpp"

namespace fedledger::fl {

std::string to_string(AggregatorKind kind) {
  return kind == AggregatorKind::kFedAvg ? "fedavg" : "signsgd";
}

AggregatorKind aggregator_from_string(const std::string& name) {
  if (name == "fedavg") return AggregatorKind::kFedAvg;
  if (name == "signsgd") return AggregatorKind::kSignAgg;
  throw Error("unknown aggregator: " + name);
}

namespace {

Eigen::Index common_dim(const std::map<std::string, Eigen::VectorXf>& updates) {
  if (updates.empty()) throw PreconditionError("aggregate: no updates");
  const Eigen::Index dim = updates.begin()->second.size();
  for (const auto& [id, delta] : updates) {
    if (delta.size() != dim) {
      throw ShapeError("aggregate: update dim mismatch for agent " + id);
    }
  }
  return dim;
}

}  // namespace

Eigen::VectorXf fed_avg_increment(
    const std::map<std::string, Eigen::VectorXf>& updates,
    const std::map<std::string, std::int64_t>& weights, float eta) {
  const Eigen::Index dim = common_dim(updates);
  if (weights.size() != updates.size()) {
    throw PreconditionError("fed_avg: weights must cover exactly the updates");
  }
  Eigen::VectorXd accum = Eigen::VectorXd::Zero(dim);
  double total_weight = 0.0;
  for (const auto& [id, delta] : updates) {
    const auto it = weights.find(id);
    if (it == weights.end()) {
      throw PreconditionError("fed_avg: missing weight for agent " + id);
    }
    if (it->second <= 0) {
      throw PreconditionError("fed_avg: weight must be positive for " + id);
    }
    const double w = static_cast<double>(it->second);
    accum += w * delta.cast<double>();
    total_weight += w;
  }
  return (static_cast<double>(eta) * accum / total_weight).cast<float>();
}

Eigen::VectorXf sign_agg_increment(
    const std::map<std::string, Eigen::VectorXf>& updates, float eta) {
  const Eigen::Index dim = common_dim(updates);
  Eigen::VectorXi votes = Eigen::VectorXi::Zero(dim);
  for (const auto& [id, delta] : updates) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      votes[i] += delta[i] >= 0.0f ? 1 : -1;
    }
  }
  Eigen::VectorXf out(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    out[i] = votes[i] >= 0 ? eta : -eta;
  }
  return out;
}

}  // namespace fedledger::fl
