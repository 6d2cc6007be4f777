#include "fedledger/detect/detect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fedledger/error.hpp"
#include "fedledger/util/rng.hpp"

namespace fedledger::detect {

namespace {

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.9g", value);
  return buffer;
}

void validate_rounds(const std::vector<fl::RoundRecord>& rounds,
                     Eigen::Index dim) {
  const Eigen::VectorXf* previous_after = nullptr;
  for (const auto& round : rounds) {
    const std::string where = "round " + std::to_string(round.round_index);
    if (round.global_before.size() != dim || round.increment.size() != dim ||
        round.global_after.size() != dim) {
      throw IntegrityError("detect: " + where +
                           " parameter dimension mismatch");
    }
    const Eigen::VectorXf reconstructed = round.global_before + round.increment;
    if ((round.global_after.array() != reconstructed.array()).any()) {
      throw IntegrityError("detect: " + where +
                           " global_after does not equal global_before plus "
                           "the aggregated increment");
    }
    if (previous_after != nullptr &&
        (round.global_before.array() != previous_after->array()).any()) {
      throw IntegrityError("detect: " + where +
                           " global_before does not chain from the previous "
                           "round");
    }
    for (const auto& agent_id : round.selected) {
      const auto it = round.updates.find(agent_id);
      if (it == round.updates.end()) {
        throw IntegrityError("detect: " + where + " is missing the update of " +
                             agent_id);
      }
      if (it->second.size() != dim) {
        throw IntegrityError("detect: " + where + " update of " + agent_id +
                             " has wrong dimension");
      }
    }
    previous_after = &round.global_after;
  }
}

}  // namespace

std::vector<Eigen::Index> top_k_indices(const Eigen::VectorXd& values,
                                        int kappa) {
  if (kappa < 1 || static_cast<Eigen::Index>(kappa) > values.size()) {
    throw PreconditionError("top_k_indices: kappa out of range");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  // Value-descending; equal values resolve toward the lower index.
  std::partial_sort(order.begin(), order.begin() + kappa, order.end(),
                    [&values](Eigen::Index a, Eigen::Index b) {
                      if (values[a] != values[b]) return values[a] > values[b];
                      return a < b;
                    });
  order.resize(static_cast<std::size_t>(kappa));
  return order;
}

double restricted_l2(const Eigen::VectorXf& delta,
                     const std::vector<Eigen::Index>& coords) {
  double sum_sq = 0.0;
  for (const Eigen::Index i : coords) {
    if (i < 0 || i >= delta.size()) {
      throw PreconditionError("restricted_l2: coordinate out of range");
    }
    const double v = static_cast<double>(delta[i]);
    sum_sq += v * v;
  }
  return std::sqrt(sum_sq);
}

DetectionReport detect(const std::vector<fl::RoundRecord>& rounds,
                       const nn::ModelConfig& arch,
                       const nn::LabeledDataset& poisoned_val, int kappa,
                       int assumed_adversaries) {
  arch.validate();
  poisoned_val.validate();
  if (poisoned_val.size() == 0) {
    throw PreconditionError("detect: poisoned validation set is empty");
  }
  if (poisoned_val.inputs.cols() != arch.input_dim()) {
    throw ShapeError("detect: validation input width does not match the model");
  }
  if (kappa < 1 || static_cast<Eigen::Index>(kappa) > arch.param_dim()) {
    throw PreconditionError("detect: kappa must be in [1, param_dim]");
  }
  if (assumed_adversaries < 0) {
    throw PreconditionError("detect: assumed adversary count is negative");
  }
  validate_rounds(rounds, arch.param_dim());

  DetectionReport report;
  report.kappa = kappa;
  report.assumed_adversaries = assumed_adversaries;

  std::set<std::string> roster;
  std::map<std::string, double> sum_l2;
  std::map<std::string, int> appearances;

  double previous_loss = 0.0;
  bool have_previous = false;
  for (const auto& round : rounds) {
    roster.insert(round.selected.begin(), round.selected.end());
    const nn::Model model{arch, round.global_after};
    const double loss = nn::eval_loss(model, poisoned_val);
    report.backdoor_losses.push_back(loss);
    // First evaluated round has no baseline and never qualifies.
    const bool qualifies = have_previous && loss < previous_loss;
    previous_loss = loss;
    have_previous = true;
    if (!qualifies) continue;

    report.qualifying_rounds.push_back(round.round_index);
    const Eigen::VectorXd fisher_diag = nn::per_sample_sq_grad(model, poisoned_val);
    const auto coords = top_k_indices(fisher_diag, kappa);
    std::map<std::string, double> round_l2;
    for (const auto& agent_id : round.selected) {
      const double value = restricted_l2(round.updates.at(agent_id), coords);
      round_l2[agent_id] = value;
      sum_l2[agent_id] += value;
      appearances[agent_id] += 1;
    }
    report.per_round_l2.push_back(std::move(round_l2));
  }

  if (report.qualifying_rounds.empty()) {
    report.no_signal = true;
    return report;
  }

  for (const auto& agent_id : roster) {
    AgentScore score;
    score.agent_id = agent_id;
    const auto it = appearances.find(agent_id);
    if (it != appearances.end()) {
      score.qualifying_appearances = it->second;
      score.avg_l2 = sum_l2.at(agent_id) / it->second;
    } else {
      score.insufficient_signal = true;
    }
    report.ranking.push_back(score);
  }
  // A measured zero outranks a missing measurement; ids break exact ties.
  std::sort(report.ranking.begin(), report.ranking.end(),
            [](const AgentScore& a, const AgentScore& b) {
              if (a.avg_l2 != b.avg_l2) return a.avg_l2 > b.avg_l2;
              if (a.insufficient_signal != b.insufficient_signal) {
                return !a.insufficient_signal;
              }
              return a.agent_id < b.agent_id;
            });
  const auto flag_count = std::min<std::size_t>(
      static_cast<std::size_t>(assumed_adversaries), report.ranking.size());
  for (std::size_t i = 0; i < flag_count; ++i) {
    report.flagged.push_back(report.ranking[i].agent_id);
  }
  return report;
}

std::string DetectionReport::to_text() const {
  std::ostringstream out;
  out << "backdoor-forensics kappa=" << kappa
      << " assumed_adversaries=" << assumed_adversaries
      << " qualifying_rounds=" << qualifying_rounds.size() << "\n";
  if (no_signal) {
    out << "no-signal: backdoor loss never decreased\n";
    return out.str();
  }
  int rank = 1;
  for (const auto& score : ranking) {
    out << rank << ". " << score.agent_id
        << " avg_restricted_l2=" << format_double(score.avg_l2)
        << " qualifying_appearances=" << score.qualifying_appearances;
    if (score.insufficient_signal) out << " insufficient-signal";
    const bool is_flagged =
        std::find(flagged.begin(), flagged.end(), score.agent_id) !=
        flagged.end();
    if (is_flagged) out << " FLAGGED";
    out << "\n";
    ++rank;
  }
  return out.str();
}

std::string DetectionReport::to_json() const {
  nlohmann::json doc;
  doc["kappa"] = kappa;
  doc["assumed_adversaries"] = assumed_adversaries;
  doc["backdoor_losses"] = backdoor_losses;
  doc["qualifying_rounds"] = qualifying_rounds;
  doc["per_round_l2"] = per_round_l2;
  doc["no_signal"] = no_signal;
  doc["flagged"] = flagged;
  doc["ranking"] = nlohmann::json::array();
  for (const auto& score : ranking) {
    doc["ranking"].push_back(
        {{"agent_id", score.agent_id},
         {"avg_l2", score.avg_l2},
         {"qualifying_appearances", score.qualifying_appearances},
         {"insufficient_signal", score.insufficient_signal}});
  }
  return doc.dump(2) + "\n";
}

DetectionReport DetectionReport::from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& error) {
    throw IntegrityError(std::string("detection report parse: ") +
                         error.what());
  }
  try {
    DetectionReport report;
    report.kappa = doc.at("kappa").get<int>();
    report.assumed_adversaries = doc.at("assumed_adversaries").get<int>();
    report.backdoor_losses =
        doc.at("backdoor_losses").get<std::vector<double>>();
    report.qualifying_rounds =
        doc.at("qualifying_rounds").get<std::vector<int>>();
    report.per_round_l2 =
        doc.at("per_round_l2")
            .get<std::vector<std::map<std::string, double>>>();
    report.no_signal = doc.at("no_signal").get<bool>();
    report.flagged = doc.at("flagged").get<std::vector<std::string>>();
    for (const auto& entry : doc.at("ranking")) {
      AgentScore score;
      score.agent_id = entry.at("agent_id").get<std::string>();
      score.avg_l2 = entry.at("avg_l2").get<double>();
      score.qualifying_appearances =
          entry.at("qualifying_appearances").get<int>();
      score.insufficient_signal = entry.at("insufficient_signal").get<bool>();
      report.ranking.push_back(score);
    }
    return report;
  } catch (const nlohmann::json::exception& error) {
    throw IntegrityError(std::string("detection report fields: ") +
                         error.what());
  }
}

std::vector<nn::LabeledDataset> iid_split(const nn::LabeledDataset& data,
                                          int parts, std::uint64_t seed) {
  if (parts < 1) throw PreconditionError("iid_split: parts must be positive");
  const int n = static_cast<int>(data.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix64(seed, hash_string("iid-split")));
  rng.shuffle(order);

  std::vector<nn::LabeledDataset> result;
  result.reserve(static_cast<std::size_t>(parts));
  const int base = n / parts;
  const int extra = n % parts;
  int cursor = 0;
  for (int part = 0; part < parts; ++part) {
    const int count = base + (part < extra ? 1 : 0);
    std::vector<int> indices(order.begin() + cursor,
                             order.begin() + cursor + count);
    cursor += count;
    std::sort(indices.begin(), indices.end());
    result.push_back(data.subset(indices));
  }
  return result;
}

std::vector<nn::LabeledDataset> dirichlet_split(const nn::LabeledDataset& data,
                                                int parts,
                                                double concentration,
                                                std::uint64_t seed) {
  if (parts < 1) {
    throw PreconditionError("dirichlet_split: parts must be positive");
  }
  if (!(concentration > 0.0)) {
    throw PreconditionError("dirichlet_split: concentration must be positive");
  }
  std::map<int, std::vector<int>> by_class;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    by_class[data.labels[static_cast<std::size_t>(i)]].push_back(
        static_cast<int>(i));
  }

  Rng rng(mix64(seed, hash_string("dirichlet-split")));
  std::vector<std::vector<int>> assigned(static_cast<std::size_t>(parts));
  for (auto& [label, indices] : by_class) {
    std::vector<double> weights(static_cast<std::size_t>(parts));
    double total = 0.0;
    for (auto& w : weights) {
      w = rng.next_gamma(concentration);
      total += w;
    }
    const int n_class = static_cast<int>(indices.size());
    std::vector<int> counts(static_cast<std::size_t>(parts), 0);
    if (total <= 0.0) {
      // Degenerate underflow: fall back to an even deal.
      for (int i = 0; i < n_class; ++i) counts[static_cast<std::size_t>(i % parts)] += 1;
    } else {
      // Largest-remainder rounding of proportional targets.
      std::vector<std::pair<double, int>> remainders;
      int assigned_count = 0;
      for (int part = 0; part < parts; ++part) {
        const double target =
            weights[static_cast<std::size_t>(part)] / total * n_class;
        const int floor_count = static_cast<int>(std::floor(target));
        counts[static_cast<std::size_t>(part)] = floor_count;
        assigned_count += floor_count;
        remainders.emplace_back(target - floor_count, part);
      }
      std::sort(remainders.begin(), remainders.end(),
                [](const auto& a, const auto& b) {
                  if (a.first != b.first) return a.first > b.first;
                  return a.second < b.second;
                });
      for (int i = 0; i < n_class - assigned_count; ++i) {
        counts[static_cast<std::size_t>(
            remainders[static_cast<std::size_t>(i)].second)] += 1;
      }
    }
    rng.shuffle(indices);
    int cursor = 0;
    for (int part = 0; part < parts; ++part) {
      const int count = counts[static_cast<std::size_t>(part)];
      auto& sink = assigned[static_cast<std::size_t>(part)];
      sink.insert(sink.end(), indices.begin() + cursor,
                  indices.begin() + cursor + count);
      cursor += count;
    }
  }

  std::vector<nn::LabeledDataset> result;
  result.reserve(static_cast<std::size_t>(parts));
  for (auto& indices : assigned) {
    std::sort(indices.begin(), indices.end());
    result.push_back(data.subset(indices));
  }
  return result;
}

}  // namespace fedledger::detect
