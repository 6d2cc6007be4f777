#include <doctest.h>

#include <Eigen/Core>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fedledger/detect/detect.hpp"
#include "fedledger/detect/trojan.hpp"
#include "fedledger/error.hpp"
#include "fedledger/fl/protocol.hpp"
#include "fedledger/nn/dataset.hpp"
#include "fedledger/nn/model.hpp"
#include "fedledger/util/rng.hpp"

using namespace fedledger;

namespace {

// Feature 1 encodes the original row index so split tests can recover the
// partition exactly; it is outside the default plus mask.
nn::LabeledDataset indexed_dataset(int n, int height, int width,
                                   int num_classes, std::uint64_t seed) {
  nn::LabeledDataset data;
  data.height = height;
  data.width = width;
  data.channels = 1;
  data.num_classes = num_classes;
  data.inputs.resize(n, height * width);
  data.labels.resize(static_cast<std::size_t>(n));
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    for (int f = 0; f < height * width; ++f) {
      data.inputs(i, f) = static_cast<float>(rng.next_uniform(0.1, 0.9));
    }
    data.inputs(i, 1) =
        static_cast<float>(i + 1) / static_cast<float>(n + 1);
    data.labels[static_cast<std::size_t>(i)] = i % num_classes;
  }
  data.validate();
  return data;
}

int recover_index(const nn::LabeledDataset& part, Eigen::Index row, int n) {
  return static_cast<int>(
             std::lround(static_cast<double>(part.inputs(row, 1)) * (n + 1))) -
         1;
}

std::vector<Eigen::Index> mask_coords(const detect::TrojanSpec& spec,
                                      int width) {
  std::vector<Eigen::Index> coords;
  for (int r = 0; r < spec.pattern_rows; ++r) {
    for (int c = 0; c < spec.pattern_cols; ++c) {
      if (spec.mask[static_cast<std::size_t>(r * spec.pattern_cols + c)]) {
        coords.push_back((spec.anchor_row + r) * width + spec.anchor_col + c);
      }
    }
  }
  return coords;
}

bool rows_equal(const nn::LabeledDataset& a, const nn::LabeledDataset& b,
                Eigen::Index row) {
  return (a.inputs.row(row).array() == b.inputs.row(row).array()).all();
}

}  // namespace

TEST_CASE("poisoning stamps the plus mask and relabels only base samples") {
  const detect::TrojanSpec spec = detect::TrojanSpec::plus_pattern(0, 7);
  const nn::LabeledDataset clean = indexed_dataset(12, 16, 16, 10, 51);
  // Labels cycle 0..9, so rows 0 and 10 carry the base class.
  std::vector<Eigen::Index> base_rows;
  for (Eigen::Index i = 0; i < clean.size(); ++i) {
    if (clean.labels[static_cast<std::size_t>(i)] == 0) base_rows.push_back(i);
  }
  REQUIRE(base_rows.size() == 2);

  SUBCASE("fraction 1.0 poisons every base sample") {
    const nn::LabeledDataset poisoned = detect::poison_dataset(clean, spec, 1.0);
    const auto coords = mask_coords(spec, 16);
    CHECK(coords.size() == 9);  // 5 + 5 minus the shared center
    for (Eigen::Index i = 0; i < clean.size(); ++i) {
      const bool is_base = clean.labels[static_cast<std::size_t>(i)] == 0;
      if (!is_base) {
        CHECK(rows_equal(clean, poisoned, i));
        CHECK(poisoned.labels[static_cast<std::size_t>(i)] ==
              clean.labels[static_cast<std::size_t>(i)]);
        continue;
      }
      CHECK(poisoned.labels[static_cast<std::size_t>(i)] == 7);
      for (Eigen::Index f = 0; f < poisoned.inputs.cols(); ++f) {
        const bool masked =
            std::find(coords.begin(), coords.end(), f) != coords.end();
        if (masked) {
          CHECK(poisoned.inputs(i, f) == 1.0f);
        } else {
          CHECK(poisoned.inputs(i, f) == clean.inputs(i, f));
        }
      }
    }
  }

  SUBCASE("a partial fraction takes the first base samples in order") {
    // ceil(0.5 * 2) = 1: only the first base row changes.
    const nn::LabeledDataset poisoned = detect::poison_dataset(clean, spec, 0.5);
    CHECK(poisoned.labels[static_cast<std::size_t>(base_rows[0])] == 7);
    CHECK(poisoned.labels[static_cast<std::size_t>(base_rows[1])] == 0);
    CHECK(rows_equal(clean, poisoned, base_rows[1]));
  }

  SUBCASE("preconditions") {
    CHECK_THROWS_AS(detect::poison_dataset(clean, spec, 0.0),
                    PreconditionError);
    CHECK_THROWS_AS(detect::poison_dataset(clean, spec, 1.5),
                    PreconditionError);
    detect::TrojanSpec self = spec;
    self.target_class = 0;
    CHECK_THROWS_AS(detect::poison_dataset(clean, self, 1.0),
                    PreconditionError);
    detect::TrojanSpec off_canvas = spec;
    off_canvas.anchor_row = 12;
    off_canvas.anchor_col = 12;
    CHECK_THROWS_AS(detect::poison_dataset(clean, off_canvas, 1.0),
                    PreconditionError);
    detect::TrojanSpec bad_mask = spec;
    bad_mask.mask.resize(24);
    CHECK_THROWS_AS(detect::poison_dataset(clean, bad_mask, 1.0),
                    PreconditionError);
    nn::LabeledDataset no_base = clean;
    for (auto& label : no_base.labels) label = std::max(label, 1);
    CHECK_THROWS_AS(detect::poison_dataset(no_base, spec, 1.0),
                    PreconditionError);
  }
}

TEST_CASE("poisoned validation equals full poisoning of the base subset") {
  const detect::TrojanSpec spec = detect::TrojanSpec::plus_pattern(0, 7);
  const nn::LabeledDataset clean = indexed_dataset(30, 16, 16, 10, 52);
  const nn::LabeledDataset poisoned_val =
      detect::build_poisoned_validation(clean, spec);

  std::vector<int> base_rows;
  for (Eigen::Index i = 0; i < clean.size(); ++i) {
    if (clean.labels[static_cast<std::size_t>(i)] == 0) {
      base_rows.push_back(static_cast<int>(i));
    }
  }
  REQUIRE(poisoned_val.size() == static_cast<Eigen::Index>(base_rows.size()));
  for (int label : poisoned_val.labels) CHECK(label == 7);

  const nn::LabeledDataset oracle =
      detect::poison_dataset(clean.subset(base_rows), spec, 1.0);
  CHECK((poisoned_val.inputs.array() == oracle.inputs.array()).all());
  CHECK(poisoned_val.labels == oracle.labels);
}

TEST_CASE("backdoor loss and accuracy oracles") {
  const detect::TrojanSpec spec = detect::TrojanSpec::plus_pattern(0, 7);
  const nn::LabeledDataset clean = indexed_dataset(40, 16, 16, 10, 53);
  const nn::LabeledDataset poisoned_val =
      detect::build_poisoned_validation(clean, spec);

  // All-zero parameters give uniform class probabilities.
  nn::ModelConfig config;  // default 16x16 conv shape
  nn::Model uniform{config, Eigen::VectorXf::Zero(config.param_dim())};
  CHECK(detect::backdoor_loss(uniform, poisoned_val) ==
        doctest::Approx(std::log(10.0)).epsilon(1e-12));
  CHECK(detect::backdoor_loss(uniform, poisoned_val) ==
        nn::eval_loss(uniform, poisoned_val));

  // A dense-only model with one huge target-class bias always predicts it.
  nn::ModelConfig dense;
  dense.conv_filters = 0;
  dense.hidden_units = 0;
  nn::Model always{dense, Eigen::VectorXf::Zero(dense.param_dim())};
  always.params(static_cast<Eigen::Index>(dense.num_classes) *
                    dense.feature_dim() + spec.target_class) = 40.0f;
  CHECK(detect::backdoor_accuracy(always, poisoned_val) == 1.0);
  CHECK(detect::backdoor_loss(always, poisoned_val) < 1e-10);
}

TEST_CASE("top-k selection and restricted norms") {
  Eigen::VectorXd values(4);
  values << 3.0, 1.0, 3.0, 2.0;
  CHECK(detect::top_k_indices(values, 2) ==
        std::vector<Eigen::Index>{0, 2});  // tie resolves to the lower index
  CHECK(detect::top_k_indices(values, 4) ==
        std::vector<Eigen::Index>{0, 2, 3, 1});
  CHECK_THROWS_AS(detect::top_k_indices(values, 0), PreconditionError);
  CHECK_THROWS_AS(detect::top_k_indices(values, 5), PreconditionError);

  Eigen::VectorXf delta(4);
  delta << 3.0f, 4.0f, 0.0f, 5.0f;
  CHECK(detect::restricted_l2(delta, {0, 1}) == 5.0);
  CHECK_THROWS_AS(detect::restricted_l2(delta, {4}), PreconditionError);
  CHECK_THROWS_AS(detect::restricted_l2(delta, {-1}), PreconditionError);

  // Restriction never exceeds the full norm; equality iff the support is
  // inside the restriction set.
  Rng rng(54);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXf v(8);
    double full_sq = 0.0;
    for (int i = 0; i < 8; ++i) {
      v(i) = static_cast<float>(rng.next_uniform(-2.0, 2.0));
      full_sq += static_cast<double>(v(i)) * static_cast<double>(v(i));
    }
    std::vector<Eigen::Index> coords;
    for (Eigen::Index i = 0; i < 8; ++i) {
      if (rng.next_unit() < 0.5) coords.push_back(i);
    }
    CHECK(detect::restricted_l2(v, coords) <= std::sqrt(full_sq) + 1e-12);
  }
  Eigen::VectorXf sparse = Eigen::VectorXf::Zero(6);
  sparse(1) = 2.5f;
  sparse(3) = -1.5f;
  CHECK(detect::restricted_l2(sparse, {1, 3}) ==
        detect::restricted_l2(sparse, {0, 1, 2, 3, 4, 5}));
}

namespace {

// Trajectory whose backdoor loss strictly decreases when target_bias_step is
// positive: parameters are zero except the class-1 bias, which grows by one
// per round. Dense-only 4x4 two-class shape, param_dim 34, bias(1) at 33.
struct SyntheticRun {
  nn::ModelConfig config;
  nn::LabeledDataset poisoned_val;
  std::vector<fl::RoundRecord> rounds;

  explicit SyntheticRun(float bias_step, int round_count = 4) {
    config.height = 4;
    config.width = 4;
    config.conv_filters = 0;
    config.hidden_units = 0;
    config.num_classes = 2;

    poisoned_val.height = 4;
    poisoned_val.width = 4;
    poisoned_val.channels = 1;
    poisoned_val.num_classes = 2;
    poisoned_val.inputs = Eigen::MatrixXf::Constant(3, 16, 0.5f);
    poisoned_val.inputs(1, 0) = 0.25f;
    poisoned_val.inputs(2, 5) = 0.75f;
    poisoned_val.labels = {1, 1, 1};

    const Eigen::Index dim = config.param_dim();
    const Eigen::Index bias1 = dim - 1;
    for (int t = 0; t < round_count; ++t) {
      fl::RoundRecord round;
      round.round_index = t;
      round.selected = t == 0
                           ? std::vector<std::string>{"adv", "honest", "never"}
                           : std::vector<std::string>{"adv", "honest", "zero"};
      round.updates["adv"] = Eigen::VectorXf::Constant(dim, 0.5f);
      round.updates["honest"] = Eigen::VectorXf::Constant(dim, 0.01f);
      round.updates[t == 0 ? "never" : "zero"] =
          t == 0 ? Eigen::VectorXf::Constant(dim, 0.3f)
                 : Eigen::VectorXf::Zero(dim);
      round.global_before = Eigen::VectorXf::Zero(dim);
      round.global_before(bias1) = bias_step * static_cast<float>(t);
      round.increment = Eigen::VectorXf::Zero(dim);
      round.increment(bias1) = bias_step;
      round.global_after = round.global_before + round.increment;
      rounds.push_back(std::move(round));
    }
  }
};

}  // namespace

TEST_CASE("detection ranks the heavy mover first and flags it") {
  const SyntheticRun run(1.0f);
  const detect::DetectionReport report =
      detect::detect(run.rounds, run.config, run.poisoned_val, 5, 1);

  CHECK_FALSE(report.no_signal);
  CHECK(report.kappa == 5);
  CHECK(report.backdoor_losses.size() == 4);
  for (std::size_t i = 1; i < report.backdoor_losses.size(); ++i) {
    CHECK(report.backdoor_losses[i] < report.backdoor_losses[i - 1]);
  }
  // The first evaluated round has no baseline, so rounds 1..3 qualify.
  CHECK(report.qualifying_rounds == std::vector<int>{1, 2, 3});
  REQUIRE(report.per_round_l2.size() == 3);

  REQUIRE(report.ranking.size() == 4);
  CHECK(report.ranking[0].agent_id == "adv");
  CHECK(report.ranking[0].avg_l2 ==
        doctest::Approx(0.5 * std::sqrt(5.0)).epsilon(1e-12));
  CHECK(report.ranking[0].qualifying_appearances == 3);
  CHECK(report.ranking[1].agent_id == "honest");
  CHECK(report.ranking[1].avg_l2 ==
        doctest::Approx(static_cast<double>(0.01f) * std::sqrt(5.0))
            .epsilon(1e-12));
  // A measured zero outranks a missing measurement.
  CHECK(report.ranking[2].agent_id == "zero");
  CHECK(report.ranking[2].avg_l2 == 0.0);
  CHECK_FALSE(report.ranking[2].insufficient_signal);
  CHECK(report.ranking[3].agent_id == "never");
  CHECK(report.ranking[3].insufficient_signal);
  CHECK(report.ranking[3].qualifying_appearances == 0);

  CHECK(report.flagged == std::vector<std::string>{"adv"});
  for (const auto& per_round : report.per_round_l2) {
    CHECK(per_round.size() == 3);
    CHECK(per_round.count("adv") == 1);
  }

  // m == 0 flags nobody; an oversized m flags the whole ranking.
  CHECK(detect::detect(run.rounds, run.config, run.poisoned_val, 5, 0)
            .flagged.empty());
  CHECK(detect::detect(run.rounds, run.config, run.poisoned_val, 5, 10)
            .flagged.size() == 4);

  // kappa == param_dim restricts to everything: ranking order is unchanged.
  const auto full = detect::detect(run.rounds, run.config, run.poisoned_val,
                                   static_cast<int>(run.config.param_dim()), 1);
  CHECK(full.ranking[0].agent_id == "adv");
  CHECK(full.ranking[0].avg_l2 ==
        doctest::Approx(0.5 * std::sqrt(34.0)).epsilon(1e-12));

  // Determinism: identical inputs give identical reports.
  const auto again =
      detect::detect(run.rounds, run.config, run.poisoned_val, 5, 1);
  CHECK(again.to_json() == report.to_json());

  const std::string text = report.to_text();
  CHECK(text.find("backdoor-forensics kappa=5") == 0);
  CHECK(text.find("1. adv") != std::string::npos);
  CHECK(text.find("FLAGGED") != std::string::npos);
  CHECK(text.find("4. never") != std::string::npos);
  CHECK(text.find("insufficient-signal") != std::string::npos);
}

TEST_CASE("no signal when the backdoor loss never decreases") {
  // Bias moves toward class 0 while every poisoned label is 1.
  const SyntheticRun run(-1.0f);
  const detect::DetectionReport report =
      detect::detect(run.rounds, run.config, run.poisoned_val, 5, 1);
  CHECK(report.no_signal);
  CHECK(report.qualifying_rounds.empty());
  CHECK(report.ranking.empty());
  CHECK(report.flagged.empty());
  CHECK(report.backdoor_losses.size() == 4);
  CHECK(report.to_text().find("no-signal") != std::string::npos);

  // No rounds at all is also a no-signal outcome.
  CHECK(detect::detect({}, run.config, run.poisoned_val, 5, 1).no_signal);
}

TEST_CASE("inconsistent round records are integrity errors") {
  const SyntheticRun base(1.0f);
  const auto run_detect = [&](const std::vector<fl::RoundRecord>& rounds) {
    return detect::detect(rounds, base.config, base.poisoned_val, 5, 1);
  };

  auto broken_after = base.rounds;
  broken_after[1].global_after(0) += 1.0f;
  CHECK_THROWS_AS(run_detect(broken_after), IntegrityError);

  auto broken_chain = base.rounds;
  broken_chain[2].global_before(3) += 1.0f;
  CHECK_THROWS_AS(run_detect(broken_chain), IntegrityError);

  auto missing_update = base.rounds;
  missing_update[1].updates.erase("adv");
  CHECK_THROWS_AS(run_detect(missing_update), IntegrityError);

  auto short_update = base.rounds;
  short_update[1].updates["adv"] = Eigen::VectorXf::Zero(3);
  CHECK_THROWS_AS(run_detect(short_update), IntegrityError);

  CHECK_THROWS_AS(
      detect::detect(base.rounds, base.config, base.poisoned_val, 0, 1),
      PreconditionError);
  CHECK_THROWS_AS(
      detect::detect(base.rounds, base.config, base.poisoned_val, 35, 1),
      PreconditionError);
  CHECK_THROWS_AS(
      detect::detect(base.rounds, base.config, base.poisoned_val, 5, -1),
      PreconditionError);
  nn::LabeledDataset empty_val = base.poisoned_val;
  empty_val.inputs.resize(0, 16);
  empty_val.labels.clear();
  CHECK_THROWS_AS(detect::detect(base.rounds, base.config, empty_val, 5, 1),
                  PreconditionError);
}

TEST_CASE("detection report serialization round-trips") {
  const SyntheticRun run(1.0f);
  const detect::DetectionReport report =
      detect::detect(run.rounds, run.config, run.poisoned_val, 5, 2);

  const std::string json = report.to_json();
  const detect::DetectionReport revived = detect::DetectionReport::from_json(json);
  CHECK(revived.to_json() == json);
  CHECK(revived.kappa == report.kappa);
  CHECK(revived.assumed_adversaries == 2);
  CHECK(revived.backdoor_losses == report.backdoor_losses);
  CHECK(revived.qualifying_rounds == report.qualifying_rounds);
  CHECK(revived.per_round_l2 == report.per_round_l2);
  CHECK(revived.flagged == report.flagged);
  CHECK(revived.no_signal == report.no_signal);
  REQUIRE(revived.ranking.size() == report.ranking.size());
  for (std::size_t i = 0; i < report.ranking.size(); ++i) {
    CHECK(revived.ranking[i].agent_id == report.ranking[i].agent_id);
    CHECK(revived.ranking[i].avg_l2 == report.ranking[i].avg_l2);
    CHECK(revived.ranking[i].qualifying_appearances ==
          report.ranking[i].qualifying_appearances);
    CHECK(revived.ranking[i].insufficient_signal ==
          report.ranking[i].insufficient_signal);
  }
  CHECK(revived.to_text() == report.to_text());

  CHECK_THROWS_AS(detect::DetectionReport::from_json("not json"),
                  IntegrityError);
  CHECK_THROWS_AS(detect::DetectionReport::from_json("{}"), IntegrityError);
}

TEST_CASE("iid split: near-equal sorted parts that cover the input") {
  const int n = 103;
  const nn::LabeledDataset data = indexed_dataset(n, 4, 4, 3, 55);
  const auto parts = detect::iid_split(data, 4, 9);
  REQUIRE(parts.size() == 4);
  // 103 = 26 + 26 + 26 + 25: the remainder goes to the first parts.
  CHECK(parts[0].size() == 26);
  CHECK(parts[1].size() == 26);
  CHECK(parts[2].size() == 26);
  CHECK(parts[3].size() == 25);

  std::set<int> seen;
  for (const auto& part : parts) {
    int previous = -1;
    for (Eigen::Index row = 0; row < part.size(); ++row) {
      const int original = recover_index(part, row, n);
      CHECK(original > previous);  // indices stay sorted inside a part
      previous = original;
      CHECK(seen.insert(original).second);  // disjoint
      CHECK(part.labels[static_cast<std::size_t>(row)] ==
            data.labels[static_cast<std::size_t>(original)]);
    }
  }
  CHECK(seen.size() == static_cast<std::size_t>(n));  // full cover

  // Deterministic per seed; a different seed deals differently.
  const auto same = detect::iid_split(data, 4, 9);
  CHECK((same[0].inputs.array() == parts[0].inputs.array()).all());
  const auto other = detect::iid_split(data, 4, 10);
  CHECK_FALSE((other[0].inputs.array() == parts[0].inputs.array()).all());

  CHECK_THROWS_AS(detect::iid_split(data, 0, 9), PreconditionError);
}

TEST_CASE("dirichlet split: per-class partition driven by gamma draws") {
  const int n = 120;  // three classes, 40 samples each
  const nn::LabeledDataset data = indexed_dataset(n, 4, 4, 3, 56);
  const auto parts = detect::dirichlet_split(data, 4, 0.5, 7);
  REQUIRE(parts.size() == 4);

  std::set<int> seen;
  std::map<int, int> class_totals;
  for (const auto& part : parts) {
    for (Eigen::Index row = 0; row < part.size(); ++row) {
      const int original = recover_index(part, row, n);
      CHECK(seen.insert(original).second);
      CHECK(part.labels[static_cast<std::size_t>(row)] ==
            data.labels[static_cast<std::size_t>(original)]);
      class_totals[part.labels[static_cast<std::size_t>(row)]] += 1;
    }
  }
  CHECK(seen.size() == static_cast<std::size_t>(n));
  CHECK(class_totals == std::map<int, int>{{0, 40}, {1, 40}, {2, 40}});

  // Same seed, same partition.
  const auto same = detect::dirichlet_split(data, 4, 0.5, 7);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    CHECK(same[p].size() == parts[p].size());
    CHECK((same[p].inputs.array() == parts[p].inputs.array()).all());
  }

  // Huge concentration approaches an even per-class deal (10 per class).
  const auto even = detect::dirichlet_split(data, 4, 1e9, 7);
  for (const auto& part : even) {
    std::map<int, int> per_class;
    for (int label : part.labels) per_class[label] += 1;
    for (const auto& [label, count] : per_class) {
      CHECK(count >= 8);
      CHECK(count <= 12);
    }
  }

  // A single part is the identity partition.
  const auto whole = detect::dirichlet_split(data, 1, 0.5, 7);
  REQUIRE(whole.size() == 1);
  CHECK((whole[0].inputs.array() == data.inputs.array()).all());
  CHECK(whole[0].labels == data.labels);

  CHECK_THROWS_AS(detect::dirichlet_split(data, 0, 0.5, 7), PreconditionError);
  CHECK_THROWS_AS(detect::dirichlet_split(data, 4, 0.0, 7), PreconditionError);
}
