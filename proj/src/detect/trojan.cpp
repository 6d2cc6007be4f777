#include "fedledger/detect/trojan.hpp"

#include <cmath>

#include "fedledger/error.hpp"

namespace fedledger::detect {

TrojanSpec TrojanSpec::plus_pattern(int base_class, int target_class) {
  TrojanSpec spec;
  spec.base_class = base_class;
  spec.target_class = target_class;
  spec.mask.assign(25, 0);
  for (int i = 0; i < 5; ++i) {
    spec.mask[static_cast<std::size_t>(2 * 5 + i)] = 1;  // middle row
    spec.mask[static_cast<std::size_t>(i * 5 + 2)] = 1;  // middle column
  }
  return spec;
}

void TrojanSpec::validate(int height, int width, int num_classes) const {
  if (pattern_rows < 1 || pattern_cols < 1) {
    throw PreconditionError("trojan: empty pattern");
  }
  if (mask.size() !=
      static_cast<std::size_t>(pattern_rows) * static_cast<std::size_t>(pattern_cols)) {
    throw PreconditionError("trojan: mask size != pattern dims");
  }
  if (anchor_row < 0 || anchor_col < 0 ||
      anchor_row + pattern_rows > height || anchor_col + pattern_cols > width) {
    throw PreconditionError("trojan: pattern does not fit at anchor");
  }
  if (base_class == target_class) {
    throw PreconditionError("trojan: base class == target class");
  }
  if (base_class < 0 || base_class >= num_classes || target_class < 0 ||
      target_class >= num_classes) {
    throw PreconditionError("trojan: class index out of range");
  }
}

namespace {

void stamp(Eigen::MatrixXf& inputs, Eigen::Index row, const TrojanSpec& spec,
           int width, int channels) {
  for (int r = 0; r < spec.pattern_rows; ++r) {
    for (int c = 0; c < spec.pattern_cols; ++c) {
      if (spec.mask[static_cast<std::size_t>(r * spec.pattern_cols + c)] == 0) {
        continue;
      }
      const Eigen::Index base =
          (static_cast<Eigen::Index>(spec.anchor_row + r) * width +
           (spec.anchor_col + c)) * channels;
      for (int ch = 0; ch < channels; ++ch) {
        inputs(row, base + ch) = spec.value;
      }
    }
  }
}

}  // namespace

nn::LabeledDataset poison_dataset(const nn::LabeledDataset& data,
                                  const TrojanSpec& spec, double fraction) {
  if (fraction <= 0.0 || fraction > 1.0) {
    throw PreconditionError("poison_dataset: fraction in (0,1]");
  }
  spec.validate(data.height, data.width, data.num_classes);
  Eigen::Index base_total = 0;
  for (int label : data.labels) {
    if (label == spec.base_class) ++base_total;
  }
  if (base_total == 0) {
    throw PreconditionError("poison_dataset: no base-class samples");
  }
  const auto quota = static_cast<Eigen::Index>(
      std::ceil(fraction * static_cast<double>(base_total)));

  nn::LabeledDataset out = data;
  Eigen::Index stamped = 0;
  for (Eigen::Index i = 0; i < out.size() && stamped < quota; ++i) {
    if (out.labels[static_cast<std::size_t>(i)] != spec.base_class) continue;
    stamp(out.inputs, i, spec, out.width, out.channels);
    out.labels[static_cast<std::size_t>(i)] = spec.target_class;
    ++stamped;
  }
  return out;
}

nn::LabeledDataset build_poisoned_validation(const nn::LabeledDataset& clean,
                                             const TrojanSpec& spec) {
  spec.validate(clean.height, clean.width, clean.num_classes);
  std::vector<int> base_rows;
  for (Eigen::Index i = 0; i < clean.size(); ++i) {
    if (clean.labels[static_cast<std::size_t>(i)] == spec.base_class) {
      base_rows.push_back(static_cast<int>(i));
    }
  }
  if (base_rows.empty()) {
    throw PreconditionError("poisoned validation: no base-class samples");
  }
  nn::LabeledDataset out = clean.subset(base_rows);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    stamp(out.inputs, i, spec, out.width, out.channels);
    out.labels[static_cast<std::size_t>(i)] = spec.target_class;
  }
  return out;
}

double backdoor_loss(const nn::Model& model,
                     const nn::LabeledDataset& poisoned_val) {
  return nn::eval_loss(model, poisoned_val);
}

double backdoor_accuracy(const nn::Model& model,
                         const nn::LabeledDataset& poisoned_val) {
  return nn::eval_accuracy(model, poisoned_val);
}

}  // namespace fedledger::detect
