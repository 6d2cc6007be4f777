#pragma once

#include <cstdint>
#include <vector>

#include "fedledger/nn/dataset.hpp"
#include "fedledger/nn/model.hpp"

namespace fedledger::detect {

// Pixel-pattern trojan: a small binary mask stamped at a fixed anchor onto
// base-class images, which are then relabeled as the target class. The
// default is a 5x5 plus shape at the top-left corner, stamped at full
// intensity.
struct TrojanSpec {
  int pattern_rows = 5;
  int pattern_cols = 5;
  std::vector<std::uint8_t> mask;  // row-major, pattern_rows * pattern_cols
  float value = 1.0f;
  int anchor_row = 0;
  int anchor_col = 0;
  int base_class = 0;
  int target_class = 0;

  static TrojanSpec plus_pattern(int base_class, int target_class);
  void validate(int height, int width, int num_classes) const;
};

// Stamps and relabels the first ceil(fraction * n_base) base-class samples
// in dataset order; every other sample is untouched.
nn::LabeledDataset poison_dataset(const nn::LabeledDataset& data,
                                  const TrojanSpec& spec, double fraction);

// Only the trojaned, relabeled base-class instances of a clean set: the
// validation data the verifier evaluates backdoor behaviour on.
nn::LabeledDataset build_poisoned_validation(const nn::LabeledDataset& clean,
                                             const TrojanSpec& spec);

// Mean cross-entropy of the model against the target labels.
double backdoor_loss(const nn::Model& model,
                     const nn::LabeledDataset& poisoned_val);
// Fraction of poisoned samples classified as the target class.
double backdoor_accuracy(const nn::Model& model,
                         const nn::LabeledDataset& poisoned_val);

}  // namespace fedledger::detect
