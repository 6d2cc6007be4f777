#pragma once

#include <Eigen/Core>
#include <vector>

namespace fedledger::nn {

// Labeled image set. Each row of inputs is one flattened H*W*C image in
// row-major pixel order, values in [0,1].
struct LabeledDataset {
  Eigen::MatrixXf inputs;
  std::vector<int> labels;
  int height = 0;
  int width = 0;
  int channels = 1;
  int num_classes = 0;

  Eigen::Index size() const { return inputs.rows(); }
  bool empty() const { return inputs.rows() == 0; }

  // Throws fedledger::Error subclasses if the invariants do not hold:
  // inputs/labels length match, pixels in [0,1], labels in range.
  void validate() const;

  // Subset by row indices, in the given order.
  LabeledDataset subset(const std::vector<int>& indices) const;

  // Row-wise concatenation; shapes must agree.
  static LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b);
};

}  // namespace fedledger::nn
