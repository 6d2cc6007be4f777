#include "fedledger/nn/dataset.hpp"

#include "fedledger/error.hpp"

namespace fedledger::nn {

void LabeledDataset::validate() const {
  if (inputs.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw ShapeError("dataset: inputs and labels length differ");
  }
  if (inputs.cols() != static_cast<Eigen::Index>(height) * width * channels) {
    throw ShapeError("dataset: input width does not match image dims");
  }
  if ((inputs.array() < 0.0f).any() || (inputs.array() > 1.0f).any()) {
    throw PreconditionError("dataset: pixel value outside [0,1]");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw PreconditionError("dataset: label out of range");
    }
  }
}

LabeledDataset LabeledDataset::subset(const std::vector<int>& indices) const {
  LabeledDataset out;
  out.height = height;
  out.width = width;
  out.channels = channels;
  out.num_classes = num_classes;
  out.inputs.resize(static_cast<Eigen::Index>(indices.size()), inputs.cols());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(indices[i]);
    out.labels.push_back(labels[indices[i]]);
  }
  return out;
}

LabeledDataset LabeledDataset::concat(const LabeledDataset& a,
                                      const LabeledDataset& b) {
  if (a.inputs.cols() != b.inputs.cols() || a.num_classes != b.num_classes) {
    throw ShapeError("dataset concat: shape mismatch");
  }
  LabeledDataset out = a;
  out.inputs.conservativeResize(a.inputs.rows() + b.inputs.rows(),
                                a.inputs.cols());
  out.inputs.bottomRows(b.inputs.rows()) = b.inputs;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

}  // namespace fedledger::nn
