#include "fedledger/nn/synthetic.hpp"

#include <algorithm>
#include <utility>
#include <vector>

#include "fedledger/error.hpp"
#include "fedledger/util/rng.hpp"

namespace fedledger::nn {

namespace {

constexpr int kSide = 16;

using Pixels = std::vector<std::pair<int, int>>;  // (row, col)

void hbar(Pixels& px, int r0, int r1, int c0, int c1) {
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) px.emplace_back(r, c);
}

Pixels class_template(int label) {
  Pixels px;
  switch (label) {
    case 0:  // horizontal bar
      hbar(px, 7, 8, 2, 13);
      break;
    case 1:  // vertical bar
      hbar(px, 2, 13, 7, 8);
      break;
    case 2:  // cross
      hbar(px, 7, 8, 2, 13);
      hbar(px, 2, 13, 7, 8);
      break;
    case 3:  // square outline
      hbar(px, 5, 5, 5, 12);
      hbar(px, 12, 12, 5, 12);
      hbar(px, 6, 11, 5, 5);
      hbar(px, 6, 11, 12, 12);
      break;
    case 4:  // filled square
      hbar(px, 6, 10, 6, 10);
      break;
    case 5:  // main diagonal, two pixels wide
      for (int i = 5; i < kSide; ++i) {
        px.emplace_back(i, i);
        px.emplace_back(i, i - 1);
      }
      break;
    case 6:  // anti-diagonal, two pixels wide
      for (int i = 0; i < kSide; ++i) px.emplace_back(i, kSide - 1 - i);
      for (int i = 0; i < kSide - 1; ++i) px.emplace_back(i, kSide - 2 - i);
      break;
    case 7:  // two horizontal bars
      hbar(px, 5, 6, 2, 13);
      hbar(px, 11, 12, 2, 13);
      break;
    case 8:  // two vertical bars
      hbar(px, 2, 13, 5, 6);
      hbar(px, 2, 13, 11, 12);
      break;
    case 9:  // checkerboard of 2x2 blocks
      for (int r = 6; r <= 13; ++r)
        for (int c = 6; c <= 13; ++c)
          if (((r - 6) / 2 + (c - 6) / 2) % 2 == 0) px.emplace_back(r, c);
      break;
    default:
      throw PreconditionError("synthetic: label out of range");
  }
  return px;
}

}  // namespace

LabeledDataset make_synthetic(Eigen::Index count, std::uint64_t seed,
                              float noise_std) {
  if (count < 0) throw PreconditionError("synthetic: count must be >= 0");
  if (noise_std < 0.0f) throw PreconditionError("synthetic: noise_std >= 0");

  std::vector<Pixels> templates;
  templates.reserve(10);
  for (int label = 0; label < 10; ++label) {
    templates.push_back(class_template(label));
    for (const auto& [r, c] : templates.back()) {
      // Templates must never enter the reserved top-left patch.
      if (r < 5 && c < 5) throw PreconditionError("synthetic: template overlap");
    }
  }

  LabeledDataset data;
  data.height = kSide;
  data.width = kSide;
  data.channels = 1;
  data.num_classes = 10;
  data.inputs.resize(count, kSide * kSide);
  data.labels.resize(static_cast<std::size_t>(count));

  Rng rng(seed);
  for (Eigen::Index i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % 10);
    data.labels[static_cast<std::size_t>(i)] = label;
    Eigen::VectorXf img = Eigen::VectorXf::Zero(kSide * kSide);
    const float bright = static_cast<float>(rng.next_uniform(0.7, 1.0));
    for (const auto& [r, c] : templates[static_cast<std::size_t>(label)]) {
      img[r * kSide + c] = bright;
    }
    if (noise_std > 0.0f) {
      for (int p = 0; p < kSide * kSide; ++p) {
        img[p] += noise_std * static_cast<float>(rng.next_normal());
      }
    }
    data.inputs.row(i) =
        img.cwiseMax(0.0f).cwiseMin(1.0f).transpose();
  }
  return data;
}

}  // namespace fedledger::nn
