#pragma once

#include <cstdint>

#include "fedledger/nn/dataset.hpp"

namespace fedledger::nn {

// Ten-class grayscale shape-recognition task on a 16x16 grid. Every class
// template keeps the top-left 5x5 patch blank so a patch stamped there never
// overlaps legitimate signal. Pixel intensities lie in [0,1]: the shape is
// drawn at a per-sample brightness drawn from U(0.7, 1.0), then Gaussian
// noise is added to every pixel and the result clipped back to [0,1].
//
// Labels cycle 0..9, so any prefix of the dataset is close to balanced.
// Identical (count, seed, noise_std) always yields identical bytes.
LabeledDataset make_synthetic(Eigen::Index count, std::uint64_t seed,
                              float noise_std = 0.15f);

}  // namespace fedledger::nn
