#pragma once

#include <cstdint>
#include <vector>

#include "carla/netmodel.hpp"
#include "carla/tensor.hpp"

namespace carla {

struct OracleResult {
  Tensor3 output;
  std::int64_t total_macs_including_pads = 0;
  std::int64_t non_pad_macs = 0;
};

/// Direct convolution:
///   y_k(m, n) = b_k + sum_c sum_j sum_i x_c(mS + j - Z, nS + i - Z) * w_c^k(j, i)
/// with j, i ranging over the filter extent and out-of-range x read as zero.
/// Exact 64-bit integer arithmetic. Throws std::invalid_argument on shape
/// mismatch.
OracleResult conv_direct(const ConvLayerConfig& layer, const Tensor3& input,
                         const FilterBank& filters);

void check_shapes(const ConvLayerConfig& layer, const Tensor3& input, const FilterBank& filters);

struct LayerBounds {
  int il_min = 3;
  int il_max = 20;
  int ic_min = 1;
  int ic_max = 8;
  int k_min = 1;
  int k_max = 128;
  std::vector<int> fl = {1, 3, 5, 7};
  std::vector<int> s = {1, 2};
  std::vector<int> z = {0, 1, 3};
  int word_bits = 16;
  // Upper bound on ol * ol; 0 disables the check.
  int max_output_features = 0;
};

struct RandomLayer {
  ConvLayerConfig layer;
  Tensor3 input;
  FilterBank filters;
};

/// Deterministic for a given seed: draws a valid layer shape within the
/// bounds, then word-range input and weight values. No bias.
RandomLayer random_layer_gen(std::uint64_t seed, const LayerBounds& bounds);

/// Uniform word-range tensors for a fixed layer shape.
Tensor3 random_input(const ConvLayerConfig& layer, std::uint64_t seed, int word_bits);
FilterBank random_filters(const ConvLayerConfig& layer, std::uint64_t seed, int word_bits);

}  // namespace carla
