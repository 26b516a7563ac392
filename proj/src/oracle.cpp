#include "carla/oracle.hpp"

#include <random>
#include <stdexcept>
#include <string>

namespace carla {

void check_shapes(const ConvLayerConfig& layer, const Tensor3& input, const FilterBank& filters) {
  layer.validate();
  if (input.channels != layer.ic || input.rows != layer.il || input.cols != layer.il) {
    throw std::invalid_argument("input tensor shape does not match layer " + layer.name);
  }
  if (filters.filters != layer.k || filters.channels != layer.ic || filters.length != layer.fl) {
    throw std::invalid_argument("filter bank shape does not match layer " + layer.name);
  }
  if (filters.bias && filters.bias->size() != static_cast<std::size_t>(layer.k)) {
    throw std::invalid_argument("bias length does not match filter count");
  }
}

OracleResult conv_direct(const ConvLayerConfig& layer, const Tensor3& input,
                         const FilterBank& filters) {
  check_shapes(layer, input, filters);
  const int ol = layer.ol();
  OracleResult result;
  result.output = Tensor3(layer.k, ol, ol);
  for (int k = 0; k < layer.k; ++k) {
    const std::int64_t bias = filters.bias ? (*filters.bias)[k] : 0;
    for (int m = 0; m < ol; ++m) {
      for (int n = 0; n < ol; ++n) {
        std::int64_t acc = bias;
        for (int c = 0; c < layer.ic; ++c) {
          for (int j = 0; j < layer.fl; ++j) {
            const int r = m * layer.s + j - layer.z;
            for (int i = 0; i < layer.fl; ++i) {
              const int w = n * layer.s + i - layer.z;
              ++result.total_macs_including_pads;
              if (r < 0 || r >= layer.il || w < 0 || w >= layer.il) continue;
              ++result.non_pad_macs;
              acc += input.at(c, r, w) * filters.at(k, c, j, i);
            }
          }
        }
        result.output.at(k, m, n) = acc;
      }
    }
  }
  return result;
}

namespace {

template <class T>
T pick(std::mt19937_64& rng, const std::vector<T>& options) {
  if (options.empty()) throw std::invalid_argument("random_layer_gen: empty option set");
  std::uniform_int_distribution<std::size_t> d(0, options.size() - 1);
  return options[d(rng)];
}

int draw(std::mt19937_64& rng, int lo, int hi) {
  if (lo > hi) throw std::invalid_argument("random_layer_gen: empty range");
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

void fill_words(std::mt19937_64& rng, std::vector<std::int64_t>& values, int word_bits) {
  std::uniform_int_distribution<std::int64_t> d(word_min(word_bits), word_max(word_bits));
  for (auto& v : values) v = d(rng);
}

}  // namespace

Tensor3 random_input(const ConvLayerConfig& layer, std::uint64_t seed, int word_bits) {
  std::mt19937_64 rng(seed);
  Tensor3 t(layer.ic, layer.il, layer.il);
  fill_words(rng, t.data, word_bits);
  return t;
}

FilterBank random_filters(const ConvLayerConfig& layer, std::uint64_t seed, int word_bits) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  FilterBank f(layer.k, layer.ic, layer.fl);
  fill_words(rng, f.data, word_bits);
  return f;
}

RandomLayer random_layer_gen(std::uint64_t seed, const LayerBounds& bounds) {
  std::mt19937_64 rng(seed);
  ConvLayerConfig layer;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 10000) {
      throw std::invalid_argument("random_layer_gen: bounds admit no valid layer");
    }
    layer.il = draw(rng, bounds.il_min, bounds.il_max);
    layer.ic = draw(rng, bounds.ic_min, bounds.ic_max);
    layer.k = draw(rng, bounds.k_min, bounds.k_max);
    layer.fl = pick(rng, bounds.fl);
    layer.s = pick(rng, bounds.s);
    layer.z = pick(rng, bounds.z);
    if (layer.fl > layer.il + 2 * layer.z) continue;
    const std::int64_t ol = layer.ol();
    if (bounds.max_output_features > 0 && ol * ol > bounds.max_output_features) continue;
    break;
  }
  layer.name = "rand" + std::to_string(seed);

  RandomLayer out;
  out.layer = layer;
  out.input = Tensor3(layer.ic, layer.il, layer.il);
  out.filters = FilterBank(layer.k, layer.ic, layer.fl);
  fill_words(rng, out.input.data, bounds.word_bits);
  fill_words(rng, out.filters.data, bounds.word_bits);
  return out;
}

}  // namespace carla
