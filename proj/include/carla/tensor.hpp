#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace carla {

/// Dense channels x rows x cols integer tensor (in-fmaps and out-fmaps).
struct Tensor3 {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<std::int64_t> data;

  Tensor3() = default;
  Tensor3(int c, int r, int w)
      : channels(c), rows(r), cols(w),
        data(static_cast<std::size_t>(c) * r * w, 0) {
    if (c < 0 || r < 0 || w < 0) throw std::invalid_argument("Tensor3: negative extent");
  }

  std::int64_t& at(int c, int r, int w) { return data[index(c, r, w)]; }
  std::int64_t at(int c, int r, int w) const { return data[index(c, r, w)]; }

  /// Zero outside the spatial extent (implicit zero padding).
  std::int64_t padded(int c, int r, int w) const {
    if (r < 0 || r >= rows || w < 0 || w >= cols) return 0;
    return data[index(c, r, w)];
  }

  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t index(int c, int r, int w) const {
    return (static_cast<std::size_t>(c) * rows + r) * cols + w;
  }
};

/// K filters of IC x FL x FL weights, plus an optional per-filter bias.
struct FilterBank {
  int filters = 0;
  int channels = 0;
  int length = 0;
  std::vector<std::int64_t> data;
  std::optional<std::vector<std::int64_t>> bias;

  FilterBank() = default;
  FilterBank(int k, int ic, int fl)
      : filters(k), channels(ic), length(fl),
        data(static_cast<std::size_t>(k) * ic * fl * fl, 0) {
    if (k < 0 || ic < 0 || fl < 0) throw std::invalid_argument("FilterBank: negative extent");
  }

  std::int64_t& at(int k, int c, int j, int i) { return data[index(k, c, j, i)]; }
  std::int64_t at(int k, int c, int j, int i) const { return data[index(k, c, j, i)]; }

  bool operator==(const FilterBank&) const = default;

 private:
  std::size_t index(int k, int c, int j, int i) const {
    return ((static_cast<std::size_t>(k) * channels + c) * length + j) * length + i;
  }
};

/// Smallest and largest value of a signed word of the given width.
constexpr std::int64_t word_min(int bits) { return -(std::int64_t{1} << (bits - 1)); }
constexpr std::int64_t word_max(int bits) { return (std::int64_t{1} << (bits - 1)) - 1; }

}  // namespace carla
