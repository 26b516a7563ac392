#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace carla {

/// Shape of one convolutional layer.
///
/// Spatial maps are square: `il` is the input side length, `fl` the filter
/// side length. `k` is the filter count and therefore the output channel
/// count. `s` is the stride and `z` the zero-padding width on every border.
struct ConvLayerConfig {
  std::string name;
  int il = 1;
  int ic = 1;
  int fl = 1;
  int k = 1;
  int s = 1;
  int z = 0;

  // Layer whose output this layer consumes; empty when it reads the
  // network input (or an activation produced outside the model).
  std::optional<std::size_t> input;
  // Layers in the same merge group are summed by residual adds, so they
  // must keep identical filter counts.
  std::optional<int> merge_group;
  // Projection-shortcut convolution (reported separately).
  bool projection = false;

  int ol() const;
  void validate() const;

  bool operator==(const ConvLayerConfig&) const = default;
};

/// floor((il - fl + 2z) / s) + 1; throws std::invalid_argument when the
/// result is below one or any argument is out of range.
int output_length(int il, int fl, int z, int s);

struct NetworkModel {
  std::string name;
  std::vector<ConvLayerConfig> layers;

  /// Checks every layer and the producer/consumer wiring: a consumer's IC
  /// equals its producer's K, and merge groups agree on K.
  void validate() const;

  bool operator==(const NetworkModel&) const = default;
};

/// Per-layer filter-keep counts, keyed by layer index.
using PruneSpec = std::map<std::size_t, int>;

NetworkModel build_resnet50(bool with_shortcuts = false);
NetworkModel build_vgg16();

/// Halves the first two convolutions of every bottleneck; the expanding
/// 1x1, the projection shortcuts and Conv1 keep their filters.
PruneSpec resnet50_sparse_spec(const NetworkModel& resnet);

/// Replaces K of every listed layer and propagates the new count into the
/// IC of each consumer. Throws std::invalid_argument for bad indices,
/// counts outside [1, K], or a result that breaks IC/K chaining.
NetworkModel apply_channel_pruning(const NetworkModel& net,
                                   const PruneSpec& spec);

/// "resnet50", "resnet50-sparse" or "vgg16".
NetworkModel build_builtin(std::string_view name, bool with_shortcuts = false);

std::string network_to_json(const NetworkModel& net);
NetworkModel network_from_json(std::string_view text);
NetworkModel load_network(const std::filesystem::path& path);

}  // namespace carla
