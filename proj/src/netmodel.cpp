#include "carla/netmodel.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace carla {

namespace {

std::string layer_tag(const ConvLayerConfig& layer) {
  return layer.name.empty() ? std::string("<unnamed>") : layer.name;
}

}  // namespace

int output_length(int il, int fl, int z, int s) {
  if (il < 1 || fl < 1 || s < 1 || z < 0) {
    throw std::invalid_argument("output_length: il, fl, s must be >= 1 and z >= 0");
  }
  const int span = il - fl + 2 * z;
  if (span < 0) {
    throw std::invalid_argument("output_length: filter does not fit the padded input");
  }
  // span >= 0 so integer division is the floor.
  return span / s + 1;
}

int ConvLayerConfig::ol() const { return output_length(il, fl, z, s); }

void ConvLayerConfig::validate() const {
  if (il < 1 || ic < 1 || fl < 1 || k < 1 || s < 1 || z < 0) {
    throw std::invalid_argument("layer " + layer_tag(*this) +
                                ": il, ic, fl, k, s must be >= 1 and z >= 0");
  }
  if (fl > il + 2 * z) {
    throw std::invalid_argument("layer " + layer_tag(*this) +
                                ": filter larger than padded input");
  }
  (void)ol();
}

void NetworkModel::validate() const {
  std::map<int, int> group_k;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    layer.validate();
    if (layer.input) {
      if (*layer.input >= i) {
        throw std::invalid_argument("layer " + layer_tag(layer) +
                                    ": producer must precede its consumer");
      }
      const auto& producer = layers[*layer.input];
      if (producer.k != layer.ic) {
        throw std::invalid_argument("layer " + layer_tag(layer) + ": IC " +
                                    std::to_string(layer.ic) + " does not match producer " +
                                    layer_tag(producer) + " K " + std::to_string(producer.k));
      }
    }
    if (layer.merge_group) {
      auto [it, inserted] = group_k.emplace(*layer.merge_group, layer.k);
      if (!inserted && it->second != layer.k) {
        throw std::invalid_argument("layer " + layer_tag(layer) +
                                    ": K differs from other layers of merge group " +
                                    std::to_string(*layer.merge_group));
      }
    }
  }
}

NetworkModel build_resnet50(bool with_shortcuts) {
  struct Stage {
    int blocks;
    int out_size;
    int mid;
    int expand;
  };
  constexpr Stage stages[] = {
      {3, 56, 64, 256}, {4, 28, 128, 512}, {6, 14, 256, 1024}, {3, 7, 512, 2048}};

  NetworkModel net;
  net.name = with_shortcuts ? "resnet50+shortcuts" : "resnet50";
  auto& layers = net.layers;

  // Z=3 is not tabulated; it is the padding that yields a 112x112 output.
  layers.push_back({.name = "conv1", .il = 224, .ic = 3, .fl = 7, .k = 64, .s = 2, .z = 3});

  // Max pooling between Conv1 and Conv2 is not a convolution; Conv2 starts at 56x56.
  std::size_t block_input = 0;
  for (int stage_idx = 0; stage_idx < 4; ++stage_idx) {
    const Stage& st = stages[stage_idx];
    const std::string prefix = "conv" + std::to_string(stage_idx + 2) + "_";
    for (int b = 0; b < st.blocks; ++b) {
      const bool first = b == 0;
      const int stride = (first && stage_idx > 0) ? 2 : 1;
      const int in_size = st.out_size * stride;
      const int in_ch = layers[block_input].k;
      const std::string blk = prefix + std::to_string(b + 1);

      const std::size_t a = layers.size();
      layers.push_back({.name = blk + "a", .il = in_size, .ic = in_ch, .fl = 1, .k = st.mid,
                        .s = stride, .z = 0, .input = block_input});
      layers.push_back({.name = blk + "b", .il = st.out_size, .ic = st.mid, .fl = 3,
                        .k = st.mid, .s = 1, .z = 1, .input = a});
      layers.push_back({.name = blk + "c", .il = st.out_size, .ic = st.mid, .fl = 1,
                        .k = st.expand, .s = 1, .z = 0, .input = a + 1,
                        .merge_group = stage_idx});
      const std::size_t c = a + 2;
      if (first && with_shortcuts) {
        layers.push_back({.name = blk + "p", .il = in_size, .ic = in_ch, .fl = 1,
                          .k = st.expand, .s = stride, .z = 0, .input = block_input,
                          .merge_group = stage_idx, .projection = true});
      }
      block_input = c;
    }
  }

  for (std::size_t i = 1; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (!l.input || layers[*l.input].k != l.ic) {
      throw std::logic_error("build_resnet50: broken IC chaining at " + l.name);
    }
  }
  net.validate();
  return net;
}

NetworkModel build_vgg16() {
  struct Row {
    int k;
    int ic;
    int il;
  };
  constexpr Row rows[] = {{64, 3, 224},    {64, 64, 224},   {128, 64, 112}, {128, 128, 112},
                          {256, 128, 56},  {256, 256, 56},  {256, 256, 56}, {512, 256, 28},
                          {512, 512, 28},  {512, 512, 28},  {512, 512, 14}, {512, 512, 14},
                          {512, 512, 14}};
  NetworkModel net;
  net.name = "vgg16";
  for (std::size_t i = 0; i < std::size(rows); ++i) {
    const Row& r = rows[i];
    ConvLayerConfig layer{.name = "conv" + std::to_string(i + 1), .il = r.il, .ic = r.ic,
                          .fl = 3, .k = r.k, .s = 1, .z = 1};
    if (i > 0) {
      // Pooling between stages changes IL but not the channel count.
      if (net.layers.back().k != r.ic) {
        throw std::logic_error("build_vgg16: broken IC chaining at " + layer.name);
      }
      layer.input = i - 1;
    }
    net.layers.push_back(std::move(layer));
  }
  net.validate();
  return net;
}

PruneSpec resnet50_sparse_spec(const NetworkModel& resnet) {
  PruneSpec spec;
  for (std::size_t i = 0; i < resnet.layers.size(); ++i) {
    const auto& l = resnet.layers[i];
    if (l.projection || l.name == "conv1" || l.name.empty()) continue;
    const char tail = l.name.back();
    if (tail == 'a' || tail == 'b') spec[i] = l.k / 2;
  }
  return spec;
}

NetworkModel apply_channel_pruning(const NetworkModel& net, const PruneSpec& spec) {
  NetworkModel out = net;
  for (const auto& [idx, keep] : spec) {
    if (idx >= out.layers.size()) {
      throw std::invalid_argument("prune spec: layer index " + std::to_string(idx) +
                                  " out of range");
    }
    const auto& original = net.layers[idx];
    if (keep < 1 || keep > original.k) {
      throw std::invalid_argument("prune spec: layer " + original.name + " keep count " +
                                  std::to_string(keep) + " outside [1, " +
                                  std::to_string(original.k) + "]");
    }
    out.layers[idx].k = keep;
  }
  for (auto& layer : out.layers) {
    if (layer.input) layer.ic = out.layers[*layer.input].k;
  }
  try {
    out.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("prune spec breaks channel chaining: ") + e.what());
  }
  return out;
}

NetworkModel build_builtin(std::string_view name, bool with_shortcuts) {
  if (name == "resnet50") return build_resnet50(with_shortcuts);
  if (name == "resnet50-sparse") {
    auto dense = build_resnet50(with_shortcuts);
    auto sparse = apply_channel_pruning(dense, resnet50_sparse_spec(dense));
    sparse.name = with_shortcuts ? "resnet50-sparse+shortcuts" : "resnet50-sparse";
    return sparse;
  }
  if (name == "vgg16") return build_vgg16();
  throw std::invalid_argument("unknown builtin network '" + std::string(name) +
                              "' (expected resnet50, resnet50-sparse or vgg16)");
}

std::string network_to_json(const NetworkModel& net) {
  nlohmann::ordered_json doc;
  doc["name"] = net.name;
  doc["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : net.layers) {
    nlohmann::ordered_json j{{"name", l.name}, {"il", l.il}, {"ic", l.ic}, {"fl", l.fl},
                             {"k", l.k},       {"s", l.s},   {"z", l.z}};
    if (l.input) j["input"] = net.layers[*l.input].name;
    if (l.merge_group) j["merge"] = *l.merge_group;
    if (l.projection) j["projection"] = true;
    doc["layers"].push_back(std::move(j));
  }
  return doc.dump(2);
}

NetworkModel network_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("network JSON: ") + e.what());
  }
  NetworkModel net;
  try {
    net.name = doc.value("name", std::string("network"));
    std::map<std::string, std::size_t> by_name;
    for (const auto& j : doc.at("layers")) {
      ConvLayerConfig l;
      l.name = j.value("name", "layer" + std::to_string(net.layers.size()));
      l.il = j.at("il").get<int>();
      l.ic = j.at("ic").get<int>();
      l.fl = j.at("fl").get<int>();
      l.k = j.at("k").get<int>();
      l.s = j.value("s", 1);
      l.z = j.value("z", 0);
      if (j.contains("input")) {
        const auto src = j.at("input").get<std::string>();
        auto it = by_name.find(src);
        if (it == by_name.end()) {
          throw std::invalid_argument("layer " + l.name + ": unknown input layer '" + src + "'");
        }
        l.input = it->second;
      } else if (!net.layers.empty() && net.layers.back().k == l.ic) {
        // Without explicit wiring, a layer consumes its predecessor when the
        // channel counts line up.
        l.input = net.layers.size() - 1;
      }
      if (j.contains("merge")) l.merge_group = j.at("merge").get<int>();
      l.projection = j.value("projection", false);
      by_name[l.name] = net.layers.size();
      net.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("network JSON: ") + e.what());
  }
  net.validate();
  return net;
}

NetworkModel load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open network file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return network_from_json(buf.str());
}

}  // namespace carla
