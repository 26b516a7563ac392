#include <algorithm>
#include <string>

#include "carla/costmodel.hpp"
#include "carla/netmodel.hpp"
#include "doctest.h"

using namespace carla;

namespace {

int count_fl(const NetworkModel& net, int fl) {
  return static_cast<int>(std::count_if(net.layers.begin(), net.layers.end(),
                                        [&](const auto& l) { return l.fl == fl; }));
}

const ConvLayerConfig& by_name(const NetworkModel& net, const std::string& name) {
  for (const auto& l : net.layers) {
    if (l.name == name) return l;
  }
  FAIL("no layer " << name);
  return net.layers.front();
}

}  // namespace

TEST_CASE("output_length") {
  CHECK(output_length(224, 7, 3, 2) == 112);
  CHECK(output_length(56, 3, 1, 1) == 56);
  for (int il : {1, 7, 56}) CHECK(output_length(il, 1, 0, 1) == il);
  CHECK(output_length(5, 3, 0, 2) == 2);
  CHECK_THROWS_AS(output_length(2, 5, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(output_length(0, 1, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(output_length(4, 1, 0, 0), std::invalid_argument);
}

TEST_CASE("layer validation") {
  ConvLayerConfig l{.name = "x", .il = 4, .ic = 2, .fl = 3, .k = 8, .s = 1, .z = 1};
  CHECK_NOTHROW(l.validate());
  l.k = 0;
  CHECK_THROWS_AS(l.validate(), std::invalid_argument);
  l.k = 8;
  l.fl = 7;
  l.z = 1;
  CHECK_THROWS_AS(l.validate(), std::invalid_argument);
}

TEST_CASE("resnet50 census and table") {
  const auto net = build_resnet50();
  REQUIRE(net.layers.size() == 49);
  CHECK(count_fl(net, 1) == 32);
  CHECK(count_fl(net, 3) == 16);
  CHECK(count_fl(net, 7) == 1);

  const auto& first = net.layers.front();
  CHECK(first.fl == 7);
  CHECK(first.k == 64);
  CHECK(first.ol() == 112);
  const auto& last = net.layers.back();
  CHECK(last.fl == 1);
  CHECK(last.k == 2048);
  CHECK(last.ol() == 7);

  struct Row {
    const char* stage;
    int blocks;
    int out;
    int k[3];
  };
  const Row rows[] = {{"conv2_", 3, 56, {64, 64, 256}},
                      {"conv3_", 4, 28, {128, 128, 512}},
                      {"conv4_", 6, 14, {256, 256, 1024}},
                      {"conv5_", 3, 7, {512, 512, 2048}}};
  for (const auto& r : rows) {
    for (int b = 1; b <= r.blocks; ++b) {
      const std::string blk = r.stage + std::to_string(b);
      const int fl[3] = {1, 3, 1};
      const char* tail[3] = {"a", "b", "c"};
      for (int i = 0; i < 3; ++i) {
        const auto& l = by_name(net, blk + tail[i]);
        CHECK(l.ol() == r.out);
        CHECK(l.fl == fl[i]);
        CHECK(l.k == r.k[i]);
      }
    }
  }
  CHECK(by_name(net, "conv3_1a").s == 2);
  CHECK(by_name(net, "conv3_1a").il == 56);
  CHECK(by_name(net, "conv2_1a").ic == 64);
  CHECK(by_name(net, "conv2_2a").ic == 256);
}

TEST_CASE("resnet50 shortcuts are separate and flagged") {
  const auto net = build_resnet50(true);
  CHECK(net.layers.size() == 53);
  int projections = 0;
  for (const auto& l : net.layers) {
    if (!l.projection) continue;
    ++projections;
    CHECK(l.fl == 1);
    CHECK(l.name.back() == 'p');
  }
  CHECK(projections == 4);
  CHECK(by_name(net, "conv3_1p").s == 2);
  CHECK(by_name(net, "conv3_1p").k == 512);
}

TEST_CASE("vgg16 topology") {
  const auto net = build_vgg16();
  REQUIRE(net.layers.size() == 13);
  CHECK(count_fl(net, 3) == 13);
  CHECK(net.layers[0].k == 64);
  CHECK(net.layers[0].ic == 3);
  CHECK(net.layers[0].il == 224);
  CHECK(net.layers[12].k == 512);
  CHECK(net.layers[12].ic == 512);
  CHECK(net.layers[12].il == 14);
  for (const auto& l : net.layers) CHECK(l.ol() == l.il);
}

TEST_CASE("sparse resnet50 follows the pruned filter column") {
  const auto dense = build_resnet50();
  const auto sparse = apply_channel_pruning(dense, resnet50_sparse_spec(dense));
  CHECK(by_name(sparse, "conv1").k == 64);
  CHECK(by_name(sparse, "conv2_1a").k == 32);
  CHECK(by_name(sparse, "conv2_1b").k == 32);
  CHECK(by_name(sparse, "conv2_1c").k == 256);
  CHECK(by_name(sparse, "conv4_3b").k == 128);
  CHECK(by_name(sparse, "conv4_3b").ic == 128);
  CHECK(by_name(sparse, "conv5_2a").k == 256);
  CHECK(by_name(sparse, "conv5_2c").k == 2048);
  CHECK(by_name(sparse, "conv5_2c").ic == 256);
  CHECK(build_builtin("resnet50-sparse").layers == sparse.layers);

  const auto with_sc = build_resnet50(true);
  const auto sparse_sc = apply_channel_pruning(with_sc, resnet50_sparse_spec(with_sc));
  CHECK(by_name(sparse_sc, "conv2_1p").k == 256);
}

TEST_CASE("pruning properties") {
  const auto dense = build_resnet50();
  const auto spec = resnet50_sparse_spec(dense);

  SUBCASE("empty spec is a no-op") { CHECK(apply_channel_pruning(dense, {}) == dense); }

  SUBCASE("idempotent for an absolute keep spec") {
    const auto once = apply_channel_pruning(dense, spec);
    CHECK(apply_channel_pruning(once, spec) == once);
  }

  SUBCASE("never increases any layer cost") {
    const ArchConfig arch;
    const auto sparse = apply_channel_pruning(dense, spec);
    for (std::size_t i = 0; i < dense.layers.size(); ++i) {
      const auto d = layer_cost(dense.layers[i], arch);
      const auto s = layer_cost(sparse.layers[i], arch);
      CHECK(s.cycles <= d.cycles);
      CHECK(s.macs <= d.macs);
      CHECK(s.dram_w_reads <= d.dram_w_reads);
    }
  }

  SUBCASE("bad specs are rejected") {
    CHECK_THROWS_AS(apply_channel_pruning(dense, {{999, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(apply_channel_pruning(dense, {{1, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(apply_channel_pruning(dense, {{1, 65}}), std::invalid_argument);
    // One expanding 1x1 alone would break the residual add.
    std::size_t c = 0;
    while (dense.layers[c].name != "conv2_1c") ++c;
    CHECK_THROWS_AS(apply_channel_pruning(dense, {{c, 128}}), std::invalid_argument);
  }
}

TEST_CASE("network JSON round trip") {
  for (const auto& net : {build_resnet50(), build_resnet50(true), build_vgg16(),
                          build_builtin("resnet50-sparse")}) {
    CHECK(network_from_json(network_to_json(net)) == net);
  }
}

TEST_CASE("network JSON parsing") {
  const auto net = network_from_json(R"({"name": "toy", "layers": [
      {"name": "a", "il": 8, "ic": 3, "fl": 3, "k": 16, "z": 1},
      {"name": "b", "il": 8, "ic": 16, "fl": 1, "k": 4}]})");
  CHECK(net.name == "toy");
  REQUIRE(net.layers.size() == 2);
  CHECK_FALSE(net.layers[0].input.has_value());
  CHECK(net.layers[1].input == std::optional<std::size_t>(0));
  CHECK(net.layers[1].s == 1);

  CHECK_THROWS_AS(network_from_json("{"), std::invalid_argument);
  CHECK_THROWS_AS(network_from_json(R"({"layers": [{"il": 8}]})"), std::invalid_argument);
  CHECK_THROWS_AS(network_from_json(R"({"layers": [
      {"name": "a", "il": 8, "ic": 3, "fl": 3, "k": 16, "z": 1},
      {"name": "b", "il": 8, "ic": 8, "fl": 1, "k": 4, "input": "a"}]})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(network_from_json(R"({"layers": [
      {"name": "b", "il": 8, "ic": 8, "fl": 1, "k": 4, "input": "nope"}]})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_builtin("alexnet"), std::invalid_argument);
}
