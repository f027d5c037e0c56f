#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "nlohmann/json.hpp"

#include "llab/config.hpp"
#include "llab/dataset.hpp"

using namespace llab;
using nlohmann::json;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

void push_u32_be(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back((v >> 24) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back(v & 0xff);
}

std::string error_text(const json& j) {
  try {
    (void)parse_config_json(j);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("blobs: default sizes and balanced labels") {
  DatasetSpec spec;  // defaults: 10 classes, dim 64, 5000/1000
  auto pair = make_blobs(spec);
  CHECK(pair.train.size() == 5000u);
  CHECK(pair.test.size() == 1000u);
  CHECK(pair.train.inputs.shape == std::vector<int>{5000, 64});
  CHECK(pair.train.n_classes == 10);
  std::vector<int> counts(10, 0);
  for (int lbl : pair.train.labels) counts[lbl]++;
  for (int c : counts) CHECK(c == 500);
}

TEST_CASE("blobs: deterministic in the seed, different across seeds") {
  DatasetSpec a, b;
  a.seed = b.seed = 7;
  auto p1 = make_blobs(a);
  auto p2 = make_blobs(b);
  CHECK(p1.train.inputs.data == p2.train.inputs.data);
  CHECK(p1.test.inputs.data == p2.test.inputs.data);
  CHECK(p1.train.content_hash() == p2.train.content_hash());

  b.seed = 8;
  auto p3 = make_blobs(b);
  CHECK(p1.train.inputs.data != p3.train.inputs.data);
}

TEST_CASE("blobs: train and test streams are independent") {
  DatasetSpec spec;
  spec.n_train = 100;
  spec.n_test = 100;
  auto pair = make_blobs(spec);
  // Same labels by balance, but noise differs draw by draw.
  CHECK(pair.train.labels == pair.test.labels);
  CHECK(pair.train.inputs.data != pair.test.inputs.data);
}

TEST_CASE("spirals: shape and determinism") {
  DatasetSpec spec;
  spec.kind = DatasetKind::SyntheticSpirals;
  spec.n_classes = 3;
  spec.n_train = 30;
  spec.n_test = 9;
  auto p1 = make_spirals(spec);
  auto p2 = make_spirals(spec);
  CHECK(p1.train.inputs.shape == std::vector<int>{30, 2});
  CHECK(p1.train.inputs.data == p2.train.inputs.data);
}

TEST_CASE("gather assembles the requested rows") {
  DatasetSpec spec;
  spec.n_train = 10;
  spec.dim = 3;
  spec.n_classes = 2;
  auto pair = make_blobs(spec);
  auto batch = pair.train.gather({4, 0});
  CHECK(batch.inputs.shape == std::vector<int>{2, 3});
  for (int j = 0; j < 3; ++j) {
    CHECK(batch.inputs.data[j] == pair.train.inputs.data[4 * 3 + j]);
    CHECK(batch.inputs.data[3 + j] == pair.train.inputs.data[j]);
  }
  CHECK(batch.labels[0] == pair.train.labels[4]);
  CHECK_THROWS_AS(static_cast<void>(pair.train.gather({10})), Error);
}

TEST_CASE("idx round trip from hand-built bytes") {
  TempDir dir("llab_idx_test");

  // Two 2x3 images with pixel values 0..11.
  std::vector<unsigned char> img;
  push_u32_be(img, 0x00000803u);
  push_u32_be(img, 2);
  push_u32_be(img, 2);
  push_u32_be(img, 3);
  for (int i = 0; i < 12; ++i) img.push_back(static_cast<unsigned char>(i * 20));
  write_bytes(dir.path / "img.idx", img);

  std::vector<unsigned char> lbl;
  push_u32_be(lbl, 0x00000801u);
  push_u32_be(lbl, 2);
  lbl.push_back(1);
  lbl.push_back(0);
  write_bytes(dir.path / "lbl.idx", lbl);

  auto images = read_idx_images(dir.path / "img.idx");
  CHECK(images.shape == std::vector<int>{2, 1, 2, 3});
  CHECK(images.data[0] == 0.0);
  CHECK(images.data[5] == doctest::Approx(100.0 / 255.0).epsilon(1e-12));
  auto labels = read_idx_labels(dir.path / "lbl.idx");
  CHECK(labels == std::vector<int>{1, 0});

  DatasetSpec spec;
  spec.kind = DatasetKind::IdxImages;
  spec.n_classes = 2;
  spec.train_images = spec.test_images = (dir.path / "img.idx").string();
  spec.train_labels = spec.test_labels = (dir.path / "lbl.idx").string();
  spec.norm_mean = 0.5;
  spec.norm_std = 0.25;
  spec.flatten_images = true;
  auto pair = load_dataset(spec);
  CHECK(pair.train.inputs.shape == std::vector<int>{2, 6});
  CHECK(pair.train.inputs.data[0] == doctest::Approx((0.0 - 0.5) / 0.25).epsilon(1e-12));
}

TEST_CASE("idx loaders reject bad magic and truncation") {
  TempDir dir("llab_idx_bad");
  std::vector<unsigned char> bad;
  push_u32_be(bad, 0x00000801u);  // label magic in an image file
  push_u32_be(bad, 0);
  push_u32_be(bad, 0);
  push_u32_be(bad, 0);
  write_bytes(dir.path / "bad.idx", bad);
  CHECK_THROWS_AS(static_cast<void>(read_idx_images(dir.path / "bad.idx")), Error);

  std::vector<unsigned char> trunc;
  push_u32_be(trunc, 0x00000803u);
  push_u32_be(trunc, 5);
  push_u32_be(trunc, 4);
  push_u32_be(trunc, 4);
  trunc.push_back(0);  // 80 pixel bytes expected
  write_bytes(dir.path / "trunc.idx", trunc);
  CHECK_THROWS_AS(static_cast<void>(read_idx_images(dir.path / "trunc.idx")), Error);
}

TEST_CASE("idx image/label count mismatch is rejected") {
  TempDir dir("llab_idx_mismatch");
  std::vector<unsigned char> img;
  push_u32_be(img, 0x00000803u);
  push_u32_be(img, 1);
  push_u32_be(img, 1);
  push_u32_be(img, 1);
  img.push_back(7);
  write_bytes(dir.path / "img.idx", img);
  std::vector<unsigned char> lbl;
  push_u32_be(lbl, 0x00000801u);
  push_u32_be(lbl, 2);
  lbl.push_back(0);
  lbl.push_back(1);
  write_bytes(dir.path / "lbl.idx", lbl);

  DatasetSpec spec;
  spec.kind = DatasetKind::IdxImages;
  spec.n_classes = 2;
  spec.train_images = spec.test_images = (dir.path / "img.idx").string();
  spec.train_labels = spec.test_labels = (dir.path / "lbl.idx").string();
  CHECK_THROWS_AS(static_cast<void>(load_dataset(spec)), Error);
}

TEST_CASE("cifar binary records") {
  TempDir dir("llab_cifar_test");
  std::vector<unsigned char> bytes;
  for (int rec = 0; rec < 2; ++rec) {
    bytes.push_back(static_cast<unsigned char>(rec));  // label
    for (int j = 0; j < 3072; ++j) bytes.push_back(static_cast<unsigned char>((rec + j) % 256));
  }
  write_bytes(dir.path / "batch.bin", bytes);

  auto d = read_cifar_binary(dir.path / "batch.bin", 10);
  CHECK(d.size() == 2u);
  CHECK(d.inputs.shape == std::vector<int>{2, 3, 32, 32});
  CHECK(d.labels == std::vector<int>{0, 1});
  CHECK(d.inputs.data[0] == 0.0);
  CHECK(d.inputs.data[3072] == doctest::Approx(1.0 / 255.0).epsilon(1e-12));

  // One stray byte breaks the 3073 record arithmetic.
  bytes.push_back(0);
  write_bytes(dir.path / "odd.bin", bytes);
  CHECK_THROWS_AS(static_cast<void>(read_cifar_binary(dir.path / "odd.bin", 10)), Error);
}

TEST_CASE("cifar label out of range is rejected") {
  TempDir dir("llab_cifar_label");
  std::vector<unsigned char> bytes(3073, 0);
  bytes[0] = 10;
  write_bytes(dir.path / "bad.bin", bytes);
  CHECK_THROWS_AS(static_cast<void>(read_cifar_binary(dir.path / "bad.bin", 10)), Error);
}

TEST_CASE("config: minimal valid file parses with defaults") {
  json j = {{"model", {{"name", "mlp-small"}, {"input_shape", {64}}, {"n_classes", 10}}},
            {"recipe", {{"epochs", 20}, {"batch_size", 100}}}};
  auto c = parse_config_json(j);
  CHECK(c.model_name == "mlp-small");
  CHECK(c.algorithm == "vanilla");
  CHECK(c.recipe.epochs == 20);
  CHECK(c.recipe.lr.total_epochs == 20);
  CHECK(c.ledger_mode() == "exclude-discovery");
  CHECK(c.workers == 1);
}

TEST_CASE("config: unknown keys are rejected at every level") {
  json j = {{"model", {{"name", "mlp-small"}, {"hidden", 12}}},
            {"recipe", {{"epochs", 5}, {"lr", {{"base", 0.1}, {"gamma", 0.5}}}}},
            {"turbo", true}};
  auto msg = error_text(j);
  REQUIRE(!msg.empty());
  CHECK(msg.find("unknown key 'hidden'") != std::string::npos);
  CHECK(msg.find("unknown key 'gamma'") != std::string::npos);
  CHECK(msg.find("unknown key 'turbo'") != std::string::npos);
}

TEST_CASE("config: constraint violations are all reported together") {
  json j = {{"model", {{"name", "lenet"}}},
            {"recipe", {{"epochs", 10}}},
            {"algorithm", "snip"},
            {"grid", {{"R", {0.0, 150.0}}, {"k", {12}}, {"I", {0}}, {"seeds", json::array()}}}};
  auto msg = error_text(j);
  REQUIRE(!msg.empty());
  CHECK(msg.find("model.name") != std::string::npos);
  CHECK(msg.find("algorithm") != std::string::npos);
  CHECK(msg.find("grid.R") != std::string::npos);
  CHECK(msg.find("exceeds recipe.epochs") != std::string::npos);
  CHECK(msg.find("grid.I") != std::string::npos);
  CHECK(msg.find("grid.seeds") != std::string::npos);
}

TEST_CASE("config: R boundaries") {
  json base = {{"recipe", {{"epochs", 5}}}};
  base["grid"] = {{"R", {100.0}}};
  CHECK_NOTHROW(static_cast<void>(parse_config_json(base)));
  base["grid"] = {{"R", {0.0}}};
  CHECK_THROWS_AS(static_cast<void>(parse_config_json(base)), Error);
  base["grid"] = {{"R", {100.0001}}};
  CHECK_THROWS_AS(static_cast<void>(parse_config_json(base)), Error);
}

TEST_CASE("config: file-backed datasets require paths") {
  json j = {{"recipe", {{"epochs", 1}}}, {"dataset", {{"kind", "idx-images"}}}};
  auto msg = error_text(j);
  CHECK(msg.find("idx-images requires") != std::string::npos);

  json j2 = {{"recipe", {{"epochs", 1}}}, {"dataset", {{"kind", "cifar-binary"}}}};
  auto msg2 = error_text(j2);
  CHECK(msg2.find("cifar-binary requires") != std::string::npos);
}

TEST_CASE("config: resolved echo round-trips") {
  json j = {{"model", {{"name", "conv-small"}, {"input_shape", {1, 12, 12}}, {"n_classes", 4}}},
            {"dataset", {{"kind", "synthetic-spirals"}, {"n_classes", 4}}},
            {"recipe",
             {{"epochs", 8},
              {"batch_size", 16},
              {"momentum", 0.9},
              {"weight_decay", 5e-5},
              {"lr", {{"kind", "step-milestones"}, {"base", 0.1}, {"milestones", {4, 6}}, {"decay", 0.1}}}}},
            {"algorithm", "rise"},
            {"grid", {{"R", {10.0, 50.0}}, {"k", {0, 4}}, {"seeds", {1, 2}}}},
            {"count_discovery", true},
            {"workers", 2}};
  auto c = parse_config_json(j);
  auto echoed = parse_config_json(config_to_json(c));
  CHECK(config_to_json(echoed) == config_to_json(c));
  CHECK(echoed.algorithm == "rise");
  CHECK(echoed.recipe.lr.milestones == std::vector<int>{4, 6});
  CHECK(echoed.ledger_mode() == "include-discovery");
}

TEST_CASE("parse_config: missing file and malformed JSON") {
  CHECK_THROWS_AS(static_cast<void>(parse_config("/nonexistent/llab.json")), Error);
  TempDir dir("llab_cfg_bad");
  {
    std::ofstream f(dir.path / "bad.json");
    f << "{ not json";
  }
  CHECK_THROWS_AS(static_cast<void>(parse_config(dir.path / "bad.json")), Error);
}
