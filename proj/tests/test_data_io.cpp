#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dbpae/data_io.hpp"

using namespace dbpae;
namespace fs = std::filesystem;

namespace {
struct TmpDir {
  fs::path path;
  TmpDir() {
    path = fs::temp_directory_path() / ("dbpae_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}
}  // namespace

TEST_CASE("idx round trip and format checks") {
  TmpDir tmp;
  auto ds = synth_digits(3, 99);
  CHECK(ds.size() == 30);
  CHECK(ds.dim() == 784);
  write_idx(ds, tmp.file("img"), tmp.file("lab"));
  auto back = load_idx(tmp.file("img"), tmp.file("lab"));
  CHECK(back.size() == 30);
  CHECK(back.dim() == 784);
  CHECK(back.labels == ds.labels);
  // u8 quantization: every loaded pixel within half a step of the original
  for (std::size_t i = 0; i < ds.images.size(); ++i)
    CHECK(std::abs(back.images[i] - ds.images[i]) <= 0.5 / 255.0 + 1e-12);

  // pixel 255 -> exactly 1.0
  bool hit_one = false;
  for (std::size_t i = 0; i < back.images.size(); ++i) hit_one = hit_one || back.images[i] == 1.0;
  CHECK(hit_one);
}

TEST_CASE("idx loader rejects bad inputs") {
  TmpDir tmp;
  {
    std::ofstream bad(tmp.file("bad"), std::ios::binary);
    const unsigned char magic[4] = {0, 0, 8, 4};  // wrong magic (2052)
    bad.write(reinterpret_cast<const char*>(magic), 4);
  }
  CHECK_THROWS_WITH_AS(load_idx(tmp.file("bad"), tmp.file("bad")),
                       doctest::Contains("bad magic"), IoError);
  CHECK_THROWS_AS(load_idx(tmp.file("missing"), tmp.file("missing")), IoError);

  // truncated image payload
  {
    std::ofstream t(tmp.file("trunc"), std::ios::binary);
    const unsigned char hdr[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 7};
    t.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  }
  CHECK_THROWS_WITH_AS(load_idx(tmp.file("trunc"), tmp.file("trunc")),
                       doctest::Contains("truncated"), IoError);
}

TEST_CASE("idx count mismatch between images and labels") {
  TmpDir tmp;
  auto ds = synth_digits(2, 4);
  write_idx(ds, tmp.file("img"), tmp.file("lab"));
  auto ds3 = synth_digits(3, 4);
  write_idx(ds3, tmp.file("img3"), tmp.file("lab3"));
  CHECK_THROWS_WITH_AS(load_idx(tmp.file("img"), tmp.file("lab3")),
                       doctest::Contains("count mismatch"), IoError);
}

TEST_CASE("subset is balanced, seeded, and bounded") {
  auto ds = synth_digits(20, 7);
  auto s1 = subset_per_class(ds, 5, 42);
  auto s2 = subset_per_class(ds, 5, 42);
  auto s3 = subset_per_class(ds, 5, 43);
  CHECK(s1.size() == 50);
  CHECK(s1.images == s2.images);
  CHECK(s1.labels == s2.labels);
  CHECK_FALSE(s1.images == s3.images);
  int counts[10] = {0};
  for (int l : s1.labels) counts[l]++;
  for (int c = 0; c < 10; ++c) CHECK(counts[c] == 5);
  CHECK_THROWS_AS(subset_per_class(ds, 21, 1), std::invalid_argument);
}

TEST_CASE("synthetic digits are distinct across classes and varied within") {
  auto ds = synth_digits(5, 11);
  // centroid distance between any two classes comfortably above zero
  std::vector<std::vector<double>> centroid(10, std::vector<double>(784, 0.0));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto img = image_row(ds.images, i).data();
    for (std::size_t j = 0; j < 784; ++j)
      centroid[static_cast<std::size_t>(ds.labels[i])][j] += img[j] / 5.0;
  }
  for (int a = 0; a < 10; ++a)
    for (int b = a + 1; b < 10; ++b) {
      double d = l2_dist(centroid[static_cast<std::size_t>(a)],
                         centroid[static_cast<std::size_t>(b)]);
      CAPTURE(a);
      CAPTURE(b);
      CHECK(d > 1.0);
    }
  // same class, different samples differ (jitter is applied)
  CHECK_FALSE(image_row(ds.images, 0) == image_row(ds.images, 1));
  // pixels stay in range
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    CHECK(ds.images[i] >= 0.0);
    CHECK(ds.images[i] <= 1.0);
  }
}

TEST_CASE("pgm grid bytes") {
  TmpDir tmp;
  std::vector<Tensor> one = {Tensor({1}, {1.0})};
  write_pgm_grid(tmp.file("one.pgm"), one, 1);
  std::string content = slurp(tmp.file("one.pgm"));
  CHECK(content == std::string("P5\n1 1\n255\n") + char(255));

  std::vector<Tensor> four(4, Tensor::full({4}, 0.5));
  write_pgm_grid(tmp.file("four.pgm"), four, 2);
  std::string c4 = slurp(tmp.file("four.pgm"));
  CHECK(c4.substr(0, 9) == "P5\n4 4\n25");
  CHECK(c4.size() == 11 + 16);
}

TEST_CASE("csv writing") {
  TmpDir tmp;
  write_csv(tmp.file("t.csv"), {"a", "b"}, {{"1", "x,y"}, {fmt(0.5), "q\"q"}});
  CHECK(slurp(tmp.file("t.csv")) == "a,b\n1,\"x,y\"\n0.5,\"q\"\"q\"\n");
}

TEST_CASE("checkpoint round trip is byte identical") {
  TmpDir tmp;
  Rng rng(5);
  ParamStore params = init_params({7, 4, 3}, rng);
  save_checkpoint(tmp.file("ck"), params, {{"model", "test net"}, {"epochs", "3"}});
  auto ck = load_checkpoint(tmp.file("ck"));
  CHECK(ck.meta.at("model") == "test net");
  CHECK(ck.meta.at("epochs") == "3");
  for (const auto& name : params.names()) CHECK(ck.params.at(name) == params.at(name));

  save_checkpoint(tmp.file("ck2"), ck.params, ck.meta);
  CHECK(slurp(tmp.file("ck.manifest")) == slurp(tmp.file("ck2.manifest")));
  CHECK(slurp(tmp.file("ck.blob")) == slurp(tmp.file("ck2.blob")));

  CHECK_THROWS_AS(load_checkpoint(tmp.file("nope")), IoError);
}
