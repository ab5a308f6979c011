#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fsf/dataset.hpp"
#include "fsf/episode.hpp"
#include "fsf/preprocess.hpp"

using namespace fsf;
namespace fs = std::filesystem;

namespace {

fs::path write_temp_manifest(const std::string& body, const std::string& name) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << body;
  return p;
}

ClassSection tiny_section(int classes, int per_class, std::uint64_t seed = 3) {
  SyntheticConfig cfg;
  cfg.n_classes = classes;
  cfg.examples_per_class = per_class;
  cfg.image_size = 16;
  cfg.seed = seed;
  return make_synthetic_dataset(cfg);
}

}  // namespace

TEST_CASE("manifest: 64/16/20 split counts") {
  std::string body = "class,split,path\n";
  for (int i = 0; i < 64; ++i) body += "b" + std::to_string(i) + ",base,x.ppm\n";
  for (int i = 0; i < 16; ++i) body += "v" + std::to_string(i) + ",val,x.ppm\n";
  for (int i = 0; i < 20; ++i) body += "n" + std::to_string(i) + ",novel,x.ppm\n";
  auto p = write_temp_manifest(body, "manifest_64_16_20.csv");
  SplitManifest m = load_split_manifest(p);
  CHECK(m.base_classes.size() == 64);
  CHECK(m.validation_classes.size() == 16);
  CHECK(m.novel_classes.size() == 20);
}

TEST_CASE("manifest: overlapping splits rejected") {
  auto p = write_temp_manifest("class,split,path\ndog,base,a.ppm\ndog,novel,b.ppm\n",
                               "manifest_overlap.csv");
  CHECK_THROWS_WITH_AS(load_split_manifest(p),
                       doctest::Contains("overlapping splits"), std::runtime_error);
}

TEST_CASE("manifest: minimal 3/1/2 layout is valid") {
  auto p = write_temp_manifest(
      "class,split,path\na,base,1.ppm\nb,base,2.ppm\nc,base,3.ppm\nd,val,4.ppm\n"
      "e,novel,5.ppm\nf,novel,6.ppm\n",
      "manifest_min.csv");
  SplitManifest m = load_split_manifest(p);
  CHECK(m.base_classes.size() == 3);
  CHECK(m.validation_classes.size() == 1);
  CHECK(m.novel_classes.size() == 2);
}

TEST_CASE("manifest: missing file and malformed rows") {
  CHECK_THROWS_AS(load_split_manifest("/nonexistent/manifest.csv"), std::runtime_error);
  auto bad = write_temp_manifest("class,split,path\nonly_one_field\n", "manifest_bad.csv");
  CHECK_THROWS_AS(load_split_manifest(bad), std::runtime_error);
  auto badsplit =
      write_temp_manifest("class,split,path\na,training,x.ppm\n", "manifest_badsplit.csv");
  CHECK_THROWS_AS(load_split_manifest(badsplit), std::runtime_error);
}

TEST_CASE("episode sampling: counts, determinism, disjointness") {
  ClassSection section = tiny_section(20, 5);
  EpisodeSpec spec{5, 1, 2, 99};
  Episode ep = sample_episode(section, spec);
  CHECK(ep.support.size() == 5);
  CHECK(ep.query.size() == 10);
  CHECK(ep.classes.size() == 5);

  Episode ep2 = sample_episode(section, spec);
  REQUIRE(ep2.classes == ep.classes);
  for (std::size_t i = 0; i < ep.support.size(); ++i)
    CHECK(ep.support[i].image == ep2.support[i].image);
  for (std::size_t i = 0; i < ep.query.size(); ++i)
    CHECK(ep.query[i].image == ep2.query[i].image);

  // support/query disjoint per class, labels in range
  for (const auto& s : ep.support) {
    CHECK(s.label >= 0);
    CHECK(s.label < 5);
    for (const auto& q : ep.query) CHECK(s.image != q.image);
  }
}

TEST_CASE("episode sampling: insufficient classes / examples") {
  ClassSection small = tiny_section(4, 5);
  CHECK_THROWS_WITH_AS(sample_episode(small, {5, 1, 1, 0}),
                       doctest::Contains("insufficient classes"), std::runtime_error);
  ClassSection shallow = tiny_section(6, 3);
  CHECK_THROWS_WITH_AS(sample_episode(shallow, {5, 2, 2, 0}),
                       doctest::Contains("insufficient examples"), std::runtime_error);
}

TEST_CASE("episode sampling: seed variation changes the draw") {
  ClassSection section = tiny_section(20, 6);
  Episode a = sample_episode(section, {5, 2, 3, 1});
  Episode b = sample_episode(section, {5, 2, 3, 2});
  bool identical = a.classes == b.classes;
  if (identical)
    for (std::size_t i = 0; i < a.support.size(); ++i)
      identical = identical && a.support[i].image == b.support[i].image;
  CHECK_FALSE(identical);
}

TEST_CASE("preprocess_train: channel normalization zeroes the mean value") {
  Image img(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      img.at(0, y, x) = 0.485f;
      img.at(1, y, x) = 0.5f;
      img.at(2, y, x) = 0.5f;
    }
  PreprocessConfig cfg = PreprocessConfig::toy(16);
  cfg.jitter_strength = 0;
  cfg.flip_probability = 0;
  cfg.min_crop_scale = 1.0;
  Rng rng(0);
  Tensor4 t = preprocess_train(img, cfg, rng);
  CHECK(t.c == 3);
  CHECK(t.h == 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) CHECK(t.at(0, 0, y, x) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("preprocess_train: forced flip mirrors the crop") {
  Image img(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(x) / 8.f;
  PreprocessConfig cfg = PreprocessConfig::toy(8);
  cfg.jitter_strength = 0;
  cfg.flip_probability = 1.0;
  cfg.min_crop_scale = 1.0;
  Rng rng(0);
  Tensor4 flipped = preprocess_train(img, cfg, rng);
  cfg.flip_probability = 0.0;
  Rng rng2(0);
  Tensor4 plain = preprocess_train(img, cfg, rng2);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      CHECK(flipped.at(0, 0, y, x) == doctest::Approx(plain.at(0, 0, y, 7 - x)));
}

TEST_CASE("preprocess_train: all randomness disabled is deterministic") {
  ClassSection sec = tiny_section(1, 1);
  const Image& img = sec.begin()->second[0];
  PreprocessConfig cfg = PreprocessConfig::toy(16);
  cfg.jitter_strength = 0;
  cfg.flip_probability = 0;
  cfg.min_crop_scale = 1.0;
  Rng r1(11), r2(999);
  Tensor4 a = preprocess_train(img, cfg, r1);
  Tensor4 b = preprocess_train(img, cfg, r2);
  REQUIRE(a.v.size() == b.v.size());
  for (std::size_t i = 0; i < a.v.size(); ++i) CHECK(a.v[i] == b.v[i]);
}

TEST_CASE("preprocess_eval: geometry of resize + center crop") {
  Image img(512, 512);
  // mark a gradient so we can locate the crop offset
  for (int y = 0; y < 512; ++y)
    for (int x = 0; x < 512; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(y) / 512.f;
  PreprocessConfig cfg = PreprocessConfig::high_resolution();
  Tensor4 t = preprocess_eval(img, cfg);
  CHECK(t.c == 3);
  CHECK(t.h == 224);
  CHECK(t.w == 224);
  // offset is (256-224)/2 = 16: the first output row equals resized row 16
  Image resized = resize_bilinear(img, 256, 256);
  double expect = (resized.at(0, 16, 100) - cfg.channel_means[0]) / cfg.channel_stds[0];
  CHECK(t.at(0, 0, 0, 100) == doctest::Approx(expect));
}

TEST_CASE("preprocess_eval: input already at resize size is not resampled") {
  Image img(10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = ((x + y) % 2) ? 1.f : 0.f;
  PreprocessConfig cfg;
  cfg.eval_resize = 10;
  cfg.eval_crop = 8;
  Tensor4 t = preprocess_eval(img, cfg);
  // checkerboard survives exactly (no interpolation smear), offset (1,1)
  double v00 = t.at(0, 0, 0, 0) * cfg.channel_stds[0] + cfg.channel_means[0];
  CHECK(v00 == doctest::Approx(img.at(0, 1, 1)));
}

TEST_CASE("preprocess_eval: uniform image maps to (v-mean)/std per channel") {
  Image img(12, 12);
  for (auto& p : img.pix) p = 0.7f;
  PreprocessConfig cfg = PreprocessConfig::toy(8);
  Tensor4 t = preprocess_eval(img, cfg);
  for (int c = 0; c < 3; ++c) {
    double expect = (0.7 - cfg.channel_means[c]) / cfg.channel_stds[c];
    CHECK(t.at(0, c, 3, 3) == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("normalization round-trip within 1e-6") {
  PreprocessConfig cfg;
  Rng rng(5);
  std::uniform_real_distribution<double> uni(0, 1);
  for (int i = 0; i < 1000; ++i) {
    double x = uni(rng);
    int c = i % 3;
    double y = (x - cfg.channel_means[c]) / cfg.channel_stds[c];
    CHECK(std::abs(y * cfg.channel_stds[c] + cfg.channel_means[c] - x) < 1e-6);
  }
}

TEST_CASE("synthetic dataset: counts and determinism") {
  SyntheticConfig cfg;
  cfg.n_classes = 10;
  cfg.examples_per_class = 50;
  cfg.image_size = 32;
  cfg.seed = 123;
  ClassSection a = make_synthetic_dataset(cfg);
  CHECK(a.size() == 10);
  std::size_t total = 0;
  for (const auto& [cls, imgs] : a) {
    total += imgs.size();
    for (const auto& img : imgs) {
      CHECK(img.h == 32);
      CHECK(img.w == 32);
    }
  }
  CHECK(total == 500);

  ClassSection b = make_synthetic_dataset(cfg);
  for (const auto& [cls, imgs] : a) {
    const auto& other = b.at(cls);
    REQUIRE(other.size() == imgs.size());
    for (std::size_t i = 0; i < imgs.size(); ++i) CHECK(imgs[i].pix == other[i].pix);
  }
}

TEST_CASE("synthetic dataset: domain knob shifts channel statistics") {
  SyntheticConfig cfg;
  cfg.n_classes = 4;
  cfg.examples_per_class = 10;
  cfg.image_size = 24;
  cfg.seed = 9;
  cfg.domain = 0.0;
  auto means_a = section_channel_means(make_synthetic_dataset(cfg));
  cfg.domain = 1.0;
  auto means_b = section_channel_means(make_synthetic_dataset(cfg));
  double diff = 0;
  for (int c = 0; c < 3; ++c) diff += std::abs(means_a[c] - means_b[c]);
  CHECK(diff > 0.05);
}

TEST_CASE("synthetic dataset: PPM round trip and manifest output") {
  SyntheticConfig cfg;
  cfg.n_classes = 2;
  cfg.examples_per_class = 3;
  cfg.image_size = 16;
  cfg.seed = 2;
  ClassSection sec = make_synthetic_dataset(cfg);

  fs::path root = fs::temp_directory_path() / "fsf_synth_test";
  fs::remove_all(root);
  fs::create_directories(root);
  auto manifest = root / "manifest.csv";
  write_synthetic_section(sec, Split::Novel, root / "data", manifest);

  SplitManifest m = load_split_manifest(manifest);
  CHECK(m.novel_classes.size() == 2);
  ClassSection loaded = load_section(m, Split::Novel, root);
  REQUIRE(loaded.size() == 2);
  // 8-bit quantization error only
  const Image& orig = sec.begin()->second[0];
  const Image& back = loaded.begin()->second[0];
  REQUIRE(back.pix.size() == orig.pix.size());
  for (std::size_t i = 0; i < orig.pix.size(); ++i)
    CHECK(std::abs(back.pix[i] - orig.pix[i]) <= 0.5f / 255.f + 1e-6f);
}
