#include <png.h>

#include <cmath>
#include <cstring>

#include "doctest.h"
#include "framesift/featurize.hpp"
#include "support/fixtures.hpp"
#include "support/reference.hpp"

using namespace framesift;
using fixtures::TempDir;

namespace {

RawFrame gray(std::size_t w, std::size_t h, std::vector<double> px) {
  return RawFrame{w, h, 1, std::move(px)};
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::Io;
}

void write_png(const std::filesystem::path& path, std::size_t w, std::size_t h, bool color,
               const std::vector<std::uint8_t>& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  REQUIRE(png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr) != 0);
}

}  // namespace

TEST_CASE("blockmean examples") {
  CHECK(blockmean_features(gray(4, 4, std::vector<double>(16, 0.5)), 2) ==
        std::vector<double>{0.5, 0.5, 0.5, 0.5});
  CHECK(blockmean_features(gray(2, 2, {0, 1, 1, 0}), 2) == std::vector<double>{0, 1, 1, 0});
  std::vector<double> checker(16);
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) checker[y * 4 + x] = (x + y) % 2 ? 1.0 : 0.0;
  }
  CHECK(blockmean_features(gray(4, 4, checker), 1) == std::vector<double>{0.5});
}

TEST_CASE("blockmean remainder pixels join the last block") {
  // 5 wide, 3 tall, grid 2: columns {0,1} and {2,3,4}; rows {0} and {1,2}.
  std::vector<double> px(15);
  for (std::size_t i = 0; i < 15; ++i) px[i] = static_cast<double>(i) / 14.0;
  const auto f = blockmean_features(gray(5, 3, px), 2);
  REQUIRE(f.size() == 4);
  auto mean = [&](std::vector<std::size_t> idx) {
    double s = 0;
    for (auto i : idx) s += px[i];
    return s / static_cast<double>(idx.size());
  };
  CHECK(f[0] == doctest::Approx(mean({0, 1})).epsilon(1e-12));
  CHECK(f[1] == doctest::Approx(mean({2, 3, 4})).epsilon(1e-12));
  CHECK(f[2] == doctest::Approx(mean({5, 6, 10, 11})).epsilon(1e-12));
  CHECK(f[3] == doctest::Approx(mean({7, 8, 9, 12, 13, 14})).epsilon(1e-12));
}

TEST_CASE("blockmean orders cells by block row, block column, channel") {
  RawFrame rgb{2, 1, 3, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}};
  CHECK(blockmean_features(rgb, 1).size() == 3);
  // grid 1 on a 2x1 image is fine; grid 2 needs min(w, h) >= 2.
  CHECK(code_of([&] { blockmean_features(rgb, 2); }) == ErrorCode::GridTooFine);
  RawFrame rgb2{2, 2, 3, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 0.0, 0.5}};
  CHECK(blockmean_features(rgb2, 2) == rgb2.pixels);
}

TEST_CASE("blockmean rejects bad grids and frames") {
  CHECK(code_of([] { blockmean_features(gray(3, 5, std::vector<double>(15, 0)), 4); }) ==
        ErrorCode::GridTooFine);
  CHECK(code_of([] { blockmean_features(gray(3, 3, std::vector<double>(9, 0)), 0); }) ==
        ErrorCode::GridTooFine);
  CHECK(code_of([] { blockmean_features(gray(2, 2, {0, 0, 0, 1.5}), 1); }) ==
        ErrorCode::InvalidInput);
  CHECK(code_of([] { blockmean_features(gray(2, 2, {0, 0, 0}), 1); }) == ErrorCode::InvalidInput);
  CHECK(code_of([] { blockmean_features(RawFrame{1, 1, 2, {0, 0}}, 1); }) ==
        ErrorCode::InvalidInput);
}

TEST_CASE("histogram examples") {
  CHECK(grayscale_histogram(gray(2, 2, {0, 0, 0, 0}), 4) == std::vector<double>{1, 0, 0, 0});
  CHECK(grayscale_histogram(gray(2, 2, {1, 1, 1, 1}), 4) == std::vector<double>{0, 0, 0, 1});
  CHECK(grayscale_histogram(gray(2, 1, {0.1, 0.9}), 2) == std::vector<double>{0.5, 0.5});
}

TEST_CASE("histogram uses luminance for color frames") {
  // Pure red: 0.299, bin 1 of 4. Pure green: 0.587, bin 2. Pure blue: 0.114, bin 0.
  RawFrame rgb{3, 1, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}};
  const auto h = grayscale_histogram(rgb, 4);
  CHECK(h[0] == doctest::Approx(1.0 / 3));
  CHECK(h[1] == doctest::Approx(1.0 / 3));
  CHECK(h[2] == doctest::Approx(1.0 / 3));
  CHECK(h[3] == 0.0);
  CHECK(code_of([] { grayscale_histogram(gray(1, 1, {0}), 1); }) == ErrorCode::InvalidInput);
}

TEST_CASE("histogram bins are half-open") {
  const auto h = grayscale_histogram(gray(3, 1, {0.25, 0.5, 0.75}), 4);
  CHECK(h == std::vector<double>{0, 1.0 / 3, 1.0 / 3, 1.0 / 3});
}

TEST_CASE("featurizers are deterministic") {
  SplitMix64 rng(3);
  RawFrame f{7, 5, 3, std::vector<double>(105)};
  for (auto& p : f.pixels) p = rng.uniform();
  const RawFrame copy = f;
  CHECK(blockmean_features(f, 3) == blockmean_features(copy, 3));
  CHECK(grayscale_histogram(f, 16) == grayscale_histogram(copy, 16));
  FeaturizerOptions opts;
  opts.kind = parse_featurizer("histogram");
  opts.bins = 8;
  CHECK(featurize_frame(f, opts).size() == 8);
  opts.kind = parse_featurizer("blockmean");
  opts.grid = 2;
  CHECK(featurize_frame(f, opts).size() == 12);
  CHECK(code_of([] { parse_featurizer("sift"); }) == ErrorCode::InvalidInput);
}

TEST_CASE("cosine similarity examples") {
  auto s = cosine_similarity_matrix(std::vector<double>{1, 2, 1, 2}, 2, 2);
  CHECK(s(0, 0) == 1.0);
  CHECK(s(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s(1, 0) == s(0, 1));

  s = cosine_similarity_matrix(std::vector<double>{1, 0, 0, 1}, 2, 2);
  CHECK(s(0, 1) == 0.0);
  CHECK(s(1, 1) == 1.0);

  s = cosine_similarity_matrix(std::vector<double>{1, 0, 1, 1}, 2, 2);
  CHECK(std::abs(s(0, 1) - 1.0 / std::sqrt(2.0)) <= 1e-9);
  CHECK(std::abs(s(0, 1) - 0.70711) <= 1e-5);
}

TEST_CASE("zero rows are similar only to themselves") {
  const auto s = cosine_similarity_matrix(std::vector<double>{0, 0, 1, 0, 0, 0}, 3, 2);
  CHECK(s(0, 0) == 1.0);
  CHECK(s(0, 1) == 0.0);
  CHECK(s(0, 2) == 0.0);
  CHECK(s(2, 2) == 1.0);
  CHECK(s(1, 1) == 1.0);
}

TEST_CASE("cosine similarity rejects bad input") {
  const std::vector<double> bad{1, std::nan("")};
  CHECK(code_of([&] { cosine_similarity_matrix(bad, 1, 2); }) == ErrorCode::NonFiniteInput);
  CHECK(code_of([] { cosine_similarity_matrix(std::vector<double>{1, 2, 3}, 2, 2); }) ==
        ErrorCode::InvalidInput);
}

TEST_CASE("similarity matrix properties on random features") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t t = 1 + rng.below(40);
    const std::size_t d = 1 + rng.below(10);
    const auto f = fixtures::random_features(rng, t, d);
    const auto s = cosine_similarity_matrix(f);
    const auto oracle = ref::cosine(fixtures::rows_of(f));
    for (std::size_t i = 0; i < t; ++i) {
      REQUIRE(std::abs(s(i, i) - 1.0) <= 1e-9);
      for (std::size_t j = 0; j < t; ++j) {
        REQUIRE(s(i, j) == s(j, i));
        REQUIRE(s(i, j) >= -1 - 1e-9);
        REQUIRE(s(i, j) <= 1 + 1e-9);
        REQUIRE(std::abs(s(i, j) - oracle[i][j]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("positive row scaling leaves the similarity matrix unchanged") {
  SplitMix64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t t = 2 + rng.below(30);
    const std::size_t d = 1 + rng.below(8);
    const auto f = fixtures::random_features(rng, t, d);
    std::vector<double> scaled(f.values().begin(), f.values().end());
    for (std::size_t i = 0; i < t; ++i) {
      const double k = std::exp(8.0 * (rng.uniform() - 0.5));
      for (std::size_t j = 0; j < d; ++j) scaled[i * d + j] *= k;
    }
    const auto a = cosine_similarity_matrix(f);
    const auto b = cosine_similarity_matrix(scaled, t, d);
    for (std::size_t i = 0; i < t * t; ++i) REQUIRE(std::abs(a.values()[i] - b.values()[i]) <= 1e-12);
  }
}

TEST_CASE("embedding file layout") {
  const FrameFeatures f("ab", 1, 1, {0.0});
  const auto bytes = write_embedding_file(f);
  // 5 magic + 4 T + 4 d + 4 payload, then u32 id length and the id.
  REQUIRE(bytes.size() == 17 + 4 + 2);
  CHECK(std::memcmp(bytes.data(), "FSEM1", 5) == 0);
  CHECK(bytes[5] == 1);
  CHECK(bytes[9] == 1);
  CHECK(bytes[17] == 2);
  CHECK(bytes[21] == 'a');
  CHECK(read_embedding_file(bytes) == f);
}

TEST_CASE("embedding file round-trips bit-exactly") {
  SplitMix64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t t = 1 + rng.below(20);
    const std::size_t d = 1 + rng.below(20);
    std::vector<double> values(t * d);
    for (auto& v : values) v = static_cast<float>(rng.normal() * 100.0);
    const FrameFeatures f("video-" + std::to_string(trial), t, d, values);
    const auto bytes = write_embedding_file(f);
    const auto back = read_embedding_file(bytes);
    CHECK(back == f);
    CHECK(write_embedding_file(back) == bytes);
  }
  const FrameFeatures seven("r", 7, 5, std::vector<double>(35, 0.25));
  CHECK(read_embedding_file(write_embedding_file(seven)) == seven);
}

TEST_CASE("embedding file errors") {
  auto bytes = write_embedding_file(FrameFeatures("v", 2, 3, std::vector<double>(6, 1.0)));
  auto bad_magic = bytes;
  std::memcpy(bad_magic.data(), "XXXX1", 5);
  CHECK(code_of([&] { read_embedding_file(bad_magic); }) == ErrorCode::BadMagic);
  CHECK(code_of([] { read_embedding_file(std::vector<std::uint8_t>{'F', 'S'}); }) ==
        ErrorCode::BadMagic);

  auto truncated = bytes;
  truncated.resize(5 + 8 + 10);
  CHECK(code_of([&] { read_embedding_file(truncated); }) == ErrorCode::TruncatedPayload);
  truncated.resize(7);
  CHECK(code_of([&] { read_embedding_file(truncated); }) == ErrorCode::TruncatedPayload);

  auto zero = bytes;
  zero[5] = 0;
  CHECK(code_of([&] { read_embedding_file(zero); }) == ErrorCode::ZeroDimension);

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK(code_of([&] { read_embedding_file(trailing); }) == ErrorCode::TrailingData);

  CHECK(code_of([] {
          write_embedding_file(FrameFeatures("v", 1, 1, {1e300}));
        }) == ErrorCode::NonFiniteInput);
}

TEST_CASE("embedding files on disk") {
  TempDir dir;
  const FrameFeatures f("clip", 3, 2, {1, 2, 3, 4, 5, 6});
  save_embedding_file(dir / "clip.fsem", f);
  CHECK(load_embedding_file(dir / "clip.fsem") == f);
  CHECK(code_of([&] { load_embedding_file(dir / "missing.fsem"); }) == ErrorCode::Io);
}

TEST_CASE("PNM variants decode to the same pixels") {
  TempDir dir;
  fixtures::write_text(dir / "a.pgm", "P2\n# comment\n3 2\n255\n0 51 102\n153 204 255\n");
  const auto ascii = load_image(dir / "a.pgm");
  CHECK(ascii.width == 3);
  CHECK(ascii.height == 2);
  CHECK(ascii.channels == 1);
  CHECK(ascii.pixels[1] == doctest::Approx(0.2));

  write_pnm(dir / "b.pgm", ascii);
  const auto binary = load_image(dir / "b.pgm");
  CHECK(binary.pixels == ascii.pixels);

  fixtures::write_text(dir / "c.ppm", "P3 1 1 255 255 0 51\n");
  const auto color = load_image(dir / "c.ppm");
  CHECK(color.channels == 3);
  CHECK(color.pixels == std::vector<double>{1.0, 0.0, 0.2});
  write_pnm(dir / "d.ppm", color);
  CHECK(load_image(dir / "d.ppm").pixels == color.pixels);

  fixtures::write_text(dir / "bad.pgm", "P5 4 4 255\nab");
  CHECK(code_of([&] { load_image(dir / "bad.pgm"); }) == ErrorCode::InvalidInput);
  fixtures::write_text(dir / "bad2.pgm", "P7 1 1 255\n");
  CHECK(code_of([&] { load_image(dir / "bad2.pgm"); }) == ErrorCode::InvalidInput);
}

TEST_CASE("PNG decoding") {
  TempDir dir;
  write_png(dir / "g.png", 2, 2, false, {0, 255, 51, 102});
  const auto g = load_image(dir / "g.png");
  CHECK(g.channels == 1);
  CHECK(g.pixels[1] == 1.0);
  CHECK(g.pixels[2] == doctest::Approx(0.2));

  write_png(dir / "c.png", 1, 1, true, {255, 0, 51});
  const auto c = load_image(dir / "c.png");
  CHECK(c.channels == 3);
  CHECK(c.pixels == std::vector<double>{1.0, 0.0, 0.2});

  fixtures::write_text(dir / "broken.png", "not a png");
  CHECK(code_of([&] { load_image(dir / "broken.png"); }) == ErrorCode::InvalidInput);
}

TEST_CASE("frame directories are read in filename order") {
  TempDir root;
  const auto dir = root / "video7";
  std::filesystem::create_directories(dir);
  write_pnm(dir / "frame_002.pgm", gray(2, 2, {1, 1, 1, 1}));
  write_pnm(dir / "frame_001.pgm", gray(2, 2, {0, 0, 0, 0}));
  write_png(dir / "frame_003.png", 2, 2, false, {0, 255, 0, 255});
  fixtures::write_text(dir / "notes.txt", "ignored");

  const auto files = list_frame_files(dir);
  REQUIRE(files.size() == 3);
  CHECK(files[0].filename() == "frame_001.pgm");
  CHECK(files[2].filename() == "frame_003.png");

  FeaturizerOptions opts;
  opts.grid = 1;
  auto f = load_frame_directory(dir, opts);
  CHECK(f.video_id() == "video7");
  CHECK(f.frames() == 3);
  CHECK(f.row(0)[0] == 0.0);
  CHECK(f.row(1)[0] == 1.0);
  CHECK(f.row(2)[0] == 0.5);

  CHECK(load_frame_directory(dir.string() + "/", opts).video_id() == "video7");
  CHECK(load_frame_directory(dir, opts, "custom").video_id() == "custom");

  const auto empty = root / "empty";
  std::filesystem::create_directories(empty);
  CHECK(code_of([&] { load_frame_directory(empty, opts); }) == ErrorCode::ZeroDimension);
  CHECK(code_of([&] { list_frame_files(root / "nope"); }) == ErrorCode::Io);
}
