#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "actguard/error.hpp"
#include "actguard/image.hpp"
#include "test_util.hpp"

using namespace actguard;

namespace {

std::string golden(const std::string& name) { return std::string(ACTGUARD_TEST_DATA) + "/golden/" + name; }

Image noise(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Image img(w, h, {0, 0, 0});
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

}  // namespace

TEST(Som, GoldenImagesPixelExact) {
  std::ifstream in(golden("som_cases.json"));
  const auto cases = nlohmann::json::parse(in);
  ASSERT_EQ(cases.size(), 3u);
  for (const auto& c : cases) {
    const auto name = c["name"].get<std::string>();
    const Image input = decode_image(read_bytes(golden(name + ".input.ppm")));
    const Image expected = decode_image(read_bytes(golden(name + ".expected.ppm")));
    SomStyle style;
    style.radius = c["radius"].get<int>();
    style.stroke = c["stroke"].get<int>();
    style.color = {c["color"][0].get<std::uint8_t>(), c["color"][1].get<std::uint8_t>(), c["color"][2].get<std::uint8_t>()};
    const Action a = canonical_parse(c["action"].get<std::string>());
    const Image got = annotate_som(input, a, style);
    ASSERT_EQ(got.width, expected.width) << name;
    ASSERT_EQ(got.height, expected.height) << name;
    std::size_t diff = 0;
    for (std::size_t i = 0; i < got.pixels.size(); ++i) diff += got.pixels[i] != expected.pixels[i];
    EXPECT_EQ(diff, 0u) << name;
    EXPECT_NE(got, input) << name;
  }
}

TEST(Som, RingRule) {
  const SomStyle style;
  EXPECT_TRUE(on_som_ring(24, 0, style));
  EXPECT_TRUE(on_som_ring(0, -18, style));
  EXPECT_FALSE(on_som_ring(0, 17, style));
  EXPECT_FALSE(on_som_ring(25, 0, style));
  EXPECT_FALSE(on_som_ring(0, 0, style));
}

TEST(Som, NonClickActionsAreByteIdentical) {
  const auto bytes = encode_image(noise(64, 48, 1), ImageFormat::Png);
  for (const Action& a : {Action::press_home(), Action::type_text("x"), Action::scroll(Direction::Up, Point{5, 5}),
                          Action::drag({1, 1}, {30, 30}), Action::wait()}) {
    EXPECT_EQ(annotate_som_bytes(bytes, a), bytes) << canonical_serialize(a);
  }
  const std::vector<std::uint8_t> garbage = {1, 2, 3};
  EXPECT_EQ(annotate_som_bytes(garbage, Action::press_back()), garbage);
}

TEST(Som, ClickBytesKeepFormat) {
  const Image img = noise(80, 60, 2);
  for (auto fmt : {ImageFormat::Png, ImageFormat::Ppm}) {
    const auto out = annotate_som_bytes(encode_image(img, fmt), Action::long_press(40, 30));
    EXPECT_EQ(sniff_format(out), fmt);
    EXPECT_EQ(decode_image(out), annotate_som(img, Action::long_press(40, 30)));
  }
}

TEST(Som, OnlyRingPixelsChange) {
  const Image img = noise(120, 100, 3);
  const SomStyle style{10, 2, {1, 2, 3}};
  const Image out = annotate_som(img, Action::click(50, 40), style);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const bool ring = on_som_ring(x - 50, y - 40, style);
      EXPECT_EQ(out.at(x, y), ring ? style.color : img.at(x, y)) << x << "," << y;
    }
  }
}

TEST(Som, StyleValidation) {
  EXPECT_THROW(validate(SomStyle{0, 1, {}}), Error);
  EXPECT_THROW(validate(SomStyle{5, 6, {}}), Error);
  EXPECT_THROW(validate(SomStyle{5, 5, {}}), Error);
  EXPECT_NO_THROW(validate(SomStyle{5, 4, {}}));
}

TEST(Codec, RoundTrips) {
  for (auto [w, h] : {std::pair{1, 1}, std::pair{3, 7}, std::pair{257, 33}}) {
    const Image img = noise(w, h, static_cast<std::uint64_t>(w * h));
    for (auto fmt : {ImageFormat::Png, ImageFormat::Ppm}) {
      const auto bytes = encode_image(img, fmt);
      EXPECT_EQ(sniff_format(bytes), fmt);
      EXPECT_EQ(decode_image(bytes), img);
    }
  }
}

TEST(Codec, PpmHeaderComments) {
  const std::string text = "P6\n# made by hand\n2 1\n255\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  for (std::uint8_t v : {10, 20, 30, 40, 50, 60}) bytes.push_back(v);
  const Image img = decode_image(bytes);
  EXPECT_EQ(img.width, 2);
  EXPECT_EQ(img.at(1, 0), (Rgb{40, 50, 60}));
}

TEST(Codec, RejectsBrokenInput) {
  for (const std::string s : {"", "P5\n1 1\n255\n\x01", "P6\n2 2\n255\n\x01\x02", "\x89PNG\r\n\x1a\nbroken"}) {
    const std::vector<std::uint8_t> bytes(s.begin(), s.end());
    try {
      decode_image(bytes);
      FAIL() << s;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ImageDecodeError);
    }
  }
}

TEST(Codec, FileRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "actguard_image_test.png").string();
  const Image img = noise(10, 10, 4);
  write_bytes(path, encode_image(img, ImageFormat::Png));
  EXPECT_EQ(decode_image(read_bytes(path)), img);
  std::filesystem::remove(path);
  EXPECT_THROW(read_bytes(path), Error);
}
