#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "lidsvd/container.hpp"

namespace fs = std::filesystem;
using namespace lidsvd;

namespace {

container::ModelContainer sample() {
  container::ModelContainer c;
  RowMatrix a(2, 3);
  a << 1, 2, 3, 4, 5, std::nextafter(6.0, 7.0);
  c.put("alpha", a);
  c.put("beta", Vector((Vector(2) << -0.0, 1e-300).finished()));
  c.put("ids", std::vector<int>{3, 1, 4});
  c.put("empty", RowMatrix(0, 5));
  c.meta["kind"] = "test";
  c.meta["n"] = 7;
  return c;
}

Errc code_of(const std::string& bytes) {
  try {
    container::ModelContainer::deserialize(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "accepted a damaged container";
  return Errc::invalid_argument;
}

}  // namespace

TEST(Container, RoundTripBitExact) {
  const auto c = sample();
  const std::string bytes = c.serialize();
  const auto back = container::ModelContainer::deserialize(bytes);
  EXPECT_EQ(back.serialize(), bytes);
  EXPECT_EQ(back.get("alpha"), c.get("alpha"));
  EXPECT_TRUE(std::signbit(back.get_vector("beta")[0]));
  EXPECT_EQ(back.get_ints("ids"), (std::vector<int>{3, 1, 4}));
  EXPECT_EQ(back.get("empty").cols(), 5);
  EXPECT_EQ(back.meta["kind"], "test");
  EXPECT_EQ(bytes.substr(0, 8), "LIDSVDMC");
}

TEST(Container, FileRoundTrip) {
  const fs::path path = fs::temp_directory_path() / "lidsvd_container_test.bin";
  sample().save(path);
  EXPECT_EQ(container::ModelContainer::load(path).serialize(), sample().serialize());
  try {
    container::ModelContainer::load(path.string() + ".missing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::file_not_found);
  }
}

TEST(Container, ShapeChecks) {
  const auto c = sample();
  EXPECT_NO_THROW(c.get("alpha", 2, 3));
  EXPECT_NO_THROW(c.get("alpha", -1, 3));
  try {
    c.get("alpha", 3, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape_mismatch);
    EXPECT_NE(std::string(e.what()).find("alpha"), std::string::npos);
  }
  EXPECT_THROW(c.get("nope"), Error);
}

TEST(Container, FaultInjection) {
  const std::string good = sample().serialize();
  EXPECT_EQ(code_of(good.substr(0, good.size() - 3)), Errc::container_integrity);
  EXPECT_EQ(code_of(good.substr(0, 10)), Errc::container_integrity);
  EXPECT_EQ(code_of(good + "x"), Errc::container_integrity);

  std::string flipped = good;
  flipped[flipped.size() - 9] ^= 0x01;
  EXPECT_EQ(code_of(flipped), Errc::container_integrity);

  std::string magic = good;
  magic[0] = 'X';
  EXPECT_EQ(code_of(magic), Errc::container_integrity);

  std::string version = good;
  version[8] = 2;
  EXPECT_EQ(code_of(version), Errc::version_mismatch);

  std::string shape = good;
  const auto at = shape.find("\"name\": \"alpha\"");
  ASSERT_NE(at, std::string::npos);
  const auto rows = shape.find("\"rows\": 2", at);
  ASSERT_NE(rows, std::string::npos);
  shape[rows + 9] = '3';
  try {
    container::ModelContainer::deserialize(shape);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape_mismatch);
    EXPECT_NE(std::string(e.what()).find("alpha"), std::string::npos);
  }

  std::string manifest = good;
  manifest[container::kHeaderBytes] = '#';
  EXPECT_EQ(code_of(manifest), Errc::container_integrity);
}
