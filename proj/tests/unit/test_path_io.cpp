#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "margint/errors.hpp"
#include "margint/path_io.hpp"

using namespace margint;

namespace {

SamplePath small_path() {
  const auto model = AdditiveModelSpec::make(
      1.0, {ComponentFunction::sine(1.0), ComponentFunction::polynomial({-0.5, 1.0})}, 0.5);
  return simulate_path(MixingProcessSpec::independent(2), model, 0.05, 5.0, 17);
}

void expect_same(const SamplePath& a, const SamplePath& b) {
  EXPECT_EQ(a.dim, b.dim);
  EXPECT_EQ(a.delta, b.delta);
  EXPECT_EQ(a.times, b.times);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
}

}  // namespace

TEST(PathIo, CsvRoundTripIsExact) {
  const SamplePath p = small_path();
  std::stringstream ss;
  write_path_csv(ss, p, "0123456789abcdef");
  const std::string text = ss.str();
  EXPECT_EQ(text.rfind("# config_hash=0123456789abcdef", 0), 0u);
  EXPECT_NE(text.find("t,x_1,x_2,y"), std::string::npos);
  const SamplePath q = read_path_csv(ss);
  expect_same(p, q);
  EXPECT_NEAR(q.horizon, p.horizon, 1e-12);
}

TEST(PathIo, BinaryRoundTripIsExact) {
  const SamplePath p = small_path();
  std::stringstream ss;
  write_path_binary(ss, p);
  const SamplePath q = read_path_binary(ss);
  expect_same(p, q);
  EXPECT_EQ(q.seed, p.seed);
  EXPECT_EQ(q.horizon, p.horizon);
}

TEST(PathIo, FilesDispatchOnExtension) {
  const auto dir = std::filesystem::temp_directory_path() / "margint_path_io_test";
  std::filesystem::create_directories(dir);
  const SamplePath p = small_path();
  save_path(dir / "p.csv", p);
  save_path(dir / "p.bin", p);
  expect_same(load_path(dir / "p.csv"), p);
  expect_same(load_path(dir / "p.bin"), p);
  std::filesystem::remove_all(dir);
}

TEST(PathIo, MalformedInputIsDataError) {
  EXPECT_THROW(load_path("/nonexistent/dir/path.csv"), DataError);
  {
    std::stringstream ss("t,x_1,y\n0,0.5,1\n0.1,abc,2\n");
    EXPECT_THROW(read_path_csv(ss), DataError);
  }
  {
    std::stringstream ss("t,x_1,y\n0,0.5\n");
    EXPECT_THROW(read_path_csv(ss), DataError);
  }
  {
    std::stringstream ss("# only a comment\n");
    EXPECT_THROW(read_path_csv(ss), DataError);
  }
  {
    std::stringstream ss("time,a,b\n0,0.5,1\n");
    EXPECT_THROW(read_path_csv(ss), DataError);
  }
  {
    std::stringstream ss(std::string("\x02\x00", 2));
    EXPECT_THROW(read_path_binary(ss), DataError);
  }
}
