#include <gtest/gtest.h>

#include <filesystem>

#include "iay/io.hpp"
#include "iay/mc_engine.hpp"

using namespace iay;

namespace {
std::string tmpdir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("iay_test_io_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}
}  // namespace

TEST(Io, ParsesAtomsAndCurves) {
  const std::string text = R"([
  {"atoms": [[-1, 0.5], [1, 0.5]]},
  {"call_curve": {"strikes": [-2, 0, 2], "prices": [2, 1, 0]}}
])";
  const MarginalSequence seq = parse_measures_text(text);
  ASSERT_EQ(seq.size(), 2u);
  EXPECT_FALSE(seq[0].is_curve());
  EXPECT_TRUE(seq[1].is_curve());
}

TEST(Io, SingleObjectIsOneMeasure) {
  EXPECT_EQ(parse_measures_text(R"({"atoms": [[0, 1]]})").size(), 1u);
}

TEST(Io, ErrorsCarryLineNumbers) {
  const std::string text = "[\n  {\"atoms\": [[-1, 0.5], [1, 0.5]]},\n  {\"atoms\": [[-1, 0.45], [1, 0.45]]}\n]";
  try {
    parse_measures_text(text, "seq.json");
    FAIL();
  } catch (const InputError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("seq.json:3"), std::string::npos) << m;
    EXPECT_NE(m.find("mass deficit"), std::string::npos) << m;
  }
  EXPECT_THROW(parse_measures_text("[{\"atoms\": [[0, 1]]},\n oops]"), InputError);
}

TEST(Io, ConvexOrderErrorNamesPair) {
  const std::string text = R"([{"atoms": [[-2, 0.5], [2, 0.5]]}, {"atoms": [[-1, 0.5], [1, 0.5]]}])";
  try {
    parse_measures_text(text);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("measures 1 and 2"), std::string::npos) << e.what();
  }
  EXPECT_EQ(parse_measures_text(text, "x", false).size(), 2u);
}

TEST(Io, RoundTripJson) {
  const MarginalSequence seq = {symmetric_pair(1), symmetric_pair(2)};
  const MarginalSequence back = parse_measures_text(sequence_to_json(seq).dump());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].atoms()[1].x, 2.0);
}

TEST(Io, BoundariesCsvHeaderAndPrecision) {
  const MarginalSequence seq = {symmetric_pair(1), symmetric_pair(2)};
  const BoundarySet b = compute_boundaries(seq, uniform_grid(0.0, 0.3, 4));
  const std::string csv = boundaries_csv(b);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "y,xi_1,xi_2,K_1,K_2,j_2");
  EXPECT_NE(csv.find("\n" + fmt17(b.y[1]) + ","), std::string::npos);
  EXPECT_EQ(fmt17(1.0 / 3.0), "0.33333333333333331");
}

TEST(Io, McDumpRoundTrip) {
  const MarginalSequence seq = {symmetric_pair(1), symmetric_pair(2)};
  const BoundarySet b = compute_boundaries(seq, build_y_grid(seq, 0.1));
  SimOptions o;
  o.n_paths = 50;
  const PathEnsemble e = simulate(b, o);
  const std::string path = tmpdir("dump") + "/mc.bin";
  const json meta = write_mc_dump(path, e);
  EXPECT_EQ(meta["rows"], 50);
  EXPECT_TRUE(std::filesystem::exists(path + ".json"));
  EXPECT_EQ(std::filesystem::file_size(path), 50u * 4u * 8u);
  const auto v = read_mc_dump(path, 2);
  ASSERT_EQ(v.size(), 200u);
  EXPECT_EQ(v[0], e.paths[0].levels[0].m);
  EXPECT_EQ(v[3], e.paths[0].levels[1].max_lo);
}
