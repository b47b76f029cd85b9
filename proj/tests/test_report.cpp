#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "test_util.hpp"

using namespace semcom;

namespace {

MetricRecord rec(Method m, std::uint64_t seed, std::size_t round, double acc, double snr = 10, double frac = 1) {
  MetricRecord r;
  r.method = m;
  r.seed = seed;
  r.round = round;
  r.test_accuracy = acc;
  r.snr_db = snr;
  r.label_fraction = frac;
  r.train_loss = 0.123456789123;
  r.uplink_scalars = round * 4096;
  r.downlink_scalars = round * 2048;
  return r;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

ExperimentGrid tiny_grid() {
  ExperimentGrid g;
  g.base = semcom::test::small_run();
  g.methods = {Method::proposed, Method::supervised};
  g.snr_db = {10.0};
  g.seeds = {1, 2};
  return g;
}

}  // namespace

TEST(Csv, EmptyInputIsContractError) {
  EXPECT_THROW(format_csv({}), contract_error);
}

TEST(Csv, OneRecordGivesHeaderPlusOneLine) {
  const auto lines = lines_of(format_csv({rec(Method::barlow, 4, 8, 0.5)}));
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0],
            "round,stage,method,seed,snr_db,label_fraction,train_loss,test_accuracy,uplink_scalars,downlink_scalars");
  EXPECT_EQ(lines[1], "8,finetune,barlow,4,10,1,0.123456789,0.5,32768,16384");
}

TEST(Csv, RowsSortedByMethodSeedRound) {
  std::vector<MetricRecord> rs{rec(Method::supervised, 1, 8, 0.1), rec(Method::proposed, 2, 8, 0.2),
                               rec(Method::proposed, 1, 16, 0.3), rec(Method::proposed, 1, 8, 0.4),
                               rec(Method::barlow, 9, 1, 0.5)};
  const auto lines = lines_of(format_csv(rs));
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[1].substr(0, 16), "1,finetune,barlo");
  EXPECT_NE(lines[2].find("proposed,1,10,1,0.123456789,0.4"), std::string::npos);
  EXPECT_NE(lines[3].find("proposed,1,10,1,0.123456789,0.3"), std::string::npos);
  EXPECT_NE(lines[4].find("proposed,2"), std::string::npos);
  EXPECT_NE(lines[5].find("supervised"), std::string::npos);
}

TEST(Csv, NoiselessSnrWrittenAsInf) {
  EXPECT_NE(format_csv({rec(Method::proposed, 1, 1, 0.5, kNoiseless)}).find(",inf,"), std::string::npos);
}

TEST(Csv, IdenticalRunsGiveIdenticalBytes) {
  const auto dir = std::filesystem::temp_directory_path() / "semcom_csv_det";
  std::filesystem::create_directories(dir);
  const auto cfg = semcom::test::small_run(Method::proposed, 4);
  emit_csv(run_experiment(cfg), dir / "a.csv");
  emit_csv(run_experiment(cfg), dir / "b.csv");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_FALSE(slurp(dir / "a.csv").empty());
  std::filesystem::remove_all(dir);
}

TEST(Svg, SingleSeriesOfTwoPoints) {
  CurveSeries s{"proposed", {{0, 0.2}, {10, 0.8}}};
  const std::string svg = format_svg({{"panel", {s}}});
  EXPECT_EQ(count(svg, "<polyline"), 1u);
  std::smatch m;
  ASSERT_TRUE(std::regex_search(svg, m, std::regex("points=\"([^\"]*)\"")));
  const std::string pts = m[1];
  EXPECT_EQ(count(pts, ","), 2u);
  EXPECT_EQ(count(pts, " "), 1u);
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Svg, AccuracyClampedToUnitInterval) {
  SvgStyle st;
  CurveSeries hi{"a", {{0, 1.7}, {5, -0.4}}};
  CurveSeries ref{"b", {{0, 1.0}, {5, 0.0}}};
  const std::string a = format_svg({{"p", {hi}}}, st);
  const std::string b = format_svg({{"p", {ref}}}, st);
  std::smatch ma, mb;
  std::regex re("points=\"([^\"]*)\"");
  ASSERT_TRUE(std::regex_search(a, ma, re));
  ASSERT_TRUE(std::regex_search(b, mb, re));
  EXPECT_EQ(ma[1].str(), mb[1].str());
}

TEST(Svg, FourMethodsFourLegendEntries) {
  std::vector<MetricRecord> rs;
  for (Method m : {Method::proposed, Method::simclr, Method::barlow, Method::supervised})
    for (std::uint64_t s = 1; s <= 3; ++s)
      for (std::size_t r = 8; r <= 32; r += 8) rs.push_back(rec(m, s, r, 0.1 * s));
  const std::string svg = format_svg(rs);
  EXPECT_EQ(count(svg, "<polyline"), 4u);
  EXPECT_EQ(count(svg, "class=\"legend\""), 4u);
  for (const char* name : {">proposed<", ">simclr<", ">barlow<", ">supervised<"})
    EXPECT_NE(svg.find(name), std::string::npos) << name;
}

TEST(Svg, MedianOverSeedsIsPlotted) {
  std::vector<MetricRecord> rs{rec(Method::proposed, 1, 8, 0.1), rec(Method::proposed, 2, 8, 0.9),
                               rec(Method::proposed, 3, 8, 0.4)};
  const auto curves = median_curves(rs, 10, 1);
  ASSERT_EQ(curves.size(), 1u);
  EXPECT_DOUBLE_EQ(curves[0].points[0].second, 0.4);
}

TEST(Trend, SummaryFromHandBuiltRecords) {
  std::vector<MetricRecord> rs;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    rs.push_back(rec(Method::supervised, s, 50, 0.5));
    rs.push_back(rec(Method::supervised, s, 100, 0.6 + 0.01 * s));  // median final 0.62
    rs.push_back(rec(Method::proposed, s, 50, s == 3 ? 0.5 : 0.65));
    rs.push_back(rec(Method::proposed, s, 100, 0.7));
  }
  const auto t = summarize_trend(rs, 10, 1);
  EXPECT_DOUBLE_EQ(t.supervised_final, 0.62);
  EXPECT_DOUBLE_EQ(t.proposed_final, 0.7);
  EXPECT_DOUBLE_EQ(t.proposed_rounds_to_target, 50);
  EXPECT_DOUBLE_EQ(t.total_rounds, 100);
}

TEST(Config, UnknownKeysRejectedAtEveryLevel) {
  EXPECT_THROW(grid_from_json(json::parse(R"({"batch_sise": 3})")), validation_error);
  EXPECT_THROW(grid_from_json(json::parse(R"({"data": {"sep": 1}})")), validation_error);
  EXPECT_THROW(grid_from_json(json::parse(R"({"sweep": {"seeds": [1]}})")), validation_error);
  EXPECT_THROW(grid_from_json(json::parse(R"({"channel": {"fading": "slow"}})")), validation_error);
  EXPECT_THROW(grid_from_json(json::parse(R"({"method": "byol"})")), validation_error);
}

TEST(Config, JsonRoundTripPreservesEverything) {
  ExperimentGrid g = tiny_grid();
  g.base.snr_db = kNoiseless;
  g.snr_db = {kNoiseless, 5.0};
  g.base.channel.coefficients = {{0.5, -0.25}, {1, 0}};
  g.base.loss.lambda_modality = {0.1, 0.2};
  const json j = to_json(g);
  const json back = to_json(grid_from_json(json::parse(j.dump())));
  EXPECT_EQ(j, back);
  EXPECT_EQ(j.at("snr_db"), "inf");
}

TEST(Config, WithoutSweepTheGridIsTheBaseRun) {
  auto g = grid_from_json(json::parse(R"({"method": "barlow", "seed": 9, "snr_db": 20})"));
  const auto cells = g.cells();
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_EQ(cells[0].method, Method::barlow);
  EXPECT_EQ(cells[0].seed, 9u);
  EXPECT_EQ(cells[0].snr_db, 20.0);
}

TEST(Config, EmptySweepListRejected) {
  EXPECT_THROW(grid_from_json(json::parse(R"({"sweep": {"seed": []}})")).validate(), validation_error);
}

TEST(Grid, SnapshotReplayReproducesTheRun) {
  const ExperimentGrid g = tiny_grid();
  const std::string first = format_csv(run_grid(g));
  const ExperimentGrid replay = grid_from_json(json::parse(to_json(g).dump()));
  EXPECT_EQ(format_csv(run_grid(replay)), first);
}

TEST(Grid, ThreadCountDoesNotChangeOutput) {
  const ExperimentGrid g = tiny_grid();
  EXPECT_EQ(format_csv(run_grid(g, 1)), format_csv(run_grid(g, 3)));
}
