#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "spext/errors.hpp"
#include "spext/ingest.hpp"
#include "spext/simulate.hpp"

using namespace spext;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

DailySeries season_series(Season season, int year, double value, const std::string& id = "A") {
  DailySeries d;
  d.station_id = id;
  d.site = {-120.0, 42.0};
  const auto [first, last] = season_span(season, year);
  for (Date x = first; x <= last; x += std::chrono::days{1}) {
    d.dates.push_back(x);
    d.prcp.push_back(value);
  }
  return d;
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("spext_ingest_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST(Dates, ParseFormatRoundTrip) {
  EXPECT_EQ(format_date(parse_date("1999-02-28")), "1999-02-28");
  EXPECT_EQ(format_date(parse_date("2000-02-29")), "2000-02-29");
  EXPECT_THROW(parse_date("1999-02-29"), DataError);
  EXPECT_THROW(parse_date("1999/02/01"), DataError);
}

TEST(Seasons, SpansAndDecemberAssignment) {
  const auto [a, b] = season_span(Season::DJF, 2001);
  EXPECT_EQ(format_date(a), "2000-12-01");
  EXPECT_EQ(format_date(b), "2001-02-28");
  EXPECT_EQ(format_date(season_span(Season::DJF, 2000).second), "2000-02-29");
  EXPECT_EQ((season_span(Season::SON, 1990).second - season_span(Season::SON, 1990).first).count() + 1, 91);
  EXPECT_EQ(parse_season("son"), Season::SON);
  EXPECT_THROW(parse_season("FALL"), ConfigError);
}

TEST(RollingSums, ConstantSeasonGivesThree) {
  const auto d = season_series(Season::SON, 1990, 1.0);
  const auto sums = rolling_3day_sums(d, Season::SON, 1990);
  ASSERT_EQ(sums.size(), 89u);
  for (double s : sums) EXPECT_DOUBLE_EQ(s, 3.0);
}

TEST(RollingSums, InteriorMissingDayDropsThreeWindows) {
  auto d = season_series(Season::SON, 1990, 1.0);
  d.prcp[40] = kNaN;
  EXPECT_EQ(rolling_3day_sums(d, Season::SON, 1990).size(), 86u);
}

TEST(RollingSums, SpikeIsTheMaximum) {
  auto d = season_series(Season::JJA, 1990, 0.0);
  d.prcp[17] = 50.0;
  const auto sums = rolling_3day_sums(d, Season::JJA, 1990);
  EXPECT_DOUBLE_EQ(*std::max_element(sums.begin(), sums.end()), 50.0);
}

TEST(RollingSums, WindowsStayInsideTheSeason) {
  // heavy rain on the last day of August must not reach the SON windows
  auto d = season_series(Season::SON, 1990, 0.0);
  d.dates.insert(d.dates.begin(), parse_date("1990-08-31"));
  d.prcp.insert(d.prcp.begin(), 500.0);
  const auto sums = rolling_3day_sums(d, Season::SON, 1990);
  EXPECT_DOUBLE_EQ(*std::max_element(sums.begin(), sums.end()), 0.0);
  EXPECT_TRUE(rolling_3day_sums(d, Season::SON, 1991).empty());
}

TEST(SeasonalMaxima, MissingThreshold) {
  const std::vector<int> years{1990};
  // MAM has 92 days: 23 missing is exactly 25%
  auto d = season_series(Season::MAM, 1990, 2.0);
  for (int i = 0; i < 23; ++i) d.prcp[static_cast<std::size_t>(i)] = kNaN;
  EXPECT_DOUBLE_EQ(seasonal_maxima(d, Season::MAM, years)[0], 6.0);
  d.prcp[23] = kNaN;
  EXPECT_TRUE(std::isnan(seasonal_maxima(d, Season::MAM, years)[0]));

  auto e = season_series(Season::SON, 1990, 2.0);
  for (int i = 0; i < 28; ++i) e.prcp[static_cast<std::size_t>(3 * i)] = kNaN;  // ~30%
  EXPECT_TRUE(std::isnan(seasonal_maxima(e, Season::SON, years)[0]));
  // absent records count as missing
  EXPECT_TRUE(std::isnan(seasonal_maxima(e, Season::SON, std::vector<int>{1991})[0]));
}

TEST(SeasonalMaxima, InvariantToRecordOrder) {
  std::mt19937_64 rng(3);
  DailySeries d = season_series(Season::SON, 1990, 0.0);
  auto more = season_series(Season::SON, 1991, 0.0);
  d.dates.insert(d.dates.end(), more.dates.begin(), more.dates.end());
  d.prcp.insert(d.prcp.end(), more.prcp.begin(), more.prcp.end());
  std::exponential_distribution<double> rain(0.2);
  for (auto& p : d.prcp) p = rain(rng);
  d.prcp[5] = kNaN;
  const std::vector<int> years{1990, 1991};
  const auto ref = seasonal_maxima(d, Season::SON, years);

  std::vector<std::size_t> perm(d.dates.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  DailySeries s = d;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    s.dates[i] = d.dates[perm[i]];
    s.prcp[i] = d.prcp[perm[i]];
  }
  s.normalize();
  const auto got = seasonal_maxima(s, Season::SON, years);
  EXPECT_EQ(got, ref);
}

TEST(Normalize, RejectsDuplicatesAndNegatives) {
  auto d = season_series(Season::SON, 1990, 1.0);
  d.dates.push_back(d.dates[3]);
  d.prcp.push_back(1.0);
  EXPECT_THROW(d.normalize(), DataError);
  auto e = season_series(Season::SON, 1990, 1.0);
  e.prcp[2] = -0.1;
  EXPECT_THROW(e.normalize(), DataError);
}

TEST(Screen, StrictMinimumYears) {
  MaximaTable t;
  t.years.resize(40);
  std::iota(t.years.begin(), t.years.end(), 1970);
  t.station_ids = {"A", "B", "C"};
  t.sites = {{-120, 40}, {-121, 41}, {-122, 42}};
  t.maxima = Eigen::MatrixXd::Constant(40, 3, 10.0);
  for (int i = 0; i < 9; ++i) t.maxima(i, 0) = kNaN;   // 31 years
  for (int i = 0; i < 10; ++i) t.maxima(i, 1) = kNaN;  // 30 years
  const auto obs = screen_stations(t, 30);
  ASSERT_EQ(obs.station_ids, (std::vector<std::string>{"A", "C"}));
  EXPECT_EQ(obs.complete, (std::vector<bool>{false, true}));
  EXPECT_EQ(obs.covariate_count(), 0);
  for (int s : obs.complete_indices())
    EXPECT_TRUE(obs.maxima.col(s).allFinite());

  t.maxima.col(2).setConstant(kNaN);
  t.maxima.col(0).setConstant(kNaN);
  EXPECT_THROW(screen_stations(t, 30), DataError);
}

TEST(CovariateGrids, ReadInferAndLookup) {
  const auto dir = scratch_dir("grid");
  write_text(dir / "g.csv", "lon,lat,value\n-121,40,1\n-120.5,40,2\n-120,40,3\n-121,40.5,4\n-120,40.5,6\n");
  const auto g = read_covariate_grid(dir / "g.csv", "elev");
  EXPECT_EQ(g.n_lon, 3);
  EXPECT_EQ(g.n_lat, 2);
  EXPECT_DOUBLE_EQ(g.dlon, 0.5);
  EXPECT_DOUBLE_EQ(g.value_at({-120.5, 40.0}), 2.0);  // exactly at a centre
  EXPECT_DOUBLE_EQ(g.value_at({-120.1, 40.6}), 6.0);
  EXPECT_TRUE(std::isnan(g.value_at({-120.5, 40.5})));  // absent cell
  EXPECT_TRUE(std::isnan(g.value_at({-119.0, 40.0})));  // outside
  EXPECT_TRUE(g.covers({-119.8, 40.7}));
  EXPECT_FALSE(g.covers({-119.7, 40.0}));

  write_covariate_grid(dir / "copy.csv", g);
  const auto h = read_covariate_grid(dir / "copy.csv", "elev");
  EXPECT_EQ(h.n_lon, 3);
  EXPECT_DOUBLE_EQ(h.value_at({-121, 40.5}), 4.0);

  write_text(dir / "bad.csv", "lon,lat,value\n-121,40,1\n-120.5,40,2\n-120.2,40,3\n");
  EXPECT_THROW(read_covariate_grid(dir / "bad.csv", "x"), DataError);
  write_text(dir / "hdr.csv", "x,y,v\n");
  EXPECT_THROW(read_covariate_grid(dir / "hdr.csv", "x"), DataError);
}

TEST(Covariates, AttachStandardizeAndInvert) {
  CovariateGrid g;
  g.name = "elev";
  g.lon0 = -124.0;
  g.lat0 = 40.0;
  g.dlon = g.dlat = 0.125;
  g.n_lon = 40;
  g.n_lat = 40;
  for (int j = 0; j < 40; ++j)
    for (int i = 0; i < 40; ++i) g.values.push_back(100.0 + 7.0 * i + 3.0 * j * j);
  CovariateGrid h = g;
  h.name = "msp";
  for (auto& v : h.values) v = std::sqrt(v) * 11.0;

  ObservationSet obs;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> lon(-124.0, -119.2), lat(40.0, 44.8);
  for (int s = 0; s < 25; ++s) {
    obs.station_ids.push_back("S" + std::to_string(s));
    obs.stations.push_back({lon(rng), lat(rng)});
  }
  obs.maxima = Eigen::MatrixXd::Ones(3, 25);
  obs.years = {1, 2, 3};
  obs.update_complete_mask();
  const std::vector<CovariateGrid> grids{g, h};
  const auto tr = attach_covariates(obs, grids, true);
  ASSERT_EQ(obs.covariate_count(), 2);
  for (int c = 0; c < 2; ++c) {
    const auto col = obs.covariates.col(c);
    EXPECT_NEAR(col.mean(), 0.0, 1e-12);
    EXPECT_NEAR(std::sqrt((col.array() - col.mean()).square().sum() / 24.0), 1.0, 1e-12);
  }
  const Eigen::MatrixXd raw = sample_covariates(obs.stations, grids);
  EXPECT_LT((tr.invert(obs.covariates) - raw).cwiseAbs().maxCoeff(), 1e-10);

  // exactly at a cell centre
  obs.stations[0] = g.cell(5, 7);
  attach_covariates(obs, grids, false);
  EXPECT_DOUBLE_EQ(obs.covariates(0, 0), g.at(5, 7));

  obs.stations[3] = {-110.0, 41.0};
  try {
    attach_covariates(obs, grids, true);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(obs.station_ids[3]), std::string::npos);
  }
}

TEST(MeanSeasonalPrecip, ConstantAndScreened) {
  std::vector<int> years(6);
  std::iota(years.begin(), years.end(), 1990);
  DailySeries d;
  for (int y : years) {
    auto s = season_series(Season::SON, y, 2.0);
    if (y % 2 == 1)
      for (std::size_t i = 0; i < 40; ++i) s.prcp[i] = kNaN;  // fails the screen
    else
      for (auto& p : s.prcp) p = 2.0 + (y - 1990);
    d.dates.insert(d.dates.end(), s.dates.begin(), s.dates.end());
    d.prcp.insert(d.prcp.end(), s.prcp.begin(), s.prcp.end());
  }
  // qualifying years 1990, 1992, 1994 at 2, 4, 6 mm/day over 91 days
  EXPECT_DOUBLE_EQ(mean_seasonal_precip(d, Season::SON, years, 0.25, 3), 91.0 * 4.0);
  EXPECT_THROW(mean_seasonal_precip(d, Season::SON, years, 0.25, 5), DataError);

  const auto c = season_series(Season::SON, 2000, 2.0);
  std::vector<int> five{2000, 2000, 2000, 2000, 2000};
  EXPECT_DOUBLE_EQ(mean_seasonal_precip(c, Season::SON, five), 182.0);
}

TEST(DailyCsv, DirectoryReadIsSortedAndDeterministic) {
  const auto dir = scratch_dir("csv");
  fs::create_directories(dir / "in");
  write_text(dir / "in" / "b.csv",
             "station_id,lon,lat,date,prcp\nZ9,-120.5,41,1990-09-02,3.5\nZ9,-120.5,41,1990-09-01,\n");
  write_text(dir / "in" / "a.csv", "station_id,lon,lat,date,prcp\nA1,-121,40.25,1990-09-01,0\n");
  const auto s = read_daily_csv(dir / "in");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].station_id, "A1");
  EXPECT_EQ(format_date(s[1].dates[0]), "1990-09-01");
  EXPECT_TRUE(std::isnan(s[1].prcp[0]));
  EXPECT_DOUBLE_EQ(s[1].prcp[1], 3.5);

  write_daily_csv(dir / "one.csv", s);
  write_daily_csv(dir / "two.csv", read_daily_csv(dir / "one.csv"));
  EXPECT_EQ(slurp(dir / "one.csv"), slurp(dir / "two.csv"));

  write_text(dir / "bad.csv", "station_id,lon,lat,date,prcp\nA,-121,40,1990-09-01,1\nA,-121.5,40,1990-09-02,1\n");
  EXPECT_THROW(read_daily_csv(dir / "bad.csv"), DataError);
  write_text(dir / "hdr.csv", "id,lon,lat,date,prcp\n");
  EXPECT_THROW(read_daily_csv(dir / "hdr.csv"), DataError);
}

TEST(Ghcn, ParsesPrcpWithFlags) {
  const auto dir = scratch_dir("ghcn");
  write_text(dir / "ghcnd-stations.txt",
             "USC00045000  38.5500 -121.7600   18.0 CA DAVIS 2 WSW EXP FARM\n");
  std::string rec = "USC00045000199009PRCP";
  for (int d = 1; d <= 31; ++d) {
    int v = d * 10;
    char q = ' ';
    if (d == 2) v = -9999;
    if (d == 3) q = 'X';
    char buf[9];
    std::snprintf(buf, sizeof buf, "%5d %c ", v, q);
    rec += std::string(buf, 8);
  }
  std::string tmax = "USC00045000199009TMAX" + std::string(31 * 8, ' ');
  write_text(dir / "USC00045000.dly", rec + "\n" + tmax + "\n");
  const std::vector<fs::path> files{dir / "USC00045000.dly"};
  const auto s = read_ghcn(files, dir / "ghcnd-stations.txt");
  ASSERT_EQ(s.size(), 1u);
  EXPECT_DOUBLE_EQ(s[0].site.lon, -121.76);
  EXPECT_DOUBLE_EQ(s[0].site.lat, 38.55);
  ASSERT_EQ(s[0].dates.size(), 30u);  // September has 30 days
  EXPECT_DOUBLE_EQ(s[0].prcp[0], 1.0);
  EXPECT_TRUE(std::isnan(s[0].prcp[1]));
  EXPECT_TRUE(std::isnan(s[0].prcp[2]));
  EXPECT_DOUBLE_EQ(s[0].prcp[29], 30.0);
}

TEST(Synthetic, DailyRecordsReproduceMaxima) {
  SyntheticSpec spec;
  spec.stations = 12;
  spec.years = 35;
  spec.knots = 3;
  spec.grid_spacing = 0.5;
  spec.seed = 4;
  const auto data = simulate_network(spec);
  const auto daily = synthetic_daily(data, Season::SON);
  const auto table = build_maxima(daily, Season::SON, data.obs.years);
  const auto obs = screen_stations(table, 20);
  ASSERT_EQ(obs.station_count(), 12);
  for (int s = 0; s < 12; ++s)
    for (int t = 0; t < 35; ++t) {
      const double a = data.obs.maxima(t, s), b = obs.maxima(t, s);
      if (std::isnan(a))
        EXPECT_TRUE(std::isnan(b));
      else
        EXPECT_EQ(a, b);
    }
  auto with_cov = obs;
  attach_covariates(with_cov, synthetic_covariate_grids(data.grid), true);
  EXPECT_LT((with_cov.covariates - data.obs.covariates).cwiseAbs().maxCoeff(), 1e-12);
}
