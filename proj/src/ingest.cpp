#include "spext/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "spext/errors.hpp"

namespace spext {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size() && !s.empty();
}

double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  if (!parse_number(s, v) || !std::isfinite(v))
    throw DataError(fmt::format("{}: cannot parse number '{}'", where, s));
  return v;
}

std::string where(const std::filesystem::path& file, std::size_t line) {
  return fmt::format("{}:{}", file.string(), line);
}

std::ifstream open_input(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError(fmt::format("cannot open {}", file.string()));
  return in;
}

Date to_date(int y, unsigned m, unsigned d) {
  return std::chrono::sys_days{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

// Season's values as a dense day array; absent days are NaN.
std::vector<double> season_values(const DailySeries& daily, Season season, int year) {
  const auto [first, last] = season_span(season, year);
  std::vector<double> v(static_cast<std::size_t>((last - first).count() + 1), kNaN);
  auto it = std::lower_bound(daily.dates.begin(), daily.dates.end(), first);
  for (; it != daily.dates.end() && *it <= last; ++it)
    v[static_cast<std::size_t>((*it - first).count())] = daily.prcp[static_cast<std::size_t>(it - daily.dates.begin())];
  return v;
}

double missing_share(const std::vector<double>& v) {
  const auto missing = std::count_if(v.begin(), v.end(), [](double x) { return std::isnan(x); });
  return static_cast<double>(missing) / static_cast<double>(v.size());
}

// lattice axis from coordinate values: origin, step and count
struct Axis {
  double origin = 0.0;
  double step = 0.0;
  int count = 0;
};

Axis infer_axis(std::vector<double> v, const char* label, const std::filesystem::path& file) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  if (v.size() < 2) throw DataError(fmt::format("{}: grid needs at least two distinct {} values", file.string(), label));
  double step = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i) step = std::min(step, v[i] - v[i - 1]);
  Axis a{v.front(), step, static_cast<int>(std::lround((v.back() - v.front()) / step)) + 1};
  for (double x : v) {
    const double k = (x - a.origin) / step;
    if (std::abs(k - std::round(k)) > 1e-6)
      throw DataError(fmt::format("{}: {} = {} is off the {}-degree lattice", file.string(), label, x, step));
  }
  return a;
}

}  // namespace

Date parse_date(std::string_view iso) {
  iso = trim(iso);
  const auto parts = split(iso, '-');
  int y = 0;
  unsigned m = 0, d = 0;
  if (parts.size() != 3 || parts[0].size() != 4 || parts[1].size() != 2 || parts[2].size() != 2 ||
      !parse_number(parts[0], y) || !parse_number(parts[1], m) || !parse_number(parts[2], d))
    throw DataError(fmt::format("invalid date '{}' (expected YYYY-MM-DD)", iso));
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw DataError(fmt::format("invalid calendar date '{}'", iso));
  return std::chrono::sys_days{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  return fmt::format("{:04}-{:02}-{:02}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()));
}

void DailySeries::normalize() {
  std::vector<std::size_t> order(dates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dates[a] < dates[b]; });
  std::vector<Date> d;
  std::vector<double> p;
  d.reserve(order.size());
  p.reserve(order.size());
  for (auto i : order) {
    if (!d.empty() && d.back() == dates[i])
      throw DataError(fmt::format("station {}: duplicate date {}", station_id, format_date(dates[i])));
    if (prcp[i] < 0.0)
      throw DataError(fmt::format("station {}: negative precipitation on {}", station_id, format_date(dates[i])));
    d.push_back(dates[i]);
    p.push_back(prcp[i]);
  }
  dates = std::move(d);
  prcp = std::move(p);
}

std::vector<DailySeries> read_daily_csv(const std::filesystem::path& path) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& e : std::filesystem::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError(fmt::format("{}: no .csv files", path.string()));
  } else {
    files.push_back(path);
  }

  std::map<std::string, DailySeries> by_id;
  for (const auto& file : files) {
    auto in = open_input(file);
    std::string line;
    std::size_t n = 0;
    if (!std::getline(in, line) || trim(line) != kDailyHeader)
      throw DataError(fmt::format("{}: header must be '{}'", where(file, 1), kDailyHeader));
    ++n;
    while (std::getline(in, line)) {
      ++n;
      if (trim(line).empty()) continue;
      const auto f = split(line, ',');
      if (f.size() != 5) throw DataError(fmt::format("{}: expected 5 fields", where(file, n)));
      const std::string id(trim(f[0]));
      if (id.empty()) throw DataError(fmt::format("{}: empty station_id", where(file, n)));
      const Site site{parse_double(f[1], where(file, n)), parse_double(f[2], where(file, n))};
      Date date;
      try {
        date = parse_date(f[3]);
      } catch (const DataError& e) {
        throw DataError(fmt::format("{}: {}", where(file, n), e.what()));
      }
      const auto value = trim(f[4]);
      const double prcp = value.empty() ? kNaN : parse_double(value, where(file, n));
      auto [it, fresh] = by_id.try_emplace(id);
      auto& s = it->second;
      if (fresh) {
        s.station_id = id;
        s.site = site;
      } else if (!(s.site == site)) {
        throw DataError(fmt::format("{}: station {} changes coordinates", where(file, n), id));
      }
      s.dates.push_back(date);
      s.prcp.push_back(prcp);
    }
  }
  std::vector<DailySeries> out;
  out.reserve(by_id.size());
  for (auto& [id, s] : by_id) {
    s.normalize();
    out.push_back(std::move(s));
  }
  return out;
}

void write_daily_csv(const std::filesystem::path& file, std::span<const DailySeries> series) {
  std::ofstream out(file);
  if (!out) throw DataError(fmt::format("cannot write {}", file.string()));
  out << kDailyHeader << '\n';
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.dates.size(); ++i) {
      out << fmt::format("{},{},{},{},", s.station_id, s.site.lon, s.site.lat, format_date(s.dates[i]));
      if (!std::isnan(s.prcp[i])) out << fmt::format("{}", s.prcp[i]);
      out << '\n';
    }
  if (!out) throw DataError(fmt::format("write failed: {}", file.string()));
}

Season parse_season(std::string_view name) {
  std::string up(name);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (up == "DJF") return Season::DJF;
  if (up == "MAM") return Season::MAM;
  if (up == "JJA") return Season::JJA;
  if (up == "SON") return Season::SON;
  throw ConfigError(fmt::format("unknown season '{}' (DJF, MAM, JJA or SON)", name));
}

std::string_view season_name(Season s) {
  switch (s) {
    case Season::DJF: return "DJF";
    case Season::MAM: return "MAM";
    case Season::JJA: return "JJA";
    case Season::SON: return "SON";
  }
  return "?";
}

std::pair<Date, Date> season_span(Season s, int year) {
  switch (s) {
    case Season::DJF: return {to_date(year - 1, 12, 1), to_date(year, 3, 1) - std::chrono::days{1}};
    case Season::MAM: return {to_date(year, 3, 1), to_date(year, 5, 31)};
    case Season::JJA: return {to_date(year, 6, 1), to_date(year, 8, 31)};
    case Season::SON: return {to_date(year, 9, 1), to_date(year, 11, 30)};
  }
  throw ConfigError("bad season");
}

std::vector<double> rolling_3day_sums(const DailySeries& daily, Season season, int year) {
  const auto v = season_values(daily, season, year);
  std::vector<double> out;
  for (std::size_t i = 0; i + 2 < v.size(); ++i) {
    const double s = v[i] + v[i + 1] + v[i + 2];
    if (!std::isnan(s)) out.push_back(s);
  }
  return out;
}

double missing_fraction(const DailySeries& daily, Season season, int year) {
  return missing_share(season_values(daily, season, year));
}

std::vector<double> seasonal_maxima(const DailySeries& daily, Season season, std::span<const int> years,
                                    double missing_threshold) {
  std::vector<double> out;
  out.reserve(years.size());
  for (int y : years) {
    if (missing_fraction(daily, season, y) > missing_threshold) {
      out.push_back(kNaN);
      continue;
    }
    const auto sums = rolling_3day_sums(daily, season, y);
    out.push_back(sums.empty() ? kNaN : *std::max_element(sums.begin(), sums.end()));
  }
  return out;
}

MaximaTable build_maxima(std::span<const DailySeries> series, Season season, std::span<const int> years,
                         double missing_threshold) {
  std::vector<std::size_t> order(series.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return series[a].station_id < series[b].station_id; });
  MaximaTable t;
  t.years.assign(years.begin(), years.end());
  t.maxima.resize(static_cast<Eigen::Index>(years.size()), static_cast<Eigen::Index>(series.size()));
  for (std::size_t c = 0; c < order.size(); ++c) {
    const auto& s = series[order[c]];
    t.station_ids.push_back(s.station_id);
    t.sites.push_back(s.site);
    const auto mx = seasonal_maxima(s, season, years, missing_threshold);
    for (std::size_t r = 0; r < mx.size(); ++r)
      t.maxima(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = mx[r];
  }
  return t;
}

ObservationSet screen_stations(const MaximaTable& table, int min_years) {
  std::vector<int> keep;
  for (Eigen::Index j = 0; j < table.maxima.cols(); ++j) {
    const auto present = (table.maxima.col(j).array() == table.maxima.col(j).array()).count();
    if (present > min_years) keep.push_back(static_cast<int>(j));
  }
  if (keep.empty())
    throw DataError(fmt::format("no station has more than {} years of seasonal maxima", min_years));
  ObservationSet obs;
  obs.years = table.years;
  obs.covariates.resize(static_cast<Eigen::Index>(keep.size()), 0);
  obs.maxima.resize(table.maxima.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t a = 0; a < keep.size(); ++a) {
    const auto j = static_cast<std::size_t>(keep[a]);
    obs.station_ids.push_back(table.station_ids[j]);
    obs.stations.push_back(table.sites[j]);
    obs.maxima.col(static_cast<Eigen::Index>(a)) = table.maxima.col(static_cast<Eigen::Index>(j));
  }
  obs.update_complete_mask();
  return obs;
}

bool CovariateGrid::covers(const Site& s) const {
  return s.lon >= lon0 - 0.5 * dlon && s.lon <= lon0 + (n_lon - 0.5) * dlon && s.lat >= lat0 - 0.5 * dlat &&
         s.lat <= lat0 + (n_lat - 0.5) * dlat;
}

double CovariateGrid::value_at(const Site& s) const {
  if (!covers(s)) return kNaN;
  const int i = std::clamp(static_cast<int>(std::lround((s.lon - lon0) / dlon)), 0, n_lon - 1);
  const int j = std::clamp(static_cast<int>(std::lround((s.lat - lat0) / dlat)), 0, n_lat - 1);
  return at(i, j);
}

CovariateGrid read_covariate_grid(const std::filesystem::path& file, std::string name) {
  auto in = open_input(file);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "lon,lat,value")
    throw DataError(fmt::format("{}: header must be 'lon,lat,value'", where(file, 1)));
  std::vector<double> lon, lat, val;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 3) throw DataError(fmt::format("{}: expected 3 fields", where(file, n)));
    lon.push_back(parse_double(f[0], where(file, n)));
    lat.push_back(parse_double(f[1], where(file, n)));
    val.push_back(parse_double(f[2], where(file, n)));
  }
  const Axis ax = infer_axis(lon, "lon", file);
  const Axis ay = infer_axis(lat, "lat", file);
  CovariateGrid g;
  g.name = std::move(name);
  g.lon0 = ax.origin;
  g.lat0 = ay.origin;
  g.dlon = ax.step;
  g.dlat = ay.step;
  g.n_lon = ax.count;
  g.n_lat = ay.count;
  g.values.assign(static_cast<std::size_t>(g.n_lon) * static_cast<std::size_t>(g.n_lat), kNaN);
  for (std::size_t r = 0; r < lon.size(); ++r) {
    const auto i = std::lround((lon[r] - g.lon0) / g.dlon);
    const auto j = std::lround((lat[r] - g.lat0) / g.dlat);
    auto& slot = g.values[static_cast<std::size_t>(j * g.n_lon + i)];
    if (!std::isnan(slot)) throw DataError(fmt::format("{}: duplicate cell ({}, {})", file.string(), lon[r], lat[r]));
    slot = val[r];
  }
  return g;
}

void write_covariate_grid(const std::filesystem::path& file, const CovariateGrid& grid) {
  std::ofstream out(file);
  if (!out) throw DataError(fmt::format("cannot write {}", file.string()));
  out << "lon,lat,value\n";
  for (int j = 0; j < grid.n_lat; ++j)
    for (int i = 0; i < grid.n_lon; ++i) {
      if (std::isnan(grid.at(i, j))) continue;
      const Site c = grid.cell(i, j);
      out << fmt::format("{},{},{}\n", c.lon, c.lat, grid.at(i, j));
    }
  if (!out) throw DataError(fmt::format("write failed: {}", file.string()));
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& raw) {
  Standardizer s;
  s.mean = raw.colwise().mean().transpose();
  s.sd.resize(raw.cols());
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    const double n = static_cast<double>(raw.rows());
    const double var = (raw.col(c).array() - s.mean[c]).square().sum() / std::max(n - 1.0, 1.0);
    s.sd[c] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(Eigen::Index p) {
  return {Eigen::VectorXd::Zero(p), Eigen::VectorXd::Ones(p)};
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& raw) const {
  return (raw.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array();
}

Eigen::MatrixXd Standardizer::invert(const Eigen::MatrixXd& z) const {
  return (z.array().rowwise() * sd.transpose().array()).rowwise() + mean.transpose().array();
}

Eigen::MatrixXd sample_covariates(std::span<const Site> sites, std::span<const CovariateGrid> grids,
                                  std::span<const std::string> labels) {
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(sites.size()), static_cast<Eigen::Index>(grids.size()));
  std::vector<std::string> bad;
  for (std::size_t c = 0; c < grids.size(); ++c)
    for (std::size_t r = 0; r < sites.size(); ++r) {
      const double v = grids[c].value_at(sites[r]);
      if (std::isnan(v)) {
        const std::string label = r < labels.size() ? labels[r] : fmt::format("#{}", r);
        bad.push_back(fmt::format("{} ({}, {}) [{}]", label, sites[r].lon, sites[r].lat,
                                  grids[c].covers(sites[r]) ? grids[c].name + ": no value" : grids[c].name + ": outside extent"));
      }
      raw(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  if (!bad.empty()) {
    std::string msg = fmt::format("{} site(s) without covariate coverage:", bad.size());
    for (const auto& b : bad) msg += "\n  " + b;
    throw DataError(msg);
  }
  return raw;
}

Standardizer attach_covariates(ObservationSet& obs, std::span<const CovariateGrid> grids, bool standardize) {
  const Eigen::MatrixXd raw = sample_covariates(obs.stations, grids, obs.station_ids);
  const Standardizer tr = standardize ? Standardizer::fit(raw) : Standardizer::identity(raw.cols());
  obs.covariates = tr.apply(raw);
  return tr;
}

double mean_seasonal_precip(const DailySeries& daily, Season season, std::span<const int> years,
                            double missing_threshold, int min_years) {
  double total = 0.0;
  int n = 0;
  for (int y : years) {
    const auto v = season_values(daily, season, y);
    if (missing_share(v) > missing_threshold) continue;
    for (double x : v)
      if (!std::isnan(x)) total += x;
    ++n;
  }
  if (n < min_years)
    throw DataError(fmt::format("station {}: {} qualifying {} seasons, need {}", daily.station_id, n,
                                season_name(season), min_years));
  return total / n;
}

std::vector<DailySeries> read_ghcn(std::span<const std::filesystem::path> dly_files,
                                   const std::filesystem::path& stations_file) {
  std::map<std::string, Site> coords;
  {
    auto in = open_input(stations_file);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (trim(line).empty()) continue;
      if (line.size() < 30) throw DataError(fmt::format("{}: short station record", where(stations_file, n)));
      const std::string id(trim(std::string_view(line).substr(0, 11)));
      const double lat = parse_double(std::string_view(line).substr(12, 8), where(stations_file, n));
      const double lon = parse_double(std::string_view(line).substr(21, 9), where(stations_file, n));
      coords[id] = Site{lon, lat};
    }
  }

  std::map<std::string, DailySeries> by_id;
  for (const auto& file : dly_files) {
    auto in = open_input(file);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (trim(line).empty()) continue;
      if (line.size() < 21) throw DataError(fmt::format("{}: short record", where(file, n)));
      const std::string_view rec(line);
      if (rec.substr(17, 4) != "PRCP") continue;
      const std::string id(trim(rec.substr(0, 11)));
      int year = 0;
      unsigned month = 0;
      if (!parse_number(rec.substr(11, 4), year) || !parse_number(rec.substr(15, 2), month) || month < 1 || month > 12)
        throw DataError(fmt::format("{}: bad year/month", where(file, n)));
      const auto c = coords.find(id);
      if (c == coords.end())
        throw DataError(fmt::format("{}: station {} not in {}", where(file, n), id, stations_file.string()));
      auto [it, fresh] = by_id.try_emplace(id);
      if (fresh) {
        it->second.station_id = id;
        it->second.site = c->second;
      }
      const std::chrono::year_month ym{std::chrono::year{year}, std::chrono::month{month}};
      const unsigned days = static_cast<unsigned>((ym / std::chrono::last).day());
      for (unsigned d = 1; d <= days; ++d) {
        const std::size_t off = 21 + (d - 1) * 8;
        if (off + 5 > rec.size()) break;
        int v = 0;
        if (!parse_number(rec.substr(off, 5), v)) throw DataError(fmt::format("{}: bad value for day {}", where(file, n), d));
        const char qflag = off + 6 < rec.size() ? rec[off + 6] : ' ';
        it->second.dates.push_back(to_date(year, month, d));
        it->second.prcp.push_back(v == -9999 || qflag != ' ' ? kNaN : v / 10.0);
      }
    }
  }
  std::vector<DailySeries> out;
  for (auto& [id, s] : by_id) {
    s.normalize();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace spext
