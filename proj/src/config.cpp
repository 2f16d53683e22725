#include "spext/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "spext/errors.hpp"

namespace spext {

using nlohmann::json;

namespace {

// Object reader that rejects keys it was not asked about.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("{}: expected an object", label()));
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(fmt::format("{}: unknown key '{}'", label(), k));
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(fmt::format("{}.{}: wrong type", label(), key));
    }
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

 private:
  std::string label() const { return where_.empty() ? "config" : where_; }
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

int axis_count(double lo, double hi, double step) { return static_cast<int>(std::lround((hi - lo) / step)) + 1; }

}  // namespace

int GridSettings::n_lon() const { return axis_count(extent.lon_min, extent.lon_max, spacing); }
int GridSettings::n_lat() const { return axis_count(extent.lat_min, extent.lat_max, spacing); }

std::vector<Site> GridSettings::cells() const {
  std::vector<Site> out;
  out.reserve(static_cast<std::size_t>(n_lon()) * static_cast<std::size_t>(n_lat()));
  for (int j = 0; j < n_lat(); ++j)
    for (int i = 0; i < n_lon(); ++i) out.push_back({extent.lon_min + i * spacing, extent.lat_min + j * spacing});
  return out;
}

std::vector<int> RunConfig::years() const {
  std::vector<int> y;
  for (int t = first_year; t <= last_year; ++t) y.push_back(t);
  return y;
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(!data.empty(), "data: path required");
  require(first_year <= last_year, "years: first must not exceed last");
  require(min_years >= 0, "screening.min_years must be >= 0");
  require(missing_threshold >= 0.0 && missing_threshold <= 1.0, "screening.missing_threshold must lie in [0, 1]");
  require(knots >= 1, "knots must be >= 1");
  require(group_size >= 1, "group_size must be >= 1");
  std::set<std::string> names;
  for (const auto& c : covariates) {
    require(!c.name.empty() && !c.path.empty(), "covariates: each entry needs name and path");
    require(names.insert(c.name).second, fmt::format("covariates: duplicate name '{}'", c.name));
  }
  try {
    chains.validate();
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("chains: {}", e.what()));
  }
  const auto& e = grid.extent;
  require(e.lon_min <= e.lon_max && e.lat_min <= e.lat_max, "grid.extent: min must not exceed max");
  require(e.lat_min >= -90.0 && e.lat_max <= 90.0, "grid.extent: latitude out of range");
  require(grid.spacing > 0.0, "grid.spacing must be positive");
  require(grid.thin >= 1 && grid.max_draws >= 1 && grid.block_cells >= 1,
          "grid.thin, grid.max_draws and grid.block_cells must be >= 1");
  require(!return_periods.empty(), "return_periods must not be empty");
  for (double r : return_periods) require(r > 1.0 && std::isfinite(r), "return periods must exceed 1 year");
  require(drop_fraction >= 0.0 && drop_fraction < 1.0, "validate.drop_fraction must lie in [0, 1)");
  for (int n : group_sizes) require(n >= 1, "validate.group_sizes must be >= 1");
  require(diag.p > 0.0 && diag.p < 1.0, "diag.p must lie in (0, 1)");
  require(diag.alpha > 0.0 && diag.alpha < 1.0, "diag.alpha must lie in (0, 1)");
  require(diag.max_pairs >= 1, "diag.max_pairs must be >= 1");
}

void RunConfig::check_paths() const {
  if (!std::filesystem::exists(data)) throw ConfigError(fmt::format("data path not found: {}", data.string()));
  for (const auto& c : covariates)
    if (!std::filesystem::is_regular_file(c.path))
      throw ConfigError(fmt::format("covariate grid '{}' not found: {}", c.name, c.path.string()));
}

json to_json(const RunConfig& c) {
  json cov = json::array();
  for (const auto& s : c.covariates) cov.push_back({{"name", s.name}, {"path", s.path.generic_string()}});
  const auto& e = c.grid.extent;
  return {
      {"data", c.data.generic_string()},
      {"covariates", cov},
      {"output", c.output.generic_string()},
      {"season", std::string(season_name(c.season))},
      {"years", {{"first", c.first_year}, {"last", c.last_year}}},
      {"screening", {{"min_years", c.min_years}, {"missing_threshold", c.missing_threshold}}},
      {"standardize", c.standardize},
      {"knots", c.knots},
      {"group_size", c.group_size},
      {"chains",
       {{"n_chains", c.chains.n_chains},
        {"iterations", c.chains.n_iterations},
        {"warmup", c.chains.n_warmup},
        {"adapt_window", c.chains.adapt_window},
        {"threads", c.chains.threads},
        {"block_scales", c.chains.block_scales}}},
      {"grid",
       {{"extent", {{"lon_min", e.lon_min}, {"lon_max", e.lon_max}, {"lat_min", e.lat_min}, {"lat_max", e.lat_max}}},
        {"spacing", c.grid.spacing},
        {"thin", c.grid.thin},
        {"max_draws", c.grid.max_draws},
        {"block_cells", c.grid.block_cells},
        {"geojson", c.grid.geojson}}},
      {"return_periods", c.return_periods},
      {"seed", c.seed},
      {"validate", {{"drop_fraction", c.drop_fraction}, {"group_sizes", c.group_sizes}}},
      {"diag", {{"p", c.diag.p}, {"alpha", c.diag.alpha}, {"max_pairs", c.diag.max_pairs}}},
  };
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Reader r(j, "");
  std::string s;
  if (r.child("data")) {
    r.get("data", s);
    c.data = s;
  }
  if (const json* cov = r.child("covariates")) {
    if (!cov->is_array()) throw ConfigError("covariates: expected an array");
    for (std::size_t i = 0; i < cov->size(); ++i) {
      Reader e((*cov)[i], fmt::format("covariates[{}]", i));
      CovariateSource src;
      std::string p;
      e.get("name", src.name);
      e.get("path", p);
      src.path = p;
      c.covariates.push_back(src);
    }
  }
  if (r.child("output")) {
    r.get("output", s);
    c.output = s;
  }
  if (r.child("season")) {
    r.get("season", s);
    c.season = parse_season(s);
  }
  if (const json* y = r.child("years")) {
    Reader e(*y, "years");
    e.get("first", c.first_year);
    e.get("last", c.last_year);
  }
  if (const json* y = r.child("screening")) {
    Reader e(*y, "screening");
    e.get("min_years", c.min_years);
    e.get("missing_threshold", c.missing_threshold);
  }
  r.get("standardize", c.standardize);
  r.get("knots", c.knots);
  r.get("group_size", c.group_size);
  if (const json* ch = r.child("chains")) {
    Reader e(*ch, "chains");
    e.get("n_chains", c.chains.n_chains);
    e.get("iterations", c.chains.n_iterations);
    e.get("warmup", c.chains.n_warmup);
    e.get("adapt_window", c.chains.adapt_window);
    e.get("threads", c.chains.threads);
    e.get("block_scales", c.chains.block_scales);
  }
  if (const json* g = r.child("grid")) {
    Reader e(*g, "grid");
    if (const json* x = e.child("extent")) {
      Reader b(*x, "grid.extent");
      b.get("lon_min", c.grid.extent.lon_min);
      b.get("lon_max", c.grid.extent.lon_max);
      b.get("lat_min", c.grid.extent.lat_min);
      b.get("lat_max", c.grid.extent.lat_max);
    }
    e.get("spacing", c.grid.spacing);
    e.get("thin", c.grid.thin);
    e.get("max_draws", c.grid.max_draws);
    e.get("block_cells", c.grid.block_cells);
    e.get("geojson", c.grid.geojson);
  }
  r.get("return_periods", c.return_periods);
  r.get("seed", c.seed);
  if (const json* v = r.child("validate")) {
    Reader e(*v, "validate");
    e.get("drop_fraction", c.drop_fraction);
    e.get("group_sizes", c.group_sizes);
  }
  if (const json* d = r.child("diag")) {
    Reader e(*d, "diag");
    e.get("p", c.diag.p);
    e.get("alpha", c.diag.alpha);
    e.get("max_pairs", c.diag.max_pairs);
  }
  c.chains.seed = c.seed;
  return c;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(fmt::format("cannot open config {}", file.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", file.string(), e.what()));
  }
  RunConfig c = config_from_json(j);
  const auto base = file.parent_path();
  auto resolve = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = (base / p).lexically_normal();
  };
  resolve(c.data);
  resolve(c.output);
  for (auto& s : c.covariates) resolve(s.path);
  return c;
}

void save_config(const RunConfig& c, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ConfigError(fmt::format("cannot write {}", file.string()));
  out << to_json(c).dump(2) << '\n';
}

}  // namespace spext
