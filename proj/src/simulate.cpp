#include "spext/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "spext/linalg.hpp"
#include "spext/normal.hpp"

namespace spext {
namespace {

Eigen::VectorXd draw_gp(std::span<const Site> sites, const CovParams& theta, std::mt19937_64& rng) {
  const auto llt = cholesky_with_jitter(exp_cov_matrix(sites, theta));
  std::normal_distribution<double> z;
  Eigen::VectorXd e(static_cast<Eigen::Index>(sites.size()));
  for (auto& v : e) v = z(rng);
  return llt.matrixL() * e;
}

}  // namespace

SyntheticGrid synthetic_grid(const Extent& extent, double spacing) {
  if (!(spacing > 0.0)) throw std::domain_error("grid spacing must be positive");
  SyntheticGrid g;
  g.spacing = spacing;
  g.n_lon = static_cast<int>(std::floor((extent.lon_max - extent.lon_min) / spacing + 1e-9)) + 1;
  g.n_lat = static_cast<int>(std::floor((extent.lat_max - extent.lat_min) / spacing + 1e-9)) + 1;
  for (int j = 0; j < g.n_lat; ++j) {
    for (int i = 0; i < g.n_lon; ++i) {
      const Site s{extent.lon_min + i * spacing, extent.lat_min + j * spacing};
      const double u = (s.lon - extent.lon_min) / (extent.lon_max - extent.lon_min);
      const double v = (s.lat - extent.lat_min) / (extent.lat_max - extent.lat_min);
      g.cells.push_back(s);
      // a ridge running north-south plus a gentle rise to the north
      g.elevation.push_back(400.0 + 1600.0 * std::exp(-std::pow((u - 0.6) / 0.18, 2)) + 300.0 * v);
      // wetter on the coast side of the ridge
      g.precip.push_back(120.0 + 380.0 * (1.0 - u) * (0.6 + 0.4 * std::sin(std::numbers::pi * v)));
    }
  }
  return g;
}

std::size_t nearest_cell(const SyntheticGrid& grid, const Site& s) {
  const Site& origin = grid.cells.front();
  const int i = std::clamp(static_cast<int>(std::lround((s.lon - origin.lon) / grid.spacing)), 0, grid.n_lon - 1);
  const int j = std::clamp(static_cast<int>(std::lround((s.lat - origin.lat) / grid.spacing)), 0, grid.n_lat - 1);
  return static_cast<std::size_t>(j * grid.n_lon + i);
}

SyntheticData simulate_network(const SyntheticSpec& spec) {
  if (spec.stations < 2 || spec.years < 1 || spec.knots < 1 || spec.knots > spec.stations)
    throw std::domain_error("synthetic network: invalid sizes");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> z;

  SyntheticData d;
  d.spec = spec;
  d.grid = synthetic_grid(spec.extent, spec.grid_spacing);
  const int m = spec.stations;
  const Extent& e = spec.extent;

  auto& obs = d.obs;
  Eigen::MatrixXd raw(m, 2);
  for (int s = 0; s < m; ++s) {
    // keep stations off the outermost half cell so nearest-cell lookups stay inside
    const double margin = 0.5 * spec.grid_spacing;
    const Site site{e.lon_min + margin + (e.lon_max - e.lon_min - 2 * margin) * unif(rng),
                    e.lat_min + margin + (e.lat_max - e.lat_min - 2 * margin) * unif(rng)};
    obs.stations.push_back(site);
    obs.station_ids.push_back(fmt::format("SYN{:05d}", s));
    const auto c = nearest_cell(d.grid, site);
    raw(s, 0) = d.grid.elevation[c];
    raw(s, 1) = d.grid.precip[c];
  }
  d.cov_mean = raw.colwise().mean().transpose();
  for (int j = 0; j < 2; ++j) {
    const double var = (raw.col(j).array() - d.cov_mean[j]).square().sum() / (m - 1);
    d.cov_sd[j] = std::sqrt(var);
  }
  obs.covariates = (raw.rowwise() - d.cov_mean.transpose()).array().rowwise() / d.cov_sd.transpose().array();

  d.knots = space_filling_knots(obs.stations, static_cast<std::size_t>(spec.knots));
  const auto k = static_cast<Eigen::Index>(spec.knots);

  auto& truth = d.truth;
  const std::array<double, 3> intercept{28.0, std::log(8.0), 0.1};
  const std::array<double, 3> weight_sd{1.5, 0.08, 0.02};
  const std::array<CovParams, 3> theta{CovParams{1.0, 150.0, 0.1}, CovParams{0.02, 200.0, 0.005},
                                       CovParams{0.005, 200.0, 0.001}};
  for (GevParam g : kGevParams) {
    auto& f = truth.fields[idx(g)];
    f.intercept = intercept[idx(g)];
    f.knots = d.knots;
    f.kernel_ranges.resize(k);
    for (auto& a : f.kernel_ranges) a = 300.0 * std::exp(0.15 * z(rng));
    f.weights.resize(k, 2);
    for (Eigen::Index i = 0; i < f.weights.size(); ++i) f.weights.data()[i] = weight_sd[idx(g)] * z(rng);
    truth.cov[idx(g)] = theta[idx(g)];
    truth.residuals[idx(g)] = draw_gp(obs.stations, theta[idx(g)], rng);
  }
  truth.copula.a0 = spec.copula_range;

  obs.complete.assign(static_cast<std::size_t>(m), true);
  obs.years.resize(static_cast<std::size_t>(spec.years));
  for (int t = 0; t < spec.years; ++t) obs.years[static_cast<std::size_t>(t)] = spec.first_year + t;
  d.station_gev = station_gev(truth, obs);

  const auto dep = cholesky_with_jitter(dependogram_matrix(obs.stations, spec.copula_range));
  obs.maxima.resize(spec.years, m);
  Eigen::VectorXd e_t(m);
  for (int t = 0; t < spec.years; ++t) {
    for (auto& v : e_t) v = z(rng);
    const Eigen::VectorXd u = dep.matrixL() * e_t;
    for (int s = 0; s < m; ++s) {
      const double q = std::clamp(normal_cdf(u[s]), kScoreClip, 1.0 - kScoreClip);
      obs.maxima(t, s) = gev_quantile(q, d.station_gev[static_cast<std::size_t>(s)]);
    }
  }

  const int n_incomplete = static_cast<int>(std::round(spec.incomplete_fraction * m));
  std::uniform_int_distribution<int> pick_year(0, spec.years - 1);
  std::uniform_int_distribution<int> n_missing(1, std::max(1, spec.max_missing_years));
  for (int s = m - n_incomplete; s < m; ++s) {
    const int holes = n_missing(rng);
    for (int h = 0; h < holes; ++h) obs.maxima(pick_year(rng), s) = std::numeric_limits<double>::quiet_NaN();
  }
  obs.update_complete_mask();
  return d;
}

}  // namespace spext

namespace spext {

std::vector<DailySeries> synthetic_daily(const SyntheticData& data, Season season) {
  const auto& obs = data.obs;
  std::mt19937_64 rng(data.spec.seed ^ 0x5851f42d4c957f2dULL);
  std::vector<DailySeries> out;
  for (int s = 0; s < obs.station_count(); ++s) {
    DailySeries d;
    d.station_id = obs.station_ids[static_cast<std::size_t>(s)];
    d.site = obs.stations[static_cast<std::size_t>(s)];
    for (int t = 0; t < obs.year_count(); ++t) {
      const auto [first, last] = season_span(season, obs.years[static_cast<std::size_t>(t)]);
      const int n = static_cast<int>((last - first).count()) + 1;
      const double y = obs.maxima(t, s);
      const int gap = std::isfinite(y) ? 0 : static_cast<int>(std::ceil(0.3 * n));
      const int spike = std::uniform_int_distribution<int>(gap, n - 1)(rng);
      for (int i = 0; i < n; ++i) {
        d.dates.push_back(first + std::chrono::days{i});
        d.prcp.push_back(i < gap ? std::numeric_limits<double>::quiet_NaN() : i == spike && std::isfinite(y) ? y : 0.0);
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<CovariateGrid> synthetic_covariate_grids(const SyntheticGrid& grid) {
  std::vector<CovariateGrid> out(2);
  const std::array<const std::vector<double>*, 2> src{&grid.elevation, &grid.precip};
  const std::array<const char*, 2> names{"elevation", "precip"};
  for (std::size_t c = 0; c < 2; ++c) {
    auto& g = out[c];
    g.name = names[c];
    g.lon0 = grid.cells.front().lon;
    g.lat0 = grid.cells.front().lat;
    g.dlon = g.dlat = grid.spacing;
    g.n_lon = grid.n_lon;
    g.n_lat = grid.n_lat;
    g.values = *src[c];
  }
  return out;
}

}  // namespace spext
