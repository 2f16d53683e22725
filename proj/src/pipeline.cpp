#include "spext/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "spext/copula.hpp"
#include "spext/diagnostics.hpp"
#include "spext/errors.hpp"
#include "spext/fit.hpp"
#include "spext/gev.hpp"
#include "spext/linalg.hpp"

namespace spext {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix(splitmix(splitmix(seed ^ a) ^ b) ^ c);
}

json sites_json(std::span<const Site> sites) {
  json out = json::array();
  for (const auto& s : sites) out.push_back({s.lon, s.lat});
  return out;
}

std::vector<Site> sites_from_json(const json& j) {
  std::vector<Site> out;
  for (const auto& p : j) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return out;
}

std::string period_label(double r) { return fmt::format("{:g}", r); }

ObservationSet screened_observations(const RunConfig& cfg, int* ingested) {
  const auto daily = read_daily_csv(cfg.data);
  if (ingested != nullptr) *ingested = static_cast<int>(daily.size());
  const auto years = cfg.years();
  const auto table = build_maxima(daily, cfg.season, years, cfg.missing_threshold);
  return screen_stations(table, cfg.min_years);
}

double rms(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : std::sqrt(v.squaredNorm() / static_cast<double>(v.size())); }

// Largest 4-connected region of cells with a common sign, as a share of the
// total absolute difference.
double largest_sign_region_share(const Eigen::VectorXd& diff, int n_lon, int n_lat) {
  const double total = diff.cwiseAbs().sum();
  if (!(total > 0.0)) return 0.0;
  std::vector<int> label(static_cast<std::size_t>(diff.size()), -1);
  auto sign = [&](Eigen::Index c) { return diff[c] > 0.0 ? 1 : diff[c] < 0.0 ? -1 : 0; };
  double best = 0.0;
  std::vector<Eigen::Index> stack;
  int next = 0;
  for (Eigen::Index start = 0; start < diff.size(); ++start) {
    if (label[static_cast<std::size_t>(start)] >= 0 || sign(start) == 0) continue;
    const int sg = sign(start);
    double mass = 0.0;
    stack.assign(1, start);
    label[static_cast<std::size_t>(start)] = next;
    while (!stack.empty()) {
      const Eigen::Index c = stack.back();
      stack.pop_back();
      mass += std::abs(diff[c]);
      const int i = static_cast<int>(c % n_lon), j = static_cast<int>(c / n_lon);
      const std::array<std::pair<int, int>, 4> nb{{{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}}};
      for (auto [a, b] : nb) {
        if (a < 0 || b < 0 || a >= n_lon || b >= n_lat) continue;
        const Eigen::Index d = static_cast<Eigen::Index>(b) * n_lon + a;
        if (label[static_cast<std::size_t>(d)] < 0 && sign(d) == sg) {
          label[static_cast<std::size_t>(d)] = next;
          stack.push_back(d);
        }
      }
    }
    best = std::max(best, mass);
    ++next;
  }
  return best / total;
}

}  // namespace

void write_file_atomic(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", tmp.string()));
    out << text;
    if (!out) throw DataError(fmt::format("write failed: {}", tmp.string()));
  }
  fs::rename(tmp, file);
}

std::vector<CovariateGrid> load_covariate_grids(const RunConfig& cfg) {
  std::vector<CovariateGrid> grids;
  for (const auto& c : cfg.covariates) grids.push_back(read_covariate_grid(c.path, c.name));
  return grids;
}

PreparedData prepare_data(const RunConfig& cfg) {
  PreparedData p;
  p.obs = screened_observations(cfg, &p.ingested_stations);
  p.grids = load_covariate_grids(cfg);
  p.standardizer = attach_covariates(p.obs, p.grids, cfg.standardize);
  return p;
}

ConvergenceSummary summarize_convergence(const PosteriorArchive& archive, double threshold) {
  ConvergenceSummary s;
  s.threshold = threshold;
  s.min_ess = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < archive.names.size(); ++p) {
    const Eigen::MatrixXd m = archive.chain_matrix(static_cast<int>(p));
    ParameterDiagnostic d;
    d.name = archive.names[p];
    const auto r = rhat(m);
    const auto e = effective_sample_size(m);
    d.degenerate = r.degenerate;
    d.rhat = r.value;
    d.ess = e.value;
    if (!d.degenerate) {
      if (s.worst.empty() || d.rhat > s.max_rhat) {
        s.max_rhat = d.rhat;
        s.worst = d.name;
      }
      if (!(d.rhat < threshold)) ++s.n_above;
      if (std::isfinite(d.ess)) s.min_ess = std::min(s.min_ess, d.ess);
    }
    s.parameters.push_back(std::move(d));
  }
  if (!std::isfinite(s.min_ess)) s.min_ess = 0.0;
  return s;
}

PosteriorArchive fit_observations(const ObservationSet& obs, const Standardizer& standardizer,
                                  std::span<const std::string> covariate_names, const RunConfig& cfg) {
  obs.validate();
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.knots), obs.stations.size());
  const auto knots = space_filling_knots(obs.stations, k);
  const auto parts = make_partitions(obs, cfg.group_size, cfg.seed);
  ChainConfig chains = cfg.chains;
  chains.seed = cfg.seed;
  PosteriorArchive a = run_chains(obs, parts, knots, chains);
  a.config = to_json(cfg);
  a.metadata = {
      {"stations", sites_json(obs.stations)},
      {"station_ids", obs.station_ids},
      {"knots", sites_json(knots)},
      {"covariates",
       {{"names", std::vector<std::string>(covariate_names.begin(), covariate_names.end())},
        {"mean", std::vector<double>(standardizer.mean.data(), standardizer.mean.data() + standardizer.mean.size())},
        {"sd", std::vector<double>(standardizer.sd.data(), standardizer.sd.data() + standardizer.sd.size())}}},
      {"years", obs.years},
      {"complete_stations", obs.complete_indices().size()},
      {"group_size", cfg.group_size},
  };
  return a;
}

std::vector<Site> archived_stations(const PosteriorArchive& archive) {
  return sites_from_json(archive.metadata.at("stations"));
}

ModelState archived_state(const PosteriorArchive& archive, Eigen::Index draw) {
  const auto knots = sites_from_json(archive.metadata.at("knots"));
  const ParameterLayout layout{static_cast<int>(knots.size()),
                               static_cast<int>(archive.metadata.at("covariates").at("names").size()),
                               static_cast<int>(archive.metadata.at("stations").size())};
  if (layout.size() != archive.draws.cols()) throw DataError("archive layout does not match its metadata");
  std::vector<double> row(static_cast<std::size_t>(archive.draws.cols()));
  for (Eigen::Index c = 0; c < archive.draws.cols(); ++c) row[static_cast<std::size_t>(c)] = archive.draws(draw, c);
  return layout.unflatten(row, knots);
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::domain_error("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

std::vector<Eigen::Index> thinned_draws(const PosteriorArchive& archive, int thin, int max_draws) {
  const int per_chain = archive.draws_per_chain;
  int stride = std::max(thin, 1);
  auto kept = [&](int s) { return (per_chain + s - 1) / s; };
  while (static_cast<long long>(archive.n_chains) * kept(stride) > max_draws && stride < per_chain) ++stride;
  std::vector<Eigen::Index> rows;
  for (int c = 0; c < archive.n_chains; ++c)
    for (int t = 0; t < per_chain; t += stride) rows.push_back(static_cast<Eigen::Index>(c) * per_chain + t);
  return rows;
}

GridResult grid_return_levels(const PosteriorArchive& archive, std::span<const CovariateGrid> grids,
                              const RunConfig& cfg) {
  GridResult out;
  out.cells = cfg.grid.cells();
  out.n_lon = cfg.grid.n_lon();
  out.n_lat = cfg.grid.n_lat();
  out.periods = cfg.return_periods;
  const auto n_cells = static_cast<Eigen::Index>(out.cells.size());

  // covariates in archive order, checked over the whole grid before any sampling
  const auto& cov_meta = archive.metadata.at("covariates");
  const auto names = cov_meta.at("names").get<std::vector<std::string>>();
  std::vector<CovariateGrid> ordered;
  for (const auto& n : names) {
    const auto it = std::find_if(grids.begin(), grids.end(), [&](const CovariateGrid& g) { return g.name == n; });
    if (it == grids.end()) throw ConfigError(fmt::format("covariate grid '{}' used by the fit is not configured", n));
    ordered.push_back(*it);
  }
  Eigen::MatrixXd raw(n_cells, static_cast<Eigen::Index>(ordered.size()));
  for (std::size_t g = 0; g < ordered.size(); ++g) {
    long long bad = 0;
    Site first_bad{};
    for (Eigen::Index c = 0; c < n_cells; ++c) {
      const double v = ordered[g].value_at(out.cells[static_cast<std::size_t>(c)]);
      if (std::isnan(v) && bad++ == 0) first_bad = out.cells[static_cast<std::size_t>(c)];
      raw(c, static_cast<Eigen::Index>(g)) = v;
    }
    if (bad > 0)
      throw ConfigError(fmt::format("grid extent exceeds covariate coverage: {} of {} cells have no '{}' value "
                                    "(first at {}, {})",
                                    bad, n_cells, ordered[g].name, first_bad.lon, first_bad.lat));
  }
  Standardizer tr;
  tr.mean = Eigen::Map<const Eigen::VectorXd>(cov_meta.at("mean").get<std::vector<double>>().data(),
                                              static_cast<Eigen::Index>(names.size()));
  tr.sd = Eigen::Map<const Eigen::VectorXd>(cov_meta.at("sd").get<std::vector<double>>().data(),
                                            static_cast<Eigen::Index>(names.size()));
  const Eigen::MatrixXd z = tr.apply(raw);

  const auto rows = thinned_draws(archive, cfg.grid.thin, cfg.grid.max_draws);
  const auto n_draws = static_cast<Eigen::Index>(rows.size());
  out.n_draws = static_cast<int>(n_draws);
  const int per_chain = static_cast<int>(rows.size()) / std::max(archive.n_chains, 1);
  std::vector<ModelState> states;
  states.reserve(rows.size());
  for (auto r : rows) states.push_back(archived_state(archive, r));

  const auto stations = archived_stations(archive);
  const auto knots = sites_from_json(archive.metadata.at("knots"));
  const Eigen::MatrixXd d_oo = distance_matrix(stations, stations);
  const std::size_t n_periods = out.periods.size();
  for (std::size_t r = 0; r < n_periods; ++r) {
    out.summary.emplace_back(n_cells, 3);
    out.sd.emplace_back(n_cells);
    out.ess.emplace_back(n_cells);
  }

  const int block = cfg.grid.block_cells;
  for (Eigen::Index b0 = 0, blk = 0; b0 < n_cells; b0 += block, ++blk) {
    const Eigen::Index nb = std::min<Eigen::Index>(block, n_cells - b0);
    const std::span<const Site> cells(out.cells.data() + b0, static_cast<std::size_t>(nb));
    const Eigen::MatrixXd d_oc = distance_matrix(stations, cells);
    const Eigen::MatrixXd d_ck2 = distance_matrix(cells, knots).array().square();
    const Eigen::MatrixXd zb = z.middleRows(b0, nb);
    std::vector<Eigen::MatrixXd> levels(n_periods, Eigen::MatrixXd(n_draws, nb));

    for (Eigen::Index d = 0; d < n_draws; ++d) {
      const ModelState& st = states[static_cast<std::size_t>(d)];
      std::array<Eigen::VectorXd, 3> lin;
      for (GevParam g : kGevParams) {
        const auto& f = st.fields[idx(g)];
        Eigen::VectorXd v = Eigen::VectorXd::Constant(nb, f.intercept);
        if (f.weights.cols() > 0 && f.knot_count() > 0) {
          const Eigen::RowVectorXd inv_a2 = f.kernel_ranges.array().square().inverse().transpose();
          const Eigen::MatrixXd basis = (-(d_ck2.array().rowwise() * inv_a2.array())).exp();
          v += ((basis * f.weights).array() * zb.array()).rowwise().sum().matrix();
        }
        const CovParams& th = st.cov[idx(g)];
        const auto llt = cholesky_with_jitter(exp_cov_from_distances(d_oo, th));
        const Eigen::MatrixXd a = llt.matrixL().solve(th.psill * (-d_oc.array() / th.range).exp().matrix());
        const Eigen::VectorXd alpha = llt.matrixL().solve(st.residuals[idx(g)]);
        const Eigen::VectorXd mean = a.transpose() * alpha;
        const Eigen::VectorXd var =
            ((th.psill + th.nugget) - a.colwise().squaredNorm().transpose().array()).max(0.0).matrix();
        std::mt19937_64 rng(stream_seed(cfg.seed, static_cast<std::uint64_t>(rows[static_cast<std::size_t>(d)]),
                                        static_cast<std::uint64_t>(blk), static_cast<std::uint64_t>(idx(g))));
        std::normal_distribution<double> normal;
        for (Eigen::Index c = 0; c < nb; ++c) v[c] += mean[c] + std::sqrt(var[c]) * normal(rng);
        lin[static_cast<std::size_t>(idx(g))] = std::move(v);
      }
      for (Eigen::Index c = 0; c < nb; ++c) {
        const GevParams p = gev_from_linear(lin[0][c], lin[1][c], lin[2][c]);
        for (std::size_t r = 0; r < n_periods; ++r) levels[r](d, c) = return_level(out.periods[r], p);
      }
    }

    for (std::size_t r = 0; r < n_periods; ++r)
      for (Eigen::Index c = 0; c < nb; ++c) {
        const Eigen::VectorXd col = levels[r].col(c);
        std::vector<double> v(col.data(), col.data() + col.size());
        out.summary[r](b0 + c, 0) = percentile(v, 0.025);
        out.summary[r](b0 + c, 1) = percentile(v, 0.5);
        out.summary[r](b0 + c, 2) = percentile(v, 0.975);
        out.sd[r][b0 + c] = std::sqrt((col.array() - col.mean()).square().sum() / std::max<double>(col.size() - 1, 1));
        double ess = static_cast<double>(col.size());
        if (per_chain >= 4) {
          Eigen::MatrixXd chains(archive.n_chains, per_chain);
          for (int k = 0; k < archive.n_chains; ++k) chains.row(k) = col.segment(k * per_chain, per_chain).transpose();
          const auto e = effective_sample_size(chains);
          if (!e.degenerate && std::isfinite(e.value)) ess = e.value;
        }
        out.ess[r][b0 + c] = ess;
      }
  }
  return out;
}

void write_grid_outputs(const GridResult& grid, const fs::path& dir, bool geojson) {
  fs::create_directories(dir);
  for (std::size_t r = 0; r < grid.periods.size(); ++r) {
    const auto& s = grid.summary[r];
    std::string csv = "lon,lat,q025,median,q975\n";
    for (std::size_t c = 0; c < grid.cells.size(); ++c) {
      const auto i = static_cast<Eigen::Index>(c);
      csv += fmt::format("{},{},{},{},{}\n", format_double(grid.cells[c].lon), format_double(grid.cells[c].lat),
                         format_double(s(i, 0)), format_double(s(i, 1)), format_double(s(i, 2)));
    }
    const std::string stem = "return_level_" + period_label(grid.periods[r]);
    write_file_atomic(dir / (stem + ".csv"), csv);
    if (geojson) {
      json features = json::array();
      const double h = grid.cells.size() > 1 ? 0.5 * std::abs(grid.cells[1].lon - grid.cells[0].lon) : 0.0625;
      for (std::size_t c = 0; c < grid.cells.size(); ++c) {
        const auto [lon, lat] = grid.cells[c];
        const auto i = static_cast<Eigen::Index>(c);
        features.push_back(
            {{"type", "Feature"},
             {"geometry",
              {{"type", "Polygon"},
               {"coordinates",
                json::array({json::array({{lon - h, lat - h}, {lon + h, lat - h}, {lon + h, lat + h}, {lon - h, lat + h},
                                          {lon - h, lat - h}})})}}},
             {"properties", {{"q025", s(i, 0)}, {"median", s(i, 1)}, {"q975", s(i, 2)}}}});
      }
      write_file_atomic(dir / (stem + ".geojson"),
                        json{{"type", "FeatureCollection"},
                             {"properties", {{"return_period", grid.periods[r]}}},
                             {"features", features}}
                                .dump() +
                            "\n");
    }
  }
  const json meta{{"cells", grid.cells.size()}, {"n_lon", grid.n_lon}, {"n_lat", grid.n_lat},
                  {"draws", grid.n_draws},      {"return_periods", grid.periods}};
  write_file_atomic(dir / "grid.json", meta.dump(2) + "\n");
}

FitOutcome cmd_fit(const RunConfig& cfg) {
  cfg.validate();
  cfg.check_paths();
  PreparedData prep = prepare_data(cfg);
  std::vector<std::string> names;
  for (const auto& c : cfg.covariates) names.push_back(c.name);
  FitOutcome o;
  o.ingested = prep.ingested_stations;
  o.retained = prep.obs.station_count();
  o.complete = static_cast<int>(prep.obs.complete_indices().size());
  o.archive = fit_observations(prep.obs, prep.standardizer, names, cfg);
  o.convergence = summarize_convergence(o.archive);

  write_archive(o.archive, cfg.output / "archive");
  json params = json::array();
  for (const auto& p : o.convergence.parameters)
    params.push_back({{"name", p.name},
                      {"rhat", p.degenerate ? json(nullptr) : json(p.rhat)},
                      {"ess", p.degenerate ? json(nullptr) : json(p.ess)}});
  json acceptance = json::object();
  for (std::size_t b = 0; b < o.archive.block_names.size(); ++b)
    acceptance[o.archive.block_names[b]] = o.archive.acceptance.col(static_cast<Eigen::Index>(b)).mean();
  const json report{
      {"stations", {{"ingested", o.ingested}, {"retained", o.retained}, {"complete", o.complete}}},
      {"convergence",
       {{"threshold", o.convergence.threshold},
        {"max_rhat", o.convergence.max_rhat},
        {"worst", o.convergence.worst},
        {"n_above", o.convergence.n_above},
        {"min_ess", o.convergence.min_ess},
        {"converged", o.convergence.converged()}}},
      {"parameters", params},
      {"acceptance", acceptance},
      {"config", to_json(cfg)},
  };
  write_file_atomic(cfg.output / "fit_report.json", report.dump(2) + "\n");
  write_file_atomic(cfg.output / "config.json", to_json(cfg).dump(2) + "\n");
  return o;
}

GridResult cmd_grid(const RunConfig& cfg, const fs::path& archive_dir) {
  cfg.validate();
  for (const auto& c : cfg.covariates)
    if (!fs::is_regular_file(c.path))
      throw ConfigError(fmt::format("covariate grid '{}' not found: {}", c.name, c.path.string()));
  const auto grids = load_covariate_grids(cfg);
  const auto archive = read_archive(archive_dir.empty() ? cfg.output / "archive" : archive_dir);
  GridResult g = grid_return_levels(archive, grids, cfg);
  write_grid_outputs(g, cfg.output / "grid", cfg.grid.geojson);
  return g;
}

ValidateSummary cmd_validate(const RunConfig& cfg) {
  cfg.validate();
  cfg.check_paths();
  const PreparedData prep = prepare_data(cfg);
  std::vector<std::string> names;
  for (const auto& c : cfg.covariates) names.push_back(c.name);
  const int m = prep.obs.station_count();
  const int n_drop = static_cast<int>(std::lround(cfg.drop_fraction * m));
  if (m - n_drop < 2) throw DataError("validate: too few stations left after dropping");

  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(stream_seed(cfg.seed, 0x76616c6964ULL, 0, 0));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> dropped(order.begin(), order.begin() + n_drop);
  std::vector<int> keep(order.begin() + n_drop, order.end());
  std::sort(dropped.begin(), dropped.end());
  std::sort(keep.begin(), keep.end());

  const auto full = fit_observations(prep.obs, prep.standardizer, names, cfg);
  const GridResult g_full = grid_return_levels(full, prep.grids, cfg);
  RunConfig sub_cfg = cfg;
  sub_cfg.seed = cfg.seed + 1;  // independent Monte Carlo for the refit
  ObservationSet sub = prep.obs.subset(keep);
  const auto part = fit_observations(sub, prep.standardizer, names, sub_cfg);
  const GridResult g_sub = grid_return_levels(part, prep.grids, sub_cfg);

  ValidateSummary s;
  s.stations = m;
  s.dropped = n_drop;
  s.periods = cfg.return_periods;
  const fs::path dir = cfg.output / "validate";
  json periods = json::array();
  for (std::size_t r = 0; r < s.periods.size(); ++r) {
    const Eigen::VectorXd diff = g_sub.summary[r].col(1) - g_full.summary[r].col(1);
    s.rms.push_back(rms(diff));
    const Eigen::VectorXd se2 = (1.2533 * g_full.sd[r].array() / g_full.ess[r].array().sqrt()).square() +
                                (1.2533 * g_sub.sd[r].array() / g_sub.ess[r].array().sqrt()).square();
    s.mc_noise_bound.push_back(3.0 * std::sqrt(se2.mean()));
    std::vector<double> v(diff.data(), diff.data() + diff.size());
    s.quantiles.push_back({percentile(v, 0.05), percentile(v, 0.25), percentile(v, 0.5), percentile(v, 0.75),
                           percentile(v, 0.95)});
    s.sign_region_share.push_back(largest_sign_region_share(diff, g_full.n_lon, g_full.n_lat));

    std::string csv = "lon,lat,full_median,subset_median,difference\n";
    for (std::size_t c = 0; c < g_full.cells.size(); ++c) {
      const auto i = static_cast<Eigen::Index>(c);
      csv += fmt::format("{},{},{},{},{}\n", format_double(g_full.cells[c].lon), format_double(g_full.cells[c].lat),
                         format_double(g_full.summary[r](i, 1)), format_double(g_sub.summary[r](i, 1)),
                         format_double(diff[i]));
    }
    write_file_atomic(dir / ("difference_" + period_label(s.periods[r]) + ".csv"), csv);
    periods.push_back({{"return_period", s.periods[r]},
                       {"rms", s.rms.back()},
                       {"mc_noise_bound", s.mc_noise_bound.back()},
                       {"quantiles", {{"q05", s.quantiles.back()[0]},
                                      {"q25", s.quantiles.back()[1]},
                                      {"q50", s.quantiles.back()[2]},
                                      {"q75", s.quantiles.back()[3]},
                                      {"q95", s.quantiles.back()[4]}}},
                       {"sign_region_share", s.sign_region_share.back()}});
  }
  std::string ids = "station_id,lon,lat\n";
  for (int i : dropped) {
    const auto& st = prep.obs.stations[static_cast<std::size_t>(i)];
    ids += fmt::format("{},{},{}\n", prep.obs.station_ids[static_cast<std::size_t>(i)], format_double(st.lon),
                       format_double(st.lat));
  }
  write_file_atomic(dir / "dropped_stations.csv", ids);
  const json summary{{"stations", m},
                     {"dropped", n_drop},
                     {"drop_fraction", cfg.drop_fraction},
                     {"draws", {{"full", g_full.n_draws}, {"subset", g_sub.n_draws}}},
                     {"convergence",
                      {{"full_max_rhat", summarize_convergence(full).max_rhat},
                       {"subset_max_rhat", summarize_convergence(part).max_rhat}}},
                     {"periods", periods}};
  write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
  return s;
}

GroupsSummary cmd_validate_groups(const RunConfig& cfg) {
  cfg.validate();
  cfg.check_paths();
  std::set<int> unique(cfg.group_sizes.begin(), cfg.group_sizes.end());
  if (unique.empty()) throw ConfigError("validate.group_sizes must not be empty");
  const PreparedData prep = prepare_data(cfg);
  std::vector<std::string> names;
  for (const auto& c : cfg.covariates) names.push_back(c.name);

  GroupsSummary s;
  s.sizes.assign(unique.begin(), unique.end());
  const fs::path dir = cfg.output / "validate_groups";
  const std::size_t last = static_cast<std::size_t>(
      std::max_element(cfg.return_periods.begin(), cfg.return_periods.end()) - cfg.return_periods.begin());
  json per_size = json::array();
  for (int n : s.sizes) {
    RunConfig c = cfg;
    c.group_size = n;
    const auto archive = fit_observations(prep.obs, prep.standardizer, names, c);
    GridResult g = grid_return_levels(archive, prep.grids, c);
    write_grid_outputs(g, dir / fmt::format("size_{}", n), false);
    const auto& sm = g.summary[last];
    s.mean_median.push_back(sm.col(1).mean());
    s.mean_width.push_back((sm.col(2) - sm.col(0)).mean());
    per_size.push_back({{"group_size", n},
                        {"max_rhat", summarize_convergence(archive).max_rhat},
                        {"mean_median", s.mean_median.back()},
                        {"mean_interval_width", s.mean_width.back()}});
    s.grids.push_back(std::move(g));
  }
  std::string csv = "size_a,size_b,rms_relative_difference\n";
  json comparisons = json::array();
  for (std::size_t a = 0; a < s.sizes.size(); ++a)
    for (std::size_t b = a + 1; b < s.sizes.size(); ++b) {
      const Eigen::ArrayXd x = s.grids[a].summary[last].col(1).array();
      const Eigen::ArrayXd y = s.grids[b].summary[last].col(1).array();
      const double rel = rms(((x - y) / (0.5 * (x + y))).matrix());
      s.comparisons.push_back({s.sizes[a], s.sizes[b], rel});
      csv += fmt::format("{},{},{}\n", s.sizes[a], s.sizes[b], format_double(rel));
      comparisons.push_back({{"size_a", s.sizes[a]}, {"size_b", s.sizes[b]}, {"rms_relative_difference", rel}});
    }
  write_file_atomic(dir / "comparison.csv", csv);
  write_file_atomic(dir / "summary.json",
                    json{{"return_period", cfg.return_periods[last]}, {"sizes", per_size}, {"comparisons", comparisons}}
                            .dump(2) +
                        "\n");
  return s;
}

DiagSummary copula_diagnostic(const ObservationSet& obs, const DiagSettings& settings, std::uint64_t seed) {
  DiagSummary s;
  const auto complete = obs.complete_indices();
  s.complete_stations = static_cast<int>(complete.size());
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < complete.size(); ++i)
    for (std::size_t j = i + 1; j < complete.size(); ++j) pairs.emplace_back(complete[i], complete[j]);
  s.total_pairs = static_cast<long long>(pairs.size());
  if (pairs.size() > static_cast<std::size_t>(settings.max_pairs)) {
    std::vector<std::pair<int, int>> picked;
    std::mt19937_64 rng(stream_seed(seed, 0x64696167ULL, 0, 0));
    std::sample(pairs.begin(), pairs.end(), std::back_inserter(picked), settings.max_pairs, rng);
    pairs = std::move(picked);
  }
  s.tested_pairs = static_cast<int>(pairs.size());
  int flagged = 0;
  for (auto [a, b] : pairs) {
    const Eigen::VectorXd x = obs.maxima.col(a), y = obs.maxima.col(b);
    const auto t = asymptotic_independence_test(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                                                std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
                                                settings.p, settings.alpha);
    if (!t.reject_dependence) {
      ++flagged;
      s.dependent.push_back({a, b, t.chi_hat, t.lower_bound});
    }
  }
  s.rejection_fraction = pairs.empty() ? 0.0 : static_cast<double>(flagged) / static_cast<double>(pairs.size());
  return s;
}

DiagSummary cmd_diag_copula(const RunConfig& cfg) {
  cfg.validate();
  if (!fs::exists(cfg.data)) throw ConfigError(fmt::format("data path not found: {}", cfg.data.string()));
  const ObservationSet obs = screened_observations(cfg, nullptr);
  const DiagSummary s = copula_diagnostic(obs, cfg.diag, cfg.seed);
  const fs::path dir = cfg.output / "diag";
  std::string csv = "station_a,lon_a,lat_a,station_b,lon_b,lat_b,chi_hat,lower_bound\n";
  for (const auto& d : s.dependent) {
    const auto& sa = obs.stations[static_cast<std::size_t>(d.a)];
    const auto& sb = obs.stations[static_cast<std::size_t>(d.b)];
    csv += fmt::format("{},{},{},{},{},{},{},{}\n", obs.station_ids[static_cast<std::size_t>(d.a)], format_double(sa.lon),
                       format_double(sa.lat), obs.station_ids[static_cast<std::size_t>(d.b)], format_double(sb.lon),
                       format_double(sb.lat), format_double(d.chi_hat), format_double(d.lower_bound));
  }
  write_file_atomic(dir / "dependent_pairs.csv", csv);
  const json report{{"complete_stations", s.complete_stations},
                    {"total_pairs", s.total_pairs},
                    {"tested_pairs", s.tested_pairs},
                    {"max_pairs", cfg.diag.max_pairs},
                    {"p", cfg.diag.p},
                    {"alpha", cfg.diag.alpha},
                    {"dependent_pairs", s.dependent.size()},
                    {"rejection_fraction", s.rejection_fraction}};
  write_file_atomic(dir / "copula_report.json", report.dump(2) + "\n");
  return s;
}

void cmd_simulate(const SyntheticSpec& spec, const fs::path& out, const RunConfig& base) {
  const SyntheticData data = simulate_network(spec);
  fs::create_directories(out);
  const auto daily = synthetic_daily(data, base.season);
  write_daily_csv(out / "daily.csv", daily);
  const auto grids = synthetic_covariate_grids(data.grid);
  for (const auto& g : grids) write_covariate_grid(out / (g.name + ".csv"), g);

  json stations = json::array();
  for (int s = 0; s < data.obs.station_count(); ++s) {
    const auto& p = data.station_gev[static_cast<std::size_t>(s)];
    stations.push_back({{"id", data.obs.station_ids[static_cast<std::size_t>(s)]},
                        {"lon", data.obs.stations[static_cast<std::size_t>(s)].lon},
                        {"lat", data.obs.stations[static_cast<std::size_t>(s)].lat},
                        {"mu", p.mu},
                        {"sigma", p.sigma},
                        {"xi", p.xi},
                        {"complete", static_cast<bool>(data.obs.complete[static_cast<std::size_t>(s)])}});
  }
  const auto layout = layout_for(data.obs, data.knots.size());
  const auto flat = layout.flatten(data.truth);
  const auto pnames = layout.names();
  json truth_params = json::object();
  for (std::size_t i = 0; i < flat.size(); ++i) truth_params[pnames[i]] = flat[i];
  const json truth{{"seed", spec.seed},
                   {"stations", stations},
                   {"knots", sites_json(data.knots)},
                   {"parameters", truth_params}};
  write_file_atomic(out / "truth.json", truth.dump(2) + "\n");

  RunConfig c = base;
  c.data = "daily.csv";
  c.covariates.clear();
  for (const auto& g : grids) c.covariates.push_back({g.name, g.name + ".csv"});
  c.output = "out";
  c.first_year = spec.first_year;
  c.last_year = spec.first_year + spec.years - 1;
  c.knots = spec.knots;
  c.grid.extent = spec.extent;
  c.grid.spacing = spec.grid_spacing;
  write_file_atomic(out / "config.json", to_json(c).dump(2) + "\n");
}

}  // namespace spext
