#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "spext/config.hpp"
#include "spext/errors.hpp"
#include "spext/ingest.hpp"
#include "spext/pipeline.hpp"
#include "spext/simulate.hpp"

namespace fs = std::filesystem;
using namespace spext;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> season;
  std::optional<std::string> out;
};

void add_common(CLI::App* app, CommonOptions& o, bool config_required = true) {
  auto* c = app->add_option("--config", o.config, "run configuration (JSON)");
  if (config_required) c->required();
  app->add_option("--seed", o.seed, "override the configured seed");
  app->add_option("--season", o.season, "override the season (DJF, MAM, JJA, SON)");
  app->add_option("--out", o.out, "override the output directory");
}

RunConfig resolve(const CommonOptions& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.seed) cfg.seed = cfg.chains.seed = *o.seed;
  if (o.season) cfg.season = parse_season(*o.season);
  if (o.out) cfg.output = *o.out;
  return cfg;
}

void print_grid(const GridResult& g, const fs::path& dir) {
  fmt::print("grid: {} cells ({} x {}), {} posterior draws -> {}\n", g.cells.size(), g.n_lon, g.n_lat, g.n_draws,
             dir.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian spatial extremes: fit, map and validate seasonal precipitation maxima"};
  app.require_subcommand(1);

  CommonOptions fit_o, grid_o, val_o, groups_o, diag_o;
  bool no_strict = false;
  std::string archive_dir;
  std::vector<int> sizes;

  auto* fit = app.add_subcommand("fit", "ingest, sample the posterior and write an archive with diagnostics");
  add_common(fit, fit_o);
  fit->add_flag("--no-strict", no_strict, "exit 0 even when some R-hat >= 1.1");

  auto* grid = app.add_subcommand("grid", "gridded return-level medians and 95% intervals from an archive");
  add_common(grid, grid_o);
  grid->add_option("--archive", archive_dir, "archive directory (default <out>/archive)");

  auto* validate = app.add_subcommand("validate", "drop-station cross-validation of the return-level map");
  add_common(validate, val_o);

  auto* groups = app.add_subcommand("validate-groups", "compare return-level maps across group sizes");
  add_common(groups, groups_o);
  groups->add_option("--sizes", sizes, "group sizes (default from config)");

  auto* diag = app.add_subcommand("diag-copula", "pairwise asymptotic-independence tests");
  add_common(diag, diag_o);

  std::vector<std::string> dly;
  std::string stations_file, csv_out;
  auto* ghcn = app.add_subcommand("convert-ghcn", "convert GHCN-Daily .dly files to the daily CSV format");
  ghcn->add_option("files", dly, ".dly files or directories")->required();
  ghcn->add_option("--stations", stations_file, "ghcnd-stations.txt")->required();
  ghcn->add_option("--out", csv_out, "output CSV file")->required();

  CommonOptions sim_o;
  SyntheticSpec spec;
  auto* sim = app.add_subcommand("simulate", "write a synthetic network (daily CSV, covariate grids, truth, config)");
  add_common(sim, sim_o, false);
  sim->add_option("--stations", spec.stations, "number of stations")->capture_default_str();
  sim->add_option("--years", spec.years, "number of seasons")->capture_default_str();
  sim->add_option("--first-year", spec.first_year, "first season")->capture_default_str();
  sim->add_option("--knots", spec.knots, "kernel knots of the true surfaces")->capture_default_str();
  sim->add_option("--spacing", spec.grid_spacing, "covariate grid spacing (degrees)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (fit->parsed()) {
      const RunConfig cfg = resolve(fit_o);
      const FitOutcome o = cmd_fit(cfg);
      const auto& c = o.convergence;
      fmt::print("stations: {} ingested, {} retained, {} complete\n", o.ingested, o.retained, o.complete);
      fmt::print("draws: {} chains x {}\n", o.archive.n_chains, o.archive.draws_per_chain);
      fmt::print("max R-hat {:.4f} ({}), {} parameter(s) >= {}, min ESS {:.0f}\n", c.max_rhat, c.worst, c.n_above,
                 c.threshold, c.min_ess);
      fmt::print("archive: {}\n", (cfg.output / "archive").string());
      if (!c.converged() && !no_strict) {
        fmt::print(stderr, "convergence check failed (use --no-strict to accept)\n");
        return kExitConvergence;
      }
    } else if (grid->parsed()) {
      const RunConfig cfg = resolve(grid_o);
      print_grid(cmd_grid(cfg, archive_dir), cfg.output / "grid");
    } else if (validate->parsed()) {
      const RunConfig cfg = resolve(val_o);
      const auto s = cmd_validate(cfg);
      fmt::print("dropped {} of {} stations\n", s.dropped, s.stations);
      for (std::size_t r = 0; r < s.periods.size(); ++r)
        fmt::print("{:>6g}-yr: RMS difference {:.4g} (Monte Carlo bound {:.4g}), largest sign region {:.0f}%\n",
                   s.periods[r], s.rms[r], s.mc_noise_bound[r], 100.0 * s.sign_region_share[r]);
    } else if (groups->parsed()) {
      RunConfig cfg = resolve(groups_o);
      if (!sizes.empty()) cfg.group_sizes = sizes;
      const auto s = cmd_validate_groups(cfg);
      for (std::size_t i = 0; i < s.sizes.size(); ++i)
        fmt::print("n_g {:>3}: mean median {:.4g}, mean 95% width {:.4g}\n", s.sizes[i], s.mean_median[i],
                   s.mean_width[i]);
      for (const auto& c : s.comparisons)
        fmt::print("n_g {} vs {}: RMS relative difference {:.2f}%\n", c.size_a, c.size_b, 100.0 * c.rms_relative);
    } else if (diag->parsed()) {
      const RunConfig cfg = resolve(diag_o);
      const auto s = cmd_diag_copula(cfg);
      fmt::print("{} complete stations, {} of {} pairs tested, dependence retained for {} ({:.3f}%)\n",
                 s.complete_stations, s.tested_pairs, s.total_pairs, s.dependent.size(), 100.0 * s.rejection_fraction);
    } else if (ghcn->parsed()) {
      std::vector<fs::path> files;
      for (const auto& f : dly) {
        if (fs::is_directory(f)) {
          for (const auto& e : fs::directory_iterator(f))
            if (e.path().extension() == ".dly") files.push_back(e.path());
        } else {
          files.emplace_back(f);
        }
      }
      std::sort(files.begin(), files.end());
      const auto series = read_ghcn(files, stations_file);
      write_daily_csv(csv_out, series);
      fmt::print("{} station(s) written to {}\n", series.size(), csv_out);
    } else if (sim->parsed()) {
      const RunConfig base = resolve(sim_o);
      if (sim_o.seed) spec.seed = *sim_o.seed;
      const fs::path out = sim_o.out ? fs::path(*sim_o.out) : fs::path("synthetic");
      cmd_simulate(spec, out, base);
      fmt::print("synthetic network: {} stations x {} seasons -> {}\n", spec.stations, spec.years, out.string());
    }
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return kExitData;
  } catch (const NumericalError& e) {
    fmt::print(stderr, "numerical error: {}\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return kExitOk;
}
