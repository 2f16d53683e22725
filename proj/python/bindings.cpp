#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "spext/archive.hpp"
#include "spext/config.hpp"
#include "spext/copula.hpp"
#include "spext/diagnostics.hpp"
#include "spext/errors.hpp"
#include "spext/gev.hpp"
#include "spext/pipeline.hpp"
#include "spext/simulate.hpp"
#include "spext/spatial.hpp"

namespace py = pybind11;
using namespace spext;

namespace {

using SiteArray = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

std::vector<Site> to_sites(const SiteArray& a) {
  std::vector<Site> out;
  for (Eigen::Index i = 0; i < a.rows(); ++i) out.push_back({a(i, 0), a(i, 1)});
  return out;
}

SiteArray from_sites(std::span<const Site> s) {
  SiteArray a(static_cast<Eigen::Index>(s.size()), 2);
  for (std::size_t i = 0; i < s.size(); ++i) a.row(static_cast<Eigen::Index>(i)) << s[i].lon, s[i].lat;
  return a;
}

GevParams gev(double mu, double sigma, double xi) { return {mu, sigma, xi}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bayesian spatial extremes core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("gev_logpdf", [](double y, double mu, double sigma, double xi) { return gev_logpdf(y, gev(mu, sigma, xi)); },
        py::arg("y"), py::arg("mu"), py::arg("sigma"), py::arg("xi"));
  m.def("gev_cdf", [](double y, double mu, double sigma, double xi) { return gev_cdf(y, gev(mu, sigma, xi)); },
        py::arg("y"), py::arg("mu"), py::arg("sigma"), py::arg("xi"));
  m.def("gev_quantile", [](double q, double mu, double sigma, double xi) { return gev_quantile(q, gev(mu, sigma, xi)); },
        py::arg("q"), py::arg("mu"), py::arg("sigma"), py::arg("xi"));
  m.def("return_level",
        [](double period, double mu, double sigma, double xi) { return return_level(period, gev(mu, sigma, xi)); },
        py::arg("period"), py::arg("mu"), py::arg("sigma"), py::arg("xi"));
  m.def(
      "gev_fit",
      [](const Eigen::VectorXd& y) {
        const auto f = gev_mle_fit(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
        return py::dict(py::arg("mu") = f.params.mu, py::arg("sigma") = f.params.sigma, py::arg("xi") = f.params.xi,
                        py::arg("loglik") = f.loglik, py::arg("converged") = f.converged);
      },
      py::arg("y"), "Maximum-likelihood GEV fit (NaN entries are skipped).");

  m.def("distance", [](double lon1, double lat1, double lon2, double lat2) { return distance({lon1, lat1}, {lon2, lat2}); });
  m.def(
      "distance_matrix", [](const SiteArray& a, const SiteArray& b) { return distance_matrix(to_sites(a), to_sites(b)); },
      py::arg("a"), py::arg("b"));
  m.def(
      "krige",
      [](const SiteArray& obs, const Eigen::VectorXd& values, const SiteArray& targets, double psill, double range,
         double nugget) {
        const auto k = krige_conditional({psill, range, nugget}, to_sites(obs), values, to_sites(targets));
        return py::make_tuple(k.mean, k.cov);
      },
      py::arg("obs_sites"), py::arg("values"), py::arg("targets"), py::arg("psill"), py::arg("range"),
      py::arg("nugget") = 0.0, "Conditional mean and covariance of a zero-mean exponential GP.");
  m.def(
      "conditional_simulate",
      [](const SiteArray& obs, const Eigen::VectorXd& values, const SiteArray& targets, double psill, double range,
         double nugget, int n_draws, std::uint64_t seed) {
        return conditional_simulate({psill, range, nugget}, to_sites(obs), values, to_sites(targets), n_draws, seed);
      },
      py::arg("obs_sites"), py::arg("values"), py::arg("targets"), py::arg("psill"), py::arg("range"),
      py::arg("nugget"), py::arg("n_draws"), py::arg("seed"));
  m.def(
      "space_filling_knots",
      [](const SiteArray& candidates, std::size_t k) { return from_sites(space_filling_knots(to_sites(candidates), k)); },
      py::arg("candidates"), py::arg("k"));

  m.def(
      "copula_loglik",
      [](const Eigen::VectorXd& y, const Eigen::MatrixXd& params, const Eigen::MatrixXd& dependence) {
        std::vector<GevParams> g;
        for (Eigen::Index i = 0; i < params.rows(); ++i) g.push_back(gev(params(i, 0), params(i, 1), params(i, 2)));
        return copula_loglik(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())), g, dependence);
      },
      py::arg("y"), py::arg("gev_params"), py::arg("dependence"),
      "Gaussian-copula log density of one year; gev_params is m x 3 (mu, sigma, xi).");
  m.def(
      "independence_test",
      [](const Eigen::VectorXd& x, const Eigen::VectorXd& y, double p, double alpha) {
        const auto t = asymptotic_independence_test(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                                                    std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
                                                    p, alpha);
        return py::dict(py::arg("chi_hat") = t.chi_hat, py::arg("reject_dependence") = t.reject_dependence,
                        py::arg("lower_bound") = t.lower_bound, py::arg("n_exceed") = t.n_exceed,
                        py::arg("n_joint") = t.n_joint);
      },
      py::arg("x"), py::arg("y"), py::arg("p") = 0.95, py::arg("alpha") = 0.01);

  m.def("rhat", [](const Eigen::MatrixXd& draws) { return rhat(draws).value; }, py::arg("draws"),
        "Split R-hat of a chains x iterations array (NaN when all draws are equal).");
  m.def("ess", [](const Eigen::MatrixXd& draws) { return effective_sample_size(draws).value; }, py::arg("draws"));

  m.def(
      "simulate",
      [](int stations, int years, int knots, std::uint64_t seed) {
        SyntheticSpec spec;
        spec.stations = stations;
        spec.years = years;
        spec.knots = knots;
        spec.seed = seed;
        const auto d = simulate_network(spec);
        Eigen::MatrixXd truth(stations, 3);
        for (int s = 0; s < stations; ++s) {
          const auto& p = d.station_gev[static_cast<std::size_t>(s)];
          truth.row(s) << p.mu, p.sigma, p.xi;
        }
        return py::dict(py::arg("sites") = from_sites(d.obs.stations), py::arg("covariates") = d.obs.covariates,
                        py::arg("maxima") = d.obs.maxima, py::arg("years") = d.obs.years,
                        py::arg("station_gev") = truth, py::arg("knots") = from_sites(d.knots));
      },
      py::arg("stations") = 40, py::arg("years") = 50, py::arg("knots") = 4, py::arg("seed") = 1,
      "Synthetic network drawn from the full model.");

  m.def(
      "read_archive",
      [](const std::filesystem::path& dir) {
        const auto a = read_archive(dir);
        return py::dict(py::arg("names") = a.names, py::arg("draws") = a.draws, py::arg("n_chains") = a.n_chains,
                        py::arg("draws_per_chain") = a.draws_per_chain, py::arg("seeds") = a.seeds);
      },
      py::arg("dir"), "Posterior archive as a dict; draws are (chains * iterations) x parameters, chain-major.");
  m.def(
      "default_config", [] { return to_json(RunConfig{}).dump(); }, "Default run configuration as JSON text.");
  m.def(
      "normalize_config", [](const std::string& text) { return to_json(config_from_json(nlohmann::json::parse(text))).dump(); },
      py::arg("text"), "Parses a JSON config, fills defaults and re-serializes it.");
}
