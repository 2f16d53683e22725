#include "spext/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "spext/errors.hpp"
#include "spext/linalg.hpp"
#include "spext/normal.hpp"

namespace spext {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

double intercept_prior_sd(GevParam g) {
  switch (g) {
    case GevParam::mu:
      return PriorScales::intercept_mu;
    case GevParam::sigma:
      return PriorScales::intercept_sigma;
    case GevParam::xi:
      return PriorScales::intercept_xi;
  }
  return 1.0;
}

namespace {

double variance_sd(GevParam g) {
  return g == GevParam::xi ? PriorScales::variance_xi : PriorScales::variance_mu_sigma;
}

}  // namespace

std::vector<int> ObservationSet::complete_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < complete.size(); ++i)
    if (complete[i]) out.push_back(static_cast<int>(i));
  return out;
}

void ObservationSet::update_complete_mask() {
  complete.assign(stations.size(), true);
  for (Eigen::Index j = 0; j < maxima.cols(); ++j)
    for (Eigen::Index t = 0; t < maxima.rows(); ++t)
      if (!std::isfinite(maxima(t, j))) complete[static_cast<std::size_t>(j)] = false;
}

ObservationSet ObservationSet::subset(std::span<const int> keep) const {
  ObservationSet out;
  out.years = years;
  out.covariates.resize(static_cast<Eigen::Index>(keep.size()), covariates.cols());
  out.maxima.resize(maxima.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t a = 0; a < keep.size(); ++a) {
    const auto i = static_cast<std::size_t>(keep[a]);
    if (!station_ids.empty()) out.station_ids.push_back(station_ids[i]);
    out.stations.push_back(stations[i]);
    out.complete.push_back(complete[i]);
    out.covariates.row(static_cast<Eigen::Index>(a)) = covariates.row(static_cast<Eigen::Index>(i));
    out.maxima.col(static_cast<Eigen::Index>(a)) = maxima.col(static_cast<Eigen::Index>(i));
  }
  return out;
}

void ObservationSet::validate() const {
  const auto m = static_cast<Eigen::Index>(stations.size());
  if (m == 0) throw DataError("observation set has no stations");
  if (covariates.rows() != m || maxima.cols() != m || complete.size() != stations.size())
    throw DataError("observation set dimensions disagree");
  if (static_cast<Eigen::Index>(years.size()) != maxima.rows())
    throw DataError("observation set: one year label per maxima row required");
}

Partitions make_partitions(const ObservationSet& obs, int n_g, std::uint64_t seed) {
  Partitions p;
  const int m = obs.station_count();
  p.all = make_partition(m, std::min(n_g, m), seed);
  const int mc = static_cast<int>(obs.complete_indices().size());
  if (mc > 0) p.complete = make_partition(mc, std::min(n_g, mc), seed ^ 0x9e3779b97f4a7c15ULL);
  return p;
}

double half_normal_logpdf(double x, double sd) {
  if (!(x >= 0.0)) return kNegInf;
  return std::numbers::ln2 + normal_logpdf(x, 0.0, sd);
}

double log_prior(const ModelState& state) {
  double lp = 0.0;
  for (GevParam g : kGevParams) {
    const auto& f = state.fields[idx(g)];
    lp += normal_logpdf(f.intercept, 0.0, intercept_prior_sd(g));
    for (Eigen::Index i = 0; i < f.weights.size(); ++i)
      lp += normal_logpdf(f.weights.data()[i], 0.0, PriorScales::weight);
    for (Eigen::Index i = 0; i < f.kernel_ranges.size(); ++i) {
      if (!(f.kernel_ranges[i] > 0.0)) return kNegInf;
      lp += half_normal_logpdf(f.kernel_ranges[i], PriorScales::range);
    }
    const auto& c = state.cov[idx(g)];
    if (!(c.range > 0.0)) return kNegInf;
    lp += half_normal_logpdf(c.psill, variance_sd(g));
    lp += half_normal_logpdf(c.nugget, variance_sd(g));
    lp += half_normal_logpdf(c.range, PriorScales::range);
  }
  if (!(state.copula.a0 > 0.0)) return kNegInf;
  lp += half_normal_logpdf(state.copula.a0, PriorScales::range);
  return std::isnan(lp) ? kNegInf : lp;
}

double latent_gp_loglik_grouped(const Eigen::VectorXd& w, const CovParams& theta,
                                std::span<const Site> sites, const GroupPartition& partition) {
  theta.validate();
  if (static_cast<std::size_t>(w.size()) != sites.size() || partition.station_count() != sites.size())
    throw std::domain_error("latent_gp_loglik_grouped: dimension mismatch");
  double total = 0.0;
  for (const auto& group : partition.members()) {
    std::vector<Site> gs;
    Eigen::VectorXd wg(static_cast<Eigen::Index>(group.size()));
    for (std::size_t a = 0; a < group.size(); ++a) {
      gs.push_back(sites[static_cast<std::size_t>(group[a])]);
      wg[static_cast<Eigen::Index>(a)] = w[group[a]];
    }
    const auto llt = cholesky_with_jitter(exp_cov_matrix(gs, theta));
    const double quad = llt.matrixL().solve(wg).squaredNorm();
    total += -0.5 * static_cast<double>(group.size()) * std::log(2.0 * std::numbers::pi) -
             0.5 * log_det(llt) - 0.5 * quad;
  }
  return total;
}

std::array<Eigen::VectorXd, 3> station_linear_predictors(const ModelState& state,
                                                         const ObservationSet& obs) {
  std::array<Eigen::VectorXd, 3> lin;
  const int m = obs.station_count();
  for (GevParam g : kGevParams) {
    const auto& f = state.fields[idx(g)];
    Eigen::VectorXd v(m);
    for (int i = 0; i < m; ++i) {
      const Eigen::VectorXd x = obs.covariates.row(i).transpose();
      v[i] = f.intercept + x.dot(eval_coefficients(f, obs.stations[static_cast<std::size_t>(i)])) +
             state.residuals[idx(g)][i];
    }
    lin[idx(g)] = std::move(v);
  }
  return lin;
}

std::vector<GevParams> station_gev(const ModelState& state, const ObservationSet& obs) {
  const auto lin = station_linear_predictors(state, obs);
  std::vector<GevParams> out;
  for (int i = 0; i < obs.station_count(); ++i) out.push_back(gev_from_linear(lin[0][i], lin[1][i], lin[2][i]));
  return out;
}

double log_posterior(const ModelState& state, const ObservationSet& obs, const Partitions& parts) {
  const double prior = log_prior(state);
  if (prior == kNegInf) return kNegInf;
  for (GevParam g : kGevParams)
    if (!state.cov[idx(g)].valid()) return kNegInf;

  double total = prior;
  try {
    for (GevParam g : kGevParams)
      total += latent_gp_loglik_grouped(state.residuals[idx(g)], state.cov[idx(g)], obs.stations, parts.all);

    const auto gev = station_gev(state, obs);
    for (int i = 0; i < obs.station_count(); ++i) {
      if (obs.complete[static_cast<std::size_t>(i)]) continue;
      for (int t = 0; t < obs.year_count(); ++t) {
        const double y = obs.maxima(t, i);
        if (std::isfinite(y)) total += gev_logpdf(y, gev[static_cast<std::size_t>(i)]);
      }
    }
    const auto complete = obs.complete_indices();
    if (!complete.empty()) {
      Eigen::MatrixXd years(obs.year_count(), static_cast<Eigen::Index>(complete.size()));
      std::vector<GevParams> cg;
      std::vector<Site> cs;
      for (std::size_t a = 0; a < complete.size(); ++a) {
        years.col(static_cast<Eigen::Index>(a)) = obs.maxima.col(complete[a]);
        cg.push_back(gev[static_cast<std::size_t>(complete[a])]);
        cs.push_back(obs.stations[static_cast<std::size_t>(complete[a])]);
      }
      total += copula_loglik_grouped(years, cg, cs, parts.complete, state.copula.a0);
    }
  } catch (const NumericalError&) {
    return kNegInf;
  }
  return std::isnan(total) ? kNegInf : total;
}

std::vector<std::string> ParameterLayout::names() const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(size()));
  for (GevParam g : kGevParams) {
    const std::string f = name_of(g);
    out.push_back(f + ".intercept");
    for (int i = 0; i < knots; ++i)
      for (int j = 0; j < covariates; ++j) out.push_back(fmt::format("{}.weight.{}.{}", f, i, j));
    for (int i = 0; i < knots; ++i) out.push_back(fmt::format("{}.kernel_range.{}", f, i));
    out.push_back(f + ".psill");
    out.push_back(f + ".range");
    out.push_back(f + ".nugget");
    for (int s = 0; s < stations; ++s) out.push_back(fmt::format("{}.w.{}", f, s));
  }
  out.push_back("copula.a0");
  return out;
}

std::vector<double> ParameterLayout::flatten(const ModelState& s) const {
  std::vector<double> v(static_cast<std::size_t>(size()));
  for (GevParam g : kGevParams) {
    const auto& f = s.fields[idx(g)];
    if (f.knot_count() != knots || f.n_covariates() != covariates ||
        s.residuals[idx(g)].size() != stations)
      throw std::domain_error("state does not match parameter layout");
    v[static_cast<std::size_t>(intercept_index(g))] = f.intercept;
    for (int i = 0; i < knots; ++i) {
      for (int j = 0; j < covariates; ++j) v[static_cast<std::size_t>(weight_index(g, i, j))] = f.weights(i, j);
      v[static_cast<std::size_t>(kernel_range_index(g, i))] = f.kernel_ranges[i];
    }
    const auto c = static_cast<std::size_t>(cov_index(g));
    v[c] = s.cov[idx(g)].psill;
    v[c + 1] = s.cov[idx(g)].range;
    v[c + 2] = s.cov[idx(g)].nugget;
    for (int st = 0; st < stations; ++st) v[static_cast<std::size_t>(residual_index(g, st))] = s.residuals[idx(g)][st];
  }
  v[static_cast<std::size_t>(copula_index())] = s.copula.a0;
  return v;
}

ModelState ParameterLayout::unflatten(std::span<const double> v, std::span<const Site> knot_sites) const {
  if (static_cast<int>(v.size()) != size() || static_cast<int>(knot_sites.size()) != knots)
    throw std::domain_error("parameter vector does not match layout");
  ModelState s;
  for (GevParam g : kGevParams) {
    auto& f = s.fields[idx(g)];
    f.intercept = v[static_cast<std::size_t>(intercept_index(g))];
    f.knots.assign(knot_sites.begin(), knot_sites.end());
    f.weights.resize(knots, covariates);
    f.kernel_ranges.resize(knots);
    for (int i = 0; i < knots; ++i) {
      for (int j = 0; j < covariates; ++j) f.weights(i, j) = v[static_cast<std::size_t>(weight_index(g, i, j))];
      f.kernel_ranges[i] = v[static_cast<std::size_t>(kernel_range_index(g, i))];
    }
    const auto c = static_cast<std::size_t>(cov_index(g));
    s.cov[idx(g)] = CovParams{v[c], v[c + 1], v[c + 2]};
    s.residuals[idx(g)].resize(stations);
    for (int st = 0; st < stations; ++st) s.residuals[idx(g)][st] = v[static_cast<std::size_t>(residual_index(g, st))];
  }
  s.copula.a0 = v[static_cast<std::size_t>(copula_index())];
  return s;
}

}  // namespace spext
