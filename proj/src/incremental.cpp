#include "spext/incremental.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "spext/errors.hpp"
#include "spext/linalg.hpp"

namespace spext {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

}  // namespace

IncrementalPosterior::IncrementalPosterior(const ObservationSet& obs, const Partitions& parts,
                                           ModelState state)
    : obs_(obs) {
  obs.validate();
  const int m = obs.station_count();
  gp_groups_ = parts.all.members();
  gp_group_of_.assign(static_cast<std::size_t>(m), -1);
  gp_pos_.assign(static_cast<std::size_t>(m), -1);
  for (std::size_t g = 0; g < gp_groups_.size(); ++g) {
    std::vector<Site> sites;
    for (std::size_t a = 0; a < gp_groups_[g].size(); ++a) {
      const auto s = static_cast<std::size_t>(gp_groups_[g][a]);
      gp_group_of_[s] = static_cast<int>(g);
      gp_pos_[s] = static_cast<int>(a);
      sites.push_back(obs.stations[s]);
    }
    gp_dist_.push_back(distance_matrix(sites, sites));
  }

  const auto complete = obs.complete_indices();
  copula_group_of_.assign(static_cast<std::size_t>(m), -1);
  copula_pos_.assign(static_cast<std::size_t>(m), -1);
  if (!complete.empty()) {
    for (const auto& local : parts.complete.members()) {
      std::vector<int> group;
      std::vector<Site> sites;
      for (std::size_t a = 0; a < local.size(); ++a) {
        const int s = complete[static_cast<std::size_t>(local[a])];
        copula_group_of_[static_cast<std::size_t>(s)] = static_cast<int>(copula_groups_.size());
        copula_pos_[static_cast<std::size_t>(s)] = static_cast<int>(a);
        group.push_back(s);
        sites.push_back(obs.stations[static_cast<std::size_t>(s)]);
      }
      copula_groups_.push_back(std::move(group));
      copula_dist_.push_back(distance_matrix(sites, sites));
    }
  }

  station_values_.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    for (int t = 0; t < obs.year_count(); ++t)
      if (std::isfinite(obs.maxima(t, i))) station_values_[static_cast<std::size_t>(i)].push_back(obs.maxima(t, i));

  for (GevParam g : kGevParams) {
    const auto& f = state.fields[idx(g)];
    f.validate();
    if (f.n_covariates() != obs.covariate_count()) throw std::domain_error("field covariates disagree with data");
    if (state.residuals[idx(g)].size() != m) throw std::domain_error("residual vector has wrong length");
    knot_dist_[idx(g)] = distance_matrix(obs.stations, f.knots);
  }
  cache_.state = std::move(state);
  refresh();
}

void IncrementalPosterior::rebuild_basis(Cache& c, GevParam g) const {
  const auto& ranges = c.state.fields[idx(g)].kernel_ranges;
  const auto& d = knot_dist_[idx(g)];
  c.basis[idx(g)] = (-(d.array().rowwise() / ranges.transpose().array()).square()).exp().matrix();
}

Eigen::VectorXd IncrementalPosterior::regression_part(const Cache& c, GevParam g) const {
  const auto& f = c.state.fields[idx(g)];
  const Eigen::MatrixXd coef = c.basis[idx(g)] * f.weights;  // m x p
  Eigen::VectorXd r = (coef.cwiseProduct(obs_.covariates)).rowwise().sum();
  r.array() += f.intercept;
  return r;
}

void IncrementalPosterior::rebuild_linear(Cache& c, GevParam g) const {
  c.linear[idx(g)] = regression_part(c, g) + c.state.residuals[idx(g)];
}

double IncrementalPosterior::station_marginal(int station, const GevParams& p) const {
  double s = 0.0;
  for (double y : station_values_[static_cast<std::size_t>(station)]) s += gev_logpdf(y, p);
  return s;
}

void IncrementalPosterior::rebuild_data(Cache& c) const {
  const int m = obs_.station_count();
  c.gev.resize(static_cast<std::size_t>(m));
  c.marginal.resize(m);
  bool ok = true;
  for (int i = 0; i < m; ++i) {
    const auto p = gev_from_linear(c.linear[0][i], c.linear[1][i], c.linear[2][i]);
    c.gev[static_cast<std::size_t>(i)] = p;
    c.marginal[i] = station_marginal(i, p);
    if (!std::isfinite(c.marginal[i])) ok = false;
  }
  c.valid = ok;
  if (!ok) return;
  c.copula.resize(copula_groups_.size());
  for (std::size_t g = 0; g < copula_groups_.size(); ++g) {
    auto& cg = c.copula[g];
    const auto& members = copula_groups_[g];
    cg.scores.resize(static_cast<Eigen::Index>(members.size()), obs_.year_count());
    for (std::size_t a = 0; a < members.size(); ++a)
      for (int t = 0; t < obs_.year_count(); ++t)
        cg.scores(static_cast<Eigen::Index>(a), t) =
            normal_score(obs_.maxima(t, members[a]), c.gev[static_cast<std::size_t>(members[a])]);
  }
  rebuild_copula_terms(c);
}

void IncrementalPosterior::rebuild_copula(Cache& c) const {
  c.copula.resize(copula_groups_.size());
  for (std::size_t g = 0; g < copula_groups_.size(); ++g) {
    auto& cg = c.copula[g];
    const Eigen::MatrixXd r = (-copula_dist_[g].array() / c.state.copula.a0).exp().matrix();
    const auto llt = cholesky_with_jitter(r);
    const auto n = r.rows();
    cg.excess = llt.solve(Eigen::MatrixXd::Identity(n, n));
    cg.excess.diagonal().array() -= 1.0;
    cg.log_det = log_det(llt);
  }
  rebuild_copula_terms(c);
}

void IncrementalPosterior::rebuild_copula_terms(Cache& c) const {
  if (!c.valid) return;
  const double years = obs_.year_count();
  for (auto& cg : c.copula) {
    if (cg.scores.size() == 0 || cg.excess.size() == 0) continue;
    const Eigen::MatrixXd as = cg.excess * cg.scores;
    cg.term = -0.5 * years * cg.log_det - 0.5 * cg.scores.cwiseProduct(as).sum();
  }
}

void IncrementalPosterior::rebuild_gp(Cache& c, GevParam g) const {
  const auto& theta = c.state.cov[idx(g)];
  auto& groups = c.gp[idx(g)];
  groups.resize(gp_groups_.size());
  for (std::size_t k = 0; k < gp_groups_.size(); ++k) {
    const auto llt = cholesky_with_jitter(exp_cov_from_distances(gp_dist_[k], theta));
    const auto n = gp_dist_[k].rows();
    groups[k].inverse = llt.solve(Eigen::MatrixXd::Identity(n, n));
    groups[k].log_det = log_det(llt);
  }
  rebuild_gp_quads(c, g);
}

void IncrementalPosterior::rebuild_gp_quads(Cache& c, GevParam g) const {
  const auto& w = c.state.residuals[idx(g)];
  auto& groups = c.gp[idx(g)];
  for (std::size_t k = 0; k < gp_groups_.size(); ++k) {
    const auto& members = gp_groups_[k];
    Eigen::VectorXd wg(static_cast<Eigen::Index>(members.size()));
    for (std::size_t a = 0; a < members.size(); ++a) wg[static_cast<Eigen::Index>(a)] = w[members[a]];
    auto& gg = groups[k];
    gg.quad = wg.dot(gg.inverse * wg);
    gg.term = -0.5 * static_cast<double>(members.size()) * kLog2Pi - 0.5 * gg.log_det - 0.5 * gg.quad;
  }
}

double IncrementalPosterior::sum(const Cache& c) const {
  if (!c.valid || c.prior == kNegInf) return kNegInf;
  double total = c.prior;
  for (const auto& field : c.gp)
    for (const auto& gg : field) total += gg.term;
  total += c.marginal.sum();
  for (const auto& cg : c.copula) total += cg.term;
  return std::isnan(total) ? kNegInf : total;
}

void IncrementalPosterior::refresh() {
  Cache& c = cache_;
  c.prior = log_prior(c.state);
  c.valid = true;
  try {
    for (GevParam g : kGevParams) {
      rebuild_basis(c, g);
      rebuild_linear(c, g);
      rebuild_gp(c, g);
    }
    rebuild_copula(c);
    rebuild_data(c);
  } catch (const NumericalError&) {
    c.valid = false;
  } catch (const std::domain_error&) {
    c.valid = false;
  }
  total_ = sum(c);
  pending_cache_.reset();
  pending_residual_.reset();
}

double IncrementalPosterior::propose_residual(GevParam g, int station, double value) {
  discard();
  const Cache& c = cache_;
  const auto i = static_cast<std::size_t>(station);
  const double old_w = c.state.residuals[idx(g)][station];
  ResidualChange ch;
  ch.g = g;
  ch.station = station;
  ch.value = value;
  std::array<double, 3> lin{c.linear[0][station], c.linear[1][station], c.linear[2][station]};
  lin[idx(g)] += value - old_w;
  ch.gev = gev_from_linear(lin[0], lin[1], lin[2]);
  ch.marginal = station_marginal(station, ch.gev);
  if (!std::isfinite(ch.marginal) || !c.valid) {
    pending_residual_ = std::move(ch);
    pending_total_ = kNegInf;
    return pending_total_;
  }
  double total = total_ - c.marginal[station] + ch.marginal;

  const int cgi = copula_group_of_[i];
  if (cgi >= 0) {
    const auto& cg = c.copula[static_cast<std::size_t>(cgi)];
    const int a = copula_pos_[i];
    ch.score_row.resize(obs_.year_count());
    double delta_quad = 0.0;
    const Eigen::RowVectorXd cross = cg.excess.row(a) * cg.scores;  // includes the diagonal term
    for (int t = 0; t < obs_.year_count(); ++t) {
      const double s_new = normal_score(obs_.maxima(t, station), ch.gev);
      const double s_old = cg.scores(a, t);
      ch.score_row[t] = s_new;
      const double off = cross[t] - cg.excess(a, a) * s_old;
      delta_quad += (s_new * s_new - s_old * s_old) * cg.excess(a, a) + 2.0 * (s_new - s_old) * off;
    }
    ch.copula_term = cg.term - 0.5 * delta_quad;
    total += ch.copula_term - cg.term;
  }

  const int gpi = gp_group_of_[i];
  const auto& gg = c.gp[idx(g)][static_cast<std::size_t>(gpi)];
  const int b = gp_pos_[i];
  const auto& members = gp_groups_[static_cast<std::size_t>(gpi)];
  double off = 0.0;
  for (std::size_t j = 0; j < members.size(); ++j)
    if (static_cast<int>(j) != b) off += gg.inverse(b, static_cast<Eigen::Index>(j)) * c.state.residuals[idx(g)][members[j]];
  ch.gp_quad = gg.quad + (value * value - old_w * old_w) * gg.inverse(b, b) + 2.0 * (value - old_w) * off;
  ch.gp_term = -0.5 * static_cast<double>(members.size()) * kLog2Pi - 0.5 * gg.log_det - 0.5 * ch.gp_quad;
  total += ch.gp_term - gg.term;

  pending_residual_ = std::move(ch);
  pending_total_ = std::isnan(total) ? kNegInf : total;
  return pending_total_;
}

double IncrementalPosterior::propose_shift(GevParam g, double delta) {
  discard();
  Cache c = cache_;
  c.state.fields[idx(g)].intercept += delta;
  c.state.residuals[idx(g)].array() -= delta;
  c.prior = log_prior(c.state);
  rebuild_gp_quads(c, g);
  pending_total_ = sum(c);
  pending_cache_ = std::move(c);
  return pending_total_;
}

double IncrementalPosterior::propose_field(GevParam g, const RegressionField& field) {
  discard();
  Cache c = cache_;
  const bool ranges_changed = field.kernel_ranges != c.state.fields[idx(g)].kernel_ranges;
  c.state.fields[idx(g)] = field;
  c.prior = log_prior(c.state);
  c.valid = true;
  if (c.prior != kNegInf) {
    if (ranges_changed) rebuild_basis(c, g);
    rebuild_linear(c, g);
    rebuild_data(c);
  }
  pending_total_ = sum(c);
  pending_cache_ = std::move(c);
  return pending_total_;
}

IncrementalPosterior::RegressionConditional IncrementalPosterior::regression_conditional(const Cache& c,
                                                                                      GevParam g) const {
  const auto& f = c.state.fields[idx(g)];
  const Eigen::Index k = f.knot_count();
  const Eigen::Index p = f.n_covariates();
  const Eigen::Index n = 1 + k * p;
  const int m = obs_.station_count();

  // station linear predictor = design * (intercept, weights row-major) + w
  RegressionConditional rc;
  rc.design.resize(m, n);
  rc.design.col(0).setOnes();
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < p; ++j)
      rc.design.col(1 + i * p + j) = c.basis[idx(g)].col(i).cwiseProduct(obs_.covariates.col(j));
  const Eigen::VectorXd& lin = c.linear[idx(g)];

  Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(n, n) / (PriorScales::weight * PriorScales::weight);
  precision(0, 0) = 1.0 / (intercept_prior_sd(g) * intercept_prior_sd(g));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (std::size_t q = 0; q < gp_groups_.size(); ++q) {
    const auto& members = gp_groups_[q];
    const auto size = static_cast<Eigen::Index>(members.size());
    Eigen::MatrixXd ag(size, n);
    Eigen::VectorXd lg(size);
    for (Eigen::Index r = 0; r < size; ++r) {
      ag.row(r) = rc.design.row(members[static_cast<std::size_t>(r)]);
      lg[r] = lin[members[static_cast<std::size_t>(r)]];
    }
    const Eigen::MatrixXd qa = c.gp[idx(g)][q].inverse * ag;
    precision.noalias() += ag.transpose() * qa;
    rhs.noalias() += qa.transpose() * lg;
  }
  rc.precision.compute(precision);
  if (rc.precision.info() != Eigen::Success)
    throw NumericalError("regression conditional precision is not positive definite");
  rc.mean = rc.precision.solve(rhs);
  rc.log_marginal = -0.5 * log_det(rc.precision) + 0.5 * rhs.dot(rc.mean);
  return rc;
}

void IncrementalPosterior::apply_regression_draw(Cache& c, GevParam g, const RegressionConditional& rc,
                                                 std::span<const double> z) const {
  const auto n = rc.mean.size();
  if (static_cast<Eigen::Index>(z.size()) != n) throw std::domain_error("regression draw: wrong variate count");
  const Eigen::VectorXd draw = rc.mean + rc.precision.matrixU().solve(Eigen::Map<const Eigen::VectorXd>(z.data(), n));
  auto& f = c.state.fields[idx(g)];
  const Eigen::Index p = f.n_covariates();
  f.intercept = draw[0];
  for (Eigen::Index i = 0; i < f.knot_count(); ++i)
    for (Eigen::Index j = 0; j < p; ++j) f.weights(i, j) = draw[1 + i * p + j];
  c.state.residuals[idx(g)] = c.linear[idx(g)] - rc.design * draw;
  c.prior = log_prior(c.state);
  rebuild_gp_quads(c, g);
}

double IncrementalPosterior::propose_regression_draw(GevParam g, std::span<const double> z) {
  discard();
  Cache c = cache_;
  apply_regression_draw(c, g, regression_conditional(c, g), z);
  pending_total_ = sum(c);
  pending_cache_ = std::move(c);
  return pending_total_;
}

double IncrementalPosterior::propose_kernel_range(GevParam g, int knot, double range, std::span<const double> z) {
  discard();
  constexpr double kNegInfLocal = -std::numeric_limits<double>::infinity();
  if (!(range > 0.0) || !std::isfinite(range)) return kNegInfLocal;
  const double current = regression_conditional(cache_, g).log_marginal;
  Cache c = cache_;
  auto& ranges = c.state.fields[idx(g)].kernel_ranges;
  const double old_range = ranges[knot];
  ranges[knot] = range;
  rebuild_basis(c, g);
  RegressionConditional rc;
  try {
    rc = regression_conditional(c, g);
  } catch (const NumericalError&) {
    return kNegInfLocal;
  }
  apply_regression_draw(c, g, rc, z);
  pending_total_ = sum(c);
  pending_cache_ = std::move(c);
  return rc.log_marginal - current + half_normal_logpdf(range, PriorScales::range) -
         half_normal_logpdf(old_range, PriorScales::range);
}

double IncrementalPosterior::propose_cov(GevParam g, const CovParams& theta) {
  discard();
  Cache c = cache_;
  c.state.cov[idx(g)] = theta;
  c.prior = log_prior(c.state);
  if (c.prior != kNegInf && theta.valid()) {
    try {
      rebuild_gp(c, g);
    } catch (const NumericalError&) {
      c.prior = kNegInf;
    }
  } else {
    c.prior = kNegInf;
  }
  pending_total_ = sum(c);
  pending_cache_ = std::move(c);
  return pending_total_;
}

double IncrementalPosterior::propose_copula(double a0) {
  discard();
  Cache c = cache_;
  c.state.copula.a0 = a0;
  c.prior = log_prior(c.state);
  if (c.prior != kNegInf) {
    try {
      rebuild_copula(c);
    } catch (const NumericalError&) {
      c.prior = kNegInf;
    }
  }
  pending_total_ = sum(c);
  pending_cache_ = std::move(c);
  return pending_total_;
}

void IncrementalPosterior::commit() {
  if (pending_residual_) {
    const auto& ch = *pending_residual_;
    const auto i = static_cast<std::size_t>(ch.station);
    Cache& c = cache_;
    const double old_w = c.state.residuals[idx(ch.g)][ch.station];
    c.state.residuals[idx(ch.g)][ch.station] = ch.value;
    c.linear[idx(ch.g)][ch.station] += ch.value - old_w;
    c.gev[i] = ch.gev;
    c.marginal[ch.station] = ch.marginal;
    const int cgi = copula_group_of_[i];
    if (cgi >= 0 && ch.score_row.size() > 0) {
      auto& cg = c.copula[static_cast<std::size_t>(cgi)];
      cg.scores.row(copula_pos_[i]) = ch.score_row.transpose();
      cg.term = ch.copula_term;
    }
    auto& gg = c.gp[idx(ch.g)][static_cast<std::size_t>(gp_group_of_[i])];
    gg.quad = ch.gp_quad;
    gg.term = ch.gp_term;
    total_ = sum(c);
  } else if (pending_cache_) {
    cache_ = std::move(*pending_cache_);
    total_ = pending_total_;
  }
  pending_cache_.reset();
  pending_residual_.reset();
}

void IncrementalPosterior::discard() {
  pending_cache_.reset();
  pending_residual_.reset();
}

}  // namespace spext
