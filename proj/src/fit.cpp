#include "spext/fit.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "spext/gev.hpp"

namespace spext {

double domain_diameter(std::span<const Site> sites) {
  double d = 0.0;
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = i + 1; j < sites.size(); ++j) d = std::max(d, distance(sites[i], sites[j]));
  return d;
}

ModelState initial_state(const ObservationSet& obs, std::span<const Site> knots, std::mt19937_64* rng,
                         int attempt) {
  std::vector<double> pooled;
  for (Eigen::Index i = 0; i < obs.maxima.size(); ++i)
    if (std::isfinite(obs.maxima.data()[i])) pooled.push_back(obs.maxima.data()[i]);
  const GevParams base = gev_mle_fit(pooled).params;
  const double xi0 = std::clamp(base.xi, -kXiBound, kXiBound);

  std::array<std::vector<double>, 3> dev;
  for (int s = 0; s < obs.station_count(); ++s) {
    std::vector<double> y;
    for (int t = 0; t < obs.year_count(); ++t)
      if (std::isfinite(obs.maxima(t, s))) y.push_back(obs.maxima(t, s));
    if (y.size() < 10) continue;
    const GevParams at = gev_mle_fit(y).params;
    if (!std::isfinite(at.mu) || !(at.sigma > 0.0) || !std::isfinite(at.xi)) continue;
    dev[0].push_back(at.mu - base.mu);
    dev[1].push_back(std::log(at.sigma) - std::log(base.sigma));
    dev[2].push_back(std::clamp(at.xi, -kXiBound, kXiBound) - xi0);
  }
  auto variance = [](const std::vector<double>& v, double floor) {
    if (v.size() < 2) return floor;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::max(s / static_cast<double>(v.size() - 1), floor);
  };
  const std::array<double, 3> psill{variance(dev[0], 1e-3 * base.sigma * base.sigma), variance(dev[1], 1e-4),
                                    variance(dev[2], 1e-4)};
  const double diameter = std::max(domain_diameter(obs.stations), 1.0);

  const auto k = static_cast<Eigen::Index>(knots.size());
  const Eigen::Index p = obs.covariate_count();
  ModelState s;
  const std::array<double, 3> intercepts{base.mu, std::log(base.sigma), attempt >= 10 ? 0.0 : xi0};
  for (GevParam g : kGevParams) {
    auto& f = s.fields[idx(g)];
    f.intercept = intercepts[idx(g)];
    f.knots.assign(knots.begin(), knots.end());
    f.kernel_ranges = Eigen::VectorXd::Constant(k, diameter / 4.0);
    f.weights = Eigen::MatrixXd::Zero(k, p);
    s.residuals[idx(g)] = Eigen::VectorXd::Zero(obs.station_count());
    s.cov[idx(g)] = CovParams{psill[idx(g)], diameter / 4.0, 0.1 * psill[idx(g)]};
  }
  s.copula.a0 = diameter / 4.0;

  if (rng != nullptr) {
    std::normal_distribution<double> z;
    auto& r = *rng;
    for (GevParam g : kGevParams) {
      auto& f = s.fields[idx(g)];
      auto& c = s.cov[idx(g)];
      f.intercept += 0.3 * std::sqrt(c.psill) * z(r);
      if (g == GevParam::xi && attempt >= 10) f.intercept = 0.0;
      for (Eigen::Index i = 0; i < f.weights.size(); ++i) f.weights.data()[i] = 0.05 * z(r);
      for (Eigen::Index i = 0; i < k; ++i) f.kernel_ranges[i] *= std::exp(0.3 * z(r));
      c.psill *= std::exp(0.3 * z(r));
      c.range *= std::exp(0.3 * z(r));
      c.nugget *= std::exp(0.3 * z(r));
    }
    s.copula.a0 *= std::exp(0.3 * z(r));
  }

  // Pull the shape surface towards zero until every observation is inside
  // its station's support (the Gumbel limit has unbounded support).
  auto in_support = [&] {
    const auto gev = station_gev(s, obs);
    for (int i = 0; i < obs.station_count(); ++i)
      for (int t = 0; t < obs.year_count(); ++t) {
        const double y = obs.maxima(t, i);
        if (std::isfinite(y) && !std::isfinite(gev_logpdf(y, gev[static_cast<std::size_t>(i)]))) return false;
      }
    return true;
  };
  auto& xi_field = s.fields[idx(GevParam::xi)];
  for (int halving = 0; halving < 64 && !in_support(); ++halving) {
    xi_field.intercept *= 0.5;
    xi_field.weights *= 0.5;
  }
  return s;
}

ParameterLayout layout_for(const ObservationSet& obs, std::size_t knot_count) {
  return ParameterLayout{static_cast<int>(knot_count), obs.covariate_count(), obs.station_count()};
}

std::vector<ParameterGroup> archive_groups(const ParameterLayout& l) {
  std::vector<ParameterGroup> out;
  for (GevParam g : kGevParams) {
    const std::string f = name_of(g);
    out.push_back({f + ".regression", l.intercept_index(g), 1 + l.knots * l.covariates + l.knots});
    out.push_back({f + ".covariance", l.cov_index(g), 3});
    out.push_back({f + ".residuals", l.residual_index(g, 0), l.stations});
  }
  out.push_back({"copula", l.copula_index(), 1});
  return out;
}

HierarchicalTarget::HierarchicalTarget(const ObservationSet& obs, const Partitions& parts, ModelState state)
    : posterior_(obs, parts, std::move(state)),
      layout_(layout_for(obs, posterior_.state().fields[0].knots.size())) {
  const auto& st = posterior_.state();
  const auto members = parts.all.members();
  for (GevParam g : kGevParams) {
    const std::string f = name_of(g);
    const auto& c = st.cov[idx(g)];
    const double field_scale = 0.5 * std::sqrt(c.psill + c.nugget);
    for (const auto& group : members)
      for (int s : group)
        blocks_.push_back({Kind::residual, g, s, {fmt::format("{}.w.{}", f, s), 1, field_scale}});
    blocks_.push_back({Kind::regression, g, 0,
                       {f + ".regression", 0, 1.0, false, 1 + layout_.knots * layout_.covariates}});
    for (int i = 0; i < layout_.knots; ++i)
      blocks_.push_back({Kind::kernel_range, g, i,
                         {fmt::format("{}.kernel_range.{}", f, i), 1, 0.3, true, 1 + layout_.knots * layout_.covariates}});
    for (int i = 0; i < layout_.knots; ++i)
      blocks_.push_back({Kind::kernel_jump, g, i,
                         {fmt::format("{}.kernel_jump.{}", f, i), 0, 1.0, false, 2 + layout_.knots * layout_.covariates}});
    blocks_.push_back({Kind::psill, g, 0, {f + ".psill", 1, 0.3}});
    blocks_.push_back({Kind::range, g, 0, {f + ".range", 1, 0.3}});
    blocks_.push_back({Kind::nugget, g, 0, {f + ".nugget", 1, 0.3}});
    blocks_.push_back({Kind::sill_range, g, 0, {f + ".sill_range", 1, 0.3}});
  }
  if (!obs.complete_indices().empty()) blocks_.push_back({Kind::copula, GevParam::mu, 0, {"copula.a0", 1, 0.3}});
}

double HierarchicalTarget::propose(std::size_t b, std::span<const double> step) {
  const Block& blk = blocks_[b];
  const double current = posterior_.value();
  const auto& st = posterior_.state();
  const int g = idx(blk.field);
  double proposed = 0.0;
  double jacobian = 0.0;
  switch (blk.kind) {
    case Kind::residual:
      proposed = posterior_.propose_residual(blk.field, blk.index, st.residuals[g][blk.index] + step[0]);
      break;
    case Kind::regression:
      // Gibbs draw: always accepted
      proposed = posterior_.propose_regression_draw(blk.field, step);
      return std::isfinite(proposed) ? 0.0 : -std::numeric_limits<double>::infinity();
    case Kind::kernel_range: {
      // collapsed move: the returned value is already a log acceptance ratio
      const double log_ratio = posterior_.propose_kernel_range(
          blk.field, blk.index, st.fields[g].kernel_ranges[blk.index] * std::exp(step[0]), step.subspan(1));
      if (!std::isfinite(log_ratio) || !std::isfinite(posterior_.pending_value()))
        return -std::numeric_limits<double>::infinity();
      return log_ratio + step[0];
    }
    case Kind::kernel_jump: {
      // independence proposal from the half-normal prior: the prior ratio cancels
      const double from = st.fields[g].kernel_ranges[blk.index];
      const double to = PriorScales::range * std::abs(step[0]);
      const double log_ratio = posterior_.propose_kernel_range(blk.field, blk.index, to, step.subspan(1));
      if (!std::isfinite(log_ratio) || !std::isfinite(posterior_.pending_value()))
        return -std::numeric_limits<double>::infinity();
      return log_ratio - half_normal_logpdf(to, PriorScales::range) + half_normal_logpdf(from, PriorScales::range);
    }
    case Kind::psill:
    case Kind::range:
    case Kind::nugget: {
      CovParams c = st.cov[g];
      double& v = blk.kind == Kind::psill ? c.psill : blk.kind == Kind::range ? c.range : c.nugget;
      v *= std::exp(step[0]);
      jacobian = step[0];
      proposed = posterior_.propose_cov(blk.field, c);
      break;
    }
    case Kind::sill_range: {
      CovParams c = st.cov[g];
      c.psill *= std::exp(step[0]);
      c.range *= std::exp(step[0]);
      jacobian = 2.0 * step[0];
      proposed = posterior_.propose_cov(blk.field, c);
      break;
    }
    case Kind::copula:
      jacobian = step[0];
      proposed = posterior_.propose_copula(st.copula.a0 * std::exp(step[0]));
      break;
  }
  if (!std::isfinite(proposed)) return -std::numeric_limits<double>::infinity();
  return proposed - current + jacobian;
}

void HierarchicalTarget::write_parameters(std::span<double> out) const {
  const auto flat = layout_.flatten(posterior_.state());
  std::copy(flat.begin(), flat.end(), out.begin());
}

PosteriorArchive run_chains(const ObservationSet& obs, const Partitions& parts, std::span<const Site> knots,
                            const ChainConfig& config) {
  const std::vector<Site> knot_list(knots.begin(), knots.end());
  TargetFactory factory = [&](std::mt19937_64& rng, int attempt) -> std::unique_ptr<BlockTarget> {
    return std::make_unique<HierarchicalTarget>(obs, parts, initial_state(obs, knot_list, &rng, attempt));
  };
  const ChainsResult res = run_block_chains(factory, config);

  PosteriorArchive a;
  const auto layout = layout_for(obs, knots.size());
  a.names = res.parameter_names;
  a.groups = archive_groups(layout);
  a.n_chains = config.n_chains;
  a.draws_per_chain = config.n_iterations - config.n_warmup;
  a.draws.resize(static_cast<Eigen::Index>(a.n_chains) * a.draws_per_chain, layout.size());
  a.block_names = res.block_names;
  a.acceptance.resize(a.n_chains, static_cast<Eigen::Index>(res.block_names.size()));
  for (int c = 0; c < a.n_chains; ++c) {
    const auto& ch = res.chains[static_cast<std::size_t>(c)];
    a.draws.middleRows(static_cast<Eigen::Index>(c) * a.draws_per_chain, a.draws_per_chain) = ch.draws;
    for (std::size_t b = 0; b < ch.acceptance.size(); ++b) a.acceptance(c, static_cast<Eigen::Index>(b)) = ch.acceptance[b];
    a.seeds.push_back(ch.seed);
  }
  return a;
}

}  // namespace spext
