#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spext/model.hpp"

namespace spext {

/// Log posterior with cached per-station and per-group terms so that a
/// single-parameter change is re-evaluated locally. Each `propose_*` returns
/// the log posterior of the modified state; `commit` adopts the last
/// proposal and `discard` drops it.
class IncrementalPosterior {
 public:
  IncrementalPosterior(const ObservationSet& obs, const Partitions& parts, ModelState state);

  double value() const { return total_; }
  /// Log posterior of the pending proposal (the current value if none).
  double pending_value() const { return pending_cache_ || pending_residual_ ? pending_total_ : total_; }
  const ModelState& state() const { return cache_.state; }
  const std::vector<GevParams>& gev() const { return cache_.gev; }

  double propose_residual(GevParam g, int station, double value);
  /// intercept += delta and every residual -= delta (station parameters unchanged).
  double propose_shift(GevParam g, double delta);
  double propose_field(GevParam g, const RegressionField& field);
  /// Draws intercept and weights from their Gaussian full conditional given
  /// the station linear predictors (kernel ranges fixed); `z` holds
  /// 1 + k * p standard normal variates.
  double propose_regression_draw(GevParam g, std::span<const double> z);
  /// Moves one kernel range with the intercept and weights integrated out,
  /// then redraws them from their conditional. Returns the log ratio of the
  /// collapsed densities (new over current); the pending state is the full
  /// proposal.
  double propose_kernel_range(GevParam g, int knot, double range, std::span<const double> z);
  double propose_cov(GevParam g, const CovParams& theta);
  double propose_copula(double a0);

  void commit();
  void discard();

  /// Recomputes every cached term from scratch.
  void refresh();

 private:
  struct GpGroup {
    Eigen::MatrixXd inverse;
    double log_det = 0.0;
    double quad = 0.0;
    double term = 0.0;
  };
  struct CopulaGroup {
    Eigen::MatrixXd excess;  // R^-1 - I
    double log_det = 0.0;
    Eigen::MatrixXd scores;  // members x years
    double term = 0.0;
  };
  struct Cache {
    ModelState state;
    std::array<Eigen::MatrixXd, 3> basis;  // m x k per field
    std::array<Eigen::VectorXd, 3> linear;
    std::vector<GevParams> gev;
    Eigen::VectorXd marginal;
    std::array<std::vector<GpGroup>, 3> gp;
    std::vector<CopulaGroup> copula;
    double prior = 0.0;
    bool valid = true;
  };
  struct ResidualChange {
    GevParam g{};
    int station = 0;
    double value = 0.0;
    GevParams gev;
    double marginal = 0.0;
    Eigen::VectorXd score_row;
    double copula_term = 0.0;
    double gp_quad = 0.0;
    double gp_term = 0.0;
  };

  struct RegressionConditional {
    Eigen::MatrixXd design;  // m x (1 + k p)
    Eigen::LLT<Eigen::MatrixXd> precision;
    Eigen::VectorXd mean;
    double log_marginal = 0.0;  // up to terms free of the kernel ranges
  };
  RegressionConditional regression_conditional(const Cache& c, GevParam g) const;
  void apply_regression_draw(Cache& c, GevParam g, const RegressionConditional& rc,
                             std::span<const double> z) const;

  void rebuild_basis(Cache& c, GevParam g) const;
  void rebuild_linear(Cache& c, GevParam g) const;
  Eigen::VectorXd regression_part(const Cache& c, GevParam g) const;
  void rebuild_data(Cache& c) const;
  void rebuild_gp(Cache& c, GevParam g) const;
  void rebuild_gp_quads(Cache& c, GevParam g) const;
  void rebuild_copula(Cache& c) const;
  void rebuild_copula_terms(Cache& c) const;
  double station_marginal(int station, const GevParams& p) const;
  double sum(const Cache& c) const;

  const ObservationSet& obs_;
  std::vector<std::vector<int>> gp_groups_;
  std::vector<Eigen::MatrixXd> gp_dist_;
  std::vector<int> gp_group_of_, gp_pos_;
  std::vector<std::vector<int>> copula_groups_;  // station indices
  std::vector<Eigen::MatrixXd> copula_dist_;
  std::vector<int> copula_group_of_, copula_pos_;  // -1 for incomplete stations
  std::vector<std::vector<double>> station_values_;
  std::array<Eigen::MatrixXd, 3> knot_dist_;

  Cache cache_;
  double total_ = 0.0;

  std::optional<Cache> pending_cache_;
  std::optional<ResidualChange> pending_residual_;
  double pending_total_ = 0.0;
};

}  // namespace spext
