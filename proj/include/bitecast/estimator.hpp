#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bitecast/dist_est.hpp"
#include "bitecast/tables.hpp"

namespace bitecast {

// Table-driven estimate of G = E_{(x,y)} E_r L(y, p_r(x)). Each point reads
// the loss-mean table at ((2y-1) mu, sigma^2, K); parameter mixing collapses
// to the 2-D table at b_tilde = sigma^2 / K.
struct GEstimate {
  double g = 0.0;
  std::vector<double> per_point;
  std::size_t clamped_lookups = 0;
  std::size_t total_lookups = 0;
  double clamp_fraction() const {
    return total_lookups == 0 ? 0.0
                              : static_cast<double>(clamped_lookups) / total_lookups;
  }
};
GEstimate estimate_g(std::span<const PointStats> stats, std::span<const int> labels,
                     LossKind loss, MixScheme mix, std::uint32_t k,
                     const UniversalTable& loss_mean);

// Spread of the generalization error: mean per-point E_r L^2 minus the mean
// of squared per-point means; s2_over_n divides by the evaluation count.
// For the 0/1 loss the loss-square table may alias the loss-mean table.
struct S2Estimate {
  double s2 = 0.0;
  double s2_over_n = 0.0;
  std::size_t clamped_lookups = 0;
  std::size_t total_lookups = 0;
};
S2Estimate estimate_s2(std::span<const PointStats> stats, std::span<const int> labels,
                       LossKind loss, MixScheme mix, std::uint32_t k,
                       const UniversalTable& loss_mean,
                       const UniversalTable& loss_square_mean);

struct BvEstimate {
  double bias = 0.0;
  double variance = 0.0;
  std::vector<double> bias_point;
  std::vector<double> variance_point;
  std::size_t clamped_lookups = 0;
  std::size_t total_lookups = 0;
};

// NLL decomposition around the KL-geometric mean: per point
//   M+ = E log p+, M- = E log p- (sigmoid symmetry: the -mu lookup),
//   Z = e^{M+} + e^{M-}, B(x,y) = -log(e^{M_y}/Z), V(x) = -log Z.
BvEstimate estimate_bv_nll(std::span<const PointStats> stats, std::span<const int> labels,
                           MixScheme mix, std::uint32_t k, const UniversalTable& log_p);

// LS decomposition around the arithmetic mean. Both mixes consume the 2-D
// PMean/PSquareMean tables: parameter mixing at b_tilde = sigma^2/K; voting
// reads the single-classifier values and divides the variance by K (the
// variance of an iid mean), which is exact under the model.
BvEstimate estimate_bv_ls(std::span<const PointStats> stats, std::span<const int> labels,
                          MixScheme mix, std::uint32_t k, const UniversalTable& p_mean,
                          const UniversalTable& p_square_mean);

// Closed-form LS bias/variance via the probit approximation
//   kappa(v) = (1 + pi v / 8)^{-1/2}, rho(v) = (1 + lambda^2 v)^{-1/2},
//   lambda = 0.703, delta = 0.937.
// Voting keeps the single-classifier bias and divides the variance by K;
// parameter mixing replaces sigma^2 by sigma^2/K throughout.
struct LsClosedForm {
  double p_bar_plus = 0.0;
  double bias_point = 0.0;
  double variance_point = 0.0;
};
LsClosedForm ls_closed_form(double mu, double sigma2, std::uint32_t k, MixScheme mix, int y);

// Summary row produced by the pipeline; feeds the advisor and the CLI CSVs.
struct EstimateReport {
  LossKind loss = LossKind::ZeroOne;
  MixScheme mix = MixScheme::Voting;
  std::uint32_t k = 1;
  std::size_t bite_size = 0;
  double g = 0.0;
  double s2 = 0.0;
  double s2_over_n = 0.0;
  std::optional<double> bias;
  std::optional<double> variance;
  double clamp_fraction = 0.0;

  struct PerPoint {
    std::size_t example_id = 0;
    int y = 0;
    double mu = 0.0;
    double sigma2 = 0.0;
    double g = 0.0;
    double b = 0.0;  // meaningful only when the report carries bias/variance
    double v = 0.0;
  };
  std::optional<std::vector<PerPoint>> per_point;
};

// Tables required for one (loss, mix) configuration. log_p is consulted for
// NLL, p_mean/p_square_mean for LS; loss_square_mean may alias loss_mean for
// the 0/1 loss.
struct TableSet {
  const UniversalTable* loss_mean = nullptr;
  const UniversalTable* loss_square_mean = nullptr;
  const UniversalTable* log_p = nullptr;
  const UniversalTable* p_mean = nullptr;
  const UniversalTable* p_square_mean = nullptr;
};

EstimateReport estimate_report(std::span<const PointStats> stats, std::span<const int> labels,
                               LossKind loss, MixScheme mix, std::uint32_t k,
                               std::size_t bite_size, const TableSet& tables,
                               bool keep_per_point = false);

}  // namespace bitecast
