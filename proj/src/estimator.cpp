#include "bitecast/estimator.hpp"

#include <cmath>
#include <numbers>

namespace bitecast {

namespace {

void check_points(std::span<const PointStats> stats, std::span<const int> labels,
                  std::uint32_t k) {
  if (stats.empty()) throw InvalidInputError("estimator: no evaluation points");
  if (stats.size() != labels.size())
    throw InvalidInputError("estimator: stats/labels size mismatch");
  if (k < 1) throw InvalidInputError("estimator: K must be at least 1");
  for (const PointStats& s : stats)
    if (!(s.sigma2 >= 0.0) || !std::isfinite(s.mu) || !std::isfinite(s.sigma2))
      throw InvalidInputError("estimator: point stats must be finite with sigma2 >= 0");
}

// Table coordinates for one point under the requested mixing scheme.
struct Coord {
  double a;
  double b;
  std::uint32_t k;
};

Coord coord_for(const PointStats& s, int y, MixScheme mix, std::uint32_t k) {
  const double a = (y == 1 ? 1.0 : -1.0) * s.mu;
  if (mix == MixScheme::ParameterMixing)
    return {a, s.sigma2 / static_cast<double>(k), 1};
  return {a, s.sigma2, k};
}

void check_table(const UniversalTable& table, StatFamily family, MixScheme mix,
                 const char* what) {
  if (table.stat.family != family)
    throw ConfigError(std::string("estimator: ") + what + " table has stat " +
                      to_string(table.stat));
  if (table.mix != mix)
    throw ConfigError(std::string("estimator: ") + what +
                      " table was built for the wrong mixing scheme");
}

}  // namespace

GEstimate estimate_g(std::span<const PointStats> stats, std::span<const int> labels,
                     LossKind loss, MixScheme mix, std::uint32_t k,
                     const UniversalTable& loss_mean) {
  check_points(stats, labels, k);
  check_table(loss_mean, StatFamily::LossMean, mix, "loss-mean");
  if (loss_mean.stat.loss != loss)
    throw ConfigError("estimator: loss-mean table was built for loss " +
                      std::string(to_string(loss_mean.stat.loss)) + ", requested " +
                      to_string(loss));

  GEstimate out;
  out.per_point.resize(stats.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const Coord c = coord_for(stats[i], labels[i], mix, k);
    const LookupResult r = lookup(loss_mean, c.a, c.b, c.k);
    out.per_point[i] = r.value;
    out.clamped_lookups += r.clamped ? 1 : 0;
    sum += r.value;
  }
  out.total_lookups = stats.size();
  out.g = sum / static_cast<double>(stats.size());
  return out;
}

S2Estimate estimate_s2(std::span<const PointStats> stats, std::span<const int> labels,
                       LossKind loss, MixScheme mix, std::uint32_t k,
                       const UniversalTable& loss_mean,
                       const UniversalTable& loss_square_mean) {
  const bool zero_one_alias =
      loss == LossKind::ZeroOne && loss_square_mean.stat.family == StatFamily::LossMean;
  check_table(loss_square_mean,
              zero_one_alias ? StatFamily::LossMean : StatFamily::LossSquareMean, mix,
              "loss-square");
  if (loss_square_mean.stat.loss != loss || loss_square_mean.stat.link != loss_mean.stat.link)
    throw ConfigError("estimator: loss-square table does not match the loss-mean table");

  const GEstimate g = estimate_g(stats, labels, loss, mix, k, loss_mean);
  S2Estimate out;
  out.clamped_lookups = g.clamped_lookups;
  double sum_l2 = 0.0;
  double sum_g2 = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const Coord c = coord_for(stats[i], labels[i], mix, k);
    const LookupResult r = lookup(loss_square_mean, c.a, c.b, c.k);
    out.clamped_lookups += r.clamped ? 1 : 0;
    sum_l2 += r.value;
    sum_g2 += g.per_point[i] * g.per_point[i];
  }
  const double n = static_cast<double>(stats.size());
  out.total_lookups = 2 * stats.size();
  out.s2 = sum_l2 / n - sum_g2 / n;
  out.s2_over_n = out.s2 / n;
  return out;
}

BvEstimate estimate_bv_nll(std::span<const PointStats> stats, std::span<const int> labels,
                           MixScheme mix, std::uint32_t k, const UniversalTable& log_p) {
  check_points(stats, labels, k);
  check_table(log_p, StatFamily::LogP, mix, "log-p");

  BvEstimate out;
  out.bias_point.resize(stats.size());
  out.variance_point.resize(stats.size());
  double sum_b = 0.0, sum_v = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double b_tilde =
        mix == MixScheme::ParameterMixing ? stats[i].sigma2 / static_cast<double>(k)
                                          : stats[i].sigma2;
    const std::uint32_t kk = mix == MixScheme::ParameterMixing ? 1 : k;
    const LookupResult plus = lookup(log_p, stats[i].mu, b_tilde, kk);
    const LookupResult minus = lookup(log_p, -stats[i].mu, b_tilde, kk);
    out.clamped_lookups += (plus.clamped ? 1 : 0) + (minus.clamped ? 1 : 0);
    const double z = std::exp(plus.value) + std::exp(minus.value);
    const double log_z = std::log(z);
    const double m_y = labels[i] == 1 ? plus.value : minus.value;
    out.bias_point[i] = -(m_y - log_z);
    out.variance_point[i] = -log_z;
    sum_b += out.bias_point[i];
    sum_v += out.variance_point[i];
  }
  out.total_lookups = 2 * stats.size();
  out.bias = sum_b / static_cast<double>(stats.size());
  out.variance = sum_v / static_cast<double>(stats.size());
  return out;
}

BvEstimate estimate_bv_ls(std::span<const PointStats> stats, std::span<const int> labels,
                          MixScheme mix, std::uint32_t k, const UniversalTable& p_mean,
                          const UniversalTable& p_square_mean) {
  check_points(stats, labels, k);
  // both mixes consume the 2-D single-classifier tables
  check_table(p_mean, StatFamily::PMean, MixScheme::ParameterMixing, "p-mean");
  check_table(p_square_mean, StatFamily::PSquareMean, MixScheme::ParameterMixing, "p-square");

  BvEstimate out;
  out.bias_point.resize(stats.size());
  out.variance_point.resize(stats.size());
  double sum_b = 0.0, sum_v = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double b_tilde =
        mix == MixScheme::ParameterMixing ? stats[i].sigma2 / static_cast<double>(k)
                                          : stats[i].sigma2;
    const LookupResult p = lookup(p_mean, stats[i].mu, b_tilde, 1);
    const LookupResult q = lookup(p_square_mean, stats[i].mu, b_tilde, 1);
    out.clamped_lookups += (p.clamped ? 1 : 0) + (q.clamped ? 1 : 0);
    // q >= p^2 survives bilinear interpolation (Jensen), so this is >= -eps
    double var = q.value - p.value * p.value;
    if (var < 0.0) var = 0.0;
    if (mix == MixScheme::Voting) var /= static_cast<double>(k);
    const double diff = static_cast<double>(labels[i]) - p.value;
    out.bias_point[i] = 2.0 * diff * diff;
    out.variance_point[i] = 2.0 * var;
    sum_b += out.bias_point[i];
    sum_v += out.variance_point[i];
  }
  out.total_lookups = 2 * stats.size();
  out.bias = sum_b / static_cast<double>(stats.size());
  out.variance = sum_v / static_cast<double>(stats.size());
  return out;
}

LsClosedForm ls_closed_form(double mu, double sigma2, std::uint32_t k, MixScheme mix, int y) {
  if (!(sigma2 >= 0.0) || !std::isfinite(mu))
    throw InvalidInputError("ls_closed_form: mu must be finite and sigma2 >= 0");
  if (k < 1) throw InvalidInputError("ls_closed_form: K must be at least 1");
  if (y != 0 && y != 1) throw InvalidInputError("ls_closed_form: label must be 0 or 1");

  constexpr double kLambda = 0.703;
  constexpr double kDelta = 0.937;
  const auto v_single = [&](double v) {
    const double rho = 1.0 / std::sqrt(1.0 + kLambda * kLambda * v);
    const double kap = 1.0 / std::sqrt(1.0 + std::numbers::pi * v / 8.0);
    const double s_mean = sigmoid(kap * mu);
    const double s_sq = sigmoid(rho * mu + kDelta * (1.0 - rho));
    return 2.0 * (s_sq * s_sq - s_mean * s_mean);
  };

  const double eff = mix == MixScheme::ParameterMixing
                         ? sigma2 / static_cast<double>(k)
                         : sigma2;
  const double kappa = 1.0 / std::sqrt(1.0 + std::numbers::pi * eff / 8.0);
  LsClosedForm out;
  out.p_bar_plus = sigmoid(kappa * mu);
  const double diff = out.p_bar_plus - static_cast<double>(y);
  out.bias_point = 2.0 * diff * diff;
  out.variance_point = mix == MixScheme::ParameterMixing
                           ? v_single(eff)
                           : v_single(sigma2) / static_cast<double>(k);
  return out;
}

EstimateReport estimate_report(std::span<const PointStats> stats, std::span<const int> labels,
                               LossKind loss, MixScheme mix, std::uint32_t k,
                               std::size_t bite_size, const TableSet& tables,
                               bool keep_per_point) {
  if (tables.loss_mean == nullptr)
    throw ConfigError("estimate_report: loss-mean table is required");
  const UniversalTable& loss_square =
      tables.loss_square_mean != nullptr ? *tables.loss_square_mean : *tables.loss_mean;

  EstimateReport report;
  report.loss = loss;
  report.mix = mix;
  report.k = k;
  report.bite_size = bite_size;

  const GEstimate g = estimate_g(stats, labels, loss, mix, k, *tables.loss_mean);
  const S2Estimate s2 = estimate_s2(stats, labels, loss, mix, k, *tables.loss_mean, loss_square);
  report.g = g.g;
  report.s2 = s2.s2;
  report.s2_over_n = s2.s2_over_n;

  std::size_t clamped = s2.clamped_lookups;  // includes the loss-mean pass
  std::size_t total = s2.total_lookups;

  BvEstimate bv;
  bool has_bv = false;
  if (loss == LossKind::NLL) {
    if (tables.log_p == nullptr)
      throw ConfigError("estimate_report: NLL bias/variance needs a log-p table");
    bv = estimate_bv_nll(stats, labels, mix, k, *tables.log_p);
    has_bv = true;
  } else if (loss == LossKind::LS) {
    if (tables.p_mean == nullptr || tables.p_square_mean == nullptr)
      throw ConfigError("estimate_report: LS bias/variance needs p-mean and p-square tables");
    bv = estimate_bv_ls(stats, labels, mix, k, *tables.p_mean, *tables.p_square_mean);
    has_bv = true;
  }
  if (has_bv) {
    report.bias = bv.bias;
    report.variance = bv.variance;
    clamped += bv.clamped_lookups;
    total += bv.total_lookups;
  }
  report.clamp_fraction = total == 0 ? 0.0 : static_cast<double>(clamped) / total;

  if (keep_per_point) {
    std::vector<EstimateReport::PerPoint> points(stats.size());
    for (std::size_t i = 0; i < stats.size(); ++i) {
      points[i] = {i,
                   labels[i],
                   stats[i].mu,
                   stats[i].sigma2,
                   g.per_point[i],
                   has_bv ? bv.bias_point[i] : 0.0,
                   has_bv ? bv.variance_point[i] : 0.0};
    }
    report.per_point = std::move(points);
  }
  return report;
}

}  // namespace bitecast
