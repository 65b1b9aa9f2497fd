#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bitecast/core.hpp"

namespace bitecast {

enum class StatFamily : std::uint32_t {
  LossMean = 0,        // E g = E L~(1, p+)
  LossSquareMean = 1,  // E L~^2(1, p+)
  LogP = 2,            // E log p+ (clamped like the NLL loss)
  PMean = 3,           // E p+
  PSquareMean = 4,     // E (p+)^2
};

// Integrand family of a table. Loss* families carry a loss and a link; the
// probability statistics always use the sigmoid link.
struct StatKind {
  StatFamily family = StatFamily::LossMean;
  LossKind loss = LossKind::NLL;
  LinkKind link = LinkKind::Sigmoid;

  bool uses_loss() const {
    return family == StatFamily::LossMean || family == StatFamily::LossSquareMean;
  }
  static StatKind loss_mean(LossKind loss, LinkKind link = LinkKind::Sigmoid) {
    return {StatFamily::LossMean, loss, link};
  }
  static StatKind loss_square_mean(LossKind loss, LinkKind link = LinkKind::Sigmoid) {
    return {StatFamily::LossSquareMean, loss, link};
  }
  static StatKind log_p() { return {StatFamily::LogP, LossKind::NLL, LinkKind::Sigmoid}; }
  static StatKind p_mean() { return {StatFamily::PMean, LossKind::NLL, LinkKind::Sigmoid}; }
  static StatKind p_square_mean() {
    return {StatFamily::PSquareMean, LossKind::NLL, LinkKind::Sigmoid};
  }

  friend bool operator==(const StatKind& a, const StatKind& b) {
    if (a.family != b.family) return false;
    if (a.uses_loss() && (a.loss != b.loss || a.link != b.link)) return false;
    return true;
  }
};
std::string to_string(const StatKind& stat);

// Grid over (a, b[, K]): a is the per-example score mean, b the score
// variance, K the ensemble size. k_values stays empty for PM tables.
struct TableGrid {
  std::vector<double> a_values;
  std::vector<double> b_values;
  std::vector<std::uint32_t> k_values;

  // a in [-8, 8] step 0.1; b = 0 plus 60 log-spaced points in [1e-4, 25];
  // K list 1..20, 25, 30, 40, 50, 75, 100, 150, 200, 300, 400, 600, 800.
  static TableGrid defaults(MixScheme mix);
  static std::vector<std::uint32_t> default_k_values();

  void validate(bool requires_k) const;
};

inline constexpr std::uint64_t kDefaultMcSamples = 5000;
inline constexpr std::uint32_t kDefaultQuadratureOrder = 64;

// Dataset-independent grid of expectation values under the Gaussian score
// model. Immutable once built; safe for concurrent lookup.
struct UniversalTable {
  TableGrid grid;
  StatKind stat;
  MixScheme mix = MixScheme::ParameterMixing;
  std::uint64_t mc_samples = 0;  // 0 for pure-quadrature tables
  std::uint64_t seed = 0;
  std::uint32_t quadrature_order = 0;
  std::vector<double> values;  // row-major (a, b, k); k extent 1 for PM

  std::size_t k_extent() const { return grid.k_values.empty() ? 1 : grid.k_values.size(); }
  double cell(std::size_t ia, std::size_t ib, std::size_t ik = 0) const {
    return values[(ia * grid.b_values.size() + ib) * k_extent() + ik];
  }
  void validate() const;
};

// Gauss-Hermite rule for expectations under a normal: weights for exp(-t^2),
// sum sqrt(pi). Backed by GSL.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussHermiteRule gauss_hermite(std::uint32_t order);

// E[f(c)] for c ~ N(mean, variance) by the given rule; variance 0 -> f(mean).
double normal_expectation(const GaussHermiteRule& rule, double mean, double variance,
                          const std::function<double(double)>& f);

// Single-classifier cell value: the stat's y=1 integrand composed with the
// link, integrated against N(a, b_tilde). ZeroOne cells come out in closed
// form Phi(-a/sqrt(b)); b = 0 cells are the exact pointwise value.
double evaluate_pm_cell(const StatKind& stat, double a, double b_tilde,
                        std::uint32_t quadrature_order = kDefaultQuadratureOrder);

// 2-D table over (a, b_tilde) for parameter mixing; the caller of lookup()
// later passes b_tilde = sigma^2 / K.
UniversalTable build_pm_table(const StatKind& stat, const TableGrid& grid,
                              std::uint32_t quadrature_order = kDefaultQuadratureOrder,
                              unsigned threads = 0);

// 3-D table over (a, b, K) for voting. Cells with K >= 2 and b > 0 average
// mc_samples joint draws of K iid N(a, b) scores through the voted
// probability; one standard-normal array z[sample, k] (from seed) is reused
// for every cell via c = a + sqrt(b) z. K = 1 cells reduce to the PM integral
// and use quadrature; b = 0 rows are exact.
UniversalTable build_vote_table(const StatKind& stat, const TableGrid& grid,
                                std::uint64_t mc_samples = kDefaultMcSamples,
                                std::uint64_t seed = 0,
                                std::uint32_t quadrature_order = kDefaultQuadratureOrder,
                                unsigned threads = 0);

// Builds several voting tables in one pass over the shared draws; each result
// is bitwise identical to the corresponding single build with the same seed.
std::vector<UniversalTable> build_vote_tables(std::span<const StatKind> stats,
                                              const TableGrid& grid,
                                              std::uint64_t mc_samples = kDefaultMcSamples,
                                              std::uint64_t seed = 0,
                                              std::uint32_t quadrature_order = kDefaultQuadratureOrder,
                                              unsigned threads = 0);

struct LookupResult {
  double value = 0.0;
  bool clamped = false;  // some coordinate fell outside the grid range
};

// Bilinear interpolation in (a, log(b + 1e-6)), plus linear interpolation in
// 1/K for voting tables. Out-of-range inputs clamp to the boundary and set
// the flag. k is ignored for PM tables (pass b_tilde = sigma^2/K instead).
LookupResult lookup(const UniversalTable& table, double a, double b, std::uint32_t k);

// Binary little-endian table file; save/load round-trips bit-exactly.
void save_table(const UniversalTable& table, const std::filesystem::path& path);
UniversalTable load_table(const std::filesystem::path& path);

// Human-readable header summary for the table-info CLI command.
std::string table_info(const std::filesystem::path& path);

}  // namespace bitecast
