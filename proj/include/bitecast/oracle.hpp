#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bitecast/learners.hpp"

namespace bitecast {

// Resampling plan for the empirical ground-truth estimate: for every K in
// k_values, draw ensembles_per_k subsets of K pool columns without
// replacement and average the loss of the mixed predictions.
struct PoolEnsembleSpec {
  std::size_t pool_size = 0;       // must match the score matrix
  std::size_t ensembles_per_k = 0;  // R
  std::vector<std::uint32_t> k_values;
  std::uint64_t seed = 0;
};

struct CurvePoint {
  std::uint32_t k = 0;
  double mean = 0.0;
  double stddev = 0.0;  // across ensembles, divisor R-1
};

struct GroundTruth {
  std::vector<CurvePoint> curve;
  // per K (outer) and evaluation point (inner): mean loss and mean squared
  // loss across the R ensembles
  std::vector<std::vector<double>> per_point_mean;
  std::vector<std::vector<double>> per_point_mean_sq;
};

// Empirical estimate from a large pool; deterministic per seed and thread
// count (ensemble r of size index ki uses a stream derived from (seed, ki, r)).
GroundTruth ground_truth(const ScoreMatrix& matrix, LossKind loss, LinkKind link,
                         MixScheme mix, const PoolEnsembleSpec& spec, unsigned threads = 0);

// Single incremental trajectory over the first K columns, K = 1..k_max; no
// averaging, which is exactly why it is unstable.
std::vector<double> one_samp_curve(const ScoreMatrix& matrix, LossKind loss, LinkKind link,
                                   MixScheme mix, std::uint32_t k_max);

// Ground-truth-style resampling restricted to the first k_tilde columns;
// refuses K > k_tilde (no extrapolation beyond the small pool).
GroundTruth emp_samp_ktilde(const ScoreMatrix& matrix, LossKind loss, LinkKind link,
                            MixScheme mix, std::size_t k_tilde, std::size_t ensembles_per_k,
                            std::span<const std::uint32_t> k_values, std::uint64_t seed,
                            unsigned threads = 0);

}  // namespace bitecast
