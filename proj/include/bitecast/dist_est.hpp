#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "bitecast/learners.hpp"

namespace bitecast {

// Per-example parameters of the score distribution under bite randomness.
struct PointStats {
  double mu = 0.0;
  double sigma2 = 0.0;
  std::size_t k_tilde = 0;
  bool degenerate = false;  // single-sample row; sigma2 forced to 0
};

// Sample mean and unbiased (divisor K-1) variance of one score row.
PointStats estimate_point_stats(std::span<const double> score_row);

// Row-wise stats for a whole matrix; rows are independent and parallelizable.
std::vector<PointStats> stats_for_matrix(const ScoreMatrix& matrix, unsigned threads = 0);

// Advisory moments for eyeballing the normality approximation.
struct NormalityDiagnostic {
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};
NormalityDiagnostic normality_diagnostic(std::span<const double> score_row);

// CSV dump: example_id,y,mu,sigma2
void export_point_stats(std::span<const PointStats> stats, std::span<const int> labels,
                        const std::filesystem::path& path);

}  // namespace bitecast
