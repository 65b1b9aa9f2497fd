#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bitecast/core.hpp"

namespace bitecast {

enum class BiteMode { IidWithReplacement, DisjointPartition };
const char* to_string(BiteMode mode);
BiteMode parse_bite_mode(std::string_view text);

// Diagonal-covariance Gaussian for one class of the synthetic generator.
struct ClassGaussian {
  std::vector<double> mean;
  std::vector<double> var;
};

struct SyntheticSpec {
  std::size_t n = 0;
  std::size_t d = 0;
  double positive_prior = 0.5;
  ClassGaussian negative;  // class 0
  ClassGaussian positive;  // class 1
  void validate() const;
};

// Samples n labeled points from the two-Gaussian mixture. Deterministic for a
// fixed seed.
LabeledDataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Draws the indices of bite `bite_index`.
//   IidWithReplacement: m uniform draws; stream derived from (seed, bite_index)
//   DisjointPartition:  block bite_index of a seed-determined permutation;
//                       at most floor(n/m) bites exist
std::vector<std::size_t> sample_bite(std::size_t n, std::size_t m, BiteMode mode,
                                     std::size_t bite_index, std::uint64_t seed);

struct LinearModel {
  std::vector<double> weights;
  double intercept = 0.0;
  bool degenerate = false;  // single-class-bite fallback was taken

  double score(std::span<const double> x) const {
    double z = intercept;
    for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * x[j];
    return z;
  }
};

struct LogRegParams {
  double reg_strength = 0.0;  // L2 penalty on the weights (intercept free)
  int max_iters = 500;
  double tol = 1e-8;  // gradient 2-norm target
};

inline LogRegParams default_logreg_params(std::size_t bite_size) {
  return {1e-4 * static_cast<double>(bite_size), 500, 1e-8};
}

// Newton minimization of the L2-regularized logistic loss over the given bite
// (duplicate indices count multiple times). A single-class bite yields the
// zero-weight model with intercept log((count1+1)/(count0+1)) and the
// degenerate flag set.
LinearModel train_logreg(const LabeledDataset& data, std::span<const std::size_t> indices,
                         const LogRegParams& params);

struct ScoreMatrixMeta {
  std::size_t bite_size = 0;
  BiteMode mode = BiteMode::IidWithReplacement;
  std::string learner;
  std::uint64_t seed = 0;
};

// Raw (pre-link) scores of a classifier pool on an evaluation set; the sole
// interface between learners and the estimators.
struct ScoreMatrix {
  std::vector<int> labels;     // n_eval entries
  std::vector<double> scores;  // n_eval x pool, row-major
  std::size_t n_eval = 0;
  std::size_t pool = 0;
  ScoreMatrixMeta meta;

  double at(std::size_t i, std::size_t k) const { return scores[i * pool + k]; }
  std::span<const double> row(std::size_t i) const {
    return {scores.data() + i * pool, pool};
  }
  void validate() const;
};

// Trains `pool_size` base classifiers on bites of `train` and scores them on
// `eval_set`; column k holds the classifier trained on bite k. Columns may be
// computed concurrently; the result is bitwise independent of thread count
// because bite k's stream is derived from (seed, k) alone.
ScoreMatrix train_pool(const LabeledDataset& train, const LabeledDataset& eval_set,
                       std::size_t pool_size, std::size_t m, BiteMode mode,
                       const LogRegParams& params, std::uint64_t seed,
                       unsigned threads = 0);

// Keeps the first `count` pool columns (used to carve a K-tilde pool out of a
// larger ground-truth pool).
ScoreMatrix restrict_columns(const ScoreMatrix& matrix, std::size_t count);

// Text score-matrix file, round-trip exact to 17 significant digits:
//   # scores v1, P=<int>, m=<int>, mode=<iid|disjoint>, learner=<string>, seed=<int>
//   example_id,y,s_1,...,s_P
//   <row per evaluation example>
void export_scores(const ScoreMatrix& matrix, const std::filesystem::path& path);
ScoreMatrix import_scores(const std::filesystem::path& path);

}  // namespace bitecast
