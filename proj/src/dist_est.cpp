#include "bitecast/dist_est.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "bitecast/parallel.hpp"

namespace bitecast {

PointStats estimate_point_stats(std::span<const double> score_row) {
  if (score_row.empty()) throw InvalidInputError("estimate_point_stats: empty score row");
  for (double v : score_row)
    if (!std::isfinite(v)) throw InvalidInputError("estimate_point_stats: scores must be finite");
  const std::size_t k = score_row.size();
  double sum = 0.0;
  for (double v : score_row) sum += v;
  const double mean = sum / static_cast<double>(k);
  if (k == 1) return {mean, 0.0, 1, true};
  double ss = 0.0;
  for (double v : score_row) {
    const double dv = v - mean;
    ss += dv * dv;
  }
  return {mean, ss / static_cast<double>(k - 1), k, false};
}

std::vector<PointStats> stats_for_matrix(const ScoreMatrix& matrix, unsigned threads) {
  matrix.validate();
  std::vector<PointStats> out(matrix.n_eval);
  parallel_for(matrix.n_eval, threads, [&](std::size_t i) {
    try {
      out[i] = estimate_point_stats(matrix.row(i));
    } catch (const Error& e) {
      throw InvalidInputError("row " + std::to_string(i) + ": " + e.what());
    }
  });
  return out;
}

NormalityDiagnostic normality_diagnostic(std::span<const double> score_row) {
  if (score_row.size() < 3)
    throw InvalidInputError("normality_diagnostic: needs at least 3 scores");
  for (double v : score_row)
    if (!std::isfinite(v)) throw InvalidInputError("normality_diagnostic: scores must be finite");
  const double n = static_cast<double>(score_row.size());
  double sum = 0.0;
  for (double v : score_row) sum += v;
  const double mean = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : score_row) {
    const double dv = v - mean;
    const double dv2 = dv * dv;
    m2 += dv2;
    m3 += dv2 * dv;
    m4 += dv2 * dv2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 <= 0.0) return {0.0, 0.0};  // zero-spread row
  return {m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

void export_point_stats(std::span<const PointStats> stats, std::span<const int> labels,
                        const std::filesystem::path& path) {
  if (stats.size() != labels.size())
    throw InvalidInputError("export_point_stats: stats/labels size mismatch");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "example_id,y,mu,sigma2\n";
  char buf[80];
  for (std::size_t i = 0; i < stats.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%d,%.17g,%.17g", i, labels[i], stats[i].mu,
                  stats[i].sigma2);
    out << buf << "\n";
  }
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

}  // namespace bitecast
