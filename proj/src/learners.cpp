#include "bitecast/learners.hpp"

#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>

#include "bitecast/parallel.hpp"
#include "bitecast/rng.hpp"

namespace bitecast {

const char* to_string(BiteMode mode) {
  return mode == BiteMode::IidWithReplacement ? "iid" : "disjoint";
}

BiteMode parse_bite_mode(std::string_view text) {
  if (text == "iid") return BiteMode::IidWithReplacement;
  if (text == "disjoint") return BiteMode::DisjointPartition;
  throw ParseError("unknown bite mode: '" + std::string(text) + "'");
}

void SyntheticSpec::validate() const {
  if (n < 2) throw InvalidInputError("synthetic spec: n must be at least 2");
  if (d < 1) throw InvalidInputError("synthetic spec: d must be at least 1");
  if (!(positive_prior >= 0.0 && positive_prior <= 1.0))
    throw InvalidInputError("synthetic spec: class prior must lie in [0, 1]");
  for (const ClassGaussian* g : {&negative, &positive}) {
    if (g->mean.size() != d || g->var.size() != d)
      throw InvalidInputError("synthetic spec: mean/var dimension must equal d");
    for (double m : g->mean)
      if (!std::isfinite(m)) throw InvalidInputError("synthetic spec: means must be finite");
    for (double v : g->var)
      if (!(v > 0.0) || !std::isfinite(v))
        throw InvalidInputError("synthetic spec: variances must be positive and finite");
  }
}

LabeledDataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  LabeledDataset out;
  out.n = spec.n;
  out.d = spec.d;
  out.labels.resize(spec.n);
  out.features.resize(spec.n * spec.d);
  std::mt19937_64 eng(seed);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const int label = uniform01(eng) < spec.positive_prior ? 1 : 0;
    const ClassGaussian& g = label == 1 ? spec.positive : spec.negative;
    out.labels[i] = label;
    for (std::size_t j = 0; j < spec.d; ++j)
      out.features[i * spec.d + j] = g.mean[j] + std::sqrt(g.var[j]) * standard_normal(eng);
  }
  return out;
}

std::vector<std::size_t> sample_bite(std::size_t n, std::size_t m, BiteMode mode,
                                     std::size_t bite_index, std::uint64_t seed) {
  if (m == 0 || m > n) throw InvalidInputError("sample_bite: bite size must satisfy 1 <= m <= n");
  if (mode == BiteMode::DisjointPartition) {
    const std::size_t capacity = n / m;
    if (bite_index >= capacity)
      throw CapacityError("sample_bite: disjoint bite " + std::to_string(bite_index) +
                          " requested but only floor(n/m) = " + std::to_string(capacity) +
                          " bites exist");
    std::mt19937_64 eng(seed);
    const auto perm = shuffled_indices(n, eng);
    return {perm.begin() + static_cast<std::ptrdiff_t>(bite_index * m),
            perm.begin() + static_cast<std::ptrdiff_t>((bite_index + 1) * m)};
  }
  // per-bite stream: seed XOR bite index, so columns are order-independent
  std::mt19937_64 eng(seed ^ static_cast<std::uint64_t>(bite_index));
  std::vector<std::size_t> idx(m);
  for (auto& v : idx) v = static_cast<std::size_t>(uniform_below(eng, n));
  return idx;
}

namespace {

// In-place Cholesky solve of (dim x dim) a * x = b; false if not SPD.
bool cholesky_solve(std::vector<double> a, std::vector<double> b, std::size_t dim,
                    std::vector<double>& out) {
  for (std::size_t j = 0; j < dim; ++j) {
    double diag = a[j * dim + j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j * dim + k] * a[j * dim + k];
    if (!(diag > 0.0)) return false;
    diag = std::sqrt(diag);
    a[j * dim + j] = diag;
    for (std::size_t i = j + 1; i < dim; ++i) {
      double v = a[i * dim + j];
      for (std::size_t k = 0; k < j; ++k) v -= a[i * dim + k] * a[j * dim + k];
      a[i * dim + j] = v / diag;
    }
  }
  // forward then backward substitution
  for (std::size_t i = 0; i < dim; ++i) {
    double v = b[i];
    for (std::size_t k = 0; k < i; ++k) v -= a[i * dim + k] * b[k];
    b[i] = v / a[i * dim + i];
  }
  for (std::size_t ii = dim; ii > 0; --ii) {
    const std::size_t i = ii - 1;
    double v = b[i];
    for (std::size_t k = i + 1; k < dim; ++k) v -= a[k * dim + i] * b[k];
    b[i] = v / a[i * dim + i];
  }
  out = std::move(b);
  return true;
}

}  // namespace

LinearModel train_logreg(const LabeledDataset& data, std::span<const std::size_t> indices,
                         const LogRegParams& params) {
  if (indices.empty()) throw InvalidInputError("train_logreg: bite is empty");
  if (!(params.reg_strength > 0.0))
    throw InvalidInputError("train_logreg: reg_strength must be positive");
  std::size_t count1 = 0;
  for (std::size_t idx : indices) {
    if (idx >= data.n) throw InvalidInputError("train_logreg: bite index out of range");
    count1 += static_cast<std::size_t>(data.labels[idx]);
  }
  const std::size_t count0 = indices.size() - count1;
  if (count0 == 0 || count1 == 0) {
    LinearModel m;
    m.weights.assign(data.d, 0.0);
    m.intercept = std::log((static_cast<double>(count1) + 1.0) /
                           (static_cast<double>(count0) + 1.0));
    m.degenerate = true;
    return m;
  }

  const std::size_t d = data.d;
  const std::size_t dim = d + 1;  // weights then intercept
  std::vector<double> wb(dim, 0.0);

  const auto objective = [&](const std::vector<double>& v) {
    double obj = 0.0;
    for (std::size_t idx : indices) {
      const auto x = data.point(idx);
      double z = v[d];
      for (std::size_t j = 0; j < d; ++j) z += v[j] * x[j];
      const double margin = data.labels[idx] == 1 ? z : -z;
      obj += margin > 0.0 ? std::log1p(std::exp(-margin))
                          : -margin + std::log1p(std::exp(margin));
    }
    for (std::size_t j = 0; j < d; ++j) obj += 0.5 * params.reg_strength * v[j] * v[j];
    return obj;
  };

  std::vector<double> grad(dim), hess(dim * dim), step, trial(dim);
  for (int iter = 0; iter < params.max_iters; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    std::fill(hess.begin(), hess.end(), 0.0);
    double obj = 0.0;
    for (std::size_t idx : indices) {
      const auto x = data.point(idx);
      double z = wb[d];
      for (std::size_t j = 0; j < d; ++j) z += wb[j] * x[j];
      const int y = data.labels[idx];
      const double margin = y == 1 ? z : -z;
      obj += margin > 0.0 ? std::log1p(std::exp(-margin))
                          : -margin + std::log1p(std::exp(margin));
      const double p = sigmoid(z);
      const double r = p - static_cast<double>(y);
      const double w = p * (1.0 - p);
      for (std::size_t j = 0; j < d; ++j) {
        grad[j] += r * x[j];
        for (std::size_t k = 0; k <= j; ++k) hess[j * dim + k] += w * x[j] * x[k];
        hess[d * dim + j] += w * x[j];
      }
      grad[d] += r;
      hess[d * dim + d] += w;
    }
    for (std::size_t j = 0; j < d; ++j) {
      obj += 0.5 * params.reg_strength * wb[j] * wb[j];
      grad[j] += params.reg_strength * wb[j];
      hess[j * dim + j] += params.reg_strength;
    }
    // mirror the lower triangle
    for (std::size_t j = 0; j < dim; ++j)
      for (std::size_t k = j + 1; k < dim; ++k) hess[j * dim + k] = hess[k * dim + j];

    double gnorm = 0.0;
    for (double g : grad) gnorm += g * g;
    gnorm = std::sqrt(gnorm);
    if (gnorm <= params.tol) break;

    // Newton direction, with an escalating ridge if the Hessian degenerates
    std::vector<double> rhs(dim);
    for (std::size_t j = 0; j < dim; ++j) rhs[j] = -grad[j];
    double ridge = 0.0;
    bool solved = false;
    for (int attempt = 0; attempt < 12 && !solved; ++attempt) {
      std::vector<double> h = hess;
      if (ridge > 0.0)
        for (std::size_t j = 0; j < dim; ++j) h[j * dim + j] += ridge;
      solved = cholesky_solve(std::move(h), rhs, dim, step);
      ridge = ridge == 0.0 ? 1e-10 : ridge * 100.0;
    }
    if (!solved) {
      step = rhs;  // gradient direction as a last resort
    }

    double slope = 0.0;
    for (std::size_t j = 0; j < dim; ++j) slope += grad[j] * step[j];
    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t j = 0; j < dim; ++j) trial[j] = wb[j] + alpha * step[j];
      if (objective(trial) <= obj + 1e-4 * alpha * slope) {
        wb = trial;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;  // no descent possible at double precision
  }

  LinearModel model;
  model.weights.assign(wb.begin(), wb.begin() + static_cast<std::ptrdiff_t>(d));
  model.intercept = wb[d];
  return model;
}

void ScoreMatrix::validate() const {
  if (pool == 0) throw InvalidInputError("score matrix must have at least one column");
  if (n_eval == 0) throw InvalidInputError("score matrix must have at least one row");
  if (labels.size() != n_eval || scores.size() != n_eval * pool)
    throw InvalidInputError("score matrix storage does not match the declared shape");
  for (int y : labels)
    if (y != 0 && y != 1) throw InvalidInputError("score matrix labels must be 0 or 1");
  for (double s : scores)
    if (!std::isfinite(s)) throw InvalidInputError("score matrix entries must be finite");
}

ScoreMatrix train_pool(const LabeledDataset& train, const LabeledDataset& eval_set,
                       std::size_t pool_size, std::size_t m, BiteMode mode,
                       const LogRegParams& params, std::uint64_t seed, unsigned threads) {
  train.validate();
  eval_set.validate();
  if (pool_size == 0) throw InvalidInputError("train_pool: pool size must be positive");
  if (train.d != eval_set.d)
    throw InvalidInputError("train_pool: train and eval dimensions differ");
  if (m == 0 || m > train.n)
    throw InvalidInputError("train_pool: bite size must satisfy 1 <= m <= n");
  if (mode == BiteMode::DisjointPartition && pool_size > train.n / m)
    throw CapacityError("train_pool: disjoint mode supports at most floor(n/m) = " +
                        std::to_string(train.n / m) + " bites, got pool size " +
                        std::to_string(pool_size));

  ScoreMatrix out;
  out.labels = eval_set.labels;
  out.n_eval = eval_set.n;
  out.pool = pool_size;
  out.scores.resize(eval_set.n * pool_size);
  std::atomic<std::size_t> degenerate{0};

  parallel_for(pool_size, threads, [&](std::size_t k) {
    const auto idx = sample_bite(train.n, m, mode, k, seed);
    const LinearModel model = train_logreg(train, idx, params);
    if (model.degenerate) degenerate.fetch_add(1);
    for (std::size_t i = 0; i < eval_set.n; ++i)
      out.scores[i * pool_size + k] = model.score(eval_set.point(i));
  });

  std::string learner = "logreg-l2";
  if (const std::size_t deg = degenerate.load(); deg > 0)
    learner += "[degenerate=" + std::to_string(deg) + "]";
  out.meta = {m, mode, learner, seed};
  out.validate();
  return out;
}

ScoreMatrix restrict_columns(const ScoreMatrix& matrix, std::size_t count) {
  if (count == 0 || count > matrix.pool)
    throw InvalidInputError("restrict_columns: count must satisfy 1 <= count <= pool");
  ScoreMatrix out;
  out.labels = matrix.labels;
  out.n_eval = matrix.n_eval;
  out.pool = count;
  out.meta = matrix.meta;
  out.scores.resize(matrix.n_eval * count);
  for (std::size_t i = 0; i < matrix.n_eval; ++i)
    for (std::size_t k = 0; k < count; ++k) out.scores[i * count + k] = matrix.at(i, k);
  return out;
}

namespace {

std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sanitize_learner(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

}  // namespace

void export_scores(const ScoreMatrix& matrix, const std::filesystem::path& path) {
  matrix.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "# scores v1, P=" << matrix.pool << ", m=" << matrix.meta.bite_size
      << ", mode=" << to_string(matrix.meta.mode)
      << ", learner=" << sanitize_learner(matrix.meta.learner)
      << ", seed=" << matrix.meta.seed << "\n";
  out << "example_id,y";
  for (std::size_t k = 0; k < matrix.pool; ++k) out << ",s_" << (k + 1);
  out << "\n";
  for (std::size_t i = 0; i < matrix.n_eval; ++i) {
    out << i << ',' << matrix.labels[i];
    for (std::size_t k = 0; k < matrix.pool; ++k) out << ',' << format_score(matrix.at(i, k));
    out << "\n";
  }
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

std::uint64_t parse_u64(const std::string& text, std::size_t line_no, const char* what) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  if (end == text.c_str() || *end != '\0') parse_fail(line_no, std::string("bad ") + what);
  return v;
}

}  // namespace

ScoreMatrix import_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) parse_fail(1, "missing header");
  ++line_no;
  ScoreMatrix out;
  {
    const std::string prefix = "# scores v1, ";
    if (line.rfind(prefix, 0) != 0) parse_fail(line_no, "expected '# scores v1' header");
    const auto fields = split_csv(line.substr(prefix.size()));
    if (fields.size() != 5) parse_fail(line_no, "expected 5 header fields");
    const auto value_of = [&](std::size_t i, const char* key) -> std::string {
      std::string f = fields[i];
      while (!f.empty() && f.front() == ' ') f.erase(f.begin());
      const std::string k = std::string(key) + "=";
      if (f.rfind(k, 0) != 0) parse_fail(line_no, std::string("expected ") + key + "=...");
      return f.substr(k.size());
    };
    out.pool = parse_u64(value_of(0, "P"), line_no, "P");
    out.meta.bite_size = parse_u64(value_of(1, "m"), line_no, "m");
    out.meta.mode = parse_bite_mode(value_of(2, "mode"));
    out.meta.learner = value_of(3, "learner");
    out.meta.seed = parse_u64(value_of(4, "seed"), line_no, "seed");
    if (out.pool == 0) parse_fail(line_no, "P must be positive");
  }

  if (!std::getline(in, line)) parse_fail(2, "missing column header");
  ++line_no;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != out.pool + 2)
      parse_fail(line_no, "expected " + std::to_string(out.pool + 2) + " fields, got " +
                              std::to_string(fields.size()));
    const std::uint64_t id = parse_u64(fields[0], line_no, "example_id");
    if (id != out.n_eval) parse_fail(line_no, "example_id out of sequence");
    if (fields[1] != "0" && fields[1] != "1") parse_fail(line_no, "label must be 0 or 1");
    out.labels.push_back(fields[1] == "1" ? 1 : 0);
    for (std::size_t k = 0; k < out.pool; ++k) {
      const std::string& f = fields[k + 2];
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (end == f.c_str() || *end != '\0')
        parse_fail(line_no, "non-numeric score in column s_" + std::to_string(k + 1));
      if (!std::isfinite(v))
        parse_fail(line_no, "non-finite score in column s_" + std::to_string(k + 1));
      out.scores.push_back(v);
    }
    ++out.n_eval;
  }
  if (out.n_eval == 0) parse_fail(line_no + 1, "no data rows");
  out.validate();
  return out;
}

}  // namespace bitecast
