#include "bitecast/tables.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "bitecast/parallel.hpp"
#include "bitecast/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "table files are little-endian; big-endian hosts are unsupported");

namespace bitecast {

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;
constexpr double kBFloor = 1e-6;  // makes b = 0 interpolable in log space

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// The y = 1 integrand of each family, applied to the mixed probability.
double stat_integrand(const StatKind& stat, double p) {
  switch (stat.family) {
    case StatFamily::LossMean:
      return eval_loss(stat.loss, 1, p);
    case StatFamily::LossSquareMean: {
      const double l = eval_loss(stat.loss, 1, p);
      return l * l;
    }
    case StatFamily::LogP:
      return std::log(std::clamp(p, kProbClamp, 1.0 - kProbClamp));
    case StatFamily::PMean:
      return p;
    case StatFamily::PSquareMean:
      return p * p;
  }
  throw InvalidInputError("unknown stat family");
}

void validate_stat(const StatKind& stat) {
  if (static_cast<std::uint32_t>(stat.family) > 4)
    throw InvalidInputError("unknown stat family tag");
  if (stat.link == LinkKind::Step &&
      !(stat.uses_loss() && stat.loss == LossKind::ZeroOne))
    throw InvalidInputError("the step link is only supported for the 0/1 loss");
  if (!stat.uses_loss() && stat.link != LinkKind::Sigmoid)
    throw InvalidInputError("probability statistics use the sigmoid link");
}

// Single-classifier cell. The 0/1 integrand is the indicator {c <= 0} under
// either link, so those cells are the exact normal tail rather than a
// quadrature of a discontinuity.
double pm_cell(const StatKind& stat, double a, double b, const GaussHermiteRule& rule) {
  if (b <= 0.0) return stat_integrand(stat, link(stat.link, a));
  if (stat.uses_loss() && stat.loss == LossKind::ZeroOne)
    return normal_cdf(-a / std::sqrt(b));
  const double scale = std::sqrt(2.0 * b);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * stat_integrand(stat, link(stat.link, a + scale * rule.nodes[i]));
  return acc / kSqrtPi;
}

}  // namespace

std::string to_string(const StatKind& stat) {
  switch (stat.family) {
    case StatFamily::LossMean:
      return std::string("loss_mean(") + to_string(stat.loss) + "," + to_string(stat.link) + ")";
    case StatFamily::LossSquareMean:
      return std::string("loss_square_mean(") + to_string(stat.loss) + "," +
             to_string(stat.link) + ")";
    case StatFamily::LogP:
      return "log_p";
    case StatFamily::PMean:
      return "p_mean";
    case StatFamily::PSquareMean:
      return "p_square_mean";
  }
  return "?";
}

TableGrid TableGrid::defaults(MixScheme mix) {
  TableGrid g;
  g.a_values.reserve(161);
  for (int i = -80; i <= 80; ++i) g.a_values.push_back(static_cast<double>(i) * 0.1);
  g.b_values.reserve(61);
  g.b_values.push_back(0.0);
  constexpr int kBCount = 60;
  constexpr double kBLo = 1e-4, kBHi = 25.0;
  const double llo = std::log(kBLo), lhi = std::log(kBHi);
  for (int j = 0; j < kBCount; ++j) {
    double b = kBLo;
    if (j == kBCount - 1)
      b = kBHi;
    else if (j > 0)
      b = std::exp(llo + (lhi - llo) * static_cast<double>(j) / (kBCount - 1));
    g.b_values.push_back(b);
  }
  if (mix == MixScheme::Voting) g.k_values = default_k_values();
  return g;
}

std::vector<std::uint32_t> TableGrid::default_k_values() {
  std::vector<std::uint32_t> ks;
  for (std::uint32_t k = 1; k <= 20; ++k) ks.push_back(k);
  for (std::uint32_t k : {25u, 30u, 40u, 50u, 75u, 100u, 150u, 200u, 300u, 400u, 600u, 800u})
    ks.push_back(k);
  return ks;
}

void TableGrid::validate(bool requires_k) const {
  if (a_values.empty()) throw InvalidInputError("table grid: a_values is empty");
  for (std::size_t i = 0; i < a_values.size(); ++i) {
    if (!std::isfinite(a_values[i]))
      throw InvalidInputError("table grid: a_values must be finite");
    if (i > 0 && !(a_values[i - 1] < a_values[i]))
      throw InvalidInputError("table grid: a_values must be strictly increasing");
  }
  if (b_values.empty()) throw InvalidInputError("table grid: b_values is empty");
  for (std::size_t i = 0; i < b_values.size(); ++i) {
    if (!(b_values[i] >= 0.0) || !std::isfinite(b_values[i]))
      throw InvalidInputError("table grid: b_values must be nonnegative and finite");
    if (i > 0 && !(b_values[i - 1] < b_values[i]))
      throw InvalidInputError("table grid: b_values must be strictly increasing");
  }
  if (requires_k) {
    if (k_values.empty()) throw InvalidInputError("table grid: voting tables need k_values");
    for (std::size_t i = 0; i < k_values.size(); ++i) {
      if (k_values[i] < 1) throw InvalidInputError("table grid: k_values must be >= 1");
      if (i > 0 && !(k_values[i - 1] < k_values[i]))
        throw InvalidInputError("table grid: k_values must be strictly increasing");
    }
  } else if (!k_values.empty()) {
    throw InvalidInputError("table grid: PM tables take no k_values");
  }
}

void UniversalTable::validate() const {
  validate_stat(stat);
  grid.validate(mix == MixScheme::Voting);
  const std::size_t expected = grid.a_values.size() * grid.b_values.size() * k_extent();
  if (values.size() != expected)
    throw InvalidInputError("table value count does not match its grid");
  const bool zero_one_loss =
      stat.uses_loss() && stat.loss == LossKind::ZeroOne;
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidInputError("table contains a non-finite value");
    if (zero_one_loss && !(v >= 0.0 && v <= 1.0))
      throw InvalidInputError("0/1-loss table values must lie in [0, 1]");
    if (stat.family == StatFamily::LogP && !(v <= 0.0))
      throw InvalidInputError("log-probability table values must be nonpositive");
  }
}

GaussHermiteRule gauss_hermite(std::uint32_t order) {
  if (order == 0) throw InvalidInputError("gauss_hermite: order must be positive");
  static const gsl_error_handler_t* silenced = gsl_set_error_handler_off();
  (void)silenced;
  gsl_integration_fixed_workspace* ws = gsl_integration_fixed_alloc(
      gsl_integration_fixed_hermite, order, 0.0, 1.0, 0.0, 0.0);
  if (ws == nullptr)
    throw Error("gauss_hermite: failed to build rule of order " + std::to_string(order));
  GaussHermiteRule rule;
  rule.nodes.assign(gsl_integration_fixed_nodes(ws), gsl_integration_fixed_nodes(ws) + order);
  rule.weights.assign(gsl_integration_fixed_weights(ws),
                      gsl_integration_fixed_weights(ws) + order);
  gsl_integration_fixed_free(ws);
  return rule;
}

double normal_expectation(const GaussHermiteRule& rule, double mean, double variance,
                          const std::function<double(double)>& f) {
  if (!(variance >= 0.0))
    throw InvalidInputError("normal_expectation: variance must be nonnegative");
  if (variance == 0.0) return f(mean);
  const double scale = std::sqrt(2.0 * variance);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * f(mean + scale * rule.nodes[i]);
  return acc / kSqrtPi;
}

double evaluate_pm_cell(const StatKind& stat, double a, double b_tilde,
                        std::uint32_t quadrature_order) {
  validate_stat(stat);
  if (!(b_tilde >= 0.0)) throw InvalidInputError("evaluate_pm_cell: b must be nonnegative");
  if (quadrature_order < 16)
    throw InvalidInputError("evaluate_pm_cell: quadrature order must be at least 16");
  const GaussHermiteRule rule = gauss_hermite(quadrature_order);
  return pm_cell(stat, a, b_tilde, rule);
}

UniversalTable build_pm_table(const StatKind& stat, const TableGrid& grid,
                              std::uint32_t quadrature_order, unsigned threads) {
  validate_stat(stat);
  grid.validate(false);
  if (quadrature_order < 16)
    throw InvalidInputError("build_pm_table: quadrature order must be at least 16");
  const GaussHermiteRule rule = gauss_hermite(quadrature_order);

  UniversalTable t;
  t.grid = grid;
  t.stat = stat;
  t.mix = MixScheme::ParameterMixing;
  t.quadrature_order = quadrature_order;
  const std::size_t na = grid.a_values.size();
  const std::size_t nb = grid.b_values.size();
  t.values.resize(na * nb);
  parallel_for(na * nb, threads, [&](std::size_t cell) {
    const std::size_t ia = cell / nb;
    const std::size_t ib = cell % nb;
    const double v = pm_cell(stat, grid.a_values[ia], grid.b_values[ib], rule);
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "build_pm_table: non-finite value at cell (a=" << grid.a_values[ia]
          << ", b=" << grid.b_values[ib] << ") for " << to_string(stat);
      throw Error(msg.str());
    }
    t.values[cell] = v;
  });
  t.validate();
  return t;
}

std::vector<UniversalTable> build_vote_tables(std::span<const StatKind> stats,
                                              const TableGrid& grid, std::uint64_t mc_samples,
                                              std::uint64_t seed,
                                              std::uint32_t quadrature_order, unsigned threads) {
  if (stats.empty()) throw InvalidInputError("build_vote_tables: no stats requested");
  for (const StatKind& s : stats) validate_stat(s);
  grid.validate(true);
  if (mc_samples < 1000)
    throw InvalidInputError("build_vote_tables: mc_samples must be at least 1000");
  if (quadrature_order < 16)
    throw InvalidInputError("build_vote_tables: quadrature order must be at least 16");
  const GaussHermiteRule rule = gauss_hermite(quadrature_order);

  const std::size_t na = grid.a_values.size();
  const std::size_t nb = grid.b_values.size();
  const std::size_t nk = grid.k_values.size();
  const std::uint32_t k_max = grid.k_values.back();
  const std::size_t ns = stats.size();

  // One fixed array of standard-normal draws reused by every cell, so the
  // table surface is smooth in (a, b).
  std::vector<double> z(mc_samples * k_max);
  {
    std::mt19937_64 eng(seed);
    fill_standard_normals(eng, z);
  }

  std::vector<UniversalTable> tables(ns);
  for (std::size_t t = 0; t < ns; ++t) {
    tables[t].grid = grid;
    tables[t].stat = stats[t];
    tables[t].mix = MixScheme::Voting;
    tables[t].mc_samples = mc_samples;
    tables[t].seed = seed;
    tables[t].quadrature_order = quadrature_order;
    tables[t].values.resize(na * nb * nk);
  }

  // grid index of the first K evaluated by MC; K = 1 reduces to the
  // single-classifier integral and is done by quadrature instead
  const std::size_t first_mc = grid.k_values.front() == 1 ? 1 : 0;

  parallel_for(na * nb, threads, [&](std::size_t cellab) {
    const std::size_t ia = cellab / nb;
    const std::size_t ib = cellab % nb;
    const double a = grid.a_values[ia];
    const double b = grid.b_values[ib];
    const std::size_t base = cellab * nk;

    if (b == 0.0) {
      for (std::size_t t = 0; t < ns; ++t) {
        const double v = stat_integrand(stats[t], link(stats[t].link, a));
        for (std::size_t ik = 0; ik < nk; ++ik) tables[t].values[base + ik] = v;
      }
      return;
    }

    if (first_mc < nk) {
      std::vector<double> acc(ns * nk, 0.0);
      const double sqrt_b = std::sqrt(b);
      for (std::size_t s = 0; s < mc_samples; ++s) {
        const double* zr = z.data() + s * k_max;
        double sum_sig = 0.0;
        double sum_step = 0.0;
        std::size_t next = first_mc;
        for (std::uint32_t j = 1; j <= k_max; ++j) {
          const double c = a + sqrt_b * zr[j - 1];
          sum_sig += sigmoid(c);
          sum_step += c > 0.0 ? 1.0 : 0.0;
          if (j == grid.k_values[next]) {
            const double inv = 1.0 / static_cast<double>(j);
            for (std::size_t t = 0; t < ns; ++t) {
              const double p =
                  stats[t].link == LinkKind::Sigmoid ? sum_sig * inv : sum_step * inv;
              acc[t * nk + next] += stat_integrand(stats[t], p);
            }
            if (++next == nk) break;
          }
        }
      }
      const double inv_samples = 1.0 / static_cast<double>(mc_samples);
      for (std::size_t t = 0; t < ns; ++t)
        for (std::size_t ik = first_mc; ik < nk; ++ik)
          tables[t].values[base + ik] = acc[t * nk + ik] * inv_samples;
    }
    if (first_mc == 1)
      for (std::size_t t = 0; t < ns; ++t)
        tables[t].values[base] = pm_cell(stats[t], a, b, rule);

    for (std::size_t t = 0; t < ns; ++t)
      for (std::size_t ik = 0; ik < nk; ++ik)
        if (!std::isfinite(tables[t].values[base + ik])) {
          std::ostringstream msg;
          msg << "build_vote_tables: non-finite value at cell (a=" << a << ", b=" << b
              << ", K=" << grid.k_values[ik] << ") for " << to_string(stats[t]);
          throw Error(msg.str());
        }
  });

  for (UniversalTable& t : tables) t.validate();
  return tables;
}

UniversalTable build_vote_table(const StatKind& stat, const TableGrid& grid,
                                std::uint64_t mc_samples, std::uint64_t seed,
                                std::uint32_t quadrature_order, unsigned threads) {
  auto tables =
      build_vote_tables(std::span<const StatKind>(&stat, 1), grid, mc_samples, seed,
                        quadrature_order, threads);
  return std::move(tables.front());
}

namespace {

struct Bracket {
  std::size_t lo = 0, hi = 0;
  double w = 0.0;  // value = (1-w) v[lo] + w v[hi]
};

Bracket bracket_a(const std::vector<double>& xs, double x, bool& clamped) {
  if (x <= xs.front()) {
    clamped |= x < xs.front();
    return {0, 0, 0.0};
  }
  if (x >= xs.back()) {
    clamped |= x > xs.back();
    return {xs.size() - 1, xs.size() - 1, 0.0};
  }
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - xs.begin());
  return {i - 1, i, (x - xs[i - 1]) / (xs[i] - xs[i - 1])};
}

Bracket bracket_b(const std::vector<double>& xs, double b, bool& clamped) {
  if (b <= xs.front()) {
    clamped |= b < xs.front();
    return {0, 0, 0.0};
  }
  if (b >= xs.back()) {
    clamped |= b > xs.back();
    return {xs.size() - 1, xs.size() - 1, 0.0};
  }
  const auto it = std::upper_bound(xs.begin(), xs.end(), b);
  const std::size_t i = static_cast<std::size_t>(it - xs.begin());
  const double t0 = std::log(xs[i - 1] + kBFloor);
  const double t1 = std::log(xs[i] + kBFloor);
  const double tx = std::log(b + kBFloor);
  return {i - 1, i, (tx - t0) / (t1 - t0)};
}

Bracket bracket_k(const std::vector<std::uint32_t>& ks, std::uint32_t k, bool& clamped) {
  if (k <= ks.front()) {
    clamped |= k < ks.front();
    return {0, 0, 0.0};
  }
  if (k >= ks.back()) {
    clamped |= k > ks.back();
    return {ks.size() - 1, ks.size() - 1, 0.0};
  }
  const auto it = std::upper_bound(ks.begin(), ks.end(), k);
  const std::size_t i = static_cast<std::size_t>(it - ks.begin());
  if (ks[i - 1] == k) return {i - 1, i - 1, 0.0};
  // the variance contribution scales as 1/K, so interpolate in that coordinate
  const double u0 = 1.0 / ks[i - 1];
  const double u1 = 1.0 / ks[i];
  const double ux = 1.0 / static_cast<double>(k);
  return {i - 1, i, (ux - u0) / (u1 - u0)};
}

}  // namespace

LookupResult lookup(const UniversalTable& table, double a, double b, std::uint32_t k) {
  if (std::isnan(a) || std::isnan(b)) throw InvalidInputError("lookup: NaN input");
  if (!(b >= 0.0)) throw InvalidInputError("lookup: b must be nonnegative");
  if (k < 1) throw InvalidInputError("lookup: k must be at least 1");

  bool clamped = false;
  const Bracket ba = bracket_a(table.grid.a_values, a, clamped);
  const Bracket bb = bracket_b(table.grid.b_values, b, clamped);
  Bracket bk;
  if (!table.grid.k_values.empty()) bk = bracket_k(table.grid.k_values, k, clamped);

  double v = 0.0;
  for (int ca = 0; ca < 2; ++ca) {
    const double wa = ca ? ba.w : 1.0 - ba.w;
    if (wa == 0.0) continue;
    for (int cb = 0; cb < 2; ++cb) {
      const double wb = cb ? bb.w : 1.0 - bb.w;
      if (wb == 0.0) continue;
      for (int ck = 0; ck < 2; ++ck) {
        const double wk = ck ? bk.w : 1.0 - bk.w;
        if (wk == 0.0) continue;
        v += wa * wb * wk *
             table.cell(ca ? ba.hi : ba.lo, cb ? bb.hi : bb.lo, ck ? bk.hi : bk.lo);
      }
    }
  }
  return {v, clamped};
}

namespace {

constexpr char kMagic[4] = {'U', 'T', 'B', 'L'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint32_t kNoLoss = 0xFFFFFFFFu;

template <class T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
void read_pod(std::ifstream& in, T& v, const char* what) {
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw IoError(std::string("table file truncated while reading ") + what);
}

template <class T>
void read_array(std::ifstream& in, std::vector<T>& v, std::size_t count, const char* what) {
  v.resize(count);
  if (count == 0) return;
  if (!in.read(reinterpret_cast<char*>(v.data()),
               static_cast<std::streamsize>(count * sizeof(T))))
    throw IoError(std::string("table file truncated while reading ") + what);
}

}  // namespace

void save_table(const UniversalTable& table, const std::filesystem::path& path) {
  table.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(kMagic, 4);
  write_pod(out, kFormatVersion);
  write_pod(out, static_cast<std::uint32_t>(table.stat.family));
  write_pod(out, static_cast<std::uint32_t>(table.mix));
  write_pod(out, table.stat.uses_loss() ? static_cast<std::uint32_t>(table.stat.loss) : kNoLoss);
  write_pod(out, static_cast<std::uint32_t>(table.stat.link));
  write_pod(out, static_cast<std::uint32_t>(table.grid.a_values.size()));
  write_pod(out, static_cast<std::uint32_t>(table.grid.b_values.size()));
  write_pod(out, static_cast<std::uint32_t>(table.grid.k_values.size()));
  write_pod(out, table.mc_samples);
  write_pod(out, table.seed);
  write_pod(out, table.quadrature_order);
  out.write(reinterpret_cast<const char*>(table.grid.a_values.data()),
            static_cast<std::streamsize>(table.grid.a_values.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(table.grid.b_values.data()),
            static_cast<std::streamsize>(table.grid.b_values.size() * sizeof(double)));
  if (!table.grid.k_values.empty())
    out.write(reinterpret_cast<const char*>(table.grid.k_values.data()),
              static_cast<std::streamsize>(table.grid.k_values.size() * sizeof(std::uint32_t)));
  out.write(reinterpret_cast<const char*>(table.values.data()),
            static_cast<std::streamsize>(table.values.size() * sizeof(double)));
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

UniversalTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("'" + path.string() + "' is not a table file (bad magic)");
  std::uint32_t version;
  read_pod(in, version, "version");
  if (version != kFormatVersion)
    throw IoError("unsupported table format version " + std::to_string(version));

  std::uint32_t family, mix, loss, link_tag, na, nb, nk, order;
  std::uint64_t mc, seed;
  read_pod(in, family, "stat tag");
  read_pod(in, mix, "mix tag");
  read_pod(in, loss, "loss tag");
  read_pod(in, link_tag, "link tag");
  read_pod(in, na, "grid size");
  read_pod(in, nb, "grid size");
  read_pod(in, nk, "grid size");
  read_pod(in, mc, "mc_samples");
  read_pod(in, seed, "seed");
  read_pod(in, order, "quadrature order");

  if (family > 4 || mix > 1 || link_tag > 1 || (loss != kNoLoss && loss > 2))
    throw IoError("corrupt table header in '" + path.string() + "'");
  if (na == 0 || nb == 0 || na > 1000000 || nb > 1000000 || nk > 1000000)
    throw IoError("unreasonable grid sizes in '" + path.string() + "'");
  const std::size_t cells =
      static_cast<std::size_t>(na) * nb * (nk == 0 ? 1 : nk);
  if (cells > 500000000) throw IoError("unreasonable table size in '" + path.string() + "'");

  UniversalTable t;
  t.stat.family = static_cast<StatFamily>(family);
  if (t.stat.uses_loss()) {
    if (loss == kNoLoss) throw IoError("missing loss tag in '" + path.string() + "'");
    t.stat.loss = static_cast<LossKind>(loss);
  }
  t.stat.link = static_cast<LinkKind>(link_tag);
  t.mix = static_cast<MixScheme>(mix);
  t.mc_samples = mc;
  t.seed = seed;
  t.quadrature_order = order;
  read_array(in, t.grid.a_values, na, "a_values");
  read_array(in, t.grid.b_values, nb, "b_values");
  read_array(in, t.grid.k_values, nk, "k_values");
  read_array(in, t.values, cells, "values");
  if (in.peek() != std::ifstream::traits_type::eof())
    throw IoError("trailing data in table file '" + path.string() + "'");
  try {
    t.validate();
  } catch (const Error& e) {
    throw IoError("table file '" + path.string() + "' fails validation: " + e.what());
  }
  return t;
}

std::string table_info(const std::filesystem::path& path) {
  const UniversalTable t = load_table(path);
  std::ostringstream out;
  out << "table file:        " << path.string() << "\n"
      << "stat:              " << to_string(t.stat) << "\n"
      << "mix:               " << to_string(t.mix) << "\n"
      << "grid:              " << t.grid.a_values.size() << " a x " << t.grid.b_values.size()
      << " b";
  if (!t.grid.k_values.empty()) out << " x " << t.grid.k_values.size() << " K";
  out << "\n"
      << "a range:           [" << t.grid.a_values.front() << ", " << t.grid.a_values.back()
      << "]\n"
      << "b range:           [" << t.grid.b_values.front() << ", " << t.grid.b_values.back()
      << "]\n";
  if (!t.grid.k_values.empty())
    out << "K range:           [" << t.grid.k_values.front() << ", " << t.grid.k_values.back()
        << "]\n";
  out << "mc_samples:        " << t.mc_samples << "\n"
      << "seed:              " << t.seed << "\n"
      << "quadrature order:  " << t.quadrature_order << "\n"
      << "cells:             " << t.values.size() << "\n";
  return out.str();
}

}  // namespace bitecast
