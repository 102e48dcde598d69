#include "cdkit/citest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "cdkit/error.hpp"

namespace cdkit {

std::string to_string(Kernel k) {
  switch (k) {
    case Kernel::fisher_z: return "fisher-z";
    case Kernel::g_square: return "g-square";
    case Kernel::cond_gauss: return "cond-gauss";
    case Kernel::degen_gauss: return "degen-gauss";
  }
  return "unknown";
}

std::string to_string(MissingMode m) {
  switch (m) {
    case MissingMode::complete_only: return "complete";
    case MissingMode::testwise: return "twd";
    case MissingMode::mi_pooled: return "mi";
  }
  return "unknown";
}

Kernel parse_kernel(const std::string& s) {
  if (s == "fisher-z" || s == "fz" || s == "fisher_z" || s == "gauss") return Kernel::fisher_z;
  if (s == "g-square" || s == "gsq" || s == "g_square" || s == "dis") return Kernel::g_square;
  if (s == "cg" || s == "cond-gauss" || s == "cond_gauss" || s == "mixed") return Kernel::cond_gauss;
  if (s == "dg" || s == "degen-gauss" || s == "degen_gauss") return Kernel::degen_gauss;
  throw ValidationError("unknown test '" + s + "' (expected fisher-z, g-square, cg or dg)");
}

MissingMode parse_missing_mode(const std::string& s) {
  if (s == "complete" || s == "listwise" || s == "complete-only") return MissingMode::complete_only;
  if (s == "twd" || s == "testwise") return MissingMode::testwise;
  if (s == "mi" || s == "mi-pooled") return MissingMode::mi_pooled;
  throw ValidationError("unknown missing-data mode '" + s + "' (expected complete, twd or mi)");
}

double chi_square_upper(double statistic, double df) {
  if (df <= 0.0 || statistic <= 0.0) return 1.0;
  if (!std::isfinite(statistic)) return 0.0;
  boost::math::chi_squared_distribution<double> dist(df);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

double normal_two_sided(double z) {
  if (!std::isfinite(z)) return 0.0;
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

namespace {

std::vector<std::size_t> test_vars(std::size_t x, std::size_t y, std::span<const std::size_t> s) {
  std::vector<std::size_t> vars{x, y};
  vars.insert(vars.end(), s.begin(), s.end());
  return vars;
}

std::vector<std::size_t> all_rows(const Dataset& data) {
  std::vector<std::size_t> rows(data.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace

// --- Fisher z -----------------------------------------------------------------

CITestResult fisher_z(const SufficientStats& suff, std::size_t x, std::size_t y, std::span<const std::size_t> s) {
  if (suff.kind != SufficientStats::Kind::correlation)
    throw std::invalid_argument("fisher_z needs correlation sufficient statistics");
  if (x > y) std::swap(x, y);
  const auto n = suff.n;
  if (!suff.computable()) return CITestResult::not_computable(*suff.not_computable, n);
  const auto k = s.size();
  if (n < k + 4) return CITestResult::not_computable("effective sample size below |S| + 4", n);

  auto vars = test_vars(x, y, s);
  const auto d = static_cast<Eigen::Index>(vars.size());
  Eigen::MatrixXd m(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      m(a, b) = suff.correlation(static_cast<Eigen::Index>(suff.position(vars[static_cast<std::size_t>(a)])),
                                 static_cast<Eigen::Index>(suff.position(vars[static_cast<std::size_t>(b)])));
  double r = 0.0;
  if (k == 0) {
    r = m(0, 1);
  } else {
    Eigen::MatrixXd prec = m.completeOrthogonalDecomposition().pseudoInverse();
    double denom = prec(0, 0) * prec(1, 1);
    if (!(denom > 0.0)) return CITestResult::not_computable("degenerate partial correlation", n);
    r = -prec(0, 1) / std::sqrt(denom);
  }
  if (!std::isfinite(r)) return CITestResult::not_computable("degenerate partial correlation", n);
  r = std::clamp(r, -1.0, 1.0);

  CITestResult out;
  out.n_effective = n;
  out.df = 1.0;
  if (std::abs(r) >= 1.0 - 1e-12) {
    out.statistic = std::copysign(std::numeric_limits<double>::infinity(), r);
    out.p_value = 0.0;
    out.flags |= kPerfectDependence;
    return out;
  }
  out.statistic = std::sqrt(static_cast<double>(n - k - 3)) * std::atanh(r);
  out.p_value = normal_two_sided(out.statistic);
  return out;
}

// --- G-square -----------------------------------------------------------------

CITestResult g_square(const Dataset& data, std::size_t x, std::size_t y, std::span<const std::size_t> s,
                      std::span<const std::size_t> rows, const KernelOptions& opts) {
  if (x > y) std::swap(x, y);
  auto vars = test_vars(x, y, s);
  for (auto v : vars)
    if (!data.is_discrete(v))
      throw std::invalid_argument("g_square: column '" + data.column(v).name + "' is not categorical");
  auto use = data.complete_rows(vars, rows);
  const auto n = use.size();
  if (n == 0) return CITestResult::not_computable("no complete rows", 0);

  const auto lx = static_cast<std::size_t>(data.num_levels(x));
  const auto ly = static_cast<std::size_t>(data.num_levels(y));
  std::map<std::vector<int>, std::vector<double>> strata;
  std::vector<int> key(s.size());
  for (auto i : use) {
    for (std::size_t a = 0; a < s.size(); ++a) key[a] = data.code(i, s[a]);
    auto& table = strata[key];
    if (table.empty()) table.assign(lx * ly, 0.0);
    table[static_cast<std::size_t>(data.code(i, x)) * ly + static_cast<std::size_t>(data.code(i, y))] += 1.0;
  }

  double g2 = 0.0;
  double adapted_df = 0.0;
  for (const auto& [cfg, table] : strata) {
    std::vector<double> row(lx, 0.0), col(ly, 0.0);
    double total = 0.0;
    for (std::size_t a = 0; a < lx; ++a)
      for (std::size_t b = 0; b < ly; ++b) {
        row[a] += table[a * ly + b];
        col[b] += table[a * ly + b];
        total += table[a * ly + b];
      }
    for (std::size_t a = 0; a < lx; ++a)
      for (std::size_t b = 0; b < ly; ++b) {
        double o = table[a * ly + b];
        if (o > 0.0) g2 += o * std::log(o * total / (row[a] * col[b]));
      }
    auto nz = [](const std::vector<double>& v) { return std::count_if(v.begin(), v.end(), [](double c) { return c > 0; }); };
    adapted_df += static_cast<double>((nz(row) - 1) * (nz(col) - 1));
  }
  g2 *= 2.0;

  CITestResult out;
  out.n_effective = n;
  out.statistic = std::max(g2, 0.0);
  double df = static_cast<double>((lx - 1) * (ly - 1));
  for (auto v : s) df *= data.num_levels(v);
  if (opts.adapt_df) {
    df = std::max(adapted_df, 1.0);
    out.flags |= kDfAdapted;
  }
  out.df = df;
  out.p_value = chi_square_upper(out.statistic, df);
  return out;
}

// --- Dispatch ----------------------------------------------------------------------

CITestResult run_kernel(Kernel kernel, const Dataset& data, std::size_t x, std::size_t y,
                        std::span<const std::size_t> s, std::span<const std::size_t> rows,
                        const KernelOptions& opts) {
  switch (kernel) {
    case Kernel::fisher_z: {
      auto vars = test_vars(std::min(x, y), std::max(x, y), s);
      auto suff = sufficient_stats(data, vars, rows);
      return fisher_z(suff, x, y, s);
    }
    case Kernel::g_square: return g_square(data, x, y, s, rows, opts);
    case Kernel::cond_gauss: return cond_gauss(data, x, y, s, rows, opts);
    case Kernel::degen_gauss: return degen_gauss(data, x, y, s, rows, opts);
  }
  throw std::logic_error("unknown kernel");
}

CITestResult run_kernel(Kernel kernel, const Dataset& data, std::size_t x, std::size_t y,
                        std::span<const std::size_t> s, const KernelOptions& opts) {
  auto rows = all_rows(data);
  return run_kernel(kernel, data, x, y, s, rows, opts);
}

CITestResult testwise(Kernel kernel, const Dataset& data, std::size_t x, std::size_t y,
                      std::span<const std::size_t> s, const KernelOptions& opts) {
  return run_kernel(kernel, data, x, y, s, opts);
}

void check_compatible(Kernel kernel, const Dataset& data, std::span<const std::size_t> vars) {
  for (auto j : vars) {
    if (kernel == Kernel::fisher_z && data.is_discrete(j))
      throw ValidationError("fisher-z test needs continuous data, but '" + data.column(j).name + "' is categorical");
    if (kernel == Kernel::g_square && !data.is_discrete(j))
      throw ValidationError("g-square test needs categorical data, but '" + data.column(j).name + "' is " +
                            to_string(data.column(j).scale));
  }
}

void check_compatible(Kernel kernel, const Dataset& data) {
  std::vector<std::size_t> vars(data.cols());
  std::iota(vars.begin(), vars.end(), std::size_t{0});
  check_compatible(kernel, data, vars);
}

// --- Multiple-imputation pooling ------------------------------------------------------

CITestResult mi_pooled(Kernel kernel, std::span<const Dataset> datasets, std::size_t x, std::size_t y,
                       std::span<const std::size_t> s, const KernelOptions& opts) {
  if (datasets.empty()) throw ValidationError("mi_pooled: no imputed datasets");
  const auto& first = datasets.front();
  for (std::size_t k = 0; k < datasets.size(); ++k) {
    if (datasets[k].schema() != first.schema())
      throw ValidationError("mi_pooled: imputed dataset " + std::to_string(k) + " has a different schema");
    if (datasets[k].rows() != first.rows())
      throw ValidationError("mi_pooled: imputed dataset " + std::to_string(k) + " has a different row count");
    if (datasets[k].has_missing())
      throw ValidationError("mi_pooled: imputed dataset " + std::to_string(k) + " still has missing cells");
  }
  const auto m = datasets.size();
  if (m == 1) return run_kernel(kernel, first, x, y, s, opts);

  std::vector<CITestResult> results;
  results.reserve(m);
  for (const auto& d : datasets) {
    results.push_back(run_kernel(kernel, d, x, y, s, opts));
    if (!results.back().computable()) return results.back();
  }
  const double md = static_cast<double>(m);
  CITestResult out;
  out.n_effective = first.rows();
  for (const auto& r : results) out.flags |= r.flags;

  if (kernel == Kernel::fisher_z) {
    if (std::any_of(results.begin(), results.end(), [](const auto& r) { return r.has(kPerfectDependence); })) {
      out.statistic = std::numeric_limits<double>::infinity();
      out.df = 1.0;
      out.p_value = 0.0;
      return out;
    }
    // Back out atanh(r) from sqrt(n - |S| - 3) * atanh(r).
    const double scale = std::sqrt(static_cast<double>(first.rows() - s.size() - 3));
    double zbar = 0.0;
    for (const auto& r : results) zbar += r.statistic / scale;
    zbar /= md;
    double between = 0.0;
    for (const auto& r : results) between += (r.statistic / scale - zbar) * (r.statistic / scale - zbar);
    between /= md - 1.0;
    if (std::all_of(results.begin(), results.end(),
                    [&](const auto& r) { return r.statistic == results.front().statistic; }))
      between = 0.0;
    const double within = 1.0 / (scale * scale);
    const double rel = (1.0 + 1.0 / md) * between / within;
    out.statistic = zbar * scale / std::sqrt(1.0 + rel);
    if (rel == 0.0) {
      out.df = std::numeric_limits<double>::infinity();
      out.p_value = normal_two_sided(out.statistic);
    } else {
      out.df = (md - 1.0) * (1.0 + 1.0 / rel) * (1.0 + 1.0 / rel);
      boost::math::students_t_distribution<double> t(out.df);
      out.p_value = 2.0 * boost::math::cdf(boost::math::complement(t, std::abs(out.statistic)));
    }
    return out;
  }

  // D2 combination of chi-square statistics.
  double k = 0.0, dbar = 0.0, rootbar = 0.0;
  for (const auto& r : results) {
    k += r.df;
    dbar += r.statistic;
    rootbar += std::sqrt(r.statistic);
  }
  k /= md;
  dbar /= md;
  rootbar /= md;
  double var_root = 0.0;
  for (const auto& r : results) var_root += (std::sqrt(r.statistic) - rootbar) * (std::sqrt(r.statistic) - rootbar);
  var_root /= md - 1.0;
  if (std::all_of(results.begin(), results.end(),
                  [&](const auto& r) { return r.statistic == results.front().statistic; }))
    var_root = 0.0;
  const double rr = (1.0 + 1.0 / md) * var_root;
  out.df = k;
  if (k <= 0.0) {
    out.p_value = 1.0;
    return out;
  }
  if (rr == 0.0) {
    out.statistic = dbar;
    out.p_value = chi_square_upper(dbar, k);
    return out;
  }
  const double d2 = (dbar / k - (md + 1.0) / (md - 1.0) * rr) / (1.0 + rr);
  const double v2 = std::pow(k, -3.0 / md) * (md - 1.0) * (1.0 + 1.0 / rr) * (1.0 + 1.0 / rr);
  out.statistic = std::max(d2, 0.0) * k;
  if (d2 <= 0.0) {
    out.p_value = 1.0;
  } else {
    boost::math::fisher_f_distribution<double> f(k, v2);
    out.p_value = boost::math::cdf(boost::math::complement(f, d2));
  }
  return out;
}

// --- Testers -----------------------------------------------------------------------

DataIndependenceTest::DataIndependenceTest(Kernel kernel, MissingMode mode, Dataset data, KernelOptions opts)
    : kernel_(kernel), mode_(mode), data_(std::move(data)), opts_(opts) {
  if (mode_ == MissingMode::mi_pooled)
    throw std::invalid_argument("DataIndependenceTest: use PooledIndependenceTest for multiple imputation");
  check_compatible(kernel_, data_);
  std::vector<std::size_t> all(data_.cols());
  std::iota(all.begin(), all.end(), std::size_t{0});
  complete_ = data_.complete_rows(all);
  if (kernel_ == Kernel::fisher_z && mode_ == MissingMode::complete_only) {
    correlation_ = correlation_matrix(data_, all, complete_);
    constant_.assign(data_.cols(), 0);
    for (auto j : all) {
      if (complete_.empty()) break;
      double first = data_.value(complete_.front(), j);
      constant_[j] = std::all_of(complete_.begin(), complete_.end(),
                                 [&](auto i) { return data_.value(i, j) == first; });
    }
  }
}

CITestResult DataIndependenceTest::test(std::size_t x, std::size_t y, std::span<const std::size_t> s) const {
  if (mode_ == MissingMode::testwise) return run_kernel(kernel_, data_, x, y, s, opts_);
  if (kernel_ != Kernel::fisher_z) return run_kernel(kernel_, data_, x, y, s, complete_, opts_);

  SufficientStats suff;
  suff.kind = SufficientStats::Kind::correlation;
  suff.vars = test_vars(std::min(x, y), std::max(x, y), s);
  suff.n = complete_.size();
  const auto d = static_cast<Eigen::Index>(suff.vars.size());
  suff.correlation.resize(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      suff.correlation(a, b) = correlation_(static_cast<Eigen::Index>(suff.vars[static_cast<std::size_t>(a)]),
                                            static_cast<Eigen::Index>(suff.vars[static_cast<std::size_t>(b)]));
  if (complete_.empty()) {
    suff.not_computable = "no complete rows";
  } else {
    for (auto j : suff.vars)
      if (constant_[j]) {
        suff.not_computable = "zero variance in '" + data_.column(j).name + "'";
        break;
      }
  }
  return fisher_z(suff, x, y, s);
}

std::string DataIndependenceTest::describe() const { return to_string(kernel_) + " (" + to_string(mode_) + ")"; }

PooledIndependenceTest::PooledIndependenceTest(Kernel kernel, std::vector<Dataset> imputations, KernelOptions opts)
    : kernel_(kernel), imputations_(std::move(imputations)), opts_(opts) {
  if (imputations_.empty()) throw ValidationError("multiple imputation needs at least one completed dataset");
  for (std::size_t k = 0; k < imputations_.size(); ++k) {
    if (imputations_[k].schema() != imputations_.front().schema())
      throw ValidationError("imputed dataset " + std::to_string(k) + " has a different schema");
    if (imputations_[k].rows() != imputations_.front().rows())
      throw ValidationError("imputed dataset " + std::to_string(k) + " has a different row count");
    if (imputations_[k].has_missing())
      throw ValidationError("imputed dataset " + std::to_string(k) + " still has missing cells");
  }
  check_compatible(kernel_, imputations_.front());
}

CITestResult PooledIndependenceTest::test(std::size_t x, std::size_t y, std::span<const std::size_t> s) const {
  return mi_pooled(kernel_, imputations_, x, y, s, opts_);
}

std::string PooledIndependenceTest::describe() const {
  return to_string(kernel_) + " (mi, m=" + std::to_string(imputations_.size()) + ")";
}

std::vector<Dataset> hot_deck_impute(const Dataset& data, std::size_t m, std::uint64_t seed) {
  std::vector<Dataset> out;
  out.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + k + 1);
    Dataset filled = data;
    for (std::size_t j = 0; j < data.cols(); ++j) {
      std::vector<std::size_t> donors;
      std::vector<std::size_t> holes;
      for (std::size_t i = 0; i < data.rows(); ++i) (data.missing(i, j) ? holes : donors).push_back(i);
      if (holes.empty()) continue;
      if (donors.empty()) throw ValidationError("cannot impute '" + data.column(j).name + "': no observed values");
      std::uniform_int_distribution<std::size_t> pick(0, donors.size() - 1);
      for (auto i : holes) {
        auto d = donors[pick(rng)];
        if (data.column(j).scale == Scale::categorical) {
          filled.set_code(i, j, data.code(d, j));
        } else {
          filled.set_value(i, j, data.value(d, j));
        }
      }
    }
    filled.finalize();
    out.push_back(std::move(filled));
  }
  return out;
}

}  // namespace cdkit
