// Likelihood-ratio tests for mixed data.
//
// cond_gauss: the conditional-independence statistic is
//   2 * [l(X,Y,S) - l(X,S) - l(Y,S) + l(S)]
// where l(V) is the maximized Conditional Gaussian log-likelihood of V: a
// multinomial over the joint configuration of the discrete members and an
// unrestricted Gaussian for the continuous members within each configuration.
// Configurations with fewer than (continuous dimension + 2) rows share one
// residual Gaussian. Degrees of freedom are the same combination of free
// parameter counts.
//
// degen_gauss: categorical columns become L-1 indicators (reference = first
// observed level) and the Gaussian likelihood-ratio statistic of X _||_ Y | S
// is computed on the expanded blocks.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "cdkit/citest.hpp"

namespace cdkit {

namespace {

struct LogDet {
  double value = 0.0;
  bool ridged = false;
};

LogDet log_det(const Eigen::MatrixXd& cov, double ridge) {
  const auto c = cov.rows();
  if (c == 0) return {};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double hi = ev.maxCoeff();
  const double lo = ev.minCoeff();
  LogDet out;
  if (!(lo > 1e-12 * std::max(hi, 0.0)) || !(hi > 0.0)) {
    const double scale = cov.trace() / static_cast<double>(c);
    const double lambda = ridge * (scale > 0.0 ? scale : 1.0);
    out.ridged = true;
    for (Eigen::Index k = 0; k < c; ++k) out.value += std::log(std::max(ev(k), 0.0) + lambda);
    return out;
  }
  for (Eigen::Index k = 0; k < c; ++k) out.value += std::log(ev(k));
  return out;
}

// MLE covariance of `cols` over `rows`.
Eigen::MatrixXd ml_covariance(const Dataset& data, std::span<const std::size_t> rows,
                              std::span<const std::size_t> cols) {
  const auto c = static_cast<Eigen::Index>(cols.size());
  const auto n = static_cast<double>(rows.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(c);
  for (auto i : rows)
    for (Eigen::Index a = 0; a < c; ++a) mean(a) += data.value(i, cols[static_cast<std::size_t>(a)]);
  mean /= n;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(c, c);
  Eigen::VectorXd dev(c);
  for (auto i : rows) {
    for (Eigen::Index a = 0; a < c; ++a) dev(a) = data.value(i, cols[static_cast<std::size_t>(a)]) - mean(a);
    cov.selfadjointView<Eigen::Lower>().rankUpdate(dev);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  return cov / n;
}

struct CGFit {
  double loglik = 0.0;
  double params = 0.0;
  bool ridged = false;
  bool merged = false;
};

CGFit cg_fit(const Dataset& data, std::span<const std::size_t> rows, std::span<const std::size_t> vars,
             double ridge) {
  std::vector<std::size_t> disc, cont;
  for (auto v : vars) (data.is_discrete(v) ? disc : cont).push_back(v);
  CGFit fit;
  if (vars.empty() || rows.empty()) return fit;
  const double n = static_cast<double>(rows.size());

  std::map<std::vector<int>, std::vector<std::size_t>> strata;
  std::vector<int> key(disc.size());
  for (auto i : rows) {
    for (std::size_t a = 0; a < disc.size(); ++a) key[a] = data.code(i, disc[a]);
    strata[key].push_back(i);
  }
  if (!disc.empty()) {
    double cells = 1.0;
    for (auto v : disc) cells *= data.num_levels(v);
    fit.params += cells - 1.0;
    for (const auto& [cfg, members] : strata) {
      const double nc = static_cast<double>(members.size());
      fit.loglik += nc * std::log(nc / n);
    }
  }
  if (cont.empty()) return fit;

  const auto c = cont.size();
  const std::size_t min_rows = c + 2;
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> residual;
  for (auto& [cfg, members] : strata) {
    if (members.size() >= min_rows) {
      groups.push_back(std::move(members));
    } else {
      residual.insert(residual.end(), members.begin(), members.end());
    }
  }
  if (!residual.empty()) {
    fit.merged = true;
    if (residual.size() >= min_rows || groups.empty()) {
      std::sort(residual.begin(), residual.end());
      groups.push_back(std::move(residual));
    } else {
      auto largest = std::max_element(groups.begin(), groups.end(),
                                      [](const auto& a, const auto& b) { return a.size() < b.size(); });
      largest->insert(largest->end(), residual.begin(), residual.end());
      std::sort(largest->begin(), largest->end());
    }
  }
  const double cd = static_cast<double>(c);
  for (const auto& g : groups) {
    auto ld = log_det(ml_covariance(data, g, cont), ridge);
    fit.ridged = fit.ridged || ld.ridged;
    const double ng = static_cast<double>(g.size());
    fit.loglik += -0.5 * ng * (cd * std::log(2.0 * std::numbers::pi) + ld.value + cd);
    fit.params += cd + cd * (cd + 1.0) / 2.0;
  }
  return fit;
}

std::vector<std::size_t> concat(std::initializer_list<std::size_t> head, std::span<const std::size_t> tail) {
  std::vector<std::size_t> out(head);
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

}  // namespace

CITestResult cond_gauss(const Dataset& data, std::size_t x, std::size_t y, std::span<const std::size_t> s,
                        std::span<const std::size_t> rows, const KernelOptions& opts) {
  if (x > y) std::swap(x, y);
  auto xys = concat({x, y}, s);
  auto use = data.complete_rows(xys, rows);
  const auto n = use.size();
  if (n == 0) return CITestResult::not_computable("no complete rows", 0);

  auto xs = concat({x}, s);
  auto ys = concat({y}, s);
  auto full = cg_fit(data, use, xys, opts.ridge);
  auto fx = cg_fit(data, use, xs, opts.ridge);
  auto fy = cg_fit(data, use, ys, opts.ridge);
  auto fs = cg_fit(data, use, s, opts.ridge);

  CITestResult out;
  out.n_effective = n;
  if (full.ridged || fx.ridged || fy.ridged || fs.ridged) out.flags |= kRidgeRegularized;
  if (full.ridged && !fx.ridged && !fy.ridged) out.flags |= kPerfectDependence;
  if (full.merged || fx.merged || fy.merged || fs.merged) out.flags |= kStrataMerged;
  out.statistic = std::max(0.0, 2.0 * ((full.loglik - fx.loglik) - (fy.loglik - fs.loglik)));
  out.df = full.params - fx.params - fy.params + fs.params;
  out.p_value = out.df > 0.0 ? chi_square_upper(out.statistic, out.df) : 1.0;
  if (out.has(kPerfectDependence)) out.p_value = 0.0;
  return out;
}

CITestResult degen_gauss(const Dataset& data, std::size_t x, std::size_t y, std::span<const std::size_t> s,
                         std::span<const std::size_t> rows, const KernelOptions& opts) {
  if (x > y) std::swap(x, y);
  auto xys = concat({x, y}, s);
  auto use = data.complete_rows(xys, rows);
  const auto n = use.size();
  if (n == 0) return CITestResult::not_computable("no complete rows", 0);

  // Expanded design: one column per continuous variable, indicators otherwise.
  std::vector<Eigen::VectorXd> columns;
  std::vector<std::size_t> block_of;  // 0 = x, 1 = y, 2 = s
  std::uint32_t flags = 0;
  for (std::size_t k = 0; k < xys.size(); ++k) {
    const auto v = xys[k];
    const std::size_t block = k < 2 ? k : 2;
    if (!data.is_discrete(v)) {
      Eigen::VectorXd col(static_cast<Eigen::Index>(n));
      for (std::size_t r = 0; r < n; ++r) col(static_cast<Eigen::Index>(r)) = data.value(use[r], v);
      columns.push_back(std::move(col));
      block_of.push_back(block);
      continue;
    }
    std::vector<char> seen(static_cast<std::size_t>(data.num_levels(v)), 0);
    for (auto i : use) seen[static_cast<std::size_t>(data.code(i, v))] = 1;
    if (std::count(seen.begin(), seen.end(), 1) < static_cast<long>(seen.size())) flags |= kLevelDropped;
    bool reference = true;
    for (std::size_t lv = 0; lv < seen.size(); ++lv) {
      if (!seen[lv]) continue;
      if (reference) {
        reference = false;
        continue;
      }
      Eigen::VectorXd col(static_cast<Eigen::Index>(n));
      for (std::size_t r = 0; r < n; ++r)
        col(static_cast<Eigen::Index>(r)) = data.code(use[r], v) == static_cast<int>(lv) ? 1.0 : 0.0;
      columns.push_back(std::move(col));
      block_of.push_back(block);
    }
  }
  const auto dx = static_cast<double>(std::count(block_of.begin(), block_of.end(), std::size_t{0}));
  const auto dy = static_cast<double>(std::count(block_of.begin(), block_of.end(), std::size_t{1}));

  CITestResult out;
  out.n_effective = n;
  out.flags = flags;
  if (dx == 0.0 || dy == 0.0) {
    out.p_value = 1.0;
    return out;
  }
  const auto dim = columns.size();
  if (n <= dim + 1) return CITestResult::not_computable("fewer rows than expanded dimensions", n);

  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index k = 0; k < d; ++k) design.col(k) = columns[static_cast<std::size_t>(k)];
  Eigen::RowVectorXd mean = design.colwise().mean();
  design.rowwise() -= mean;
  Eigen::MatrixXd cov = (design.transpose() * design) / static_cast<double>(n);

  auto block_logdet = [&](std::initializer_list<std::size_t> blocks) {
    std::vector<Eigen::Index> idx;
    for (std::size_t k = 0; k < dim; ++k)
      if (std::find(blocks.begin(), blocks.end(), block_of[k]) != blocks.end())
        idx.push_back(static_cast<Eigen::Index>(k));
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = 0; b < idx.size(); ++b)
        sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = cov(idx[a], idx[b]);
    return log_det(sub, opts.ridge);
  };
  auto lxys = block_logdet({0, 1, 2});
  auto lxs = block_logdet({0, 2});
  auto lys = block_logdet({1, 2});
  auto ls = block_logdet({2});
  if (lxys.ridged || lxs.ridged || lys.ridged || ls.ridged) out.flags |= kRidgeRegularized;
  if (lxys.ridged && !lxs.ridged && !lys.ridged) out.flags |= kPerfectDependence;
  out.statistic =
      std::max(0.0, static_cast<double>(n) * ((lxs.value - lxys.value) + (lys.value - ls.value)));
  out.df = dx * dy;
  out.p_value = out.has(kPerfectDependence) ? 0.0 : chi_square_upper(out.statistic, out.df);
  return out;
}

}  // namespace cdkit
