#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "cdkit/citest.hpp"
#include "cdkit/dataset.hpp"
#include "cdkit/graph.hpp"
#include "cdkit/synth.hpp"

namespace cdkit::support {

inline std::vector<std::string> letters(std::size_t p) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < p; ++i) out.push_back(std::string(1, static_cast<char>('A' + i)));
  return out;
}

// Random DAG over `p` nodes: a random causal order and independent edges.
inline MixedGraph random_dag(std::size_t p, double edge_prob, std::mt19937_64& rng) {
  auto names = letters(p);
  MixedGraph g(names);
  std::vector<std::size_t> order(p);
  for (std::size_t i = 0; i < p; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::bernoulli_distribution coin(edge_prob);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j)
      if (coin(rng)) g.add_directed(order[i], order[j]);
  return g;
}

// Linear-Gaussian spec over a DAG with coefficients of magnitude in [0.5, 1].
inline GenerativeSpec linear_spec(const MixedGraph& dag, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.5, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<NodeSpec> nodes;
  std::map<std::string, std::vector<std::string>> parents;
  for (std::size_t v = 0; v < dag.size(); ++v) {
    NodeSpec n;
    n.name = dag.name(v);
    n.mechanism.kind = MechanismKind::linear;
    for (auto p : dag.parents(v)) {
      n.mechanism.coefficients[dag.name(p)] = {(sign(rng) ? 1.0 : -1.0) * mag(rng)};
      parents[n.name].push_back(dag.name(p));
    }
    nodes.push_back(n);
  }
  return GenerativeSpec::from_parents(nodes, parents);
}

// Data frame of independent columns; discrete ones uniform over their levels.
inline Dataset independent_data(const std::vector<ColumnSchema>& schema, std::size_t n, std::uint64_t seed) {
  Dataset d(schema, n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (schema[j].discrete()) {
        std::uniform_int_distribution<int> lv(0, static_cast<int>(schema[j].levels.size()) - 1);
        d.set_code(i, j, lv(rng));
      } else {
        d.set_value(i, j, z(rng));
      }
    }
  }
  d.finalize();
  return d;
}

// Chained Bayesian linear-regression imputation for all-continuous data, the
// conditional kind of imputer that mi_pooled is meant to be fed. Each missing
// cell is redrawn from its regression on the other columns with coefficients
// and residual variance drawn from their posterior.
inline std::vector<Dataset> regression_impute(const Dataset& data, std::size_t m, std::uint64_t seed,
                                              int cycles = 5) {
  const std::size_t n = data.rows(), p = data.cols();
  std::vector<Dataset> out;
  for (std::size_t k = 0; k < m; ++k) {
    std::mt19937_64 rng(seed * 1000003u + k);
    std::normal_distribution<double> z;
    Eigen::MatrixXd x(n, p);
    std::vector<std::vector<std::size_t>> observed(p), missing(p);
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t i = 0; i < n; ++i) (data.missing(i, j) ? missing : observed)[j].push_back(i);
      std::uniform_int_distribution<std::size_t> pick(0, observed[j].size() - 1);
      for (std::size_t i = 0; i < n; ++i)
        x(i, j) = data.missing(i, j) ? data.value(observed[j][pick(rng)], j) : data.value(i, j);
    }
    for (int c = 0; c < cycles; ++c) {
      for (std::size_t j = 0; j < p; ++j) {
        if (missing[j].empty()) continue;
        const auto& obs = observed[j];
        auto design = [&](std::size_t i) {
          Eigen::VectorXd row(p);
          row(0) = 1.0;
          for (std::size_t q = 0, col = 1; q < p; ++q)
            if (q != j) row(col++) = x(i, q);
          return row;
        };
        Eigen::MatrixXd a(obs.size(), p);
        Eigen::VectorXd b(obs.size());
        for (std::size_t r = 0; r < obs.size(); ++r) {
          a.row(r) = design(obs[r]).transpose();
          b(r) = x(obs[r], j);
        }
        Eigen::MatrixXd xtx_inv = (a.transpose() * a).inverse();
        Eigen::VectorXd beta = xtx_inv * a.transpose() * b;
        const double rss = (b - a * beta).squaredNorm();
        std::chi_squared_distribution<double> chi(static_cast<double>(obs.size() - p));
        const double sigma2 = rss / chi(rng);
        Eigen::LLT<Eigen::MatrixXd> llt(xtx_inv * sigma2);
        Eigen::VectorXd noise(p);
        for (std::size_t q = 0; q < p; ++q) noise(q) = z(rng);
        Eigen::VectorXd draw = beta + llt.matrixL() * noise;
        for (auto i : missing[j]) x(i, j) = design(i).dot(draw) + std::sqrt(sigma2) * z(rng);
      }
    }
    Dataset filled = data;
    for (std::size_t j = 0; j < p; ++j)
      for (auto i : missing[j]) filled.set_value(i, j, x(i, j));
    filled.finalize();
    out.push_back(std::move(filled));
  }
  return out;
}

// Tester that answers from a table keyed by (x, y, sorted S) in either order;
// unlisted queries are dependent (p = 0).
class ScriptedTest : public IndependenceTest {
 public:
  explicit ScriptedTest(std::vector<std::string> names) : names_(std::move(names)) {}

  void independent(const std::string& x, const std::string& y, std::vector<std::string> s, double p) {
    std::vector<std::size_t> idx;
    for (const auto& v : s) idx.push_back(index(v));
    std::sort(idx.begin(), idx.end());
    auto a = index(x), b = index(y);
    table_[{std::min(a, b), std::max(a, b), idx}] = p;
  }

  std::vector<std::string> names() const override { return names_; }
  CITestResult test(std::size_t x, std::size_t y, std::span<const std::size_t> s) const override {
    std::vector<std::size_t> idx(s.begin(), s.end());
    std::sort(idx.begin(), idx.end());
    CITestResult r;
    auto it = table_.find({std::min(x, y), std::max(x, y), idx});
    r.p_value = it == table_.end() ? 0.0 : it->second;
    return r;
  }
  std::string describe() const override { return "scripted"; }

 private:
  std::size_t index(const std::string& v) const {
    return static_cast<std::size_t>(std::find(names_.begin(), names_.end(), v) - names_.begin());
  }
  std::vector<std::string> names_;
  std::map<std::tuple<std::size_t, std::size_t, std::vector<std::size_t>>, double> table_;
};

}  // namespace cdkit::support
