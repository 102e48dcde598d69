#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdkit/dataset.hpp"

namespace cdkit {

enum CIFlag : std::uint32_t {
  kPerfectDependence = 1u << 0,
  kRidgeRegularized = 1u << 1,
  kStrataMerged = 1u << 2,
  kLevelDropped = 1u << 3,
  kDfAdapted = 1u << 4,
};

struct CITestResult {
  double statistic = 0.0;
  double df = 0.0;
  std::optional<double> p_value;  // empty when the test could not be computed
  std::size_t n_effective = 0;
  std::string reason;             // set when not computable
  std::uint32_t flags = 0;

  bool computable() const { return p_value.has_value(); }
  bool has(CIFlag f) const { return (flags & f) != 0; }

  static CITestResult not_computable(std::string why, std::size_t n) {
    CITestResult r;
    r.reason = std::move(why);
    r.n_effective = n;
    return r;
  }
};

enum class Kernel { fisher_z, g_square, cond_gauss, degen_gauss };
enum class MissingMode { complete_only, testwise, mi_pooled };

std::string to_string(Kernel k);
std::string to_string(MissingMode m);
// Accepts fisher-z/fz, g-square/gsq, cg/cond-gauss, dg/degen-gauss.
Kernel parse_kernel(const std::string& s);
// Accepts complete/listwise, twd/testwise, mi.
MissingMode parse_missing_mode(const std::string& s);

struct KernelOptions {
  // Reduce G-square degrees of freedom for structurally empty cells.
  bool adapt_df = false;
  // Relative ridge added to singular covariance matrices.
  double ridge = 1e-8;
};

// Upper tail of the chi-square distribution; df <= 0 gives 1.
double chi_square_upper(double statistic, double df);
// Two-sided standard-normal tail probability of |z|.
double normal_two_sided(double z);

// Partial-correlation test. x, y and s are dataset column indices covered by
// `suff`, which must be of correlation kind.
CITestResult fisher_z(const SufficientStats& suff, std::size_t x, std::size_t y, std::span<const std::size_t> s);

// The kernels below use the rows among `rows` that are complete on {x, y} and s.
CITestResult g_square(const Dataset& data, std::size_t x, std::size_t y, std::span<const std::size_t> s,
                      std::span<const std::size_t> rows, const KernelOptions& opts = {});
CITestResult cond_gauss(const Dataset& data, std::size_t x, std::size_t y, std::span<const std::size_t> s,
                        std::span<const std::size_t> rows, const KernelOptions& opts = {});
CITestResult degen_gauss(const Dataset& data, std::size_t x, std::size_t y, std::span<const std::size_t> s,
                         std::span<const std::size_t> rows, const KernelOptions& opts = {});

// Kernel over all rows complete on {x, y} and s.
CITestResult run_kernel(Kernel kernel, const Dataset& data, std::size_t x, std::size_t y,
                        std::span<const std::size_t> s, const KernelOptions& opts = {});
CITestResult run_kernel(Kernel kernel, const Dataset& data, std::size_t x, std::size_t y,
                        std::span<const std::size_t> s, std::span<const std::size_t> rows,
                        const KernelOptions& opts = {});

// Test-wise deletion: only rows complete on {x, y} and s are used.
CITestResult testwise(Kernel kernel, const Dataset& data, std::size_t x, std::size_t y,
                      std::span<const std::size_t> s, const KernelOptions& opts = {});

// Pools the kernel over m completed datasets: Rubin's rules on the Fisher z
// scale for fisher_z, the D2 combination of chi-square statistics otherwise.
// Throws ValidationError when schemas or row counts differ or a cell is missing.
CITestResult mi_pooled(Kernel kernel, std::span<const Dataset> datasets, std::size_t x, std::size_t y,
                       std::span<const std::size_t> s, const KernelOptions& opts = {});

// Throws ValidationError when the kernel cannot handle a column's scale.
void check_compatible(Kernel kernel, const Dataset& data);
void check_compatible(Kernel kernel, const Dataset& data, std::span<const std::size_t> vars);

// Abstract conditional-independence test over indexed variables. Implementations
// must be safe to call concurrently and symmetric in x and y.
class IndependenceTest {
 public:
  virtual ~IndependenceTest() = default;
  virtual std::vector<std::string> names() const = 0;
  virtual CITestResult test(std::size_t x, std::size_t y, std::span<const std::size_t> s) const = 0;
  virtual std::string describe() const = 0;
  std::size_t num_variables() const { return names().size(); }
};

// A kernel applied to one dataset, either on the globally complete rows
// (list-wise deletion) or with test-wise deletion.
class DataIndependenceTest : public IndependenceTest {
 public:
  DataIndependenceTest(Kernel kernel, MissingMode mode, Dataset data, KernelOptions opts = {});

  std::vector<std::string> names() const override { return data_.names(); }
  CITestResult test(std::size_t x, std::size_t y, std::span<const std::size_t> s) const override;
  std::string describe() const override;

  const Dataset& data() const { return data_; }
  Kernel kernel() const { return kernel_; }
  MissingMode mode() const { return mode_; }

 private:
  Kernel kernel_;
  MissingMode mode_;
  Dataset data_;
  KernelOptions opts_;
  std::vector<std::size_t> complete_;  // list-wise rows
  // Correlation over `complete_` for every column (fisher_z, list-wise mode).
  Eigen::MatrixXd correlation_;
  std::vector<char> constant_;
};

class PooledIndependenceTest : public IndependenceTest {
 public:
  PooledIndependenceTest(Kernel kernel, std::vector<Dataset> imputations, KernelOptions opts = {});

  std::vector<std::string> names() const override { return imputations_.front().names(); }
  CITestResult test(std::size_t x, std::size_t y, std::span<const std::size_t> s) const override;
  std::string describe() const override;

 private:
  Kernel kernel_;
  std::vector<Dataset> imputations_;
  KernelOptions opts_;
};

// Non-rigorous hot-deck imputer for demonstrations: each missing cell is
// replaced by a random observed value of the same column. Produces m datasets.
std::vector<Dataset> hot_deck_impute(const Dataset& data, std::size_t m, std::uint64_t seed);

}  // namespace cdkit
