#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cdkit {

enum class Scale { continuous, categorical, count };

std::string to_string(Scale scale);

struct ColumnSchema {
  std::string name;
  Scale scale = Scale::continuous;
  // Ordered level labels for categorical columns. For count columns treated
  // as categorical this holds the observed numeric labels in ascending order.
  std::vector<std::string> levels;
  bool count_as_categorical = false;

  bool discrete() const {
    return scale == Scale::categorical || (scale == Scale::count && count_as_categorical);
  }

  static ColumnSchema continuous(std::string name);
  static ColumnSchema categorical(std::string name, std::vector<std::string> levels);
  static ColumnSchema count(std::string name, bool as_categorical = false);

  friend bool operator==(const ColumnSchema&, const ColumnSchema&) = default;
};

// Column-major table of mixed-scale values with an explicit missingness mask.
// Continuous and count cells are stored as doubles; categorical cells as level
// indices. A Dataset is filled through the setters and then treated as
// immutable; all const members are safe for concurrent readers.
class Dataset {
 public:
  Dataset() = default;
  // All cells start out missing.
  Dataset(std::vector<ColumnSchema> schema, std::size_t rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return schema_.size(); }

  const std::vector<ColumnSchema>& schema() const { return schema_; }
  const ColumnSchema& column(std::size_t j) const { return schema_.at(j); }
  std::vector<std::string> names() const;
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::size_t require_index(std::string_view name) const;

  bool missing(std::size_t i, std::size_t j) const { return mask_[j][i] != 0; }
  // Numeric value; for discrete columns this is the level code.
  double value(std::size_t i, std::size_t j) const { return values_[j][i]; }
  int code(std::size_t i, std::size_t j) const { return codes_[j][i]; }
  bool is_discrete(std::size_t j) const { return schema_[j].discrete(); }
  int num_levels(std::size_t j) const { return static_cast<int>(schema_[j].levels.size()); }

  void set_value(std::size_t i, std::size_t j, double v);
  void set_code(std::size_t i, std::size_t j, int code);
  void set_missing(std::size_t i, std::size_t j);

  // Derives level lists of count-as-categorical columns (when not given) and
  // checks every invariant. Throws ValidationError.
  void finalize();

  std::size_t missing_count() const;
  std::size_t missing_count(std::size_t j) const;
  bool has_missing() const { return missing_count() > 0; }

  // Rows with no missing cell among `vars`, optionally restricted to `candidates`.
  std::vector<std::size_t> complete_rows(std::span<const std::size_t> vars) const;
  std::vector<std::size_t> complete_rows(std::span<const std::size_t> vars,
                                         std::span<const std::size_t> candidates) const;

  Dataset project(std::span<const std::size_t> vars) const;
  Dataset select_rows(std::span<const std::size_t> rows) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<ColumnSchema> schema_;
  std::size_t rows_ = 0;
  std::vector<std::vector<double>> values_;
  std::vector<std::vector<int>> codes_;
  std::vector<std::vector<std::uint8_t>> mask_;
};

void validate_schema(const std::vector<ColumnSchema>& schema);

// --- CSV and schema files -------------------------------------------------

struct CsvOptions {
  std::set<std::string> missing_markers{"", "NA"};
};

Dataset read_csv(std::istream& in, const std::optional<std::vector<ColumnSchema>>& schema = std::nullopt,
                 const CsvOptions& options = {});
Dataset load_csv(const std::string& path, const std::optional<std::vector<ColumnSchema>>& schema = std::nullopt,
                 const CsvOptions& options = {});
void write_csv(std::ostream& out, const Dataset& data);
void save_csv(const std::string& path, const Dataset& data);

// One line per column: `name,scale[,level|level|...]`. Scales: continuous,
// categorical, count, count-categorical.
std::vector<ColumnSchema> read_schema(std::istream& in);
std::vector<ColumnSchema> load_schema(const std::string& path);
void write_schema(std::ostream& out, const std::vector<ColumnSchema>& schema);

// --- Sufficient statistics ------------------------------------------------

struct SufficientStats {
  enum class Kind { correlation, contingency, raw };

  Kind kind = Kind::raw;
  std::vector<std::size_t> vars;  // dataset column indices, in request order
  std::size_t n = 0;              // effective (complete-row) sample size
  Eigen::MatrixXd correlation;    // Kind::correlation
  std::vector<double> counts;     // Kind::contingency; first variable varies fastest
  std::vector<int> dims;          // Kind::contingency
  const Dataset* data = nullptr;  // Kind::raw
  std::optional<std::string> not_computable;

  bool computable() const { return !not_computable.has_value(); }
  // Position of a dataset column inside `vars`.
  std::size_t position(std::size_t var) const;
};

SufficientStats sufficient_stats(const Dataset& data, std::span<const std::size_t> vars);
// Restricts the computation to the complete rows among `candidates`.
SufficientStats sufficient_stats(const Dataset& data, std::span<const std::size_t> vars,
                                 std::span<const std::size_t> candidates);

// Sample correlation of `vars` over exactly `rows`. Each entry is computed
// independently, so any sub-block equals the correlation of the sub-selection.
Eigen::MatrixXd correlation_matrix(const Dataset& data, std::span<const std::size_t> vars,
                                   std::span<const std::size_t> rows);

}  // namespace cdkit
