#include "cdkit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "cdkit/error.hpp"

namespace cdkit {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// RFC-4180 record reader. Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c = 0;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw ParseError("csv: unterminated quoted field");
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

bool is_blank_record(const std::vector<std::string>& fields) {
  return fields.size() == 1 && trim(fields[0]).empty();
}

}  // namespace

std::string to_string(Scale scale) {
  switch (scale) {
    case Scale::continuous: return "continuous";
    case Scale::categorical: return "categorical";
    case Scale::count: return "count";
  }
  return "unknown";
}

ColumnSchema ColumnSchema::continuous(std::string name) {
  return ColumnSchema{std::move(name), Scale::continuous, {}, false};
}

ColumnSchema ColumnSchema::categorical(std::string name, std::vector<std::string> levels) {
  return ColumnSchema{std::move(name), Scale::categorical, std::move(levels), false};
}

ColumnSchema ColumnSchema::count(std::string name, bool as_categorical) {
  return ColumnSchema{std::move(name), Scale::count, {}, as_categorical};
}

void validate_schema(const std::vector<ColumnSchema>& schema) {
  if (schema.empty()) throw ValidationError("schema: at least one column required");
  std::set<std::string> seen;
  for (const auto& col : schema) {
    if (col.name.empty()) throw ValidationError("schema: empty column name");
    if (!seen.insert(col.name).second) throw ValidationError("schema: duplicate column name '" + col.name + "'");
    if (col.scale == Scale::categorical) {
      if (col.levels.empty()) throw ValidationError("schema: categorical column '" + col.name + "' has no levels");
      std::set<std::string> lv(col.levels.begin(), col.levels.end());
      if (lv.size() != col.levels.size())
        throw ValidationError("schema: categorical column '" + col.name + "' has duplicate levels");
    }
  }
}

Dataset::Dataset(std::vector<ColumnSchema> schema, std::size_t rows)
    : schema_(std::move(schema)), rows_(rows) {
  validate_schema(schema_);
  values_.assign(schema_.size(), std::vector<double>(rows, 0.0));
  codes_.assign(schema_.size(), std::vector<int>(rows, -1));
  mask_.assign(schema_.size(), std::vector<std::uint8_t>(rows, 1));
}

std::vector<std::string> Dataset::names() const {
  std::vector<std::string> out;
  out.reserve(schema_.size());
  for (const auto& c : schema_) out.push_back(c.name);
  return out;
}

std::optional<std::size_t> Dataset::index_of(std::string_view name) const {
  for (std::size_t j = 0; j < schema_.size(); ++j)
    if (schema_[j].name == name) return j;
  return std::nullopt;
}

std::size_t Dataset::require_index(std::string_view name) const {
  auto j = index_of(name);
  if (!j) throw ValidationError("unknown variable '" + std::string(name) + "'");
  return *j;
}

void Dataset::set_value(std::size_t i, std::size_t j, double v) {
  if (schema_[j].scale == Scale::categorical) {
    set_code(i, j, static_cast<int>(v));
    return;
  }
  values_[j][i] = v;
  mask_[j][i] = 0;
  if (schema_[j].discrete() && !schema_[j].levels.empty()) {
    auto label = format_double(v);
    const auto& lv = schema_[j].levels;
    auto it = std::find(lv.begin(), lv.end(), label);
    codes_[j][i] = it == lv.end() ? -1 : static_cast<int>(it - lv.begin());
  }
}

void Dataset::set_code(std::size_t i, std::size_t j, int code) {
  if (code < 0 || code >= num_levels(j))
    throw ValidationError("level code " + std::to_string(code) + " out of range for '" + schema_[j].name + "'");
  codes_[j][i] = code;
  values_[j][i] = static_cast<double>(code);
  if (schema_[j].scale == Scale::count) values_[j][i] = *parse_double(schema_[j].levels[code]);
  mask_[j][i] = 0;
}

void Dataset::set_missing(std::size_t i, std::size_t j) {
  mask_[j][i] = 1;
  values_[j][i] = 0.0;
  codes_[j][i] = -1;
}

void Dataset::finalize() {
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    auto& col = schema_[j];
    if (col.scale == Scale::count && col.count_as_categorical) {
      if (col.levels.empty()) {
        std::set<double> distinct;
        for (std::size_t i = 0; i < rows_; ++i)
          if (!missing(i, j)) distinct.insert(values_[j][i]);
        for (double v : distinct) col.levels.push_back(format_double(v));
      }
      for (std::size_t i = 0; i < rows_; ++i) {
        if (missing(i, j)) continue;
        auto label = format_double(values_[j][i]);
        auto it = std::find(col.levels.begin(), col.levels.end(), label);
        if (it == col.levels.end())
          throw ValidationError("row " + std::to_string(i) + ", column '" + col.name + "': value " + label +
                                " is not a declared level");
        codes_[j][i] = static_cast<int>(it - col.levels.begin());
      }
    }
    if (col.scale == Scale::categorical) {
      for (std::size_t i = 0; i < rows_; ++i)
        if (!missing(i, j) && (codes_[j][i] < 0 || codes_[j][i] >= num_levels(j)))
          throw ValidationError("row " + std::to_string(i) + ", column '" + col.name + "': invalid level code");
    }
  }
  validate_schema(schema_);
}

std::size_t Dataset::missing_count() const {
  std::size_t total = 0;
  for (std::size_t j = 0; j < cols(); ++j) total += missing_count(j);
  return total;
}

std::size_t Dataset::missing_count(std::size_t j) const {
  return static_cast<std::size_t>(std::count(mask_[j].begin(), mask_[j].end(), std::uint8_t{1}));
}

std::vector<std::size_t> Dataset::complete_rows(std::span<const std::size_t> vars) const {
  std::vector<std::size_t> out;
  out.reserve(rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    bool ok = true;
    for (auto j : vars)
      if (mask_[j][i]) {
        ok = false;
        break;
      }
    if (ok) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Dataset::complete_rows(std::span<const std::size_t> vars,
                                                std::span<const std::size_t> candidates) const {
  std::vector<std::size_t> out;
  out.reserve(candidates.size());
  for (auto i : candidates) {
    bool ok = true;
    for (auto j : vars)
      if (mask_[j][i]) {
        ok = false;
        break;
      }
    if (ok) out.push_back(i);
  }
  return out;
}

Dataset Dataset::project(std::span<const std::size_t> vars) const {
  Dataset out;
  out.rows_ = rows_;
  for (auto j : vars) {
    out.schema_.push_back(schema_.at(j));
    out.values_.push_back(values_[j]);
    out.codes_.push_back(codes_[j]);
    out.mask_.push_back(mask_[j]);
  }
  validate_schema(out.schema_);
  return out;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  Dataset out;
  out.schema_ = schema_;
  out.rows_ = rows.size();
  out.values_.resize(cols());
  out.codes_.resize(cols());
  out.mask_.resize(cols());
  for (std::size_t j = 0; j < cols(); ++j) {
    out.values_[j].reserve(rows.size());
    out.codes_[j].reserve(rows.size());
    out.mask_[j].reserve(rows.size());
    for (auto i : rows) {
      out.values_[j].push_back(values_[j].at(i));
      out.codes_[j].push_back(codes_[j][i]);
      out.mask_[j].push_back(mask_[j][i]);
    }
  }
  return out;
}

// --- CSV -------------------------------------------------------------------

Dataset read_csv(std::istream& in, const std::optional<std::vector<ColumnSchema>>& schema,
                 const CsvOptions& options) {
  std::vector<std::string> header;
  if (!read_record(in, header)) throw ParseError("csv: missing header row");
  for (auto& h : header) h = std::string(trim(h));

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  while (read_record(in, rec)) {
    if (is_blank_record(rec)) continue;
    if (rec.size() != header.size())
      throw ParseError("csv: data row " + std::to_string(records.size()) + " has " + std::to_string(rec.size()) +
                       " fields, expected " + std::to_string(header.size()));
    records.push_back(rec);
  }

  auto is_missing = [&](const std::string& cell) {
    auto t = trim(cell);
    return t.empty() || options.missing_markers.count(std::string(t)) > 0 ||
           options.missing_markers.count(cell) > 0;
  };

  std::vector<ColumnSchema> cols;
  if (schema) {
    cols = *schema;
    if (cols.size() != header.size())
      throw ParseError("csv: header has " + std::to_string(header.size()) + " columns, schema declares " +
                       std::to_string(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
      if (cols[j].name != header[j])
        throw ParseError("csv: header column " + std::to_string(j) + " is '" + header[j] + "', schema expects '" +
                         cols[j].name + "'");
  } else {
    for (std::size_t j = 0; j < header.size(); ++j) {
      bool numeric = true;
      std::set<std::string> labels;
      for (const auto& r : records) {
        if (is_missing(r[j])) continue;
        labels.insert(std::string(trim(r[j])));
        if (!parse_double(r[j])) numeric = false;
      }
      if (numeric) {
        cols.push_back(ColumnSchema::continuous(header[j]));
      } else {
        cols.push_back(ColumnSchema::categorical(header[j], {labels.begin(), labels.end()}));
      }
    }
  }

  Dataset data(cols, records.size());
  std::vector<std::unordered_map<std::string, int>> level_index(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t k = 0; k < cols[j].levels.size(); ++k) level_index[j][cols[j].levels[k]] = static_cast<int>(k);

  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto& cell = records[i][j];
      if (is_missing(cell)) continue;
      auto t = std::string(trim(cell));
      if (cols[j].scale == Scale::categorical) {
        auto it = level_index[j].find(t);
        if (it == level_index[j].end())
          throw ParseError("csv: data row " + std::to_string(i) + ", column '" + cols[j].name + "': value '" + t +
                           "' is not a declared level");
        data.set_code(i, j, it->second);
      } else {
        auto v = parse_double(t);
        if (!v)
          throw ParseError("csv: data row " + std::to_string(i) + ", column '" + cols[j].name + "': cannot parse '" +
                           t + "' as a number");
        data.set_value(i, j, *v);
      }
    }
  }
  data.finalize();
  return data;
}

Dataset load_csv(const std::string& path, const std::optional<std::vector<ColumnSchema>>& schema,
                 const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_csv(in, schema, options);
}

void write_csv(std::ostream& out, const Dataset& data) {
  const auto& schema = data.schema();
  for (std::size_t j = 0; j < schema.size(); ++j) out << (j ? "," : "") << quote_field(schema[j].name);
  out << '\n';
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      if (j) out << ',';
      if (data.missing(i, j)) {
        out << "NA";
      } else if (schema[j].scale == Scale::categorical) {
        out << quote_field(schema[j].levels[data.code(i, j)]);
      } else {
        out << format_double(data.value(i, j));
      }
    }
    out << '\n';
  }
}

void save_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  write_csv(out, data);
}

std::vector<ColumnSchema> read_schema(std::istream& in) {
  std::vector<ColumnSchema> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (int k = 0; k < 2; ++k) {
      auto comma = t.find(',', start);
      if (comma == std::string_view::npos) break;
      parts.emplace_back(trim(t.substr(start, comma - start)));
      start = comma + 1;
    }
    parts.emplace_back(trim(t.substr(start)));
    if (parts.size() < 2) throw ParseError("schema line " + std::to_string(lineno) + ": expected 'name,scale'");
    const auto& scale = parts[1];
    if (scale == "continuous") {
      out.push_back(ColumnSchema::continuous(parts[0]));
    } else if (scale == "count" || scale == "count-categorical") {
      auto col = ColumnSchema::count(parts[0], scale == "count-categorical");
      if (parts.size() == 3 && col.count_as_categorical) {
        std::stringstream ss(parts[2]);
        std::string lv;
        while (std::getline(ss, lv, '|')) col.levels.emplace_back(trim(lv));
      }
      out.push_back(col);
    } else if (scale == "categorical") {
      if (parts.size() < 3)
        throw ParseError("schema line " + std::to_string(lineno) + ": categorical column needs levels");
      std::vector<std::string> levels;
      std::stringstream ss(parts[2]);
      std::string lv;
      while (std::getline(ss, lv, '|')) levels.emplace_back(trim(lv));
      out.push_back(ColumnSchema::categorical(parts[0], levels));
    } else {
      throw ParseError("schema line " + std::to_string(lineno) + ": unknown scale '" + scale + "'");
    }
  }
  validate_schema(out);
  return out;
}

std::vector<ColumnSchema> load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_schema(in);
}

void write_schema(std::ostream& out, const std::vector<ColumnSchema>& schema) {
  for (const auto& col : schema) {
    out << col.name << ',';
    if (col.scale == Scale::count && col.count_as_categorical) {
      out << "count-categorical";
    } else {
      out << to_string(col.scale);
    }
    if (col.discrete() && !col.levels.empty()) {
      out << ',';
      for (std::size_t k = 0; k < col.levels.size(); ++k) out << (k ? "|" : "") << col.levels[k];
    }
    out << '\n';
  }
}

// --- Sufficient statistics --------------------------------------------------

std::size_t SufficientStats::position(std::size_t var) const {
  auto it = std::find(vars.begin(), vars.end(), var);
  if (it == vars.end()) throw std::out_of_range("variable not covered by sufficient statistics");
  return static_cast<std::size_t>(it - vars.begin());
}

Eigen::MatrixXd correlation_matrix(const Dataset& data, std::span<const std::size_t> vars,
                                   std::span<const std::size_t> rows) {
  const auto k = vars.size();
  std::vector<double> mean(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    double s = 0.0;
    for (auto i : rows) s += data.value(i, vars[a]);
    mean[a] = rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
  }
  auto cross = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (auto i : rows) s += (data.value(i, vars[a]) - mean[a]) * (data.value(i, vars[b]) - mean[b]);
    return s;
  };
  std::vector<double> ss(k);
  for (std::size_t a = 0; a < k; ++a) ss[a] = cross(a, a);
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      double v = 0.0;
      if (ss[a] > 0.0 && ss[b] > 0.0) v = std::clamp(cross(a, b) / std::sqrt(ss[a] * ss[b]), -1.0, 1.0);
      r(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
      r(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
    }
  }
  return r;
}

SufficientStats sufficient_stats(const Dataset& data, std::span<const std::size_t> vars) {
  std::vector<std::size_t> all(data.rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return sufficient_stats(data, vars, all);
}

SufficientStats sufficient_stats(const Dataset& data, std::span<const std::size_t> vars,
                                 std::span<const std::size_t> candidates) {
  if (vars.empty()) throw std::invalid_argument("sufficient_stats: empty variable set");
  SufficientStats out;
  out.vars.assign(vars.begin(), vars.end());
  auto rows = data.complete_rows(vars, candidates);
  out.n = rows.size();

  const bool all_discrete = std::all_of(vars.begin(), vars.end(), [&](auto j) { return data.is_discrete(j); });
  const bool all_numeric = std::none_of(vars.begin(), vars.end(), [&](auto j) { return data.is_discrete(j); });

  if (rows.empty()) {
    out.not_computable = "no complete rows";
  }
  if (all_numeric) {
    out.kind = SufficientStats::Kind::correlation;
    out.correlation = correlation_matrix(data, vars, rows);
    for (auto j : vars) {
      if (out.not_computable) break;
      double first = rows.empty() ? 0.0 : data.value(rows.front(), j);
      bool constant = std::all_of(rows.begin(), rows.end(), [&](auto i) { return data.value(i, j) == first; });
      if (constant) out.not_computable = "zero variance in '" + data.column(j).name + "'";
    }
  } else if (all_discrete) {
    out.kind = SufficientStats::Kind::contingency;
    std::size_t cells = 1;
    for (auto j : vars) {
      out.dims.push_back(data.num_levels(j));
      cells *= static_cast<std::size_t>(data.num_levels(j));
    }
    out.counts.assign(cells, 0.0);
    for (auto i : rows) {
      std::size_t idx = 0, stride = 1;
      for (std::size_t a = 0; a < vars.size(); ++a) {
        idx += stride * static_cast<std::size_t>(data.code(i, vars[a]));
        stride *= static_cast<std::size_t>(out.dims[a]);
      }
      out.counts[idx] += 1.0;
    }
  } else {
    out.kind = SufficientStats::Kind::raw;
    out.data = &data;
  }
  return out;
}

}  // namespace cdkit
