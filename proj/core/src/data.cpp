#include "dlreg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

namespace dlreg {

std::size_t Dataset::n_observed() const {
  return static_cast<std::size_t>(std::count(x_observed.begin(), x_observed.end(), true));
}

double Dataset::censoring_fraction() const {
  if (n() == 0) return 0.0;
  return 1.0 - static_cast<double>(n_observed()) / static_cast<double>(n());
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  const auto m = static_cast<Index>(rows.size());
  out.y.resize(m);
  out.x_value.resize(m);
  out.x_observed.resize(rows.size());
  out.u.resize(m, u.cols());
  out.z.resize(m, z.cols());
  for (Index k = 0; k < m; ++k) {
    const auto i = static_cast<Index>(rows[k]);
    out.y(k) = y(i);
    out.x_value(k) = x_value(i);
    out.x_observed[k] = x_observed[rows[k]];
    out.u.row(k) = u.row(i);
    out.z.row(k) = z.row(i);
  }
  out.delta = delta;
  out.y_name = y_name;
  out.x_name = x_name;
  out.u_names = u_names;
  out.z_names = z_names;
  return out;
}

std::vector<std::size_t> Dataset::observed_rows() const {
  std::vector<std::size_t> rows;
  rows.reserve(n_observed());
  for (std::size_t i = 0; i < x_observed.size(); ++i)
    if (x_observed[i]) rows.push_back(i);
  return rows;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur.push_back('"');
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool is_na(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "NULL" || s == ".";
}

double parse_number(const std::string& raw, std::size_t row, const std::string& col) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw IoError("non-numeric", "row " + std::to_string(row) + ", column '" + col +
                                     "': non-numeric value '" + s + "'");
  return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const ColumnSpec& spec) {
  std::ifstream in(path);
  if (!in) throw IoError("io", "cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw IoError("io", "'" + path.string() + "' is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::unordered_map<std::string, std::size_t> header;
  {
    const auto names = split_csv_line(line);
    for (std::size_t k = 0; k < names.size(); ++k) header.emplace(trim(names[k]), k);
  }
  auto column = [&](const std::string& name) {
    const auto it = header.find(name);
    if (it == header.end()) throw IoError("missing-column", "missing column '" + name + "'");
    return it->second;
  };

  const std::size_t y_col = column(spec.y);
  const std::size_t x_col = column(spec.x);
  std::optional<std::size_t> obs_col;
  if (spec.observed) obs_col = column(*spec.observed);
  std::optional<std::size_t> delta_col;
  if (const auto* name = std::get_if<std::string>(&spec.delta)) delta_col = column(*name);
  std::vector<std::size_t> u_cols, z_cols;
  for (const auto& name : spec.u) u_cols.push_back(column(name));
  for (const auto& name : spec.z) z_cols.push_back(column(name));

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    rows.push_back(split_csv_line(line));
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  Dataset d;
  d.y.resize(n);
  d.x_value.resize(n);
  d.x_observed.assign(rows.size(), false);
  d.u.resize(n, static_cast<Eigen::Index>(u_cols.size()));
  d.z.resize(n, static_cast<Eigen::Index>(z_cols.size()));
  d.y_name = spec.y;
  d.x_name = spec.x;
  d.u_names = spec.u;
  d.z_names = spec.z;

  std::optional<double> delta;
  if (const auto* value = std::get_if<double>(&spec.delta)) delta = *value;

  auto cell = [&](std::size_t r, std::size_t c) -> const std::string& {
    if (c >= rows[r].size())
      throw IoError("short-row", "row " + std::to_string(r + 1) + " has too few fields");
    return rows[r][c];
  };
  auto required = [&](std::size_t r, std::size_t c, const std::string& name) {
    const std::string s = trim(cell(r, c));
    if (is_na(s))
      throw IoError("missing-value", "row " + std::to_string(r + 1) + ", column '" + name +
                                         "': missing value");
    return parse_number(s, r + 1, name);
  };

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    d.y(i) = required(r, y_col, spec.y);
    for (std::size_t k = 0; k < u_cols.size(); ++k)
      d.u(i, static_cast<Eigen::Index>(k)) = required(r, u_cols[k], spec.u[k]);
    for (std::size_t k = 0; k < z_cols.size(); ++k)
      d.z(i, static_cast<Eigen::Index>(k)) = required(r, z_cols[k], spec.z[k]);
    if (delta_col) {
      const double v = required(r, *delta_col, std::get<std::string>(spec.delta));
      if (!delta) {
        delta = v;
      } else if (v != *delta) {
        throw IoError("per-row-delta", "row " + std::to_string(r + 1) +
                                           ": detection limit differs from earlier rows; a "
                                           "single detection limit per dataset is required");
      }
    }
    const std::string xs = trim(cell(r, x_col));
    d.x_value(i) = is_na(xs) ? std::numeric_limits<double>::quiet_NaN()
                             : parse_number(xs, r + 1, spec.x);
  }
  d.delta = delta.value_or(0.0);

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    if (obs_col) {
      const std::string s = trim(cell(r, *obs_col));
      if (s == "1" || s == "true" || s == "TRUE") {
        d.x_observed[r] = true;
      } else if (s == "0" || s == "false" || s == "FALSE") {
        d.x_observed[r] = false;
      } else {
        throw IoError("non-numeric", "row " + std::to_string(r + 1) + ", column '" +
                                         *spec.observed + "': expected 0/1 flag");
      }
    } else {
      d.x_observed[r] = std::isfinite(d.x_value(i)) && d.x_value(i) > d.delta;
    }
  }
  return d;
}

void write_csv(const std::filesystem::path& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw IoError("io", "cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  out << d.y_name << ',' << d.x_name << ",observed";
  for (const auto& name : d.u_names) out << ',' << name;
  for (const auto& name : d.z_names) out << ',' << name;
  out << '\n';
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d.n()); ++i) {
    out << d.y(i) << ',';
    if (std::isfinite(d.x_value(i))) out << d.x_value(i);
    else out << "NA";
    out << ',' << (d.x_observed[static_cast<std::size_t>(i)] ? 1 : 0);
    for (Eigen::Index k = 0; k < d.u.cols(); ++k) out << ',' << d.u(i, k);
    for (Eigen::Index k = 0; k < d.z.cols(); ++k) out << ',' << d.z(i, k);
    out << '\n';
  }
  if (!out) throw IoError("io", "write to '" + path.string() + "' failed");
}

// ---------------------------------------------------------------------------
// validation

std::vector<Violation> validate(const Dataset& d) {
  std::vector<Violation> out;
  const std::size_t n = d.n();
  if (static_cast<std::size_t>(d.x_value.size()) != n || d.x_observed.size() != n ||
      static_cast<std::size_t>(d.u.rows()) != n || static_cast<std::size_t>(d.z.rows()) != n) {
    out.push_back({"shape-mismatch", std::nullopt, "vectors and matrices disagree on n"});
    return out;
  }
  if (n == 0) {
    out.push_back({"empty", std::nullopt, "dataset has no rows"});
    return out;
  }
  if (!std::isfinite(d.delta))
    out.push_back({"non-finite-delta", std::nullopt, "detection limit is not finite"});

  for (std::size_t r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    if (!std::isfinite(d.y(i)))
      out.push_back({"non-finite", r, "non-finite response"});
    if (!d.u.row(i).allFinite())
      out.push_back({"non-finite", r, "non-finite uncensored covariate"});
    if (!d.z.row(i).allFinite())
      out.push_back({"non-finite", r, "non-finite surrogate"});
    const double x = d.x_value(i);
    const bool above = std::isfinite(x) && x > d.delta;
    if (d.x_observed[r] && !above)
      out.push_back({"censor-flag-mismatch", r, "x flagged observed but not above the detection limit"});
    else if (!d.x_observed[r] && above)
      out.push_back({"censor-flag-mismatch", r, "x flagged censored but above the detection limit"});
  }

  const std::size_t n_obs = d.n_observed();
  if (n_obs == 0) {
    out.push_back({"no-observed-x", std::nullopt, "every x is censored"});
  } else if (n_obs < static_cast<std::size_t>(d.p_z()) + 2) {
    out.push_back({"too-few-observed", std::nullopt,
                   "auxiliary fitting needs at least p_z + 2 observed rows"});
  }
  return out;
}

void require_valid(const Dataset& d) {
  const auto v = validate(d);
  if (v.empty()) return;
  std::string msg = v.front().code;
  if (v.front().row) msg += " (row " + std::to_string(*v.front().row + 1) + ")";
  msg += ": " + v.front().message;
  throw ModelError(v.front().code, msg);
}

FoldSplit split_two_folds(const Dataset& d, std::uint64_t seed) {
  const std::size_t n = d.n();
  if (n < 4) throw ModelError("degenerate-split", "degenerate split: need at least 4 rows");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  FoldSplit out;
  const std::size_t n1 = n / 2;
  out.first_index.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n1));
  out.second_index.assign(idx.begin() + static_cast<std::ptrdiff_t>(n1), idx.end());
  std::sort(out.first_index.begin(), out.first_index.end());
  std::sort(out.second_index.begin(), out.second_index.end());
  out.first = d.subset(out.first_index);
  out.second = d.subset(out.second_index);
  if (out.first.n_observed() == 0 || out.second.n_observed() == 0)
    throw ModelError("degenerate-split", "degenerate split: a fold has no observed x");
  return out;
}

// ---------------------------------------------------------------------------
// enum names

std::string to_string(Link v) { return v == Link::identity ? "identity" : "logit"; }
std::string to_string(WorkingVariance v) {
  return v == WorkingVariance::constant ? "constant" : "bernoulli";
}
std::string to_string(AuxKind v) {
  return v == AuxKind::parametric_normal ? "parametric" : "semiparametric";
}
std::string to_string(Transform v) { return v == Transform::negate ? "negate" : "negexp"; }
std::string to_string(VarianceMethod v) {
  switch (v) {
    case VarianceMethod::known_eta: return "known";
    case VarianceMethod::theorem1: return "theorem1";
    case VarianceMethod::sscf: return "sscf";
  }
  return "unknown";
}

Link parse_link(const std::string& s) {
  if (s == "identity") return Link::identity;
  if (s == "logit") return Link::logit;
  throw ModelError("config", "unknown link '" + s + "'");
}
AuxKind parse_aux_kind(const std::string& s) {
  if (s == "parametric" || s == "parametric_normal") return AuxKind::parametric_normal;
  if (s == "semiparametric" || s == "semiparametric_aft") return AuxKind::semiparametric_aft;
  throw ModelError("config", "unknown auxiliary model '" + s + "'");
}
Transform parse_transform(const std::string& s) {
  if (s == "negate") return Transform::negate;
  if (s == "negexp" || s == "neg_exp") return Transform::neg_exp;
  throw ModelError("config", "unknown transform '" + s + "'");
}
VarianceMethod parse_variance_method(const std::string& s) {
  if (s == "known" || s == "known_eta") return VarianceMethod::known_eta;
  if (s == "theorem1") return VarianceMethod::theorem1;
  if (s == "sscf") return VarianceMethod::sscf;
  throw ModelError("config", "unknown variance method '" + s + "'");
}

}  // namespace dlreg
