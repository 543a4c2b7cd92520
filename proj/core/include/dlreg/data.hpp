#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dlreg/numerics.hpp"

namespace dlreg {

/// Observed data for a regression whose covariate x is left-censored at a
/// single detection limit `delta`. Rows with x_observed[i] == false carry no
/// usable x value (x_value[i] is a placeholder there).
struct Dataset {
  using Index = Eigen::Index;

  Vector y;
  Vector x_value;
  std::vector<bool> x_observed;
  DenseMatrix u;  // n x p_u, uncensored primary covariates
  DenseMatrix z;  // n x p_z, surrogates for x
  double delta = 0.0;

  std::string y_name = "y";
  std::string x_name = "x";
  std::vector<std::string> u_names;
  std::vector<std::string> z_names;

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }
  std::size_t n_observed() const;
  double censoring_fraction() const;
  Index p_u() const { return u.cols(); }
  Index p_z() const { return z.cols(); }

  /// Copy of the selected rows, in the given order.
  Dataset subset(std::span<const std::size_t> rows) const;
  /// Rows with observed x.
  std::vector<std::size_t> observed_rows() const;
};

enum class Link { identity, logit };
enum class WorkingVariance { constant, bernoulli };
enum class AuxKind { parametric_normal, semiparametric_aft };
/// Map between the censored covariate x and the right-censored t used by the
/// auxiliary model: negate is x = -t, neg_exp is x = exp(-t).
enum class Transform { negate, neg_exp };
enum class VarianceMethod { known_eta, theorem1, sscf };

struct FitConfig {
  Link link = Link::identity;
  WorkingVariance working_variance = WorkingVariance::constant;
  AuxKind auxiliary = AuxKind::parametric_normal;
  Transform transform = Transform::negate;
  std::optional<double> tau_override;
  bool normalize_htilde = true;
  int sscf_folds = 2;
  std::uint64_t seed = 0;
  RootSolveOptions solver{1e-10, 100, 30};
};

/// Where each field lives in a CSV file. `delta` is either a constant or the
/// name of a column that must hold one value throughout.
struct ColumnSpec {
  std::string y;
  std::string x;
  std::variant<double, std::string> delta = 0.0;
  std::vector<std::string> u;
  std::vector<std::string> z;
  std::optional<std::string> observed;  // explicit 0/1 censoring flag column
};

struct Violation {
  std::string code;
  std::optional<std::size_t> row;
  std::string message;
};

Dataset load_csv(const std::filesystem::path& path, const ColumnSpec& spec);
void write_csv(const std::filesystem::path& path, const Dataset& d);

/// Empty iff every Dataset invariant holds.
std::vector<Violation> validate(const Dataset& d);
/// Throws ModelError carrying the first violation's code.
void require_valid(const Dataset& d);

struct FoldSplit {
  Dataset first;
  Dataset second;
  std::vector<std::size_t> first_index;   // rows of the parent in `first`
  std::vector<std::size_t> second_index;
};

/// Random partition into folds of sizes floor(n/2) and ceil(n/2),
/// deterministic in `seed`. Throws ModelError("degenerate-split") when a fold
/// has no observed x.
FoldSplit split_two_folds(const Dataset& d, std::uint64_t seed);

std::string to_string(Link v);
std::string to_string(WorkingVariance v);
std::string to_string(AuxKind v);
std::string to_string(Transform v);
std::string to_string(VarianceMethod v);
Link parse_link(const std::string& s);
AuxKind parse_aux_kind(const std::string& s);
Transform parse_transform(const std::string& s);
VarianceMethod parse_variance_method(const std::string& s);

}  // namespace dlreg
