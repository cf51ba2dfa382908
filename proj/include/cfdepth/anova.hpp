#pragma once

#include "cfdepth/synthgen.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace cfd {

/// A categorical factor: its name, declared levels and one level per row.
struct Factor {
  std::string name;
  std::vector<std::string> levels;
  std::vector<std::string> values;
};

/// Intercept, treatment-coded main effects (the alphabetically first
/// observed level is the reference) and, optionally, every pairwise
/// interaction as products of main-effect dummies.
struct DesignMatrix {
  Eigen::MatrixXd x;
  std::vector<std::string> columns;
  std::vector<int> column_term;    // index into terms; -1 for the intercept
  std::vector<std::string> terms;  // "a" for main effects, "a:b" for interactions
  std::vector<std::string> warnings;
};

/// Declared levels that never occur lose their column and a factor with
/// fewer than two observed levels is dropped with all its interactions;
/// both cases add a warning. A value outside the declared levels raises
/// InvalidInput.
DesignMatrix build_design(const std::vector<Factor>& factors, bool interactions = true);

/// The five scene factors of each record (complexity, rarity, neighbors,
/// behind, distance) with their full level sets.
std::vector<Factor> scene_factors(const std::vector<FactorLabels>& labels);

struct OlsFit {
  Eigen::VectorXd coefficients;  // zero for columns dropped as rank deficient
  int n = 0;
  int rank = 0;
  double rss = 0.0;
  double tss = 0.0;  // about the mean
  double r_squared = 0.0;
  double adj_r_squared = 0.0;
  int residual_df() const { return n - rank; }
};

/// Least squares by column-pivoting QR. InsufficientData when n <= rank.
OlsFit ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// CDF and survival function of the F distribution.
double f_cdf(double f, double df1, double df2);
double f_sf(double f, double df1, double df2);

struct TermTest {
  std::string term;
  double f = 0.0;
  int df1 = 0;
  int df2 = 0;
  double p = 0.0;
  bool defined = false;  // false when df1 or df2 is zero; f and p are NaN
  bool significant = false;
};

struct AnovaReport {
  std::string response;
  std::vector<TermTest> tests;
  int n = 0;
  int rank = 0;
  int residual_df = 0;
  double r_squared = 0.0;
  double adj_r_squared = 0.0;
  std::vector<std::string> warnings;
};

/// Partial F-test of every term: the full fit against a refit without
/// the term's columns; significant when p < alpha.
AnovaReport partial_f_tests(const DesignMatrix& design, const Eigen::VectorXd& y, double alpha = 0.05);

/// Permutation p-value of one term's partial F (Freedman-Lane: residuals
/// of the reduced model are permuted and added back to its fit).
double permutation_p_value(const DesignMatrix& design, const Eigen::VectorXd& y, const std::string& term,
                           int permutations, std::uint64_t seed);

/// `key = value` summary lines, a blank line, then a CSV table
/// term,F,df1,df2,p,significant. Undefined statistics print NA.
std::string format_anova_report(const AnovaReport& report);

}  // namespace cfd
