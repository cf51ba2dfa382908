#include "cfdepth/anova.hpp"

#include "cfdepth/errors.hpp"
#include "cfdepth/keyvalue.hpp"
#include "cfdepth/rng.hpp"

#include <Eigen/QR>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace cfd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Coded {
  std::string name;
  std::vector<std::string> dummies;  // non-reference observed levels
  const Factor* factor = nullptr;
};

}  // namespace

DesignMatrix build_design(const std::vector<Factor>& factors, bool interactions) {
  if (factors.empty()) throw InvalidInput("build_design: no factors");
  const std::size_t n = factors.front().values.size();
  DesignMatrix d;
  std::vector<Coded> coded;
  for (const auto& f : factors) {
    if (f.values.size() != n) throw InvalidInput("build_design: factor " + f.name + " has a different row count");
    const std::set<std::string> declared(f.levels.begin(), f.levels.end());
    std::set<std::string> observed;
    for (const auto& v : f.values) {
      if (!declared.count(v)) throw InvalidInput("build_design: factor " + f.name + " has undeclared level " + v);
      observed.insert(v);
    }
    for (const auto& l : declared)
      if (!observed.count(l)) d.warnings.push_back("factor " + f.name + ": level " + l + " not observed");
    if (observed.size() < 2) {
      d.warnings.push_back("factor " + f.name + ": fewer than two observed levels, term dropped");
      continue;
    }
    Coded c{f.name, {std::next(observed.begin()), observed.end()}, &f};
    coded.push_back(std::move(c));
  }

  std::vector<Eigen::VectorXd> cols{Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n))};
  d.columns.push_back("(intercept)");
  d.column_term.push_back(-1);
  std::vector<std::vector<Eigen::VectorXd>> main(coded.size());
  for (std::size_t t = 0; t < coded.size(); ++t) {
    const Coded& c = coded[t];
    const int term = static_cast<int>(d.terms.size());
    d.terms.push_back(c.name);
    for (const auto& level : c.dummies) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = c.factor->values[i] == level ? 1.0 : 0.0;
      main[t].push_back(v);
      cols.push_back(v);
      d.columns.push_back(c.name + "=" + level);
      d.column_term.push_back(term);
    }
  }
  if (interactions) {
    for (std::size_t a = 0; a < coded.size(); ++a)
      for (std::size_t b = a + 1; b < coded.size(); ++b) {
        const int term = static_cast<int>(d.terms.size());
        d.terms.push_back(coded[a].name + ":" + coded[b].name);
        for (std::size_t i = 0; i < main[a].size(); ++i)
          for (std::size_t j = 0; j < main[b].size(); ++j) {
            cols.push_back(main[a][i].cwiseProduct(main[b][j]));
            d.columns.push_back(coded[a].name + "=" + coded[a].dummies[i] + ":" + coded[b].name + "=" +
                                coded[b].dummies[j]);
            d.column_term.push_back(term);
          }
      }
  }
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) d.x.col(static_cast<Eigen::Index>(j)) = cols[j];
  return d;
}

std::vector<Factor> scene_factors(const std::vector<FactorLabels>& labels) {
  std::vector<Factor> f{{"complexity", {"simple", "complex"}, {}},
                        {"rarity", {"common", "rare"}, {}},
                        {"neighbors", {"0", "1", "2"}, {}},
                        {"behind", {"wall", "empty", "objects"}, {}},
                        {"distance", {"1.5", "2"}, {}}};
  for (const auto& l : labels) {
    f[0].values.push_back(to_string(l.complexity));
    f[1].values.push_back(to_string(l.rarity));
    f[2].values.push_back(std::to_string(l.neighbors));
    f[3].values.push_back(to_string(l.behind));
    f[4].values.push_back(format_double(l.distance));
  }
  return f;
}

OlsFit ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size()) throw ShapeError("ols_fit: X has " + std::to_string(x.rows()) + " rows, y has " +
                                             std::to_string(y.size()));
  OlsFit fit;
  fit.n = static_cast<int>(x.rows());
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  fit.rank = static_cast<int>(qr.rank());
  if (fit.n <= fit.rank) {
    throw InsufficientData("ols_fit: " + std::to_string(fit.n) + " rows for rank " + std::to_string(fit.rank));
  }
  fit.coefficients = qr.solve(y);
  fit.rss = (y - x * fit.coefficients).squaredNorm();
  fit.tss = (y.array() - y.mean()).matrix().squaredNorm();
  if (fit.tss > 0.0) {
    fit.r_squared = 1.0 - fit.rss / fit.tss;
    const double p = fit.rank - 1;
    fit.adj_r_squared = 1.0 - (1.0 - fit.r_squared) * (fit.n - 1.0) / (fit.n - p - 1.0);
  } else {
    fit.r_squared = fit.adj_r_squared = kNaN;
  }
  return fit;
}

double f_cdf(double f, double df1, double df2) {
  if (!(df1 > 0.0) || !(df2 > 0.0)) throw InvalidInput("f_cdf: degrees of freedom must be positive");
  if (std::isnan(f)) return kNaN;
  if (f <= 0.0) return 0.0;
  if (std::isinf(f)) return 1.0;
  return boost::math::ibeta(df1 / 2.0, df2 / 2.0, df1 * f / (df1 * f + df2));
}

double f_sf(double f, double df1, double df2) {
  if (!(df1 > 0.0) || !(df2 > 0.0)) throw InvalidInput("f_sf: degrees of freedom must be positive");
  if (std::isnan(f)) return kNaN;
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  // ibetac(b, a, 1 - x) written with the complementary argument to keep
  // precision for large F.
  return boost::math::ibeta(df2 / 2.0, df1 / 2.0, df2 / (df1 * f + df2));
}

namespace {

Eigen::MatrixXd without_term(const DesignMatrix& d, int term) {
  std::vector<Eigen::Index> keep;
  for (std::size_t j = 0; j < d.column_term.size(); ++j)
    if (d.column_term[j] != term) keep.push_back(static_cast<Eigen::Index>(j));
  Eigen::MatrixXd out(d.x.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = d.x.col(keep[j]);
  return out;
}

int term_index(const DesignMatrix& d, const std::string& term) {
  const auto it = std::find(d.terms.begin(), d.terms.end(), term);
  if (it == d.terms.end()) throw InvalidInput("unknown term: " + term);
  return static_cast<int>(it - d.terms.begin());
}

// Residual sum of squares of y against the column space of a factored X.
double rss_of(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr, const Eigen::MatrixXd& x,
              const Eigen::VectorXd& y) {
  return (y - x * qr.solve(y)).squaredNorm();
}

}  // namespace

AnovaReport partial_f_tests(const DesignMatrix& design, const Eigen::VectorXd& y, double alpha) {
  const OlsFit full = ols_fit(design.x, y);
  AnovaReport r;
  r.n = full.n;
  r.rank = full.rank;
  r.residual_df = full.residual_df();
  r.r_squared = full.r_squared;
  r.adj_r_squared = full.adj_r_squared;
  r.warnings = design.warnings;
  for (std::size_t t = 0; t < design.terms.size(); ++t) {
    const Eigen::MatrixXd xr = without_term(design, static_cast<int>(t));
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xr);
    TermTest tt;
    tt.term = design.terms[t];
    tt.df1 = full.rank - static_cast<int>(qr.rank());
    tt.df2 = r.residual_df;
    tt.defined = tt.df1 > 0 && tt.df2 > 0;
    if (tt.defined) {
      const double rss_r = rss_of(qr, xr, y);
      const double denom = full.rss / tt.df2;
      tt.f = std::max(0.0, rss_r - full.rss) / tt.df1 / denom;
      tt.p = f_sf(tt.f, tt.df1, tt.df2);
      tt.significant = tt.p < alpha;
    } else {
      tt.f = tt.p = kNaN;
    }
    r.tests.push_back(tt);
  }
  return r;
}

double permutation_p_value(const DesignMatrix& design, const Eigen::VectorXd& y, const std::string& term,
                           int permutations, std::uint64_t seed) {
  if (permutations < 1) throw InvalidInput("permutation_p_value: permutations must be positive");
  const int t = term_index(design, term);
  const Eigen::MatrixXd xr = without_term(design, t);
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qf(design.x);
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xr);
  const int df1 = static_cast<int>(qf.rank() - qr.rank());
  const int df2 = static_cast<int>(design.x.rows() - qf.rank());
  if (df1 <= 0 || df2 <= 0) return kNaN;
  auto f_stat = [&](const Eigen::VectorXd& v) {
    const double rf = rss_of(qf, design.x, v);
    const double rr = rss_of(qr, xr, v);
    return ((rr - rf) / df1) / (rf / df2);
  };
  const Eigen::VectorXd fitted = xr * qr.solve(y);
  const Eigen::VectorXd resid = y - fitted;
  const double observed = f_stat(y);
  Rng rng(seed);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(y.size()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Eigen::VectorXd yp(y.size());
  int hits = 0;
  for (int k = 0; k < permutations; ++k) {
    for (std::size_t i = perm.size() - 1; i > 0; --i)
      std::swap(perm[i], perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
    for (Eigen::Index i = 0; i < y.size(); ++i) yp[i] = fitted[i] + resid[perm[static_cast<std::size_t>(i)]];
    if (f_stat(yp) >= observed) ++hits;
  }
  return (hits + 1.0) / (permutations + 1.0);
}

std::string format_anova_report(const AnovaReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? format_double(v) : std::string("NA"); };
  KeyValues kv;
  kv["response"] = r.response.empty() ? "unspecified" : r.response;
  kv["n"] = std::to_string(r.n);
  kv["rank"] = std::to_string(r.rank);
  kv["residual_df"] = std::to_string(r.residual_df);
  kv["r_squared"] = num(r.r_squared);
  kv["adj_r_squared"] = num(r.adj_r_squared);
  std::string out;
  for (const auto& w : r.warnings) out += "# warning: " + w + "\n";
  out += format_key_values(kv) + "\nterm,F,df1,df2,p,significant\n";
  for (const auto& t : r.tests) {
    out += t.term + "," + num(t.f) + "," + std::to_string(t.df1) + "," + std::to_string(t.df2) + "," + num(t.p) +
           "," + (t.defined ? (t.significant ? "yes" : "no") : "NA") + "\n";
  }
  return out;
}

}  // namespace cfd
