#include "cfdepth/anova.hpp"
#include "cfdepth/errors.hpp"

#include "doctest.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

using namespace cfd;

namespace {

std::vector<FactorLabels> sweep_rows(int replicates) {
  std::vector<FactorLabels> out;
  for (int r = 0; r < replicates; ++r)
    for (const auto& f : factor_sweep()) out.push_back(f);
  return out;
}

Factor two_level(const std::string& name, std::initializer_list<const char*> values) {
  Factor f{name, {"a", "b"}, {}};
  for (const char* v : values) f.values.push_back(v);
  return f;
}

const TermTest& find_term(const AnovaReport& r, const std::string& term) {
  const auto it = std::find_if(r.tests.begin(), r.tests.end(), [&](const TermTest& t) { return t.term == term; });
  REQUIRE(it != r.tests.end());
  return *it;
}

}  // namespace

TEST_CASE("design column counts") {
  const DesignMatrix d = build_design(scene_factors(sweep_rows(2)));
  CHECK(d.x.cols() == 27);
  CHECK(d.x.rows() == 144);
  CHECK(d.terms.size() == 15);
  CHECK(d.warnings.empty());
  std::vector<int> per_term(d.terms.size(), 0);
  for (int t : d.column_term)
    if (t >= 0) ++per_term[t];
  CHECK(per_term == std::vector<int>{1, 1, 2, 2, 1, 1, 2, 2, 1, 2, 2, 1, 4, 2, 2});
  CHECK(d.terms[5] == "complexity:rarity");
  // Alphabetically first level is the reference.
  CHECK(d.columns[1] == "complexity=simple");
  CHECK(d.columns[5] == "behind=objects");
  CHECK(d.columns[6] == "behind=wall");

  const OlsFit fit = ols_fit(d.x, Eigen::VectorXd::LinSpaced(144, 0.0, 1.0));
  CHECK(fit.rank == 27);
  CHECK(fit.residual_df() == 144 - 27);
}

TEST_CASE("single factor design and dropped levels") {
  Factor f{"neighbors", {"0", "1", "2"}, {"0", "1", "2", "2", "1"}};
  const DesignMatrix one = build_design({f});
  CHECK(one.x.cols() == 3);
  CHECK(one.terms == std::vector<std::string>{"neighbors"});

  Factor g{"behind", {"wall", "empty", "objects"}, {"wall", "wall", "empty", "empty", "wall"}};
  Factor constant{"rarity", {"common", "rare"}, {"common", "common", "common", "common", "common"}};
  const DesignMatrix d = build_design({f, g, constant});
  CHECK(d.terms == std::vector<std::string>{"neighbors", "behind", "neighbors:behind"});
  CHECK(d.x.cols() == 1 + 2 + 1 + 2);
  CHECK(d.warnings.size() == 3);

  Factor bad = f;
  bad.values[0] = "7";
  CHECK_THROWS_AS(build_design({bad}), InvalidInput);
}

TEST_CASE("ols_fit") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd x(30, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
  x.col(0).setOnes();
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) y[i] = z(rng);

  SUBCASE("normal equations oracle") {
    const OlsFit fit = ols_fit(x, y);
    const Eigen::VectorXd beta = (x.transpose() * x).ldlt().solve(x.transpose() * y);
    CHECK((fit.coefficients - beta).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(fit.adj_r_squared <= fit.r_squared);
    CHECK(fit.adj_r_squared == doctest::Approx(1.0 - (1.0 - fit.r_squared) * 29.0 / 26.0).epsilon(1e-14));
  }
  SUBCASE("exact linear response") {
    const Eigen::VectorXd exact = x * Eigen::Vector4d(1.0, -2.0, 0.5, 3.0);
    const OlsFit fit = ols_fit(x, exact);
    CHECK(fit.rss < 1e-18 * fit.tss);
    CHECK(fit.r_squared == doctest::Approx(1.0));
  }
  SUBCASE("response orthogonal to the regressors") {
    Eigen::MatrixXd xo(4, 2);
    xo << 1, 1, 1, -1, 1, 1, 1, -1;
    const OlsFit fit = ols_fit(xo, Eigen::Vector4d(1, 1, -1, -1));
    CHECK(std::abs(fit.r_squared) < 1e-15);
  }
  SUBCASE("rank deficiency") {
    Eigen::MatrixXd xd(30, 5);
    xd << x, x.col(1) + x.col(2);
    const OlsFit fit = ols_fit(xd, y);
    CHECK(fit.rank == 4);
    CHECK(fit.residual_df() == 26);
    CHECK(fit.rss == doctest::Approx(ols_fit(x, y).rss).epsilon(1e-12));
  }
  SUBCASE("too few rows") {
    CHECK_THROWS_AS(ols_fit(x.topRows(4), y.head(4)), InsufficientData);
  }
}

TEST_CASE("F distribution against a high-precision table") {
  struct Point {
    double f;
    int d1, d2;
    double cdf;
  };
  // Regularized incomplete beta at 50 significant digits.
  const Point table[] = {
      {0.5, 1, 1, 0.39182655203060727017},    {1.0, 1, 10, 0.65910686769794012733},
      {2.5, 2, 5, 0.8232233047033631189},     {3.2, 3, 30, 0.9626423486328328433},
      {0.1, 4, 4, 0.023290758827948912868},   {1.7, 5, 117, 0.86001621559323909433},
      {4.0, 2, 117, 0.97912448726760335875},  {0.9, 4, 117, 0.53355716540225869099},
      {10.0, 1, 2, 0.91287092917527685576},   {2.0, 10, 20, 0.91021728515625},
      {0.05, 2, 3, 0.047994754507165065815},  {7.5, 6, 40, 0.99998001611545751236},
      {1.1, 12, 12, 0.56421019973105437881},  {3.0, 1, 200, 0.91519370391531463009},
      {0.3, 8, 60, 0.036837461097596831803},  {25.0, 2, 45, 0.99999995005403126826},
      {1.5, 19, 261, 0.91494675746996790723}, {2.2, 4, 189, 0.92943095750054296235},
      {0.75, 3, 7, 0.44391232915214672202},   {5.5, 1, 117, 0.97929921510604967688},
  };
  for (const auto& p : table) {
    CHECK(std::abs(f_cdf(p.f, p.d1, p.d2) - p.cdf) < 1e-10);
    CHECK(std::abs(f_sf(p.f, p.d1, p.d2) - (1.0 - p.cdf)) < 1e-10);
  }
  CHECK(f_cdf(0.0, 2, 3) == 0.0);
  CHECK(f_sf(0.0, 2, 3) == 1.0);
  CHECK_THROWS_AS(f_cdf(1.0, 0, 3), InvalidInput);
}

TEST_CASE("balanced two-way table") {
  // Cell means 4, 7, 8, 15 with deviations +-1: SS_A = 72, SS_B = 50,
  // SS_AB = 8, SSE = 8 on 4 df.
  const Factor a = two_level("A", {"a", "a", "a", "a", "b", "b", "b", "b"});
  const Factor b = two_level("B", {"a", "a", "b", "b", "a", "a", "b", "b"});
  Eigen::VectorXd y(8);
  y << 3, 5, 6, 8, 7, 9, 14, 16;
  const AnovaReport full = partial_f_tests(build_design({a, b}), y);
  const TermTest& ab = find_term(full, "A:B");
  CHECK(ab.df1 == 1);
  CHECK(ab.df2 == 4);
  CHECK(ab.f == doctest::Approx(4.0).epsilon(1e-12));
  const AnovaReport additive = partial_f_tests(build_design({a, b}, false), y);
  CHECK(find_term(additive, "A").f == doctest::Approx(22.5).epsilon(1e-12));
  CHECK(find_term(additive, "B").f == doctest::Approx(15.625).epsilon(1e-12));
  CHECK(find_term(additive, "B").df2 == 5);
  CHECK(find_term(additive, "A").significant);
}

TEST_CASE("noise-free main effect") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Factor a{"A", {"x", "y"}, {}};
  Factor b{"B", {"p", "q", "r"}, {}};
  Eigen::VectorXd y(60);
  for (int i = 0; i < 60; ++i) {
    a.values.push_back(i % 2 ? "y" : "x");
    b.values.push_back(std::string(1, "pqr"[(i / 2) % 3]));
    y[i] = (i % 2 ? 2.0 : 1.0) + 1e-9 * u(rng);
  }
  const AnovaReport r = partial_f_tests(build_design({a, b}), y);
  const TermTest& t = find_term(r, "A");
  CHECK(t.f > 1e12);
  CHECK(t.p < 1e-12);
}

TEST_CASE("pure-noise p-values are uniform") {
  const std::vector<FactorLabels> rows = sweep_rows(1);
  const DesignMatrix d = build_design(scene_factors(rows), false);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> ps;
  for (int trial = 0; trial < 400; ++trial) {
    Eigen::VectorXd y(d.x.rows());
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = z(rng);
    ps.push_back(find_term(partial_f_tests(d, y), "behind").p);
  }
  std::sort(ps.begin(), ps.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    ks = std::max({ks, std::abs(ps[i] - static_cast<double>(i) / ps.size()),
                   std::abs(ps[i] - static_cast<double>(i + 1) / ps.size())});
  }
  // 1% critical value of the one-sample KS statistic.
  CHECK(ks < 1.63 / std::sqrt(400.0));
}

TEST_CASE("statistics do not depend on column order") {
  const std::vector<FactorLabels> rows = sweep_rows(2);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = rows[i].neighbors * 0.3 + z(rng);
  std::vector<Factor> f = scene_factors(rows);
  const AnovaReport a = partial_f_tests(build_design(f), y);
  std::reverse(f.begin(), f.end());
  const AnovaReport b = partial_f_tests(build_design(f), y);
  CHECK(a.r_squared == doctest::Approx(b.r_squared).epsilon(1e-12));
  for (const auto& t : a.tests) {
    std::string name = t.term;
    const auto colon = name.find(':');
    if (colon != std::string::npos) name = name.substr(colon + 1) + ":" + name.substr(0, colon);
    const TermTest& u = find_term(b, name);
    CHECK(u.df1 == t.df1);
    CHECK(u.f == doctest::Approx(t.f).epsilon(1e-9));
    CHECK(u.p == doctest::Approx(t.p).epsilon(1e-9));
  }
}

TEST_CASE("permutation p-value tracks the F test") {
  const std::vector<FactorLabels> rows = sweep_rows(1);
  const DesignMatrix d = build_design(scene_factors(rows), false);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd y(d.x.rows());
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = (rows[i].distance > 1.7 ? 0.3 : 0.0) + z(rng);
  const double p = find_term(partial_f_tests(d, y), "distance").p;
  const double perm = permutation_p_value(d, y, "distance", 2000, 4);
  CHECK(std::abs(p - perm) < 0.04);
  CHECK_THROWS_AS(permutation_p_value(d, y, "colour", 10, 1), InvalidInput);
}

TEST_CASE("report format") {
  const Factor a = two_level("A", {"a", "a", "a", "a", "b", "b", "b", "b"});
  Eigen::VectorXd y(8);
  y << 1, 2, 1, 2, 5, 6, 5, 7;
  AnovaReport r = partial_f_tests(build_design({a}), y);
  r.response = "interior rms";
  const std::string text = format_anova_report(r);
  CHECK(text.find("response = interior rms\n") != std::string::npos);
  CHECK(text.find("n = 8\n") != std::string::npos);
  CHECK(text.find("\nterm,F,df1,df2,p,significant\nA,") != std::string::npos);
  CHECK(text.find(",1,6,") != std::string::npos);
}
