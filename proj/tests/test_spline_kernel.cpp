#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "igabem/spline_kernel.hpp"

using namespace igabem;

namespace {

KnotVector hat_kv() { return KnotVector(1, {0, 0, 1, 1}); }

KnotVector fig2_kv() {
  return KnotVector(2, {0, 0, 0, 1.0 / 6, 2.0 / 6, 3.0 / 6, 4.0 / 6, 4.0 / 6, 5.0 / 6, 1, 1, 1});
}

// Two-scale oracle: solve for coefficients from point evaluations.
Eigen::VectorXd two_scale_row_oracle(const KnotVector& coarse, const KnotVector& fine, int j) {
  const int nf = fine.num_basis();
  const int m = 10 * nf;
  Eigen::MatrixXd A(m, nf);
  Eigen::VectorXd b(m);
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int k = 0; k < m; ++k) {
    double t = uni(rng);
    for (int c = 0; c < nf; ++c) A(k, c) = eval_bspline(fine, c, t);
    b(k) = eval_bspline(coarse, j, t);
  }
  return A.colPivHouseholderQr().solve(b);
}

}  // namespace

TEST_CASE("gauss rule basics") {
  QuadRule1D q1 = gauss_rule(1);
  CHECK(q1.nodes.size() == 1);
  CHECK(q1.nodes[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(q1.weights[0] == doctest::Approx(1.0).epsilon(1e-15));

  // exactness 2n-1: n=2 integrates t^3 exactly
  QuadRule1D q2 = gauss_rule(2);
  double s = 0.0;
  for (int i = 0; i < 2; ++i) s += q2.weights[i] * std::pow(q2.nodes[i], 3);
  CHECK(s == doctest::Approx(0.25).epsilon(1e-15));

  QuadRule1D q16 = gauss_rule(16);
  double c = 0.0, wsum = 0.0;
  for (int i = 0; i < 16; ++i) {
    c += q16.weights[i] * std::cos(q16.nodes[i]);
    wsum += q16.weights[i];
  }
  CHECK(std::abs(c - std::sin(1.0)) < 1e-14);
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-14));
  for (double w : q16.weights) CHECK(w > 0.0);
}

TEST_CASE("knot vector validation") {
  CHECK_THROWS(KnotVector(1, {0, 0.5, 1}));           // not open
  CHECK_THROWS(KnotVector(1, {0, 0, 1, 0.5, 1, 1}));  // not nondecreasing
  CHECK_THROWS(KnotVector(1, {0, 0, 0.5, 0.5, 1, 1}));            // interior mult 2 > p
  CHECK_NOTHROW(KnotVector(1, {0, 0, 0.5, 0.5, 1, 1}, true));     // allowed relaxed
  CHECK_THROWS(KnotVector(0, {0, 0.3, 0.3, 1}));                  // p=0 needs relaxed for mult 1? no: mult 2 > 1
  CHECK_NOTHROW(KnotVector(0, {0, 0.3, 1}, true));
  CHECK(fig2_kv().num_basis() == 9);  // basis count from the double-knot example
  CHECK(KnotVector(0, {0, 1}, true).num_basis() == 1);
}

TEST_CASE("hat function evaluation") {
  KnotVector kv = hat_kv();
  CHECK(eval_bspline(kv, 0, 0.25) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(eval_bspline(kv, 1, 0.25) == doctest::Approx(0.25).epsilon(1e-15));
  // right endpoint: B_{N-1}(1) = 1
  CHECK(eval_bspline(kv, 1, 1.0) == doctest::Approx(1.0));
  CHECK(eval_bspline(kv, 0, 1.0) == doctest::Approx(0.0));
  CHECK_THROWS(eval_bspline(kv, 2, 0.5));
  CHECK_THROWS(eval_bspline(kv, 0, 1.5));
}

TEST_CASE("right-continuity at interior knots") {
  KnotVector kv(0, {0, 0.5, 1}, true);
  // indicator of [0.5, 1) picks up the value at the knot itself
  CHECK(eval_bspline(kv, 0, 0.5) == doctest::Approx(0.0));
  CHECK(eval_bspline(kv, 1, 0.5) == doctest::Approx(1.0));
  CHECK(eval_bspline(kv, 1, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("partition of unity at 1000 random points") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (const KnotVector& kv :
       {hat_kv(), fig2_kv(), KnotVector(0, {0, 0.25, 0.5, 0.75, 1}, true),
        KnotVector(2, {0, 0, 0, 0.5, 1, 1, 1})}) {
    for (int it = 0; it < 1000; ++it) {
      double t = uni(rng);
      double s = 0.0;
      for (int j = 0; j < kv.num_basis(); ++j) s += eval_bspline(kv, j, t);
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("nonnegativity and local support") {
  KnotVector kv = fig2_kv();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int j = 0; j < kv.num_basis(); ++j) {
    double lo = kv.knots()[j];
    double hi = kv.knots()[j + kv.degree() + 1];
    for (int it = 0; it < 200; ++it) {
      double t = uni(rng);
      double v = eval_bspline(kv, j, t);
      CHECK(v >= 0.0);
      if (t < lo || t > hi) CHECK(v == 0.0);
    }
  }
}

TEST_CASE("derivatives") {
  // derivative of t on (0,0,1,1): B_1 = t
  CHECK(eval_bspline_derivative(hat_kv(), 1, 0.5) == doctest::Approx(1.0));
  CHECK(eval_bspline_derivative(hat_kv(), 0, 0.5) == doctest::Approx(-1.0));
  // piecewise constants have zero derivative inside elements
  KnotVector kv0(0, {0, 0.5, 1}, true);
  CHECK(eval_bspline_derivative(kv0, 0, 0.25) == doctest::Approx(0.0));
  // differentiated partition of unity sums to zero
  KnotVector kv2(2, {0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int it = 0; it < 200; ++it) {
    double t = uni(rng);
    double s = 0.0;
    for (int j = 0; j < kv2.num_basis(); ++j) s += eval_bspline_derivative(kv2, j, t);
    CHECK(std::abs(s) < 1e-12);
  }
  // finite-difference cross-check
  for (int j = 0; j < kv2.num_basis(); ++j) {
    double t = 0.3701;
    double h = 1e-6;
    double fd = (eval_bspline(kv2, j, t + h) - eval_bspline(kv2, j, t - h)) / (2 * h);
    CHECK(eval_bspline_derivative(kv2, j, t) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("dyadic refinement") {
  KnotVector a = dyadic_refine(hat_kv());
  CHECK(a.knots() == std::vector<double>{0, 0, 0.5, 1, 1});

  KnotVector b = dyadic_refine(KnotVector(2, {0, 0, 0, 0.5, 1, 1, 1}));
  CHECK(b.knots() == std::vector<double>{0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1});

  KnotVector c(0, {0, 1}, true);
  KnotVector c2 = dyadic_refine(dyadic_refine(c));
  CHECK(c2.breakpoints() == std::vector<double>{0, 0.25, 0.5, 0.75, 1});

  // spans exactly halved k times
  KnotVector d = fig2_kv();
  for (int k = 0; k < 3; ++k) {
    KnotVector d2 = dyadic_refine(d);
    CHECK(d2.num_spans() == 2 * d.num_spans());
    for (int s = 0; s < d.num_spans(); ++s) {
      CHECK(d2.breakpoints()[2 * s] == d.breakpoints()[s]);
      CHECK(d2.breakpoints()[2 * s + 1] ==
            0.5 * (d.breakpoints()[s] + d.breakpoints()[s + 1]));
    }
    d = d2;
  }

  // full-multiplicity mode inserts midpoints q times
  KnotVector e(1, {0, 0, 1, 1}, true);
  KnotVector e2 = dyadic_refine(e, 2);
  CHECK(e2.knots() == std::vector<double>{0, 0, 0.5, 0.5, 1, 1});
  CHECK_THROWS(dyadic_refine(hat_kv(), 2));  // not relaxed
}

TEST_CASE("two-scale matrix") {
  SUBCASE("p=1 hat") {
    KnotVector coarse = hat_kv();
    KnotVector fine = dyadic_refine(coarse);
    TwoScaleMatrix m = two_scale_matrix(coarse, fine);
    // oracle from point evaluations
    Eigen::VectorXd row0 = two_scale_row_oracle(coarse, fine, 0);
    CHECK(row0(0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(row0(1) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(std::abs(row0(2)) < 1e-10);
    for (int k = 0; k < 3; ++k) CHECK(m.entry(0, k) == doctest::Approx(row0(k)).epsilon(1e-10));
  }
  SUBCASE("p=0 children") {
    KnotVector coarse(0, {0, 0.5, 1}, true);
    KnotVector fine = dyadic_refine(coarse);
    TwoScaleMatrix m = two_scale_matrix(coarse, fine);
    CHECK(m.entry(0, 0) == doctest::Approx(1.0));
    CHECK(m.entry(0, 1) == doctest::Approx(1.0));
    CHECK(m.entry(0, 2) == doctest::Approx(0.0));
    CHECK(m.entry(1, 2) == doctest::Approx(1.0));
    CHECK(m.entry(1, 3) == doctest::Approx(1.0));
  }
  SUBCASE("reproduces coarse functions pointwise and preserves unity") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (const KnotVector& coarse :
         {fig2_kv(), KnotVector(2, {0, 0, 0, 0.5, 1, 1, 1}),
          KnotVector(1, {0, 0, 0.25, 0.5, 0.75, 1, 1})}) {
      KnotVector fine = dyadic_refine(coarse);
      TwoScaleMatrix m = two_scale_matrix(coarse, fine);
      int p = coarse.degree();
      for (const auto& row : m.rows) {
        CHECK(static_cast<int>(row.coef.size()) <= p + 2);
        for (double c : row.coef) CHECK(c >= -1e-15);
      }
      for (int it = 0; it < 200; ++it) {
        double t = uni(rng);
        // each coarse function reproduced
        for (int j = 0; j < coarse.num_basis(); ++j) {
          double direct = eval_bspline(coarse, j, t);
          double via = 0.0;
          for (int k = 0; k < fine.num_basis(); ++k)
            via += m.entry(j, k) * eval_bspline(fine, k, t);
          CHECK(std::abs(direct - via) < 1e-12);
        }
      }
      // all-ones coarse coefficients map to the constant function
      std::vector<double> ones(fine.num_basis(), 0.0);
      for (int j = 0; j < m.coarse_n; ++j)
        for (size_t k = 0; k < m.rows[j].coef.size(); ++k)
          ones[m.rows[j].first + k] += m.rows[j].coef[k];
      for (double c : ones) CHECK(c == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS(two_scale_matrix(hat_kv(), KnotVector(2, {0, 0, 0, 0.5, 1, 1, 1})));
    CHECK_THROWS(two_scale_matrix(hat_kv(), hat_kv()));
  }
}

TEST_CASE("element dual pairing") {
  TensorSplineSpace sp{KnotVector(2, {0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1}),
                       KnotVector(2, {0, 0, 0, 0.5, 1, 1, 1})};
  // pick an element and a target function alive on it
  int s1 = 1, s2 = 1;
  int tj1 = 2, tj2 = 2;
  auto target = [&](double t1, double t2) {
    return eval_bspline(sp.kv1, tj1, t1) * eval_bspline(sp.kv2, tj2, t2);
  };
  CHECK(element_dual_pairing(sp, s1, s2, tj1, tj2, target) == doctest::Approx(1.0).epsilon(1e-12));
  // duality against every other same-level function alive on the element
  for (int j1 = 0; j1 < sp.kv1.num_basis(); ++j1) {
    for (int j2 = 0; j2 < sp.kv2.num_basis(); ++j2) {
      if (j1 == tj1 && j2 == tj2) continue;
      auto [lo1, hi1] = sp.kv1.support_span_range(j1);
      auto [lo2, hi2] = sp.kv2.support_span_range(j2);
      if (!(lo1 <= s1 && s1 < hi1 && lo2 <= s2 && s2 < hi2)) continue;
      auto other = [&](double t1, double t2) {
        return eval_bspline(sp.kv1, j1, t1) * eval_bspline(sp.kv2, j2, t2);
      };
      CHECK(std::abs(element_dual_pairing(sp, s1, s2, tj1, tj2, other)) < 1e-12);
    }
  }
  CHECK_THROWS(element_dual_pairing(sp, 0, 0, 3, 2, target));  // target vanishes there
}

TEST_CASE("dual sup norm scaling across levels") {
  // ||dual||_inf * |element| should stay bounded under refinement
  KnotVector kv(2, {0, 0, 0, 1, 1, 1});
  double first_bound = 0.0;
  for (int level = 0; level < 4; ++level) {
    TensorSplineSpace sp{kv, kv};
    int span = kv.num_spans() / 2;
    BasisWindow w = kv.eval_all(kv.breakpoints()[span] + 1e-9);
    int j = w.first + 1;  // some function alive on the span
    double area = (kv.breakpoints()[span + 1] - kv.breakpoints()[span]);
    area *= area;
    double bound = element_dual_sup_norm(sp, span, span, j, j) * area;
    if (level == 0) first_bound = bound;
    CHECK(bound < 10.0 * first_bound + 100.0);
    kv = dyadic_refine(kv);
  }
}
