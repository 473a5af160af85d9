#include "igabem/spline_kernel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace igabem {

namespace {

QuadRule1D compute_gauss_rule(int n) {
  QuadRule1D rule;
  rule.order = n;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  // Newton iteration on Legendre polynomials over [-1,1], then map to [0,1].
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.nodes[n - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

}  // namespace

QuadRule1D gauss_rule(int n) {
  if (n < 1) throw std::invalid_argument("gauss_rule: order must be >= 1");
  static std::mutex mutex;
  static std::map<int, QuadRule1D> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss_rule(n)).first;
  return it->second;
}

KnotVector::KnotVector(int degree, std::vector<double> knots, bool relaxed_multiplicity)
    : degree_(degree), relaxed_(relaxed_multiplicity), knots_(std::move(knots)) {
  if (degree_ < 0) throw std::invalid_argument("KnotVector: degree must be >= 0");
  const int p = degree_;
  const int n = static_cast<int>(knots_.size());
  if (n < 2 * (p + 1)) throw std::invalid_argument("KnotVector: too few knots");
  const int N = n - p - 1;
  for (int i = 0; i + 1 < n; ++i)
    if (knots_[i] > knots_[i + 1]) throw std::invalid_argument("KnotVector: knots must be nondecreasing");
  for (int i = 0; i <= p; ++i) {
    if (knots_[i] != 0.0) throw std::invalid_argument("KnotVector: first p+1 knots must be 0");
    if (knots_[N + i] != 1.0) throw std::invalid_argument("KnotVector: last p+1 knots must be 1");
  }
  if (knots_[p + 1] <= 0.0 || knots_[N - 1] >= 1.0)
    throw std::invalid_argument("KnotVector: end knot multiplicity exceeds p+1");
  const int max_mult = relaxed_ ? p + 1 : p;
  int run = 1;
  for (int i = p + 2; i < N; ++i) {
    run = (knots_[i] == knots_[i - 1]) ? run + 1 : 1;
    if (run > max_mult)
      throw std::invalid_argument("KnotVector: interior knot multiplicity too high");
  }
  breakpoints_.reserve(n);
  knot_bp_index_.resize(n);
  for (int i = 0; i < n; ++i) {
    if (breakpoints_.empty() || knots_[i] != breakpoints_.back()) breakpoints_.push_back(knots_[i]);
    knot_bp_index_[i] = static_cast<int>(breakpoints_.size()) - 1;
  }
}

std::pair<int, int> KnotVector::support_span_range(int j) const {
  return {knot_bp_index_[j], knot_bp_index_[j + degree_ + 1]};
}

int KnotVector::find_span(double t) const {
  const int p = degree_;
  const int N = num_basis();
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("find_span: t outside [0,1]");
  if (t >= knots_[N]) return N - 1;  // right end: last nonempty span
  auto it = std::upper_bound(knots_.begin() + p, knots_.begin() + N + 1, t);
  return static_cast<int>(it - knots_.begin()) - 1;
}

int KnotVector::find_breakpoint_span(double t) const {
  return knot_bp_index_[find_span(t)];
}

BasisWindow KnotVector::eval_all(double t) const {
  const int p = degree_;
  if (p + 1 > 8) throw std::invalid_argument("eval_all: degree too high");
  const int mu = find_span(t);
  BasisWindow w;
  w.first = mu - p;
  w.count = p + 1;
  std::array<double, 8> left{}, right{};
  w.v[0] = 1.0;
  for (int r = 1; r <= p; ++r) {
    left[r] = t - knots_[mu + 1 - r];
    right[r] = knots_[mu + r] - t;
    double saved = 0.0;
    for (int k = 0; k < r; ++k) {
      double temp = w.v[k] / (right[k + 1] + left[r - k]);
      w.v[k] = saved + right[k + 1] * temp;
      saved = left[r - k] * temp;
    }
    w.v[r] = saved;
  }
  return w;
}

BasisWindow KnotVector::eval_all_derivs(double t) const {
  const int p = degree_;
  BasisWindow w = eval_all(t);
  if (p == 0) {
    w.dv[0] = 0.0;
    return w;
  }
  // Degree-(p-1) values on the same knots; window indices mu-p+1..mu.
  const int mu = find_span(t);
  std::array<double, 8> low{};
  std::array<double, 8> left{}, right{};
  low[0] = 1.0;
  for (int r = 1; r <= p - 1; ++r) {
    left[r] = t - knots_[mu + 1 - r];
    right[r] = knots_[mu + r] - t;
    double saved = 0.0;
    for (int k = 0; k < r; ++k) {
      double temp = low[k] / (right[k + 1] + left[r - k]);
      low[k] = saved + right[k + 1] * temp;
      saved = left[r - k] * temp;
    }
    low[r] = saved;
  }
  auto low_val = [&](int j) -> double {  // degree-(p-1) basis j
    int off = j - (mu - p + 1);
    return (off >= 0 && off <= p - 1) ? low[off] : 0.0;
  };
  for (int i = 0; i <= p; ++i) {
    int j = w.first + i;
    double a = 0.0, b = 0.0;
    double da = knots_[j + p] - knots_[j];
    double db = knots_[j + p + 1] - knots_[j + 1];
    if (da > 0.0) a = low_val(j) / da;
    if (db > 0.0) b = low_val(j + 1) / db;
    w.dv[i] = p * (a - b);
  }
  return w;
}

double eval_bspline(const KnotVector& kv, int j, double t) {
  if (j < 0 || j >= kv.num_basis()) throw std::invalid_argument("eval_bspline: index out of range");
  BasisWindow w = kv.eval_all(t);
  int off = j - w.first;
  return (off >= 0 && off < w.count) ? w.v[off] : 0.0;
}

double eval_bspline_derivative(const KnotVector& kv, int j, double t) {
  if (j < 0 || j >= kv.num_basis()) throw std::invalid_argument("eval_bspline_derivative: index out of range");
  BasisWindow w = kv.eval_all_derivs(t);
  int off = j - w.first;
  return (off >= 0 && off < w.count) ? w.dv[off] : 0.0;
}

KnotVector dyadic_refine(const KnotVector& kv, int multiplicity) {
  const int p = kv.degree();
  if (multiplicity < 1) throw std::invalid_argument("dyadic_refine: multiplicity must be >= 1");
  if (multiplicity > 1 && !(kv.relaxed_multiplicity() && multiplicity <= p + 1))
    throw std::invalid_argument("dyadic_refine: multiplicity > 1 requires relaxed mode and q <= p+1");
  const auto& bp = kv.breakpoints();
  std::vector<double> out;
  out.reserve(kv.knots().size() + multiplicity * (bp.size() - 1));
  size_t span = 0;
  for (double t : kv.knots()) {
    while (span + 1 < bp.size() && bp[span + 1] <= t) {
      double mid = 0.5 * (bp[span] + bp[span + 1]);
      for (int q = 0; q < multiplicity; ++q) out.push_back(mid);
      ++span;
    }
    out.push_back(t);
  }
  return KnotVector(p, std::move(out), kv.relaxed_multiplicity());
}

TwoScaleMatrix two_scale_matrix(const KnotVector& coarse, const KnotVector& fine) {
  if (coarse.degree() != fine.degree())
    throw std::invalid_argument("two_scale_matrix: mismatched degrees");
  const int p = coarse.degree();
  // Determine the multiplicity from the size difference, then check structure.
  const int n_spans = coarse.num_spans();
  const int extra = static_cast<int>(fine.knots().size() - coarse.knots().size());
  if (n_spans <= 0 || extra <= 0 || extra % n_spans != 0)
    throw std::invalid_argument("two_scale_matrix: fine is not a dyadic refinement of coarse");
  const int mult = extra / n_spans;
  if (!(dyadic_refine(coarse, mult) == fine))
    throw std::invalid_argument("two_scale_matrix: fine is not a dyadic refinement of coarse");

  // Insert midpoints one at a time (Boehm), composing banded row transforms.
  std::vector<double> cur = coarse.knots();
  const int nc = coarse.num_basis();
  std::vector<TwoScaleMatrix::Row> rows(nc);
  for (int j = 0; j < nc; ++j) {
    rows[j].first = j;
    rows[j].coef = {1.0};
  }
  std::vector<double> mids;
  for (int s = 0; s < n_spans; ++s) {
    double mid = 0.5 * (coarse.breakpoints()[s] + coarse.breakpoints()[s + 1]);
    for (int q = 0; q < mult; ++q) mids.push_back(mid);
  }
  std::sort(mids.begin(), mids.end());

  for (double x : mids) {
    const int n = static_cast<int>(cur.size()) - p - 1;  // current basis count
    // span index of x in cur
    int mu = 0;
    for (int i = 0; i < static_cast<int>(cur.size()) - 1; ++i)
      if (cur[i] <= x && x < cur[i + 1]) mu = i;
    if (x >= cur[cur.size() - 1 - p]) {  // x in the final span
      for (int i = static_cast<int>(cur.size()) - 2; i >= 0; --i)
        if (cur[i] < cur[i + 1]) { mu = i; break; }
    }
    auto alpha = [&](int i) -> double {
      if (i <= mu - p) return 1.0;
      if (i >= mu + 1) return 0.0;
      return (x - cur[i]) / (cur[i + p] - cur[i]);
    };
    // B_i^cur = alpha(i) B_i^new + (1 - alpha(i+1)) B_{i+1}^new
    std::vector<TwoScaleMatrix::Row> next(nc);
    for (int r = 0; r < nc; ++r) {
      const auto& row = rows[r];
      int lo = row.first;
      int hi = row.first + static_cast<int>(row.coef.size());  // exclusive over cur basis
      if (hi <= mu - p) {  // entirely in the identity region
        next[r] = row;
        continue;
      }
      if (lo >= mu + 1) {  // entirely in the shift region
        next[r].first = row.first + 1;
        next[r].coef = row.coef;
        continue;
      }
      next[r].first = lo;
      next[r].coef.assign(row.coef.size() + 1, 0.0);
      for (size_t k = 0; k < row.coef.size(); ++k) {
        int i = lo + static_cast<int>(k);
        double c = row.coef[k];
        if (c == 0.0) continue;
        next[r].coef[k] += c * alpha(i);
        next[r].coef[k + 1] += c * (1.0 - alpha(i + 1));
      }
      while (!next[r].coef.empty() && next[r].coef.back() == 0.0) next[r].coef.pop_back();
      while (!next[r].coef.empty() && next[r].coef.front() == 0.0) {
        next[r].coef.erase(next[r].coef.begin());
        ++next[r].first;
      }
      (void)n;
    }
    rows = std::move(next);
    cur.insert(std::upper_bound(cur.begin(), cur.end(), x), x);
  }

  TwoScaleMatrix m;
  m.coarse_n = nc;
  m.fine_n = fine.num_basis();
  m.rows = std::move(rows);
  return m;
}

namespace {

struct LocalDual {
  std::vector<int> j1, j2;          // local univariate indices per direction
  Eigen::VectorXd dual_coeffs;      // coefficients of the dual over local tensor funcs
};

LocalDual build_local_dual(const TensorSplineSpace& space, int span1, int span2,
                           int target_j1, int target_j2) {
  const KnotVector* kvs[2] = {&space.kv1, &space.kv2};
  const int spans[2] = {span1, span2};
  LocalDual out;
  std::vector<int>* idx[2] = {&out.j1, &out.j2};
  for (int d = 0; d < 2; ++d) {
    const KnotVector& kv = *kvs[d];
    if (spans[d] < 0 || spans[d] >= kv.num_spans())
      throw std::invalid_argument("element_dual_pairing: span out of range");
    for (int j = 0; j < kv.num_basis(); ++j) {
      auto [lo, hi] = kv.support_span_range(j);
      if (lo <= spans[d] && spans[d] < hi) idx[d]->push_back(j);
    }
  }
  auto contains = [](const std::vector<int>& v, int x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  };
  if (!contains(out.j1, target_j1) || !contains(out.j2, target_j2))
    throw std::invalid_argument("element_dual_pairing: target basis vanishes on element");

  const int n1 = static_cast<int>(out.j1.size());
  const int n2 = static_cast<int>(out.j2.size());
  const int nloc = n1 * n2;
  // Per-direction Gram matrices; Gauss of order p+2 is exact for products.
  Eigen::MatrixXd g1 = Eigen::MatrixXd::Zero(n1, n1);
  Eigen::MatrixXd g2 = Eigen::MatrixXd::Zero(n2, n2);
  for (int d = 0; d < 2; ++d) {
    const KnotVector& kv = *kvs[d];
    Eigen::MatrixXd& g = (d == 0) ? g1 : g2;
    const std::vector<int>& jj = *idx[d];
    const double a = kv.breakpoints()[spans[d]];
    const double b = kv.breakpoints()[spans[d] + 1];
    QuadRule1D q = gauss_rule(kv.degree() + 2);
    for (int k = 0; k < q.order; ++k) {
      double t = a + (b - a) * q.nodes[k];
      double w = (b - a) * q.weights[k];
      BasisWindow bw = kv.eval_all(t);
      std::vector<double> vals(jj.size());
      for (size_t i = 0; i < jj.size(); ++i) {
        int off = jj[i] - bw.first;
        vals[i] = (off >= 0 && off < bw.count) ? bw.v[off] : 0.0;
      }
      for (size_t r = 0; r < jj.size(); ++r)
        for (size_t c = 0; c < jj.size(); ++c) g(r, c) += w * vals[r] * vals[c];
    }
  }
  // Tensor Gram = g1 (x) g2; solve for the dual's coefficient vector.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nloc, nloc);
  for (int a1 = 0; a1 < n1; ++a1)
    for (int a2 = 0; a2 < n2; ++a2)
      for (int b1 = 0; b1 < n1; ++b1)
        for (int b2 = 0; b2 < n2; ++b2)
          gram(a1 * n2 + a2, b1 * n2 + b2) = g1(a1, b1) * g2(a2, b2);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nloc);
  int t1 = static_cast<int>(std::find(out.j1.begin(), out.j1.end(), target_j1) - out.j1.begin());
  int t2 = static_cast<int>(std::find(out.j2.begin(), out.j2.end(), target_j2) - out.j2.begin());
  rhs(t1 * n2 + t2) = 1.0;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("element_dual_pairing: singular local Gram matrix");
  out.dual_coeffs = ldlt.solve(rhs);
  return out;
}

}  // namespace

double element_dual_pairing(const TensorSplineSpace& space, int span1, int span2,
                            int target_j1, int target_j2,
                            const std::function<double(double, double)>& g,
                            int gauss_order) {
  LocalDual dual = build_local_dual(space, span1, span2, target_j1, target_j2);
  const int n1 = static_cast<int>(dual.j1.size());
  const int n2 = static_cast<int>(dual.j2.size());
  const double a1 = space.kv1.breakpoints()[span1], b1 = space.kv1.breakpoints()[span1 + 1];
  const double a2 = space.kv2.breakpoints()[span2], b2 = space.kv2.breakpoints()[span2 + 1];
  const int order = gauss_order > 0
                        ? gauss_order
                        : std::max(space.kv1.degree(), space.kv2.degree()) + 5;
  QuadRule1D q = gauss_rule(order);
  double result = 0.0;
  for (int k1 = 0; k1 < q.order; ++k1) {
    double t1 = a1 + (b1 - a1) * q.nodes[k1];
    BasisWindow w1 = space.kv1.eval_all(t1);
    std::vector<double> v1(n1);
    for (int i = 0; i < n1; ++i) {
      int off = dual.j1[i] - w1.first;
      v1[i] = (off >= 0 && off < w1.count) ? w1.v[off] : 0.0;
    }
    for (int k2 = 0; k2 < q.order; ++k2) {
      double t2 = a2 + (b2 - a2) * q.nodes[k2];
      BasisWindow w2 = space.kv2.eval_all(t2);
      double dual_val = 0.0;
      for (int i = 0; i < n1; ++i) {
        if (v1[i] == 0.0) continue;
        for (int j = 0; j < n2; ++j) {
          int off = dual.j2[j] - w2.first;
          double v2 = (off >= 0 && off < w2.count) ? w2.v[off] : 0.0;
          dual_val += dual.dual_coeffs(i * n2 + j) * v1[i] * v2;
        }
      }
      double w = (b1 - a1) * q.weights[k1] * (b2 - a2) * q.weights[k2];
      result += w * dual_val * g(t1, t2);
    }
  }
  return result;
}

double element_dual_sup_norm(const TensorSplineSpace& space, int span1, int span2,
                             int target_j1, int target_j2) {
  LocalDual dual = build_local_dual(space, span1, span2, target_j1, target_j2);
  const int n1 = static_cast<int>(dual.j1.size());
  const int n2 = static_cast<int>(dual.j2.size());
  const double a1 = space.kv1.breakpoints()[span1], b1 = space.kv1.breakpoints()[span1 + 1];
  const double a2 = space.kv2.breakpoints()[span2], b2 = space.kv2.breakpoints()[span2 + 1];
  double sup = 0.0;
  const int samples = 40;
  for (int k1 = 0; k1 <= samples; ++k1) {
    double t1 = a1 + (b1 - a1) * (static_cast<double>(k1) / samples);
    if (k1 == samples) t1 = std::nextafter(b1, a1);  // stay inside the span
    BasisWindow w1 = space.kv1.eval_all(t1);
    for (int k2 = 0; k2 <= samples; ++k2) {
      double t2 = a2 + (b2 - a2) * (static_cast<double>(k2) / samples);
      if (k2 == samples) t2 = std::nextafter(b2, a2);
      BasisWindow w2 = space.kv2.eval_all(t2);
      double val = 0.0;
      for (int i = 0; i < n1; ++i) {
        int o1 = dual.j1[i] - w1.first;
        double v1 = (o1 >= 0 && o1 < w1.count) ? w1.v[o1] : 0.0;
        if (v1 == 0.0) continue;
        for (int j = 0; j < n2; ++j) {
          int o2 = dual.j2[j] - w2.first;
          double v2 = (o2 >= 0 && o2 < w2.count) ? w2.v[o2] : 0.0;
          val += dual.dual_coeffs(i * n2 + j) * v1 * v2;
        }
      }
      sup = std::max(sup, std::abs(val));
    }
  }
  return sup;
}

}  // namespace igabem
