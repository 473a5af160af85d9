#include "igabem/geometry.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace igabem {

NurbsPatch::NurbsPatch(KnotVector kv1, KnotVector kv2, Eigen::MatrixX4d ctrl)
    : kv1_(std::move(kv1)), kv2_(std::move(kv2)), hcoef_(std::move(ctrl)) {
  const int n1 = kv1_.num_basis();
  const int n2 = kv2_.num_basis();
  if (hcoef_.rows() != static_cast<Eigen::Index>(n1) * n2)
    throw std::invalid_argument("NurbsPatch: control net size mismatch");
  for (Eigen::Index r = 0; r < hcoef_.rows(); ++r) {
    if (hcoef_(r, 3) <= 0.0) throw std::invalid_argument("NurbsPatch: weights must be positive");
    hcoef_.row(r).head<3>() *= hcoef_(r, 3);  // store weighted coordinates
  }
}

Vec3 NurbsPatch::eval(const Vec2& t) const {
  BasisWindow w1 = kv1_.eval_all(t[0]);
  BasisWindow w2 = kv2_.eval_all(t[1]);
  Eigen::Vector4d h = Eigen::Vector4d::Zero();
  const int n2 = kv2_.num_basis();
  for (int a = 0; a < w1.count; ++a)
    for (int b = 0; b < w2.count; ++b)
      h += w1.v[a] * w2.v[b] * hcoef_.row((w1.first + a) * n2 + (w2.first + b)).transpose();
  return h.head<3>() / h[3];
}

Mat32 NurbsPatch::jacobian(const Vec2& t) const {
  BasisWindow w1 = kv1_.eval_all_derivs(t[0]);
  BasisWindow w2 = kv2_.eval_all_derivs(t[1]);
  Eigen::Vector4d h = Eigen::Vector4d::Zero();
  Eigen::Vector4d d1 = Eigen::Vector4d::Zero();
  Eigen::Vector4d d2 = Eigen::Vector4d::Zero();
  const int n2 = kv2_.num_basis();
  for (int a = 0; a < w1.count; ++a) {
    for (int b = 0; b < w2.count; ++b) {
      Eigen::Vector4d c = hcoef_.row((w1.first + a) * n2 + (w2.first + b)).transpose();
      h += w1.v[a] * w2.v[b] * c;
      d1 += w1.dv[a] * w2.v[b] * c;
      d2 += w1.v[a] * w2.dv[b] * c;
    }
  }
  Mat32 jac;
  jac.col(0) = (d1.head<3>() * h[3] - h.head<3>() * d1[3]) / (h[3] * h[3]);
  jac.col(1) = (d2.head<3>() * h[3] - h.head<3>() * d2[3]) / (h[3] * h[3]);
  return jac;
}

double NurbsPatch::gram_det(const Vec2& t) const {
  Mat32 j = jacobian(t);
  Eigen::Matrix2d f = j.transpose() * j;
  double det = f.determinant();
  if (det <= 0.0) throw std::runtime_error("NurbsPatch: degenerate Jacobian");
  return det;
}

double NurbsPatch::sqrt_gram(const Vec2& t) const { return std::sqrt(gram_det(t)); }

Vec3 NurbsPatch::unit_normal(const Vec2& t) const {
  Mat32 j = jacobian(t);
  Vec3 n = j.col(0).cross(j.col(1));
  double len = n.norm();
  if (len <= 0.0) throw std::runtime_error("NurbsPatch: degenerate Jacobian");
  return normal_sign_ * n / len;
}

NurbsPatch::Frame NurbsPatch::frame(const Vec2& t) const {
  BasisWindow w1 = kv1_.eval_all_derivs(t[0]);
  BasisWindow w2 = kv2_.eval_all_derivs(t[1]);
  Eigen::Vector4d h = Eigen::Vector4d::Zero();
  Eigen::Vector4d d1 = Eigen::Vector4d::Zero();
  Eigen::Vector4d d2 = Eigen::Vector4d::Zero();
  const int n2 = kv2_.num_basis();
  for (int a = 0; a < w1.count; ++a) {
    for (int b = 0; b < w2.count; ++b) {
      Eigen::Vector4d c = hcoef_.row((w1.first + a) * n2 + (w2.first + b)).transpose();
      h += w1.v[a] * w2.v[b] * c;
      d1 += w1.dv[a] * w2.v[b] * c;
      d2 += w1.v[a] * w2.dv[b] * c;
    }
  }
  Frame fr;
  fr.x = h.head<3>() / h[3];
  fr.jac.col(0) = (d1.head<3>() * h[3] - h.head<3>() * d1[3]) / (h[3] * h[3]);
  fr.jac.col(1) = (d2.head<3>() * h[3] - h.head<3>() * d2[3]) / (h[3] * h[3]);
  Vec3 n = fr.jac.col(0).cross(fr.jac.col(1));
  double len = n.norm();
  fr.sqrt_gram = len;  // |c1 x c2| = sqrt(det(J^T J)) in 3D
  fr.normal = normal_sign_ * n / len;
  return fr;
}

double surface_gradient_sq(const NurbsPatch& patch, const Vec2& t, const Vec2& grad_pullback) {
  Mat32 j = patch.jacobian(t);
  Eigen::Matrix2d f = j.transpose() * j;
  double det = f.determinant();
  if (det <= 0.0) throw std::runtime_error("surface_gradient_sq: degenerate Jacobian");
  Eigen::Vector2d z = f.inverse() * grad_pullback;
  return grad_pullback.dot(z);
}

Vec2 edge_point(int edge, double s) {
  switch (edge) {
    case 0: return {s, 0.0};
    case 1: return {1.0, s};
    case 2: return {s, 1.0};
    default: return {0.0, s};
  }
}

Vec2 corner_point(int corner) {
  switch (corner) {
    case 0: return {0.0, 0.0};
    case 1: return {1.0, 0.0};
    case 2: return {1.0, 1.0};
    default: return {0.0, 1.0};
  }
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void merge(int a, int b) { parent[find(a)] = find(b); }
};

constexpr double kMatchTol = 1e-10;

std::vector<Interface> detect_interfaces(const std::vector<NurbsPatch>& patches) {
  std::vector<Interface> out;
  const int M = static_cast<int>(patches.size());
  std::vector<std::vector<bool>> used(M, std::vector<bool>(4, false));
  auto sample = [&](int m, int e, double s) { return patches[m].eval(edge_point(e, s)); };
  for (int ma = 0; ma < M; ++ma) {
    for (int ea = 0; ea < 4; ++ea) {
      if (used[ma][ea]) continue;
      for (int mb = ma; mb < M; ++mb) {
        for (int eb = (mb == ma ? ea + 1 : 0); eb < 4; ++eb) {
          if (used[mb][eb] || (mb == ma)) continue;
          for (bool rev : {false, true}) {
            bool match = true;
            for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) {
              Vec3 a = sample(ma, ea, s);
              Vec3 b = sample(mb, eb, rev ? 1.0 - s : s);
              if ((a - b).norm() > kMatchTol) {
                match = false;
                break;
              }
            }
            if (match) {
              out.push_back(Interface{ma, ea, mb, eb, rev});
              used[ma][ea] = used[mb][eb] = true;
              break;
            }
          }
          if (used[ma][ea]) break;
        }
        if (used[ma][ea]) break;
      }
    }
  }
  return out;
}

std::vector<std::vector<std::pair<int, int>>> build_corner_classes(
    const std::vector<NurbsPatch>& patches) {
  const int M = static_cast<int>(patches.size());
  std::vector<Vec3> pts(4 * M);
  for (int m = 0; m < M; ++m)
    for (int c = 0; c < 4; ++c) pts[4 * m + c] = patches[m].eval(corner_point(c));
  UnionFind uf(4 * M);
  for (int i = 0; i < 4 * M; ++i)
    for (int j = i + 1; j < 4 * M; ++j)
      if ((pts[i] - pts[j]).norm() < kMatchTol) uf.merge(i, j);
  std::vector<std::vector<std::pair<int, int>>> classes;
  std::vector<int> root_to_class(4 * M, -1);
  for (int i = 0; i < 4 * M; ++i) {
    int r = uf.find(i);
    if (root_to_class[r] < 0) {
      root_to_class[r] = static_cast<int>(classes.size());
      classes.emplace_back();
    }
    classes[root_to_class[r]].push_back({i / 4, i % 4});
  }
  std::erase_if(classes, [](const auto& c) {
    for (const auto& [p, _] : c)
      if (p != c.front().first) return false;
    return true;  // drop classes confined to a single patch
  });
  return classes;
}

}  // namespace

BoundaryGeometry::BoundaryGeometry(std::vector<NurbsPatch> patches,
                                   std::vector<Interface> interfaces,
                                   std::optional<Vec3> interior_point)
    : patches_(std::move(patches)), interior_point_(interior_point) {
  topology_.num_patches = static_cast<int>(patches_.size());
  topology_.interfaces = interfaces.empty() ? detect_interfaces(patches_) : std::move(interfaces);
  topology_.corner_classes = build_corner_classes(patches_);

  // every glued edge must map consistently
  for (const Interface& itf : topology_.interfaces) {
    for (double s : {0.0, 0.5, 1.0}) {
      Vec3 a = patches_[itf.patch_a].eval(edge_point(itf.edge_a, s));
      Vec3 b = patches_[itf.patch_b].eval(edge_point(itf.edge_b, itf.reversed ? 1.0 - s : s));
      if ((a - b).norm() > kMatchTol)
        throw std::invalid_argument("BoundaryGeometry: inconsistent interface");
    }
  }

  if (interior_point_) {
    for (NurbsPatch& p : patches_) {
      Vec2 center(0.5, 0.5);
      Vec3 raw = p.unit_normal(center);
      Vec3 x = p.eval(center);
      p.set_normal_sign(p.normal_sign() * (raw.dot(x - *interior_point_) >= 0.0 ? 1.0 : -1.0));
    }
  }

  // diameter from a sampled point cloud; corners are included so polytopes
  // come out exact
  std::vector<Vec3> cloud;
  for (const NurbsPatch& p : patches_)
    for (int a = 0; a <= 8; ++a)
      for (int b = 0; b <= 8; ++b) cloud.push_back(p.eval({a / 8.0, b / 8.0}));
  for (size_t i = 0; i < cloud.size(); ++i)
    for (size_t j = i + 1; j < cloud.size(); ++j)
      diam_ = std::max(diam_, (cloud[i] - cloud[j]).norm());
}

namespace {

Eigen::MatrixX4d bilinear_ctrl(const Vec3& c00, const Vec3& c10, const Vec3& c01,
                               const Vec3& c11) {
  Eigen::MatrixX4d ctrl(4, 4);
  // rows in i1-major order: (i1,i2) = (0,0),(0,1),(1,0),(1,1)
  ctrl.row(0) << c00.transpose(), 1.0;
  ctrl.row(1) << c01.transpose(), 1.0;
  ctrl.row(2) << c10.transpose(), 1.0;
  ctrl.row(3) << c11.transpose(), 1.0;
  return ctrl;
}

NurbsPatch bilinear_patch(const Vec3& c00, const Vec3& c10, const Vec3& c01, const Vec3& c11) {
  KnotVector kv(1, {0, 0, 1, 1});
  return NurbsPatch(kv, kv, bilinear_ctrl(c00, c10, c01, c11));
}

}  // namespace

BoundaryGeometry make_cube() {
  const double L = 0.1;
  std::vector<NurbsPatch> patches;
  auto P = [&](double x, double y, double z) { return Vec3(L * x, L * y, L * z); };
  patches.push_back(bilinear_patch(P(0, 0, 0), P(1, 0, 0), P(0, 1, 0), P(1, 1, 0)));  // z=0
  patches.push_back(bilinear_patch(P(0, 0, 1), P(1, 0, 1), P(0, 1, 1), P(1, 1, 1)));  // z=L
  patches.push_back(bilinear_patch(P(0, 0, 0), P(1, 0, 0), P(0, 0, 1), P(1, 0, 1)));  // y=0
  patches.push_back(bilinear_patch(P(0, 1, 0), P(1, 1, 0), P(0, 1, 1), P(1, 1, 1)));  // y=L
  patches.push_back(bilinear_patch(P(0, 0, 0), P(0, 1, 0), P(0, 0, 1), P(0, 1, 1)));  // x=0
  patches.push_back(bilinear_patch(P(1, 0, 0), P(1, 1, 0), P(1, 0, 1), P(1, 1, 1)));  // x=L
  return BoundaryGeometry(std::move(patches), {}, Vec3(L / 2, L / 2, L / 2));
}

BoundaryGeometry make_quarter_pipe() {
  const double ri = 0.05, ro = 0.1, h = 0.1;
  const double w = std::sqrt(2.0) / 2.0;
  KnotVector arc_kv(2, {0, 0, 0, 1, 1, 1});
  KnotVector lin_kv(1, {0, 0, 1, 1});
  // 90-degree arc control polygon at unit radius: (1,0), (1,1), (0,1)
  const double ax[3] = {1, 1, 0};
  const double ay[3] = {0, 1, 1};
  const double aw[3] = {1, w, 1};

  auto wall = [&](double r) {  // t1 along the arc, t2 along z
    Eigen::MatrixX4d ctrl(6, 4);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j)
        ctrl.row(2 * i + j) << r * ax[i], r * ay[i], h * j, aw[i];
    return NurbsPatch(arc_kv, lin_kv, ctrl);
  };
  auto annulus = [&](double z) {  // t1 along the arc, t2 radial
    Eigen::MatrixX4d ctrl(6, 4);
    for (int i = 0; i < 3; ++i) {
      ctrl.row(2 * i + 0) << ri * ax[i], ri * ay[i], z, aw[i];
      ctrl.row(2 * i + 1) << ro * ax[i], ro * ay[i], z, aw[i];
    }
    return NurbsPatch(arc_kv, lin_kv, ctrl);
  };

  std::vector<NurbsPatch> patches;
  patches.push_back(wall(ri));  // Gamma_1: inner wall
  patches.push_back(bilinear_patch(Vec3(ri, 0, 0), Vec3(ro, 0, 0), Vec3(ri, 0, h),
                                   Vec3(ro, 0, h)));  // Gamma_2: y=0
  patches.push_back(wall(ro));  // Gamma_3: outer wall
  patches.push_back(bilinear_patch(Vec3(0, ri, 0), Vec3(0, ro, 0), Vec3(0, ri, h),
                                   Vec3(0, ro, h)));  // Gamma_4: x=0
  patches.push_back(annulus(0.0));  // Gamma_5: z=0
  patches.push_back(annulus(h));    // Gamma_6: z=h
  const double rm = 0.075 * std::sqrt(0.5);
  return BoundaryGeometry(std::move(patches), {}, Vec3(rm, rm, h / 2));
}

BoundaryGeometry load_geometry_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_geometry_json: cannot open " + path);
  nlohmann::json j;
  in >> j;
  std::vector<NurbsPatch> patches;
  for (const auto& pj : j.at("patches")) {
    int p1 = pj.at("degrees").at(0).get<int>();
    int p2 = pj.at("degrees").at(1).get<int>();
    std::vector<double> k1 = pj.at("knots").at(0).get<std::vector<double>>();
    std::vector<double> k2 = pj.at("knots").at(1).get<std::vector<double>>();
    int n1 = pj.at("n").at(0).get<int>();
    int n2 = pj.at("n").at(1).get<int>();
    const auto& cps = pj.at("control_points");
    if (static_cast<int>(cps.size()) != n1 * n2)
      throw std::invalid_argument("load_geometry_json: control point count mismatch");
    Eigen::MatrixX4d ctrl(n1 * n2, 4);
    for (int r = 0; r < n1 * n2; ++r)
      for (int c = 0; c < 4; ++c) ctrl(r, c) = cps.at(r).at(c).get<double>();
    patches.emplace_back(KnotVector(p1, k1, p1 == 0), KnotVector(p2, k2, p2 == 0), ctrl);
  }
  std::vector<Interface> interfaces;
  if (j.contains("interfaces")) {
    for (const auto& ij : j.at("interfaces"))
      interfaces.push_back(Interface{ij.at(0).get<int>(), ij.at(1).get<int>(), ij.at(2).get<int>(),
                                     ij.at(3).get<int>(), ij.at(4).get<bool>()});
  }
  std::optional<Vec3> interior;
  if (j.contains("interior_point")) {
    const auto& ip = j.at("interior_point");
    interior = Vec3(ip.at(0).get<double>(), ip.at(1).get<double>(), ip.at(2).get<double>());
  }
  return BoundaryGeometry(std::move(patches), std::move(interfaces), interior);
}

BoundaryGeometry geometry_by_name(const std::string& name) {
  if (name == "cube") return make_cube();
  if (name == "quarter_pipe") return make_quarter_pipe();
  throw std::invalid_argument("unknown geometry: " + name);
}

}  // namespace igabem
