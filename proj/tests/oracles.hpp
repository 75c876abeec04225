#pragma once

// Independent reference computations for the test suites. Nothing here calls the
// library's assembly or solver code; only meshes and profiles are shared.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "thinhom/mesh.hpp"

namespace oracle {

using thinhom::Point;
using thinhom::TriangleMesh;

inline double cross(const Point& a, const Point& b, const Point& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

/// Linear P1 matrices built from edge cotangents (stiffness) and the classical
/// area/12 mass pattern, dense.
struct LinearSystem {
  Eigen::MatrixXd stiffness;
  Eigen::MatrixXd mass;
};

inline LinearSystem linear_p1(const TriangleMesh& mesh) {
  const auto n = static_cast<Eigen::Index>(mesh.n_nodes());
  LinearSystem sys{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  for (const auto& e : mesh.elements) {
    const Point* p[3] = {&mesh.nodes[static_cast<std::size_t>(e[0])], &mesh.nodes[static_cast<std::size_t>(e[1])],
                         &mesh.nodes[static_cast<std::size_t>(e[2])]};
    const double twice_area = cross(*p[0], *p[1], *p[2]);
    for (int k = 0; k < 3; ++k) {
      // the angle at vertex k is opposite the edge (k+1, k+2)
      const Point& o = *p[k];
      const Point& a = *p[(k + 1) % 3];
      const Point& b = *p[(k + 2) % 3];
      const double dot = (a.x - o.x) * (b.x - o.x) + (a.y - o.y) * (b.y - o.y);
      const double cot = dot / twice_area;
      const Eigen::Index i = e[static_cast<std::size_t>((k + 1) % 3)];
      const Eigen::Index j = e[static_cast<std::size_t>((k + 2) % 3)];
      sys.stiffness(i, j) -= 0.5 * cot;
      sys.stiffness(j, i) -= 0.5 * cot;
      sys.stiffness(i, i) += 0.5 * cot;
      sys.stiffness(j, j) += 0.5 * cot;
    }
    const double area = 0.5 * twice_area;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        sys.mass(e[static_cast<std::size_t>(a)], e[static_cast<std::size_t>(b)]) += area / 12.0 * (a == b ? 2.0 : 1.0);
  }
  return sys;
}

/// Load vector int f phi_i with the edge-midpoint rule (exact for quadratics).
inline Eigen::VectorXd load_midpoint(const TriangleMesh& mesh, const std::function<double(double, double)>& f) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.n_nodes()));
  for (const auto& e : mesh.elements) {
    const Point& p0 = mesh.nodes[static_cast<std::size_t>(e[0])];
    const Point& p1 = mesh.nodes[static_cast<std::size_t>(e[1])];
    const Point& p2 = mesh.nodes[static_cast<std::size_t>(e[2])];
    const double area = 0.5 * cross(p0, p1, p2);
    // midpoint m_k sits opposite vertex k; phi_i there is 1/2 for the two endpoints
    const double m[3] = {f(0.5 * (p1.x + p2.x), 0.5 * (p1.y + p2.y)), f(0.5 * (p0.x + p2.x), 0.5 * (p0.y + p2.y)),
                         f(0.5 * (p0.x + p1.x), 0.5 * (p0.y + p1.y))};
    for (int i = 0; i < 3; ++i) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k)
        if (k != i) s += 0.5 * m[k];
      b(e[static_cast<std::size_t>(i)]) += area / 3.0 * s;
    }
  }
  return b;
}

/// Periodic node classes built from coordinates: nodes at x = 0 and x = L with equal y merge.
inline std::vector<int> periodic_classes(const TriangleMesh& mesh, double period, int& n_classes) {
  std::vector<int> cls(mesh.n_nodes(), -1);
  std::map<double, int> left;
  n_classes = 0;
  for (std::size_t i = 0; i < mesh.n_nodes(); ++i)
    if (mesh.nodes[i].x == 0.0) left[mesh.nodes[i].y] = static_cast<int>(i);
  for (std::size_t i = 0; i < mesh.n_nodes(); ++i)
    if (!(mesh.nodes[i].x == period && left.count(mesh.nodes[i].y))) cls[i] = n_classes++;
  for (std::size_t i = 0; i < mesh.n_nodes(); ++i)
    if (cls[i] < 0) cls[i] = cls[static_cast<std::size_t>(left.at(mesh.nodes[i].y))];
  return cls;
}

/// Linear (p = 2) cell problem: find periodic w with int (grad w + e1) . grad phi = 0,
/// one node pinned, then the mean removed. Returns q = <1 + d_x w>_{Y*}.
inline double linear_cell_q(const TriangleMesh& mesh, double period) {
  int n = 0;
  const auto cls = periodic_classes(mesh, period, n);
  const auto sys = linear_p1(mesh);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < mesh.n_nodes(); ++i)
    for (std::size_t j = 0; j < mesh.n_nodes(); ++j)
      K(cls[i], cls[j]) += sys.stiffness(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  // b_i = -int e1 . grad phi_i = -int d_x phi_i; stiffness applied to the nodal x gives exactly that
  Eigen::VectorXd x(static_cast<Eigen::Index>(mesh.n_nodes()));
  for (std::size_t i = 0; i < mesh.n_nodes(); ++i) x(static_cast<Eigen::Index>(i)) = mesh.nodes[i].x;
  const Eigen::VectorXd kx = sys.stiffness * x;
  for (std::size_t i = 0; i < mesh.n_nodes(); ++i) b(cls[i]) -= kx(static_cast<Eigen::Index>(i));
  K.row(0).setZero();
  K.col(0).setZero();
  K(0, 0) = 1.0;
  b(0) = 0.0;
  const Eigen::VectorXd w = K.ldlt().solve(b);
  double area = 0.0, flux = 0.0;
  for (const auto& e : mesh.elements) {
    const Point& p0 = mesh.nodes[static_cast<std::size_t>(e[0])];
    const Point& p1 = mesh.nodes[static_cast<std::size_t>(e[1])];
    const Point& p2 = mesh.nodes[static_cast<std::size_t>(e[2])];
    const double twice = cross(p0, p1, p2);
    const double w0 = w(cls[static_cast<std::size_t>(e[0])]);
    const double w1 = w(cls[static_cast<std::size_t>(e[1])]);
    const double w2 = w(cls[static_cast<std::size_t>(e[2])]);
    const double dwdx = (w0 * (p1.y - p2.y) + w1 * (p2.y - p0.y) + w2 * (p0.y - p1.y)) / twice;
    area += 0.5 * twice;
    flux += 0.5 * twice * (1.0 + dwdx);
  }
  return flux / area;
}

/// 1D reference: Gauss-Legendre (5 points) on n uniform pieces of (0, 1).
inline double integrate_1d(const std::function<double(double)>& f, int n = 2000) {
  static const double xg[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                               0.9061798459386640};
  static const double wg[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                               0.2369268850561891};
  const double h = 1.0 / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 5; ++k) total += 0.5 * h * wg[k] * f((i + 0.5) * h + 0.5 * h * xg[k]);
  return total;
}

/// Least-squares slope of log(error) against log(h).
inline double observed_rate(const std::vector<double>& h, const std::vector<double>& err) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace oracle
