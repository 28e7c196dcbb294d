#include "roa/certified.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "roa/errors.hpp"

namespace roa {

double energy_v_star(const PowerSystem& sys, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != sys.dimension()) throw DimensionError("energy_v_star: dimension mismatch");
  const auto& angles = sys.steady_angles();
  // Each branch appears twice in the double sum with identical integrals;
  // the leading 1/2 cancels that, so summing once per branch is exact.
  // The branch term is the work done against the restoring torque,
  // integral of sin(theta + tau) - sin(theta) over [0, psi_ij], which is
  // what makes dV*/dt = -sum d_i psi_dot_i^2 along the swing dynamics.
  double potential = 0.0;
  for (const auto& b : sys.branches()) {
    const double steady = angles[b.from] - angles[b.to];
    const double psi_ij = sys.bus_angle(x, b.from) - sys.bus_angle(x, b.to);
    potential += (std::cos(steady) - std::cos(steady + psi_ij) - psi_ij * std::sin(steady)) /
                 b.susceptance;
  }
  double kinetic = 0.0;
  const int m = sys.n_machines();
  for (int k = 0; k < m; ++k) {
    kinetic += sys.buses()[sys.machine_bus(k)].inertia * x[m + k] * x[m + k];
  }
  return potential + 0.5 * kinetic;
}

double energy_v_star(const PowerSystem& sys, const Eigen::VectorXd& psi,
                     const Eigen::VectorXd& psi_dot) {
  if (psi.size() != sys.n_machines() || psi_dot.size() != sys.n_machines()) {
    throw DimensionError("energy_v_star: dimension mismatch");
  }
  Eigen::VectorXd x(2 * sys.n_machines());
  x << psi, psi_dot;
  return energy_v_star(sys, x);
}

double certificate_margin(double lambda) {
  return 2.0 * std::cos(lambda) - (std::numbers::pi - 2.0 * lambda) * std::sin(lambda);
}

CertifiedRoa build_certified(const PowerSystem& sys) {
  const int m = sys.n_machines();
  CertifiedRoa roa;
  roa.laplacian = Eigen::MatrixXd::Zero(m, m);
  roa.inertia.resize(m);
  for (int k = 0; k < m; ++k) roa.inertia[k] = sys.buses()[sys.machine_bus(k)].inertia;

  const auto& angles = sys.steady_angles();
  double min_weight = std::numeric_limits<double>::infinity();
  for (const auto& b : sys.branches()) {
    const double w = 1.0 / b.susceptance;
    min_weight = std::min(min_weight, w);
    roa.max_angle = std::max(roa.max_angle, std::abs(angles[b.from] - angles[b.to]));
    const int i = sys.machine_index(b.from);
    const int j = sys.machine_index(b.to);
    if (i >= 0) roa.laplacian(i, i) += w;
    if (j >= 0) roa.laplacian(j, j) += w;
    if (i >= 0 && j >= 0) {
      roa.laplacian(i, j) -= w;
      roa.laplacian(j, i) -= w;
    }
  }
  roa.c_lambda = min_weight * certificate_margin(roa.max_angle);
  if (!(roa.c_lambda > 0.0)) {
    std::ostringstream msg;
    msg << "certificate void: C_lambda = " << roa.c_lambda << " at max angle " << roa.max_angle;
    throw CertificateVoidError(msg.str());
  }
  return roa;
}

double CertifiedRoa::quadratic_form(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const int m = n_machines();
  if (x.size() != 2 * m) throw DimensionError("certified region: dimension mismatch");
  const auto psi = x.head(m);
  const auto psi_dot = x.tail(m);
  return psi.dot(laplacian * psi) + psi_dot.dot(inertia.cwiseProduct(psi_dot));
}

bool CertifiedRoa::contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return quadratic_form(x) <= c_lambda;
}

Eigen::Matrix2d CertifiedRoa::plane_form(int a, int b) const {
  const int m = n_machines();
  auto entry = [&](int r, int c) -> double {
    if (r < m && c < m) return laplacian(r, c);
    if (r >= m && c >= m) return r == c ? inertia[r - m] : 0.0;
    return 0.0;
  };
  Eigen::Matrix2d q;
  q << entry(a, a), entry(a, b), entry(b, a), entry(b, b);
  return q;
}

std::vector<Eigen::Vector2d> CertifiedRoa::boundary(int a, int b, int points) const {
  const Eigen::Matrix2d q = plane_form(a, b);
  std::vector<Eigen::Vector2d> poly;
  poly.reserve(points);
  for (int i = 0; i < points; ++i) {
    const double t = 2.0 * std::numbers::pi * i / (points - 1);
    const Eigen::Vector2d u(std::cos(t), std::sin(t));
    const double form = u.dot(q * u);
    poly.push_back(u * std::sqrt(c_lambda / form));
  }
  return poly;
}

bool certified_membership(const CertifiedRoa& roa, const Eigen::VectorXd& psi,
                          const Eigen::VectorXd& psi_dot) {
  if (psi.size() != roa.n_machines() || psi_dot.size() != roa.n_machines()) {
    throw DimensionError("certified_membership: dimension mismatch");
  }
  Eigen::VectorXd x(psi.size() + psi_dot.size());
  x << psi, psi_dot;
  return roa.contains(x);
}

}  // namespace roa
