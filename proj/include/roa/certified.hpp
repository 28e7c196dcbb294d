#pragma once

#include <vector>

#include <Eigen/Core>

#include "roa/dynamics.hpp"

namespace roa {

/// Energy function V*(psi, psi_dot) of the swing network: the branch
/// potentials integrated in closed form plus the kinetic term.
double energy_v_star(const PowerSystem& sys, const Eigen::Ref<const Eigen::VectorXd>& x);
double energy_v_star(const PowerSystem& sys, const Eigen::VectorXd& psi,
                     const Eigen::VectorXd& psi_dot);

/// Ellipsoidal certified region psi' L psi + psi_dot' Lambda psi_dot <= C_lambda.
struct CertifiedRoa {
  Eigen::MatrixXd laplacian;  // grounded at the swing bus when there is one
  Eigen::VectorXd inertia;    // diagonal of Lambda
  double c_lambda = 0.0;
  double max_angle = 0.0;     // lambda = max |theta*_ij|

  int n_machines() const { return static_cast<int>(inertia.size()); }
  double quadratic_form(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// 2x2 form of the certified quadratic on the plane spanned by state
  /// dimensions (a, b) with every other coordinate at zero.
  Eigen::Matrix2d plane_form(int a, int b) const;

  /// Closed polyline of the certified boundary on that plane.
  std::vector<Eigen::Vector2d> boundary(int a, int b, int points = 361) const;
};

/// 2 cos(lambda) - (pi - 2 lambda) sin(lambda).
double certificate_margin(double lambda);

/// Throws CertificateVoidError when C_lambda <= 0.
CertifiedRoa build_certified(const PowerSystem& sys);

/// Throws DimensionError on mismatched sizes.
bool certified_membership(const CertifiedRoa& roa, const Eigen::VectorXd& psi,
                          const Eigen::VectorXd& psi_dot);

}  // namespace roa
