#include "roa/lyapunov.hpp"

#include <cmath>
#include <complex>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "roa/errors.hpp"

namespace roa {

GammaFunction square_gamma() {
  return {"square", [](double z) { return z * z; }, [](double z) { return 2.0 * z; },
          [](double) { return 2.0; }, 2.0};
}

GammaEvaluation alpha_square(double z) { return {z * z, 2.0 * z, 2.0, 2.0}; }

std::string check_gamma(const GammaFunction& alpha, std::span<const double> grid) {
  if (alpha.value(0.0) != 0.0) return "alpha(0) != 0";
  double previous = 0.0;
  bool first = true;
  for (double z : grid) {
    const double v = alpha.value(z);
    if (!std::isfinite(v)) return "alpha not finite";
    if (!first && z > 0.0 && !(v > previous)) {
      std::ostringstream msg;
      msg << "alpha not strictly increasing at z=" << z;
      return msg.str();
    }
    if (z >= 0.0 && v > std::pow(z, alpha.growth_exponent) * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "alpha exceeds z^m at z=" << z;
      return msg.str();
    }
    if (z > 0.0 && (!std::isfinite(alpha.first(z)) || !std::isfinite(alpha.second(z)))) {
      return "alpha derivatives not finite";
    }
    previous = v;
    first = false;
  }
  return {};
}

double estimate_v(const Trajectory& traj, const GammaFunction& alpha) {
  if (!traj.converged) throw NotConvergedError("estimate_v needs a convergent trajectory");
  const Eigen::Index n = traj.length();
  if (n < 2) return 0.0;
  double sum = 0.5 * (alpha.value(traj.state(0).norm()) + alpha.value(traj.state(n - 1).norm()));
  for (Eigen::Index i = 1; i + 1 < n; ++i) sum += alpha.value(traj.state(i).norm());
  return sum * traj.dt;
}

void ErrorBoundParams::validate() const {
  if (!(kappa >= 0.0) || !(eta > 0.0) || !(lambda > 0.0) || !(m > 0.0)) {
    throw ConfigError("error bound needs kappa >= 0 and eta, lambda, m > 0");
  }
}

double error_bound(const ErrorBoundParams& params, Eigen::Index n, double dt, double tail_norm) {
  params.validate();
  const double quadrature = params.kappa * static_cast<double>(n) * dt * dt * dt / 12.0;
  const double tail = std::pow(params.eta, params.m) * std::pow(tail_norm, params.m) /
                      (params.m * params.lambda);
  return quadrature + tail;
}

double alpha_second_time_derivative(const VectorField& field, const GammaFunction& alpha,
                                    const Eigen::VectorXd& phi) {
  const double r = phi.norm();
  const Eigen::VectorXd f = field(phi);
  const double f_norm = f.norm();

  // f'(phi) f(phi) by a central difference along f.
  Eigen::VectorXd jf = Eigen::VectorXd::Zero(phi.size());
  if (f_norm > 0.0) {
    const double h = 1e-6 * (1.0 + r) / f_norm;
    jf = (field(phi + h * f) - field(phi - h * f)) / (2.0 * h);
  }

  // r' = phi.f / r,  r'' = (|f|^2 + phi.f'f) / r - (phi.f)^2 / r^3
  const double pf = phi.dot(f);
  const double r_dot = pf / r;
  const double r_ddot = (f_norm * f_norm + phi.dot(jf)) / r - pf * pf / (r * r * r);
  return alpha.second(r) * r_dot * r_dot + alpha.first(r) * r_ddot;
}

double estimate_kappa(const Trajectory& traj, const VectorField& field,
                      const GammaFunction& alpha, double norm_floor) {
  double kappa = 0.0;
  bool any = false;
  for (Eigen::Index i = 0; i < traj.length(); ++i) {
    const Eigen::VectorXd phi = traj.state(i);
    if (phi.norm() <= norm_floor) continue;
    any = true;
    kappa = std::max(kappa, std::abs(alpha_second_time_derivative(field, alpha, phi)));
  }
  if (!any) throw DegenerateTrajectoryError("every state lies below the norm floor");
  return kappa;
}

DecayEnvelope estimate_decay_envelope(const Eigen::MatrixXd& jacobian, double safety_factor) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(jacobian, true);
  if (solver.info() != Eigen::Success) throw NotHurwitzError("eigen decomposition failed");
  const double slowest = solver.eigenvalues().real().maxCoeff();
  if (!(slowest < 0.0)) {
    std::ostringstream msg;
    msg << "linearization not Hurwitz: max real part " << slowest;
    throw NotHurwitzError(msg.str());
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(solver.eigenvectors());
  const auto& s = svd.singularValues();
  const double cond = s(0) / s(s.size() - 1);
  return {std::isfinite(cond) ? cond : std::numeric_limits<double>::infinity(),
          safety_factor * std::abs(slowest)};
}

DecayEnvelope estimate_decay_envelope(const VectorField& field, double safety_factor) {
  return estimate_decay_envelope(field.jacobian(Eigen::VectorXd::Zero(field.dimension())),
                                 safety_factor);
}

ErrorBoundParams measure_error_bound(const Trajectory& traj, const VectorField& field,
                                     const GammaFunction& alpha) {
  const DecayEnvelope env = estimate_decay_envelope(field);
  return {estimate_kappa(traj, field, alpha), env.eta, env.lambda, alpha.growth_exponent};
}

}  // namespace roa
