#pragma once

#include <functional>
#include <span>
#include <string>

#include <Eigen/Core>

#include "roa/dynamics.hpp"
#include "roa/integrator.hpp"

namespace roa {

/// A class-Gamma function: alpha(0) = 0, strictly increasing, C^2 on z > 0
/// and bounded by z^m.
struct GammaFunction {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> first;
  std::function<double(double)> second;
  double growth_exponent = 1.0;
};

struct GammaEvaluation {
  double value;
  double first;
  double second;
  double growth_exponent;
};

/// alpha(z) = z^2 as a reusable function object.
GammaFunction square_gamma();

/// alpha(z) = z^2 with its derivatives at z.
GammaEvaluation alpha_square(double z);

/// Spot-checks the class-Gamma conditions on `grid` (non-negative, sorted).
/// Returns an empty string when they hold, otherwise the first violation.
std::string check_gamma(const GammaFunction& alpha, std::span<const double> grid);

/// Trapezoidal quadrature of alpha(||phi(x, t_i)||) over the recorded grid.
/// Throws NotConvergedError for non-convergent trajectories.
double estimate_v(const Trajectory& traj, const GammaFunction& alpha);

/// Constants of the discretization-error bound
/// |V - V_hat| <= kappa n dt^3 / 12 + eta^m ||phi(t_n)||^m / (m lambda).
struct ErrorBoundParams {
  double kappa = 0.0;
  double eta = 1.0;
  double lambda = 1.0;
  double m = 2.0;

  void validate() const;
};

/// `n` is the number of recorded samples; `tail_norm` is ||phi(x, t_n)||.
double error_bound(const ErrorBoundParams& params, Eigen::Index n, double dt, double tail_norm);

inline constexpr double kNormFloor = 1e-9;

/// max_t |d^2/dt^2 alpha(||phi(t)||)| over the recorded states, evaluated in
/// closed form with f'(phi) f(phi) from a central-difference directional
/// derivative. States with norm <= norm_floor are skipped.
double estimate_kappa(const Trajectory& traj, const VectorField& field,
                      const GammaFunction& alpha, double norm_floor = kNormFloor);

/// Second time derivative of alpha(||phi||) at state phi.
double alpha_second_time_derivative(const VectorField& field, const GammaFunction& alpha,
                                    const Eigen::VectorXd& phi);

struct DecayEnvelope {
  double eta;
  double lambda;
};

/// Exponential envelope ||phi(t)|| <= eta ||phi(s)|| e^{-lambda (t - s)} from the
/// linearization: lambda = safety * |max Re eig(J)|, eta = cond(eigenvectors).
/// Throws NotHurwitzError when some eigenvalue has Re >= 0.
DecayEnvelope estimate_decay_envelope(const Eigen::MatrixXd& jacobian,
                                      double safety_factor = 0.9);
DecayEnvelope estimate_decay_envelope(const VectorField& field, double safety_factor = 0.9);

/// Bound parameters measured on one converged trajectory.
ErrorBoundParams measure_error_bound(const Trajectory& traj, const VectorField& field,
                                     const GammaFunction& alpha);

}  // namespace roa
