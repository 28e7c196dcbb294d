#pragma once

#include <functional>
#include <ostream>

#include <Eigen/Core>

#include "roa/dynamics.hpp"

namespace roa {

struct SimConfig {
  double dt = 0.01;                   // s
  double horizon = 100.0;             // t_n, s
  double convergence_radius = 0.01;   // xi
  double blowup_norm = 1e6;           // larger state norms count as divergence

  /// Number of recorded samples n with t_n = (n - 1) dt.
  Eigen::Index sample_count() const;
  void validate() const;
};

/// Fixed-step trajectory phi(x0, t_i), t_i = i * dt. States are stored
/// column-wise. A truncated trajectory stopped early on divergence.
struct Trajectory {
  Eigen::MatrixXd states;  // dimension x length
  State initial_state;
  double dt = 0.0;
  Eigen::Index planned_length = 0;
  bool converged = false;
  bool truncated = false;

  Eigen::Index length() const { return states.cols(); }
  double time(Eigen::Index i) const { return static_cast<double>(i) * dt; }
  auto state(Eigen::Index i) const { return states.col(i); }
  auto final_state() const { return states.col(states.cols() - 1); }
};

/// Classical RK4 with reusable stage storage.
class Rk4Stepper {
 public:
  explicit Rk4Stepper(const VectorField& field);

  /// Advances x in place by dt. Returns false when any stage is non-finite.
  bool step(Eigen::Ref<Eigen::VectorXd> x, double dt);

 private:
  const VectorField& field_;
  Eigen::VectorXd k1_, k2_, k3_, k4_, tmp_;
};

/// One RK4 step. Throws NonFiniteError on NaN/Inf in any stage.
State rk4_step(const VectorField& field, const State& x, double dt);

Trajectory simulate(const VectorField& field, const State& x0, const SimConfig& cfg);

/// Full horizon reached and ||phi(x0, t_n)|| < xi.
bool classify_stable(const Trajectory& traj, const SimConfig& cfg);

using RegionPredicate = std::function<bool(const Eigen::Ref<const Eigen::VectorXd>&)>;

struct EarlyExitResult {
  bool stable = false;
  Eigen::Index steps = 0;  // index of the first state inside the region, or length
};

/// Scans a trajectory prefix and reports the first state that lies in a
/// certified region of attraction.
EarlyExitResult early_exit_stable(const Trajectory& prefix, const RegionPredicate& certified);

/// Integrates only until the state enters `certified` (or the horizon ends).
EarlyExitResult simulate_until_certified(const VectorField& field, const State& x0,
                                         const SimConfig& cfg,
                                         const RegionPredicate& certified);

/// CSV with header `t,psi_1..psi_M,psidot_1..psidot_M`.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace roa
