#include "roa/integrator.hpp"

#include <cmath>

#include "roa/errors.hpp"

namespace roa {

Eigen::Index SimConfig::sample_count() const {
  return static_cast<Eigen::Index>(std::llround(horizon / dt)) + 1;
}

void SimConfig::validate() const {
  if (!(dt > 0.0) || !(horizon >= dt) || !(convergence_radius > 0.0) || !(blowup_norm > 0.0)) {
    throw ConfigError("simulation config needs dt > 0, horizon >= dt, xi > 0");
  }
}

Rk4Stepper::Rk4Stepper(const VectorField& field)
    : field_(field),
      k1_(field.dimension()),
      k2_(field.dimension()),
      k3_(field.dimension()),
      k4_(field.dimension()),
      tmp_(field.dimension()) {}

bool Rk4Stepper::step(Eigen::Ref<Eigen::VectorXd> x, double dt) {
  field_.evaluate(x, k1_);
  tmp_ = x + 0.5 * dt * k1_;
  field_.evaluate(tmp_, k2_);
  tmp_ = x + 0.5 * dt * k2_;
  field_.evaluate(tmp_, k3_);
  tmp_ = x + dt * k3_;
  field_.evaluate(tmp_, k4_);
  if (!k1_.allFinite() || !k2_.allFinite() || !k3_.allFinite() || !k4_.allFinite()) {
    return false;
  }
  x += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
  return x.allFinite();
}

State rk4_step(const VectorField& field, const State& x, double dt) {
  if (x.size() != field.dimension()) throw DimensionError("rk4_step: dimension mismatch");
  if (!x.allFinite()) throw NonFiniteError("rk4_step: non-finite input state");
  Rk4Stepper stepper(field);
  State next = x;
  if (!stepper.step(next, dt)) throw NonFiniteError("rk4_step: non-finite stage");
  return next;
}

Trajectory simulate(const VectorField& field, const State& x0, const SimConfig& cfg) {
  cfg.validate();
  if (x0.size() != field.dimension()) throw DimensionError("simulate: dimension mismatch");
  const Eigen::Index n = cfg.sample_count();

  Trajectory traj;
  traj.initial_state = x0;
  traj.dt = cfg.dt;
  traj.planned_length = n;
  traj.states.resize(x0.size(), n);

  if (!x0.allFinite()) {
    traj.states.resize(x0.size(), 0);
    traj.truncated = true;
    return traj;
  }

  Rk4Stepper stepper(field);
  Eigen::VectorXd x = x0;
  traj.states.col(0) = x;
  Eigen::Index recorded = 1;
  for (; recorded < n; ++recorded) {
    if (!stepper.step(x, cfg.dt) || x.norm() > cfg.blowup_norm) {
      traj.truncated = true;
      break;
    }
    traj.states.col(recorded) = x;
  }
  if (traj.truncated) traj.states.conservativeResize(Eigen::NoChange, recorded);
  traj.converged = classify_stable(traj, cfg);
  return traj;
}

bool classify_stable(const Trajectory& traj, const SimConfig& cfg) {
  if (traj.truncated || traj.length() == 0 || traj.length() < traj.planned_length) return false;
  return traj.final_state().norm() < cfg.convergence_radius;
}

EarlyExitResult early_exit_stable(const Trajectory& prefix, const RegionPredicate& certified) {
  for (Eigen::Index i = 0; i < prefix.length(); ++i) {
    if (certified(prefix.state(i))) return {true, i};
  }
  return {false, prefix.length()};
}

EarlyExitResult simulate_until_certified(const VectorField& field, const State& x0,
                                         const SimConfig& cfg,
                                         const RegionPredicate& certified) {
  cfg.validate();
  if (x0.size() != field.dimension()) throw DimensionError("simulate: dimension mismatch");
  const Eigen::Index n = cfg.sample_count();
  if (!x0.allFinite()) return {false, 0};
  Rk4Stepper stepper(field);
  Eigen::VectorXd x = x0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (certified(x)) return {true, i};
    if (i + 1 < n && (!stepper.step(x, cfg.dt) || x.norm() > cfg.blowup_norm)) {
      return {false, i + 1};
    }
  }
  return {false, n};
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const Eigen::Index dim = traj.states.rows();
  const Eigen::Index m = dim / 2;
  out << "t";
  if (dim % 2 == 0) {
    for (Eigen::Index k = 1; k <= m; ++k) out << ",psi_" << k;
    for (Eigen::Index k = 1; k <= m; ++k) out << ",psidot_" << k;
  } else {
    for (Eigen::Index k = 1; k <= dim; ++k) out << ",x_" << k;
  }
  out << '\n';
  const auto old = out.precision(17);
  for (Eigen::Index i = 0; i < traj.length(); ++i) {
    out << traj.time(i);
    for (Eigen::Index r = 0; r < dim; ++r) out << ',' << traj.states(r, i);
    out << '\n';
  }
  out.precision(old);
}

}  // namespace roa
