#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace roa {

using State = Eigen::VectorXd;

/// Autonomous vector field x' = f(x) with an equilibrium at the origin.
class VectorField {
 public:
  virtual ~VectorField() = default;

  virtual int dimension() const = 0;

  /// Writes f(x) into `dx`. `dx` is pre-sized to `dimension()`.
  virtual void evaluate(const Eigen::Ref<const Eigen::VectorXd>& x,
                        Eigen::Ref<Eigen::VectorXd> dx) const = 0;

  /// Jacobian of f at x. The default uses central finite differences.
  virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;

  State operator()(const State& x) const;
};

/// x' = A x. Used for linearizations and the scalar decay test system.
class LinearSystem final : public VectorField {
 public:
  explicit LinearSystem(Eigen::MatrixXd a);

  int dimension() const override { return static_cast<int>(a_.rows()); }
  void evaluate(const Eigen::Ref<const Eigen::VectorXd>& x,
                Eigen::Ref<Eigen::VectorXd> dx) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd&) const override { return a_; }

  const Eigen::MatrixXd& matrix() const { return a_; }

 private:
  Eigen::MatrixXd a_;
};

struct Machine {
  double inertia = 0.0;  // m_i, p.u. s^2
  double damping = 0.0;  // d_i, p.u. s
  double power = 0.0;    // p_i, p.u.
};

struct Branch {
  int from = 0;
  int to = 0;
  double susceptance = 0.0;  // B_ij; the coupling strength is 1/B_ij
};

/// Lossless swing-equation network in perturbed coordinates psi = theta - theta*.
///
/// Buses are indexed 0..n_buses()-1. The optional swing bus is held at
/// psi = psi_dot = 0 and carries no state; every other bus is a machine.
/// The state vector is [psi_1..psi_M, psidot_1..psidot_M] over the M machines
/// in bus order.
class PowerSystem final : public VectorField {
 public:
  static constexpr double kDefaultResidualTol = 1e-8;

  /// Validates and builds a system. Throws ParseError on malformed
  /// parameters, TopologyError if the bus graph is disconnected and
  /// EquilibriumError if the steady angles do not balance the powers.
  PowerSystem(std::vector<Machine> buses, std::vector<Branch> branches,
              std::vector<double> steady_angles, std::optional<int> swing_bus,
              double residual_tol = kDefaultResidualTol);

  int dimension() const override { return 2 * n_machines(); }
  void evaluate(const Eigen::Ref<const Eigen::VectorXd>& x,
                Eigen::Ref<Eigen::VectorXd> dx) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const override;

  int n_buses() const { return static_cast<int>(buses_.size()); }
  int n_machines() const { return static_cast<int>(machine_bus_.size()); }

  const std::vector<Machine>& buses() const { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const std::vector<double>& steady_angles() const { return steady_angles_; }
  std::optional<int> swing_bus() const { return swing_bus_; }

  /// Bus index of machine k (state slot k).
  int machine_bus(int k) const { return machine_bus_[k]; }
  /// State slot of a bus, or -1 for the swing bus.
  int machine_index(int bus) const { return bus_slot_[bus]; }

  /// max_i |p_i - sum_j (1/B_ij) sin(theta*_ij)| over the machines.
  double steady_state_residual() const;

  /// psi of a bus for state x (zero for the swing bus).
  double bus_angle(const Eigen::Ref<const Eigen::VectorXd>& x, int bus) const;

 private:
  struct Coupling {
    int other_bus;
    double weight;      // 1/B_ij
    double steady_sin;  // sin(theta*_i - theta*_j)
    double steady_angle;
  };

  std::vector<Machine> buses_;
  std::vector<Branch> branches_;
  std::vector<double> steady_angles_;
  std::optional<int> swing_bus_;
  std::vector<int> machine_bus_;
  std::vector<int> bus_slot_;
  std::vector<std::vector<Coupling>> couplings_;
};

/// The single-machine infinite-bus system: m=12, d=20, p=0.5, B=0.1,
/// theta*_12 = asin(0.05), bus 1 (index 1) is the infinite bus.
PowerSystem build_smib();

/// Parses the JSON system description (see docs/system-format.md).
PowerSystem parse_system(const std::string& json_text,
                         double residual_tol = PowerSystem::kDefaultResidualTol);
PowerSystem load_system(const std::filesystem::path& path,
                        double residual_tol = PowerSystem::kDefaultResidualTol);
std::string system_to_json(const PowerSystem& sys);

/// f(x) with dimension checking. Throws DimensionError.
State vector_field(const VectorField& field, const State& x);

/// Central-difference Jacobian, step 1e-6 * (1 + |x_j|).
Eigen::MatrixXd finite_difference_jacobian(const VectorField& field,
                                           const Eigen::VectorXd& x);

/// True when every eigenvalue of the Jacobian at the origin has negative real part.
bool is_hurwitz_at_origin(const VectorField& field);

}  // namespace roa
