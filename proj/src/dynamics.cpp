#include "roa/dynamics.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "roa/errors.hpp"

namespace roa {

using nlohmann::json;

Eigen::MatrixXd VectorField::jacobian(const Eigen::VectorXd& x) const {
  return finite_difference_jacobian(*this, x);
}

State VectorField::operator()(const State& x) const {
  State dx(dimension());
  evaluate(x, dx);
  return dx;
}

LinearSystem::LinearSystem(Eigen::MatrixXd a) : a_(std::move(a)) {
  if (a_.rows() != a_.cols() || a_.rows() == 0) {
    throw DimensionError("LinearSystem needs a non-empty square matrix");
  }
}

void LinearSystem::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x,
                            Eigen::Ref<Eigen::VectorXd> dx) const {
  dx.noalias() = a_ * x;
}

namespace {

bool graph_connected(int n, const std::vector<Branch>& branches) {
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  int components = n;
  for (const auto& b : branches) {
    int a = find(b.from), c = find(b.to);
    if (a != c) {
      parent[a] = c;
      --components;
    }
  }
  return components == 1;
}

}  // namespace

PowerSystem::PowerSystem(std::vector<Machine> buses, std::vector<Branch> branches,
                         std::vector<double> steady_angles,
                         std::optional<int> swing_bus, double residual_tol)
    : buses_(std::move(buses)),
      branches_(std::move(branches)),
      steady_angles_(std::move(steady_angles)),
      swing_bus_(swing_bus) {
  const int n = n_buses();
  if (n == 0) throw ParseError("system has no buses");
  if (static_cast<int>(steady_angles_.size()) != n) {
    throw ParseError("steady_angles has " + std::to_string(steady_angles_.size()) +
                     " entries for " + std::to_string(n) + " buses");
  }
  if (swing_bus_ && (*swing_bus_ < 0 || *swing_bus_ >= n)) {
    throw ParseError("swing_bus index out of range");
  }
  for (int i = 0; i < n; ++i) {
    const auto& m = buses_[i];
    if (!std::isfinite(m.inertia) || !std::isfinite(m.damping) || !std::isfinite(m.power) ||
        !std::isfinite(steady_angles_[i])) {
      throw ParseError("non-finite parameter at bus " + std::to_string(i));
    }
    if (m.inertia < 0.0 || m.damping < 0.0) {
      throw ParseError("negative inertia or damping at bus " + std::to_string(i));
    }
    if (swing_bus_ != i && m.inertia == 0.0) {
      throw ParseError("bus " + std::to_string(i) +
                       " has zero inertia; eliminate load buses before loading");
    }
  }
  for (const auto& b : branches_) {
    if (b.from < 0 || b.from >= n || b.to < 0 || b.to >= n || b.from == b.to) {
      throw ParseError("branch endpoints invalid");
    }
    if (!(b.susceptance > 0.0) || !std::isfinite(b.susceptance)) {
      throw ParseError("branch susceptance must be positive");
    }
  }
  if (!graph_connected(n, branches_)) {
    throw TopologyError("bus graph is not connected");
  }

  bus_slot_.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    if (swing_bus_ == i) continue;
    bus_slot_[i] = static_cast<int>(machine_bus_.size());
    machine_bus_.push_back(i);
  }
  if (machine_bus_.empty()) throw ParseError("system has no dynamic machines");

  couplings_.resize(n);
  for (const auto& b : branches_) {
    const double w = 1.0 / b.susceptance;
    const double ang = steady_angles_[b.from] - steady_angles_[b.to];
    couplings_[b.from].push_back({b.to, w, std::sin(ang), ang});
    couplings_[b.to].push_back({b.from, w, std::sin(-ang), -ang});
  }

  const double residual = steady_state_residual();
  if (!(residual <= residual_tol)) {
    std::ostringstream msg;
    msg << "steady-state residual " << residual << " exceeds tolerance " << residual_tol;
    throw EquilibriumError(msg.str());
  }
}

double PowerSystem::steady_state_residual() const {
  double worst = 0.0;
  for (int bus : machine_bus_) {
    double flow = 0.0;
    for (const auto& c : couplings_[bus]) flow += c.weight * c.steady_sin;
    worst = std::max(worst, std::abs(buses_[bus].power - flow));
  }
  return worst;
}

double PowerSystem::bus_angle(const Eigen::Ref<const Eigen::VectorXd>& x, int bus) const {
  const int slot = bus_slot_[bus];
  return slot < 0 ? 0.0 : x[slot];
}

void PowerSystem::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x,
                           Eigen::Ref<Eigen::VectorXd> dx) const {
  const int m = n_machines();
  for (int k = 0; k < m; ++k) {
    const int bus = machine_bus_[k];
    const double psi = x[k];
    double torque = -buses_[bus].damping * x[m + k];
    for (const auto& c : couplings_[bus]) {
      const double psi_ij = psi - bus_angle(x, c.other_bus);
      torque += c.weight * (c.steady_sin - std::sin(c.steady_angle + psi_ij));
    }
    dx[k] = x[m + k];
    dx[m + k] = torque / buses_[bus].inertia;
  }
}

Eigen::MatrixXd PowerSystem::jacobian(const Eigen::VectorXd& x) const {
  const int m = n_machines();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  for (int k = 0; k < m; ++k) {
    const int bus = machine_bus_[k];
    const double inv_m = 1.0 / buses_[bus].inertia;
    jac(k, m + k) = 1.0;
    jac(m + k, m + k) = -buses_[bus].damping * inv_m;
    for (const auto& c : couplings_[bus]) {
      const double psi_ij = x[k] - bus_angle(x, c.other_bus);
      const double slope = c.weight * std::cos(c.steady_angle + psi_ij) * inv_m;
      jac(m + k, k) -= slope;
      const int other = bus_slot_[c.other_bus];
      if (other >= 0) jac(m + k, other) += slope;
    }
  }
  return jac;
}

PowerSystem build_smib() {
  const double steady = std::asin(0.05);
  std::vector<Machine> buses{{12.0, 20.0, 0.5}, {0.0, 0.0, -0.5}};
  std::vector<Branch> branches{{0, 1, 0.1}};
  return PowerSystem(std::move(buses), std::move(branches), {steady, 0.0}, 1);
}

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) throw ParseError("unknown field '" + key + "' in " + where);
  }
}

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError("missing field '" + std::string(key) + "' in " + where);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError("bad field '" + std::string(key) + "' in " + where + ": " + e.what());
  }
}

}  // namespace

PowerSystem parse_system(const std::string& json_text, double residual_tol) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("system file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("system file must hold a JSON object");
  reject_unknown(doc, {"description", "machines", "branches", "steady_angles", "angle_unit",
                       "swing_bus"},
                 "system");

  const auto unit = required<std::string>(doc, "angle_unit", "system");
  double scale = 1.0;
  if (unit == "deg") {
    scale = std::numbers::pi / 180.0;
  } else if (unit != "rad") {
    throw ParseError("angle_unit must be \"rad\" or \"deg\"");
  }

  std::vector<Machine> buses;
  const auto machines = required<json>(doc, "machines", "system");
  if (!machines.is_array()) throw ParseError("machines must be an array");
  for (const auto& m : machines) {
    reject_unknown(m, {"inertia", "damping", "power"}, "machine");
    buses.push_back({required<double>(m, "inertia", "machine"),
                     required<double>(m, "damping", "machine"),
                     required<double>(m, "power", "machine")});
  }

  std::vector<Branch> branches;
  const auto lines = required<json>(doc, "branches", "system");
  if (!lines.is_array()) throw ParseError("branches must be an array");
  for (const auto& b : lines) {
    reject_unknown(b, {"from", "to", "susceptance"}, "branch");
    branches.push_back({required<int>(b, "from", "branch"), required<int>(b, "to", "branch"),
                        required<double>(b, "susceptance", "branch")});
  }

  auto angles = required<std::vector<double>>(doc, "steady_angles", "system");
  for (double& a : angles) a *= scale;

  std::optional<int> swing;
  if (!doc.contains("swing_bus")) throw ParseError("missing field 'swing_bus' in system");
  if (!doc["swing_bus"].is_null()) swing = required<int>(doc, "swing_bus", "system");

  return PowerSystem(std::move(buses), std::move(branches), std::move(angles), swing,
                     residual_tol);
}

PowerSystem load_system(const std::filesystem::path& path, double residual_tol) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open system file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_system(buf.str(), residual_tol);
}

std::string system_to_json(const PowerSystem& sys) {
  json doc;
  doc["angle_unit"] = "rad";
  json machines = json::array();
  for (const auto& m : sys.buses()) {
    machines.push_back({{"inertia", m.inertia}, {"damping", m.damping}, {"power", m.power}});
  }
  doc["machines"] = machines;
  json branches = json::array();
  for (const auto& b : sys.branches()) {
    branches.push_back({{"from", b.from}, {"to", b.to}, {"susceptance", b.susceptance}});
  }
  doc["branches"] = branches;
  doc["steady_angles"] = sys.steady_angles();
  doc["swing_bus"] = sys.swing_bus() ? json(*sys.swing_bus()) : json(nullptr);
  return doc.dump(2);
}

State vector_field(const VectorField& field, const State& x) {
  if (x.size() != field.dimension()) {
    throw DimensionError("state has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(field.dimension()));
  }
  return field(x);
}

Eigen::MatrixXd finite_difference_jacobian(const VectorField& field, const Eigen::VectorXd& x) {
  const int n = field.dimension();
  Eigen::MatrixXd jac(n, n);
  Eigen::VectorXd probe = x, plus(n), minus(n);
  for (int j = 0; j < n; ++j) {
    const double h = 1e-6 * (1.0 + std::abs(x[j]));
    probe[j] = x[j] + h;
    field.evaluate(probe, plus);
    probe[j] = x[j] - h;
    field.evaluate(probe, minus);
    probe[j] = x[j];
    jac.col(j) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

bool is_hurwitz_at_origin(const VectorField& field) {
  const Eigen::MatrixXd jac = field.jacobian(Eigen::VectorXd::Zero(field.dimension()));
  Eigen::EigenSolver<Eigen::MatrixXd> solver(jac, false);
  return (solver.eigenvalues().real().array() < 0.0).all();
}

}  // namespace roa
