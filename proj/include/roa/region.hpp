#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "roa/certified.hpp"
#include "roa/gp.hpp"
#include "roa/ucb.hpp"

namespace roa {

/// Equilibrium mode takes V* = 0; offset mode learns V_hat - V* and adds V* back.
enum class RegionMode { Equilibrium, Offset };

using OffsetFunction = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>;

/// {x : V*(x) + mu(x) + sqrt(beta) sigma(x) <= c_max}
struct ConfidenceRegionSpec {
  GpModel model;
  double beta = 0.0;
  double c_max = 0.0;
  RegionMode mode = RegionMode::Equilibrium;
  double delta = 0.05;
  OffsetFunction v_star;  // required in offset mode

  void validate() const;
};

struct PointEvaluation {
  bool member = false;
  double mu = 0.0;
  double sigma = 0.0;
  double upper = 0.0;  // left-hand side of the membership inequality
};

PointEvaluation evaluate_point(const ConfidenceRegionSpec& spec,
                               const Eigen::Ref<const Eigen::VectorXd>& x);
bool confidence_membership(const ConfidenceRegionSpec& spec,
                           const Eigen::Ref<const Eigen::VectorXd>& x);

/// Region after a sampling run. The posterior uses the first N - 1 stable
/// samples, beta is beta_N and c_max is the largest V_hat over all N. In
/// offset mode the GP is refit on V_hat - V*.
ConfidenceRegionSpec confidence_spec_from_run(const std::vector<SamplingRecord>& records,
                                              const Kernel& kernel, double noise_sigma,
                                              const CheckpointMeta& meta, RegionMode mode,
                                              OffsetFunction v_star = {});

struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int dimension() const { return static_cast<int>(lower.size()); }
  void validate() const;
};

/// Membership rasterized on a 2-D plane through `anchor`: axes (axis_x, axis_y)
/// vary over cell centres, every other coordinate stays at the anchor.
struct RegionGrid {
  int axis_x = 0;
  int axis_y = 1;
  Eigen::VectorXd anchor;
  double x_lower = 0.0, x_upper = 0.0, y_lower = 0.0, y_upper = 0.0;
  int nx = 0, ny = 0;
  std::vector<std::uint8_t> member;  // row-major in y: index = iy * nx + ix
  std::vector<double> mu;
  std::vector<double> sigma;

  std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(iy) * nx + ix; }
  double x_center(int ix) const;
  double y_center(int iy) const;
  Eigen::VectorXd cell_center(int ix, int iy) const;
  std::size_t member_count() const;
  double member_fraction() const;
  /// Cell whose closed extent contains the anchor's in-plane coordinates.
  std::pair<int, int> anchor_cell() const;
};

/// 2-D state only; the grid covers the whole box. Throws DimensionError otherwise.
RegionGrid build_region_grid(const ConfidenceRegionSpec& spec, const Box& box,
                             std::array<int, 2> resolution);

/// Slice on plane (axis_x, axis_y) with off-plane coordinates at zero.
RegionGrid build_slice(const ConfidenceRegionSpec& spec, const Box& box, int axis_x, int axis_y,
                       std::array<int, 2> resolution);

/// One slice per plane pair. Throws IndexError on bad or repeated indices.
std::vector<RegionGrid> project_slices(const ConfidenceRegionSpec& spec,
                                       const std::vector<std::pair<int, int>>& planes,
                                       const Box& box, std::array<int, 2> resolution);

/// (psi_k, psidot_k) for every machine k of a state of dimension 2M.
std::vector<std::pair<int, int>> machine_planes(int state_dim);

struct VolumeRatio {
  double ratio = 0.0;          // meaningful unless `infinite`
  double half_width = 0.0;
  std::int64_t confidence_count = 0;
  std::int64_t certified_count = 0;
  std::int64_t samples = 0;
  bool infinite = false;

  nlohmann::json to_json() const;
};

/// Monte Carlo ratio of confidence-region to certified-region volume inside
/// `box`. The half-width comes from 95% Wilson intervals of both hit rates.
/// Requires n_samples >= 1000.
VolumeRatio volume_ratio(const ConfidenceRegionSpec& spec, const CertifiedRoa& certified,
                         const Box& box, std::int64_t n_samples, std::uint64_t seed);

/// CSV `x,y,member,mu,sigma`, one row per cell.
void write_grid_csv(std::ostream& out, const RegionGrid& grid);
/// CSV `x,y` of the certified boundary on the grid's plane.
void write_boundary_csv(std::ostream& out, const std::vector<Eigen::Vector2d>& polyline);

}  // namespace roa
