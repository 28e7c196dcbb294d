#include "roa/region.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "roa/errors.hpp"
#include "roa/parallel.hpp"
#include "roa/random.hpp"

namespace roa {

void ConfidenceRegionSpec::validate() const {
  if (!(c_max >= 0.0)) throw ConfigError("c_max must be non-negative");
  if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (mode == RegionMode::Offset && !v_star) throw ConfigError("offset mode needs V*");
}

PointEvaluation evaluate_point(const ConfidenceRegionSpec& spec,
                               const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Posterior p = spec.model.posterior(x);
  PointEvaluation e;
  e.mu = p.mean;
  e.sigma = p.std_dev();
  e.upper = e.mu + std::sqrt(spec.beta) * e.sigma;
  if (spec.mode == RegionMode::Offset) e.upper += spec.v_star(x);
  e.member = e.upper <= spec.c_max;
  return e;
}

bool confidence_membership(const ConfidenceRegionSpec& spec,
                           const Eigen::Ref<const Eigen::VectorXd>& x) {
  return evaluate_point(spec, x).member;
}

ConfidenceRegionSpec confidence_spec_from_run(const std::vector<SamplingRecord>& records,
                                              const Kernel& kernel, double noise_sigma,
                                              const CheckpointMeta& meta, RegionMode mode,
                                              OffsetFunction v_star) {
  std::vector<const SamplingRecord*> stable;
  for (const auto& r : records) {
    if (r.stable) stable.push_back(&r);
  }
  if (stable.empty()) throw ConsistencyError("no stable records to build a region from");
  if (mode == RegionMode::Offset && !v_star) throw ConfigError("offset mode needs V*");

  const int dim = static_cast<int>(stable.front()->point.size());
  const auto used = static_cast<Eigen::Index>(stable.size() - 1);
  Eigen::MatrixXd inputs(dim, used);
  Eigen::VectorXd targets(used);
  for (Eigen::Index i = 0; i < used; ++i) {
    inputs.col(i) = stable[i]->point;
    targets[i] = *stable[i]->v_hat;
    if (mode == RegionMode::Offset) targets[i] -= v_star(stable[i]->point);
  }

  ConfidenceRegionSpec spec{GpModel::fit(kernel, noise_sigma, std::move(inputs), std::move(targets)),
                            0.0, c_max(records), mode, meta.delta, std::move(v_star)};
  spec.beta = final_beta(spec.model, meta);
  return spec;
}

void Box::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) {
    throw DimensionError("box bounds must be non-empty and of equal size");
  }
  if (!((upper - lower).array() > 0.0).all()) {
    throw ConfigError("box needs lower < upper in every dimension");
  }
}

double RegionGrid::x_center(int ix) const {
  return x_lower + (ix + 0.5) * (x_upper - x_lower) / nx;
}

double RegionGrid::y_center(int iy) const {
  return y_lower + (iy + 0.5) * (y_upper - y_lower) / ny;
}

Eigen::VectorXd RegionGrid::cell_center(int ix, int iy) const {
  Eigen::VectorXd x = anchor;
  x[axis_x] = x_center(ix);
  x[axis_y] = y_center(iy);
  return x;
}

std::size_t RegionGrid::member_count() const {
  return static_cast<std::size_t>(std::count(member.begin(), member.end(), std::uint8_t{1}));
}

double RegionGrid::member_fraction() const {
  return member.empty() ? 0.0 : static_cast<double>(member_count()) / member.size();
}

std::pair<int, int> RegionGrid::anchor_cell() const {
  auto locate = [](double v, double lo, double hi, int n) {
    const int i = static_cast<int>(std::floor((v - lo) / (hi - lo) * n));
    return std::clamp(i, 0, n - 1);
  };
  return {locate(anchor[axis_x], x_lower, x_upper, nx),
          locate(anchor[axis_y], y_lower, y_upper, ny)};
}

RegionGrid build_slice(const ConfidenceRegionSpec& spec, const Box& box, int axis_x, int axis_y,
                       std::array<int, 2> resolution) {
  spec.validate();
  box.validate();
  const int dim = box.dimension();
  if (dim != spec.model.input_dim()) throw DimensionError("box and model dimensions differ");
  if (axis_x < 0 || axis_x >= dim || axis_y < 0 || axis_y >= dim || axis_x == axis_y) {
    throw IndexError("slice axes must be two distinct state dimensions");
  }
  if (resolution[0] < 2 || resolution[1] < 2) throw ConfigError("grid resolution must be >= 2");

  RegionGrid grid;
  grid.axis_x = axis_x;
  grid.axis_y = axis_y;
  grid.anchor = Eigen::VectorXd::Zero(dim);
  grid.x_lower = box.lower[axis_x];
  grid.x_upper = box.upper[axis_x];
  grid.y_lower = box.lower[axis_y];
  grid.y_upper = box.upper[axis_y];
  grid.nx = resolution[0];
  grid.ny = resolution[1];
  const std::size_t cells = static_cast<std::size_t>(grid.nx) * grid.ny;
  grid.member.assign(cells, 0);
  grid.mu.assign(cells, 0.0);
  grid.sigma.assign(cells, 0.0);
  parallel_for(cells, [&](std::size_t c) {
    const int ix = static_cast<int>(c % grid.nx);
    const int iy = static_cast<int>(c / grid.nx);
    const PointEvaluation e = evaluate_point(spec, grid.cell_center(ix, iy));
    grid.member[c] = e.member ? 1 : 0;
    grid.mu[c] = e.mu;
    grid.sigma[c] = e.sigma;
  });
  return grid;
}

RegionGrid build_region_grid(const ConfidenceRegionSpec& spec, const Box& box,
                             std::array<int, 2> resolution) {
  if (box.dimension() != 2) {
    throw DimensionError("build_region_grid covers 2-D states; use project_slices");
  }
  return build_slice(spec, box, 0, 1, resolution);
}

std::vector<RegionGrid> project_slices(const ConfidenceRegionSpec& spec,
                                       const std::vector<std::pair<int, int>>& planes,
                                       const Box& box, std::array<int, 2> resolution) {
  std::vector<RegionGrid> slices;
  slices.reserve(planes.size());
  for (const auto& [a, b] : planes) slices.push_back(build_slice(spec, box, a, b, resolution));
  return slices;
}

std::vector<std::pair<int, int>> machine_planes(int state_dim) {
  if (state_dim < 2 || state_dim % 2 != 0) throw DimensionError("state dimension must be 2M");
  std::vector<std::pair<int, int>> planes;
  const int m = state_dim / 2;
  for (int k = 0; k < m; ++k) planes.emplace_back(k, m + k);
  return planes;
}

namespace {

struct Interval {
  double lo;
  double hi;
};

Interval wilson(std::int64_t hits, std::int64_t n) {
  constexpr double z = 1.959963984540054;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(hits) / nn;
  const double denom = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

}  // namespace

nlohmann::json VolumeRatio::to_json() const {
  nlohmann::json j{{"samples", samples},
                   {"confidence_count", confidence_count},
                   {"certified_count", certified_count},
                   {"infinite", infinite}};
  if (infinite) {
    j["ratio"] = nullptr;
    j["half_width"] = nullptr;
  } else {
    j["ratio"] = ratio;
    j["half_width"] = half_width;
  }
  return j;
}

VolumeRatio volume_ratio(const ConfidenceRegionSpec& spec, const CertifiedRoa& certified,
                         const Box& box, std::int64_t n_samples, std::uint64_t seed) {
  spec.validate();
  box.validate();
  if (n_samples < 1000) throw ConfigError("volume_ratio needs at least 1000 samples");
  if (box.dimension() != spec.model.input_dim() || box.dimension() != 2 * certified.n_machines()) {
    throw DimensionError("volume_ratio: box, model and certified region dimensions differ");
  }

  // Draw sequentially so the sample set does not depend on the thread count.
  Rng rng(seed, "region.volume");
  const auto n = static_cast<std::size_t>(n_samples);
  std::vector<Eigen::VectorXd> points(n);
  for (auto& p : points) p = rng.uniform_point(box.lower, box.upper);

  std::vector<std::uint8_t> in_conf(n), in_cert(n);
  parallel_for(n, [&](std::size_t i) {
    in_conf[i] = confidence_membership(spec, points[i]) ? 1 : 0;
    in_cert[i] = certified.contains(points[i]) ? 1 : 0;
  });

  VolumeRatio out;
  out.samples = n_samples;
  out.confidence_count = std::count(in_conf.begin(), in_conf.end(), std::uint8_t{1});
  out.certified_count = std::count(in_cert.begin(), in_cert.end(), std::uint8_t{1});
  if (out.certified_count == 0) {
    out.infinite = true;
    return out;
  }
  out.ratio = static_cast<double>(out.confidence_count) / static_cast<double>(out.certified_count);
  const Interval conf = wilson(out.confidence_count, n_samples);
  const Interval cert = wilson(out.certified_count, n_samples);
  out.half_width = 0.5 * (conf.hi / cert.lo - conf.lo / cert.hi);
  return out;
}

void write_grid_csv(std::ostream& out, const RegionGrid& grid) {
  out << "x,y,member,mu,sigma\n";
  const auto old = out.precision(17);
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const std::size_t c = grid.index(ix, iy);
      out << grid.x_center(ix) << ',' << grid.y_center(iy) << ',' << int{grid.member[c]} << ','
          << grid.mu[c] << ',' << grid.sigma[c] << '\n';
    }
  }
  out.precision(old);
}

void write_boundary_csv(std::ostream& out, const std::vector<Eigen::Vector2d>& polyline) {
  out << "x,y\n";
  const auto old = out.precision(17);
  for (const auto& p : polyline) out << p.x() << ',' << p.y() << '\n';
  out.precision(old);
}

}  // namespace roa
