#include "roa/ucb.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "roa/errors.hpp"
#include "roa/parallel.hpp"
#include "roa/random.hpp"

namespace roa {

using nlohmann::json;

SamplingDomain SamplingDomain::box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  SamplingDomain d;
  d.lower = std::move(lower);
  d.upper = std::move(upper);
  d.exclusion_radius = 0.01 * d.diagonal();
  d.validate();
  return d;
}

void SamplingDomain::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) {
    throw DimensionError("sampling box bounds must be non-empty and of equal size");
  }
  if (!((upper - lower).array() > 0.0).all()) {
    throw ConfigError("sampling box needs lower < upper in every dimension");
  }
  if (!(exclusion_radius >= 0.0)) throw ConfigError("exclusion radius must be non-negative");
}

bool SamplingDomain::in_box(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

bool SamplingDomain::is_excluded(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const double r2 = exclusion_radius * exclusion_radius;
  for (const auto& e : excluded) {
    if ((x - e).squaredNorm() <= r2) return true;
  }
  return false;
}

bool SamplingDomain::admits(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return in_box(x) && !is_excluded(x);
}

void SamplingDomain::exclude(const Eigen::VectorXd& x) { excluded.push_back(x); }

CheckpointMeta UcbConfig::checkpoint_meta() const {
  return {theta, delta, rkhs_prior_bound, rkhs_refresh_min, beta};
}

void UcbConfig::validate() const {
  sim.validate();
  if (target_stable < 1) throw ConfigError("target_stable must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (candidate_count < 1) throw ConfigError("candidate_count must be >= 1");
  if (restarts < 0) throw ConfigError("restarts must be >= 0");
  if (!(theta > 0.0)) throw ConfigError("theta must be positive");
  if (noise_sigma && !(*noise_sigma > 0.0)) throw ConfigError("noise_sigma must be positive");
  if (!(noise_floor > 0.0)) throw ConfigError("noise_floor must be positive");
}

double acquisition(const GpModel& model, double beta_i, const Eigen::Ref<const Eigen::VectorXd>& x,
                   AcquisitionScheme scheme) {
  const Posterior p = model.posterior(x);
  switch (scheme) {
    case AcquisitionScheme::MeanOnly:
      return p.mean;
    case AcquisitionScheme::VarianceOnly:
      return p.std_dev();
    case AcquisitionScheme::Ucb:
      break;
  }
  return p.mean + std::sqrt(beta_i) * p.std_dev();
}

namespace {

struct Scored {
  Eigen::VectorXd point;
  double value;
  double sigma;
};

bool lexicographically_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

// Strict "a is a better choice than b".
bool better(const Scored& a, const Scored& b) {
  if (a.value != b.value) return a.value > b.value;
  if (a.sigma != b.sigma) return a.sigma > b.sigma;
  return lexicographically_less(a.point, b.point);
}

Scored score(const GpModel& model, double beta_i, AcquisitionScheme scheme,
             const Eigen::VectorXd& x) {
  const Posterior p = model.posterior(x);
  double value = p.mean + std::sqrt(beta_i) * p.std_dev();
  if (scheme == AcquisitionScheme::MeanOnly) value = p.mean;
  if (scheme == AcquisitionScheme::VarianceOnly) value = p.std_dev();
  return {x, value, p.std_dev()};
}

Scored refine(const GpModel& model, const SamplingDomain& domain, double beta_i,
              const UcbConfig& cfg, Scored start) {
  const Eigen::VectorXd width = domain.upper - domain.lower;
  auto to_box = [&](const Eigen::VectorXd& u) {
    return Eigen::VectorXd(domain.lower + width.cwiseProduct(u));
  };
  Eigen::VectorXd u = (start.point - domain.lower).cwiseQuotient(width);
  Scored best = start;
  double step = 0.05;
  constexpr double kProbe = 1e-6;
  for (int it = 0; it < cfg.refine_max_iterations && step >= cfg.refine_min_step; ++it) {
    bool improved = false;
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      Eigen::VectorXd up = u, down = u;
      up[j] = std::min(1.0, u[j] + kProbe);
      down[j] = std::max(0.0, u[j] - kProbe);
      const double slope = (acquisition(model, beta_i, to_box(up), cfg.scheme) -
                            acquisition(model, beta_i, to_box(down), cfg.scheme)) /
                           (up[j] - down[j]);
      if (slope == 0.0 || !std::isfinite(slope)) continue;
      Eigen::VectorXd trial = u;
      trial[j] = std::clamp(u[j] + (slope > 0.0 ? step : -step), 0.0, 1.0);
      const Eigen::VectorXd x = to_box(trial);
      if (!domain.admits(x)) continue;
      Scored s = score(model, beta_i, cfg.scheme, x);
      if (s.value > best.value) {
        best = std::move(s);
        u = trial;
        improved = true;
      }
    }
    if (!improved) step *= 0.5;
  }
  return best;
}

}  // namespace

AcquisitionChoice maximize_acquisition(const GpModel& model, const SamplingDomain& domain,
                                       double beta_i, const UcbConfig& cfg, int iteration) {
  Rng rng(cfg.seed, "ucb.candidates." + std::to_string(iteration));
  std::vector<Eigen::VectorXd> points;
  points.reserve(cfg.candidate_count);
  for (int c = 0; c < cfg.candidate_count; ++c) {
    Eigen::VectorXd x = rng.uniform_point(domain.lower, domain.upper);
    if (!domain.is_excluded(x)) points.push_back(std::move(x));
  }
  if (points.empty()) throw EmptyDomainError("every candidate lies in an excluded ball");

  std::vector<Scored> scored(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    scored[i] = score(model, beta_i, cfg.scheme, points[i]);
  });

  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t keep = std::min<std::size_t>(std::max(cfg.restarts, 0), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep),
                    order.end(),
                    [&](std::size_t a, std::size_t b) { return better(scored[a], scored[b]); });

  Scored best = scored[order.front()];
  std::vector<Scored> refined(keep);
  parallel_for(keep, [&](std::size_t r) {
    refined[r] = refine(model, domain, beta_i, cfg, scored[order[r]]);
  });
  for (const auto& s : refined) {
    if (better(s, best)) best = s;
  }
  return {best.point, best.value, best.sigma};
}

double final_beta(const GpModel& model, const CheckpointMeta& meta) {
  const int n = std::max(1, model.size() + 1);
  return meta.beta.evaluate(n, meta.delta, rkhs_bound_for(model, meta), model.noise_sigma());
}

double c_max(const std::vector<SamplingRecord>& records) {
  double best = 0.0;
  for (const auto& r : records) {
    if (r.stable && r.v_hat) best = std::max(best, *r.v_hat);
  }
  return best;
}

UcbResult run_gp_ucb(const VectorField& field, SamplingDomain domain, const UcbConfig& cfg,
                     const UcbOptions& options) {
  cfg.validate();
  domain.validate();
  if (domain.dimension() != field.dimension()) {
    throw DimensionError("sampling box dimension differs from the state dimension");
  }
  if (!is_hurwitz_at_origin(field)) {
    throw NotHurwitzError("origin is not locally asymptotically stable");
  }
  if (cfg.early_exit && !options.certified) {
    throw ConfigError("early_exit needs a certified region");
  }

  const GammaFunction alpha = square_gamma();
  const CheckpointMeta meta = cfg.checkpoint_meta();
  const int dim = field.dimension();

  // Until the first stable sample fixes the noise level the model is the
  // prior, whose posterior does not depend on sigma.
  GpModel model(cfg.kernel, cfg.noise_sigma.value_or(cfg.noise_floor), dim);
  bool noise_fixed = cfg.noise_sigma.has_value();

  UcbResult result{model, {}, domain, model.noise_sigma(), 0.0, 0.0, 0, {}};
  int stable = 0;
  int total = 0;
  while (stable < cfg.target_stable) {
    if (total >= cfg.iteration_budget()) {
      throw BudgetExhaustedError("found " + std::to_string(stable) + " of " +
                                 std::to_string(cfg.target_stable) + " stable samples in " +
                                 std::to_string(total) + " iterations");
    }
    ++total;
    const int n = stable + 1;
    const double beta_i =
        meta.beta.evaluate(n, cfg.delta, rkhs_bound_for(model, meta), model.noise_sigma());
    const AcquisitionChoice choice = maximize_acquisition(model, domain, beta_i, cfg, total);

    bool verdict = false;
    Trajectory traj;
    if (cfg.early_exit) {
      // Entering the certified ellipse settles stability early, but V_hat
      // still needs the full-horizon trajectory to meet the convergence test.
      verdict = simulate_until_certified(field, choice.point, cfg.sim, options.certified).stable;
      traj = simulate(field, choice.point, cfg.sim);
      verdict = verdict && traj.converged;
    } else {
      traj = simulate(field, choice.point, cfg.sim);
      verdict = traj.converged;
    }

    SamplingRecord record;
    record.iteration = total;
    record.point = choice.point;
    record.acquisition = choice.value;
    record.stable = verdict;
    if (verdict) {
      const double v = estimate_v(traj, alpha);
      if (!noise_fixed) {
        const ErrorBoundParams params = measure_error_bound(traj, field, alpha);
        const double bound =
            error_bound(params, traj.length(), traj.dt, traj.final_state().norm());
        model = GpModel(cfg.kernel, std::max(cfg.noise_floor, bound), dim);
        noise_fixed = true;
      }
      model = model.add_observation(choice.point, v);
      record.v_hat = v;
      ++stable;
      if (options.keep_snapshots) result.snapshots.push_back(model);
    } else {
      domain.exclude(choice.point);
    }
    if (options.on_record) options.on_record(record);
    result.records.push_back(std::move(record));
  }

  result.model = model;
  result.domain = std::move(domain);
  result.noise_sigma = model.noise_sigma();
  // The region pairs beta_N with the posterior after N - 1 samples.
  result.final_beta = final_beta(model.prefix(model.size() - 1), meta);
  result.c_max = c_max(result.records);
  result.total_iterations = total;
  return result;
}

void write_records_csv(std::ostream& out, const std::vector<SamplingRecord>& records) {
  const Eigen::Index dim = records.empty() ? 0 : records.front().point.size();
  out << "iter,stable";
  for (Eigen::Index k = 1; k <= dim; ++k) out << ",x_" << k;
  out << ",v_hat,acquisition\n";
  const auto old = out.precision(17);
  for (const auto& r : records) {
    out << r.iteration << ',' << (r.stable ? 1 : 0);
    for (Eigen::Index k = 0; k < r.point.size(); ++k) out << ',' << r.point[k];
    out << ',';
    if (r.v_hat) out << *r.v_hat;
    out << ',' << r.acquisition << '\n';
  }
  out.precision(old);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ParseError("trailing characters in number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ParseError("bad number '" + s + "' in records file");
  }
}

}  // namespace

std::vector<SamplingRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("records file is empty");
  const auto header = split_csv(line);
  if (header.size() < 4 || header[0] != "iter" || header[1] != "stable" ||
      header[header.size() - 2] != "v_hat" || header.back() != "acquisition") {
    throw ParseError("records file has an unexpected header");
  }
  const std::size_t dim = header.size() - 4;
  std::vector<SamplingRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw ParseError("records row has the wrong column count");
    SamplingRecord r;
    r.iteration = static_cast<int>(parse_double(f[0]));
    r.stable = f[1] == "1";
    r.point.resize(static_cast<Eigen::Index>(dim));
    for (std::size_t k = 0; k < dim; ++k) r.point[static_cast<Eigen::Index>(k)] = parse_double(f[2 + k]);
    if (!f[2 + dim].empty()) r.v_hat = parse_double(f[2 + dim]);
    r.acquisition = parse_double(f[3 + dim]);
    if (r.stable != r.v_hat.has_value()) throw ParseError("v_hat must be present iff stable");
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

const char* scheme_name(AcquisitionScheme s) {
  switch (s) {
    case AcquisitionScheme::MeanOnly:
      return "mean";
    case AcquisitionScheme::VarianceOnly:
      return "variance";
    case AcquisitionScheme::Ucb:
      break;
  }
  return "ucb";
}

}  // namespace

json config_to_json(const UcbConfig& cfg) {
  return {{"target_stable", cfg.target_stable},
          {"delta", cfg.delta},
          {"sim",
           {{"dt", cfg.sim.dt},
            {"horizon", cfg.sim.horizon},
            {"convergence_radius", cfg.sim.convergence_radius},
            {"blowup_norm", cfg.sim.blowup_norm}}},
          {"beta", cfg.beta.to_json()},
          {"kernel", cfg.kernel.to_json()},
          {"candidate_count", cfg.candidate_count},
          {"restarts", cfg.restarts},
          {"seed", cfg.seed},
          {"max_total_iterations", cfg.max_total_iterations},
          {"theta", cfg.theta},
          {"rkhs_prior_bound", cfg.rkhs_prior_bound},
          {"rkhs_refresh_min", cfg.rkhs_refresh_min},
          {"noise_sigma", cfg.noise_sigma ? json(*cfg.noise_sigma) : json(nullptr)},
          {"noise_floor", cfg.noise_floor},
          {"early_exit", cfg.early_exit},
          {"scheme", scheme_name(cfg.scheme)},
          {"refine_min_step", cfg.refine_min_step},
          {"refine_max_iterations", cfg.refine_max_iterations}};
}

UcbConfig config_from_json(const json& j) {
  static const std::set<std::string> known{
      "target_stable", "delta",        "sim",          "beta",
      "kernel",        "candidate_count", "restarts",  "seed",
      "max_total_iterations", "theta", "rkhs_prior_bound", "rkhs_refresh_min",
      "noise_sigma",   "noise_floor",  "early_exit",   "scheme",
      "refine_min_step", "refine_max_iterations"};
  if (!j.is_object()) throw ConfigError("sampler config must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown sampler config key '" + key + "'");
  }
  UcbConfig cfg;
  try {
    cfg.target_stable = j.value("target_stable", cfg.target_stable);
    cfg.delta = j.value("delta", cfg.delta);
    if (j.contains("sim")) {
      const auto& s = j.at("sim");
      for (const auto& [key, _] : s.items()) {
        if (key != "dt" && key != "horizon" && key != "convergence_radius" &&
            key != "blowup_norm") {
          throw ConfigError("unknown sim config key '" + key + "'");
        }
      }
      cfg.sim.dt = s.value("dt", cfg.sim.dt);
      cfg.sim.horizon = s.value("horizon", cfg.sim.horizon);
      cfg.sim.convergence_radius = s.value("convergence_radius", cfg.sim.convergence_radius);
      cfg.sim.blowup_norm = s.value("blowup_norm", cfg.sim.blowup_norm);
    }
    if (j.contains("beta")) cfg.beta = BetaSchedule::from_json(j.at("beta"));
    if (j.contains("kernel")) cfg.kernel = Kernel::from_json(j.at("kernel"));
    cfg.candidate_count = j.value("candidate_count", cfg.candidate_count);
    cfg.restarts = j.value("restarts", cfg.restarts);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.max_total_iterations = j.value("max_total_iterations", cfg.max_total_iterations);
    cfg.theta = j.value("theta", cfg.theta);
    cfg.rkhs_prior_bound = j.value("rkhs_prior_bound", cfg.rkhs_prior_bound);
    cfg.rkhs_refresh_min = j.value("rkhs_refresh_min", cfg.rkhs_refresh_min);
    if (j.contains("noise_sigma") && !j.at("noise_sigma").is_null()) {
      cfg.noise_sigma = j.at("noise_sigma").get<double>();
    }
    cfg.noise_floor = j.value("noise_floor", cfg.noise_floor);
    cfg.early_exit = j.value("early_exit", cfg.early_exit);
    const auto scheme = j.value("scheme", std::string("ucb"));
    if (scheme == "ucb") {
      cfg.scheme = AcquisitionScheme::Ucb;
    } else if (scheme == "mean") {
      cfg.scheme = AcquisitionScheme::MeanOnly;
    } else if (scheme == "variance") {
      cfg.scheme = AcquisitionScheme::VarianceOnly;
    } else {
      throw ConfigError("unknown acquisition scheme '" + scheme + "'");
    }
    cfg.refine_min_step = j.value("refine_min_step", cfg.refine_min_step);
    cfg.refine_max_iterations = j.value("refine_max_iterations", cfg.refine_max_iterations);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad sampler config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace roa
