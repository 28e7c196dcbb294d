#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "roa/dynamics.hpp"
#include "roa/gp.hpp"
#include "roa/integrator.hpp"
#include "roa/lyapunov.hpp"

namespace roa {

/// Search box with balls of radius `exclusion_radius` removed around every
/// sample that failed to converge.
struct SamplingDomain {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<Eigen::VectorXd> excluded;
  double exclusion_radius = 0.0;

  /// Box with the default exclusion radius (1% of the box diagonal).
  static SamplingDomain box(Eigen::VectorXd lower, Eigen::VectorXd upper);

  int dimension() const { return static_cast<int>(lower.size()); }
  double diagonal() const { return (upper - lower).norm(); }
  bool in_box(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  bool is_excluded(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// In the box and outside every exclusion ball.
  bool admits(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  void exclude(const Eigen::VectorXd& x);
  void validate() const;
};

struct SamplingRecord {
  int iteration = 0;
  Eigen::VectorXd point;
  bool stable = false;
  std::optional<double> v_hat;
  double acquisition = 0.0;
};

/// Scheme A maximizes the mean, scheme B the deviation, UCB both.
enum class AcquisitionScheme { Ucb, MeanOnly, VarianceOnly };

struct UcbConfig {
  int target_stable = 100;              // N
  double delta = 0.05;
  SimConfig sim;
  BetaSchedule beta;
  Kernel kernel = Kernel::squared_exponential(1.0);
  int candidate_count = 2048;
  int restarts = 8;
  std::uint64_t seed = 1;
  int max_total_iterations = 0;         // 0 means 20 * N
  double theta = 0.1;
  double rkhs_prior_bound = 10.0;
  int rkhs_refresh_min = 5;
  std::optional<double> noise_sigma;    // unset: from the discretization bound
  double noise_floor = 1e-4;
  bool early_exit = false;
  AcquisitionScheme scheme = AcquisitionScheme::Ucb;
  // Coordinate ascent refinement.
  double refine_min_step = 1e-4;
  int refine_max_iterations = 50;

  int iteration_budget() const { return max_total_iterations > 0 ? max_total_iterations : 20 * target_stable; }
  CheckpointMeta checkpoint_meta() const;
  void validate() const;
};

/// mu(x) + sqrt(beta) sigma(x), or the single-term variants.
double acquisition(const GpModel& model, double beta_i, const Eigen::Ref<const Eigen::VectorXd>& x,
                   AcquisitionScheme scheme = AcquisitionScheme::Ucb);

struct AcquisitionChoice {
  Eigen::VectorXd point;
  double value = 0.0;
  double sigma = 0.0;
};

/// Random candidates in the admissible domain, then coordinate-wise
/// finite-difference ascent from the best `restarts` of them. Ties go to the
/// larger sigma, then to the lexicographically smaller point. Candidates for
/// iteration `iteration` come from a stream derived from `cfg.seed`.
/// Throws EmptyDomainError if every candidate is excluded.
AcquisitionChoice maximize_acquisition(const GpModel& model, const SamplingDomain& domain,
                                       double beta_i, const UcbConfig& cfg, int iteration);

struct UcbResult {
  GpModel model;
  std::vector<SamplingRecord> records;
  SamplingDomain domain;  // with exclusions
  double noise_sigma = 0.0;
  double final_beta = 0.0;
  double c_max = 0.0;
  int total_iterations = 0;
  /// Model snapshots after each stable sample: snapshot k holds k+1 points.
  /// Only filled when requested.
  std::vector<GpModel> snapshots;
};

struct UcbOptions {
  /// Certified region used for the early stability verdict when cfg.early_exit is set.
  RegionPredicate certified;
  bool keep_snapshots = false;
  /// Optional progress callback, called after each record.
  std::function<void(const SamplingRecord&)> on_record;
};

/// The sampling loop. Throws NotHurwitzError if the origin is not locally
/// asymptotically stable, BudgetExhaustedError if N stable samples are not
/// found within the iteration budget.
UcbResult run_gp_ucb(const VectorField& field, SamplingDomain domain, const UcbConfig& cfg,
                     const UcbOptions& options = {});

/// Beta for the final model, per the schedule in `meta`.
double final_beta(const GpModel& model, const CheckpointMeta& meta);

/// Largest V_hat over the stable records (0 when there are none).
double c_max(const std::vector<SamplingRecord>& records);

/// CSV `iter,stable,x_1..x_d,v_hat,acquisition`.
void write_records_csv(std::ostream& out, const std::vector<SamplingRecord>& records);
std::vector<SamplingRecord> read_records_csv(std::istream& in);

nlohmann::json config_to_json(const UcbConfig& cfg);
/// Reads the sampler section of a config file. Unknown keys are rejected.
UcbConfig config_from_json(const nlohmann::json& j);

}  // namespace roa
