#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace roa {

/// Covariance function. Squared exponential exp(-|x-x'|^2 / 2l^2) or linear x.x'.
class Kernel {
 public:
  enum class Kind { SquaredExponential, Linear };

  static Kernel squared_exponential(double length_scale = 1.0);
  static Kernel linear();

  Kind kind() const { return kind_; }
  double length_scale() const { return length_scale_; }

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& a,
                    const Eigen::Ref<const Eigen::VectorXd>& b) const;

  /// Gram matrix over the columns of `points`.
  Eigen::MatrixXd gram(const Eigen::MatrixXd& points) const;
  /// k(x_i, x) for every column x_i of `points`.
  Eigen::VectorXd cross(const Eigen::MatrixXd& points,
                        const Eigen::Ref<const Eigen::VectorXd>& x) const;

  nlohmann::json to_json() const;
  static Kernel from_json(const nlohmann::json& j);

 private:
  Kernel(Kind kind, double length_scale) : kind_(kind), length_scale_(length_scale) {}

  Kind kind_;
  double length_scale_;
};

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;

  double std_dev() const;
};

/// Zero-mean GP regression snapshot. Holds the lower Cholesky factor of
/// K_N + (sigma^2 + jitter) I and the weights (K_N + sigma^2 I)^{-1} y.
/// Immutable: add_observation returns a new snapshot.
class GpModel {
 public:
  GpModel(Kernel kernel, double noise_sigma, int input_dim);

  /// Factorizes from scratch. Throws FactorizationError if the jitter ladder
  /// (1e-10 * trace / N, x10 up to 1e-6) is exhausted.
  static GpModel fit(Kernel kernel, double noise_sigma, Eigen::MatrixXd inputs,
                     Eigen::VectorXd observations);

  /// Appends one pair with a rank-one extension of the factor, falling back
  /// to refactorization. Rejects non-finite inputs or values.
  GpModel add_observation(const Eigen::VectorXd& x, double v) const;

  Posterior posterior(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Model over the first `count` observations.
  GpModel prefix(int count) const;

  int size() const { return static_cast<int>(observations_.size()); }
  int input_dim() const { return input_dim_; }
  const Kernel& kernel() const { return kernel_; }
  double noise_sigma() const { return noise_sigma_; }
  double jitter() const { return jitter_; }
  const Eigen::MatrixXd& inputs() const { return inputs_; }  // input_dim x N
  const Eigen::VectorXd& observations() const { return observations_; }
  const Eigen::MatrixXd& cholesky_factor() const { return factor_; }
  Eigen::MatrixXd gram() const { return kernel_.gram(inputs_); }

 private:
  void factorize();
  void refresh_weights();

  Kernel kernel_;
  double noise_sigma_;
  int input_dim_;
  Eigen::MatrixXd inputs_;
  Eigen::VectorXd observations_;
  Eigen::MatrixXd factor_;
  Eigen::VectorXd weights_;
  double jitter_ = 0.0;
};

/// Squared RKHS norm of the kernel ridge regression fit with parameter theta,
/// through the eigendecomposition of K_N (eigenvalues floored at 0).
double rkhs_norm_sq(const GpModel& model, double theta);
/// Same quantity as c^T K_N c with c = (K_N + N theta I)^{-1} y.
double rkhs_norm_sq_solve(const GpModel& model, double theta);

/// 1/2 sum log(1 + lambda_i / sigma^2) over eigenvalues of K.
double info_gain(const Eigen::MatrixXd& gram, double noise_sigma);
double info_gain(const GpModel& model);

/// N / (2 sigma^2).
double gamma_bound(int n, double noise_sigma);

/// 2 ||V||_k^2 + 300 gamma ln^3(N / delta).
double beta(int n, double delta, double rkhs_norm_sq_bound, double gamma);

/// How the exploration weight is chosen at each iteration.
struct BetaSchedule {
  enum class Mode { Theoretical, Fixed, Scaled };

  Mode mode = Mode::Fixed;
  double value = 4.0;  // fixed beta, or the multiplier in scaled mode

  /// Beta for sample count n given the current RKHS-norm bound and noise.
  double evaluate(int n, double delta, double rkhs_bound, double noise_sigma) const;

  nlohmann::json to_json() const;
  static BetaSchedule from_json(const nlohmann::json& j);
};

/// Parameters that travel with a checkpoint and define beta_N at the end of a run.
struct CheckpointMeta {
  double theta = 0.1;
  double delta = 0.05;
  double rkhs_prior_bound = 10.0;
  int rkhs_refresh_min = 5;
  BetaSchedule beta;
};

/// RKHS bound used by beta: the prior bound until the model holds
/// `refresh_min` points, then the kernel ridge estimate.
double rkhs_bound_for(const GpModel& model, const CheckpointMeta& meta);

nlohmann::json model_to_json(const GpModel& model, const CheckpointMeta& meta);
GpModel model_from_json(const nlohmann::json& j, CheckpointMeta* meta = nullptr);

}  // namespace roa
