#include "roa/gp.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "roa/errors.hpp"

namespace roa {

using nlohmann::json;

Kernel Kernel::squared_exponential(double length_scale) {
  if (!(length_scale > 0.0)) throw ConfigError("length scale must be positive");
  return Kernel(Kind::SquaredExponential, length_scale);
}

Kernel Kernel::linear() { return Kernel(Kind::Linear, 1.0); }

double Kernel::operator()(const Eigen::Ref<const Eigen::VectorXd>& a,
                          const Eigen::Ref<const Eigen::VectorXd>& b) const {
  if (kind_ == Kind::Linear) return a.dot(b);
  return std::exp(-(a - b).squaredNorm() / (2.0 * length_scale_ * length_scale_));
}

Eigen::MatrixXd Kernel::gram(const Eigen::MatrixXd& points) const {
  const Eigen::Index n = points.cols();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = (*this)(points.col(j), points.col(j));
    for (Eigen::Index i = j + 1; i < n; ++i) {
      k(i, j) = k(j, i) = (*this)(points.col(i), points.col(j));
    }
  }
  return k;
}

Eigen::VectorXd Kernel::cross(const Eigen::MatrixXd& points,
                              const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd k(points.cols());
  for (Eigen::Index i = 0; i < points.cols(); ++i) k[i] = (*this)(points.col(i), x);
  return k;
}

json Kernel::to_json() const {
  if (kind_ == Kind::Linear) return {{"kind", "linear"}};
  return {{"kind", "squared_exponential"}, {"length_scale", length_scale_}};
}

Kernel Kernel::from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "linear") return linear();
  if (kind == "squared_exponential") return squared_exponential(j.value("length_scale", 1.0));
  throw ConfigError("unknown kernel kind '" + kind + "'");
}

double Posterior::std_dev() const { return std::sqrt(std::max(variance, 0.0)); }

GpModel::GpModel(Kernel kernel, double noise_sigma, int input_dim)
    : kernel_(kernel),
      noise_sigma_(noise_sigma),
      input_dim_(input_dim),
      inputs_(input_dim, 0),
      observations_(0),
      factor_(0, 0),
      weights_(0) {
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("GP noise sigma must be positive");
  }
  if (input_dim <= 0) throw DimensionError("GP input dimension must be positive");
}

GpModel GpModel::fit(Kernel kernel, double noise_sigma, Eigen::MatrixXd inputs,
                     Eigen::VectorXd observations) {
  GpModel model(kernel, noise_sigma, static_cast<int>(inputs.rows()));
  if (inputs.cols() != observations.size()) {
    throw DimensionError("inputs and observations disagree on N");
  }
  if (!inputs.allFinite() || !observations.allFinite()) {
    throw ConfigError("GP training data must be finite");
  }
  model.inputs_ = std::move(inputs);
  model.observations_ = std::move(observations);
  model.factorize();
  return model;
}

void GpModel::factorize() {
  const Eigen::Index n = inputs_.cols();
  if (n == 0) {
    factor_.resize(0, 0);
    weights_.resize(0);
    jitter_ = 0.0;
    return;
  }
  Eigen::MatrixXd k = kernel_.gram(inputs_);
  k.diagonal().array() += noise_sigma_ * noise_sigma_;
  const double base = 1e-10 * k.trace() / static_cast<double>(n);

  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd shifted = k;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) {
      factor_ = llt.matrixL();
      jitter_ = jitter;
      break;
    }
    jitter = jitter == 0.0 ? base : jitter * 10.0;
    if (jitter > 1e-6 * std::max(1.0, k.trace() / static_cast<double>(n))) {
      throw FactorizationError("kernel matrix not positive definite after jitter 1e-6");
    }
  }
  refresh_weights();
}

void GpModel::refresh_weights() {
  weights_ = factor_.triangularView<Eigen::Lower>().solve(observations_);
  factor_.transpose().triangularView<Eigen::Upper>().solveInPlace(weights_);
}

GpModel GpModel::add_observation(const Eigen::VectorXd& x, double v) const {
  if (x.size() != input_dim_) throw DimensionError("observation input has wrong dimension");
  if (!std::isfinite(v) || !x.allFinite()) {
    throw ConfigError("observation must be finite");
  }
  GpModel next = *this;
  const Eigen::Index n = inputs_.cols();
  next.inputs_.conservativeResize(Eigen::NoChange, n + 1);
  next.inputs_.col(n) = x;
  next.observations_.conservativeResize(n + 1);
  next.observations_[n] = v;

  if (n == 0) {
    next.factorize();
    return next;
  }

  const Eigen::VectorXd kx = kernel_.cross(inputs_, x);
  const Eigen::VectorXd row = factor_.triangularView<Eigen::Lower>().solve(kx);
  const double diag_sq =
      kernel_(x, x) + noise_sigma_ * noise_sigma_ + jitter_ - row.squaredNorm();
  // Refactorize when the extension loses too much precision.
  if (!(diag_sq > 1e-12 * (kernel_(x, x) + noise_sigma_ * noise_sigma_)) || !row.allFinite()) {
    next.factorize();
    return next;
  }
  next.factor_ = Eigen::MatrixXd::Zero(n + 1, n + 1);
  next.factor_.topLeftCorner(n, n) = factor_;
  next.factor_.block(n, 0, 1, n) = row.transpose();
  next.factor_(n, n) = std::sqrt(diag_sq);
  next.refresh_weights();
  return next;
}

Posterior GpModel::posterior(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const double prior = kernel_(x, x);
  if (inputs_.cols() == 0) return {0.0, prior};
  const Eigen::VectorXd kx = kernel_.cross(inputs_, x);
  const Eigen::VectorXd v = factor_.triangularView<Eigen::Lower>().solve(kx);
  const double variance = prior - v.squaredNorm();
  return {kx.dot(weights_), std::max(variance, 0.0)};
}

GpModel GpModel::prefix(int count) const {
  if (count < 0 || count > size()) throw IndexError("prefix length out of range");
  if (count == 0) return GpModel(kernel_, noise_sigma_, input_dim_);
  return fit(kernel_, noise_sigma_, inputs_.leftCols(count), observations_.head(count));
}

double rkhs_norm_sq(const GpModel& model, double theta) {
  if (!(theta > 0.0)) throw ConfigError("theta must be positive");
  if (model.size() == 0) return 0.0;
  const double n_theta = static_cast<double>(model.size()) * theta;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model.gram());
  const Eigen::VectorXd projected = eig.eigenvectors().transpose() * model.observations();
  double total = 0.0;
  for (Eigen::Index i = 0; i < projected.size(); ++i) {
    const double lambda = std::max(eig.eigenvalues()[i], 0.0);
    total += projected[i] * projected[i] * lambda / ((lambda + n_theta) * (lambda + n_theta));
  }
  return total;
}

double rkhs_norm_sq_solve(const GpModel& model, double theta) {
  if (!(theta > 0.0)) throw ConfigError("theta must be positive");
  if (model.size() == 0) return 0.0;
  const Eigen::MatrixXd k = model.gram();
  Eigen::MatrixXd shifted = k;
  shifted.diagonal().array() += static_cast<double>(model.size()) * theta;
  const Eigen::VectorXd c = shifted.ldlt().solve(model.observations());
  return c.dot(k * c);
}

double info_gain(const Eigen::MatrixXd& gram, double noise_sigma) {
  if (gram.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  double total = 0.0;
  for (double lambda : eig.eigenvalues()) {
    total += std::log1p(std::max(lambda, 0.0) / (noise_sigma * noise_sigma));
  }
  return 0.5 * total;
}

double info_gain(const GpModel& model) { return info_gain(model.gram(), model.noise_sigma()); }

double gamma_bound(int n, double noise_sigma) {
  return static_cast<double>(n) / (2.0 * noise_sigma * noise_sigma);
}

double beta(int n, double delta, double rkhs_norm_sq_bound, double gamma) {
  const double log_term = std::log(static_cast<double>(n) / delta);
  return 2.0 * rkhs_norm_sq_bound + 300.0 * gamma * log_term * log_term * log_term;
}

double BetaSchedule::evaluate(int n, double delta, double rkhs_bound, double noise_sigma) const {
  switch (mode) {
    case Mode::Fixed:
      return value;
    case Mode::Theoretical:
      return beta(n, delta, rkhs_bound, gamma_bound(n, noise_sigma));
    case Mode::Scaled:
      return value * beta(n, delta, rkhs_bound, gamma_bound(n, noise_sigma));
  }
  return value;
}

json BetaSchedule::to_json() const {
  switch (mode) {
    case Mode::Fixed:
      return {{"mode", "fixed"}, {"value", value}};
    case Mode::Theoretical:
      return {{"mode", "theoretical"}};
    case Mode::Scaled:
      return {{"mode", "scaled"}, {"value", value}};
  }
  return {};
}

BetaSchedule BetaSchedule::from_json(const json& j) {
  BetaSchedule s;
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "fixed") {
    s.mode = Mode::Fixed;
    s.value = j.value("value", 4.0);
  } else if (mode == "theoretical") {
    s.mode = Mode::Theoretical;
    s.value = 1.0;
  } else if (mode == "scaled") {
    s.mode = Mode::Scaled;
    s.value = j.at("value").get<double>();
  } else {
    throw ConfigError("unknown beta mode '" + mode + "'");
  }
  if (!(s.value >= 0.0)) throw ConfigError("beta value must be non-negative");
  return s;
}

double rkhs_bound_for(const GpModel& model, const CheckpointMeta& meta) {
  if (model.size() < meta.rkhs_refresh_min) return meta.rkhs_prior_bound;
  return rkhs_norm_sq(model, meta.theta);
}

json model_to_json(const GpModel& model, const CheckpointMeta& meta) {
  json inputs = json::array();
  for (Eigen::Index i = 0; i < model.inputs().cols(); ++i) {
    inputs.push_back(std::vector<double>(model.inputs().col(i).data(),
                                         model.inputs().col(i).data() + model.input_dim()));
  }
  return {{"kernel", model.kernel().to_json()},
          {"noise_sigma", model.noise_sigma()},
          {"theta", meta.theta},
          {"delta", meta.delta},
          {"rkhs_prior_bound", meta.rkhs_prior_bound},
          {"rkhs_refresh_min", meta.rkhs_refresh_min},
          {"beta", meta.beta.to_json()},
          {"input_dim", model.input_dim()},
          {"inputs", inputs},
          {"observations", std::vector<double>(model.observations().data(),
                                               model.observations().data() + model.size())}};
}

GpModel model_from_json(const json& j, CheckpointMeta* meta) {
  try {
    const Kernel kernel = Kernel::from_json(j.at("kernel"));
    const double sigma = j.at("noise_sigma").get<double>();
    const int dim = j.at("input_dim").get<int>();
    const auto rows = j.at("inputs").get<std::vector<std::vector<double>>>();
    const auto obs = j.at("observations").get<std::vector<double>>();
    if (rows.size() != obs.size()) throw ConsistencyError("checkpoint inputs/observations differ");
    Eigen::MatrixXd inputs(dim, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (static_cast<int>(rows[i].size()) != dim) throw DimensionError("checkpoint input width");
      for (int r = 0; r < dim; ++r) inputs(r, static_cast<Eigen::Index>(i)) = rows[i][r];
    }
    if (meta) {
      meta->theta = j.value("theta", 0.1);
      meta->delta = j.value("delta", 0.05);
      meta->rkhs_prior_bound = j.value("rkhs_prior_bound", 10.0);
      meta->rkhs_refresh_min = j.value("rkhs_refresh_min", 5);
      if (j.contains("beta")) meta->beta = BetaSchedule::from_json(j.at("beta"));
    }
    return GpModel::fit(kernel, sigma, std::move(inputs),
                        Eigen::Map<const Eigen::VectorXd>(obs.data(),
                                                          static_cast<Eigen::Index>(obs.size())));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model checkpoint: ") + e.what());
  }
}

}  // namespace roa
