#pragma once

#include <Eigen/Core>

#include <optional>

namespace vinemap {

/// Gaussian noise model stored as an upper-triangular square-root
/// information matrix, optionally wrapped in a Huber kernel. The Huber
/// threshold is expressed in whitened units.
class NoiseModel {
 public:
  NoiseModel() = default;

  static NoiseModel from_covariance(const Eigen::MatrixXd& covariance);
  static NoiseModel isotropic(int dim, double sigma);
  static NoiseModel diagonal(const Eigen::VectorXd& sigmas);

  NoiseModel with_huber(double threshold) const;

  int dim() const { return static_cast<int>(sqrt_information_.rows()); }
  const Eigen::MatrixXd& sqrt_information() const { return sqrt_information_; }
  std::optional<double> huber_threshold() const { return huber_; }

  Eigen::VectorXd whiten(const Eigen::VectorXd& r) const { return sqrt_information_ * r; }
  Eigen::MatrixXd whiten(const Eigen::MatrixXd& j) const { return sqrt_information_ * j; }

  /// IRLS weight for a whitened residual of norm e.
  double robust_weight(double e) const;
  /// Robustified cost for a whitened residual of norm e (0.5 e^2 without a kernel).
  double robust_cost(double e) const;

 private:
  Eigen::MatrixXd sqrt_information_;
  std::optional<double> huber_;
};

}  // namespace vinemap
