#include "vinemap/noise_model.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>

namespace vinemap {

NoiseModel NoiseModel::from_covariance(const Eigen::MatrixXd& covariance) {
  if (covariance.rows() != covariance.cols() || covariance.rows() == 0)
    throw std::invalid_argument("noise covariance must be square and non-empty");
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() >
      1e-9 * std::max(1.0, covariance.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("noise covariance must be symmetric");
  // Sigma = L L^T  =>  Sigma^-1 = L^-T L^-1, so whitening is L^-1.
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("noise covariance must be positive definite");
  NoiseModel m;
  const Eigen::MatrixXd l = llt.matrixL();
  m.sqrt_information_ = l.triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd::Identity(covariance.rows(), covariance.cols()));
  return m;
}

NoiseModel NoiseModel::isotropic(int dim, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("noise sigma must be positive");
  NoiseModel m;
  m.sqrt_information_ = Eigen::MatrixXd::Identity(dim, dim) / sigma;
  return m;
}

NoiseModel NoiseModel::diagonal(const Eigen::VectorXd& sigmas) {
  if ((sigmas.array() <= 0.0).any()) throw std::invalid_argument("noise sigmas must be positive");
  NoiseModel m;
  m.sqrt_information_ = sigmas.cwiseInverse().asDiagonal();
  return m;
}

NoiseModel NoiseModel::with_huber(double threshold) const {
  if (!(threshold > 0.0)) throw std::invalid_argument("huber threshold must be positive");
  NoiseModel m = *this;
  m.huber_ = threshold;
  return m;
}

double NoiseModel::robust_weight(double e) const {
  if (!huber_ || e <= *huber_) return 1.0;
  return *huber_ / e;
}

double NoiseModel::robust_cost(double e) const {
  if (!huber_ || e <= *huber_) return 0.5 * e * e;
  return *huber_ * e - 0.5 * *huber_ * *huber_;
}

}  // namespace vinemap
