#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rsit/tensor.hpp"

namespace rsit::metrics {

/// Rows are samples.
using FeatureMatrix = Eigen::MatrixXd;

/// exp(mean_i KL(p_i || mean_j p_j)); rows of `probs` are class distributions.
/// `splits` > 1 averages the score over that many contiguous chunks.
double inception_score(const FeatureMatrix& probs, int splits = 1);

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Sample mean and unbiased covariance; needs at least two rows.
GaussianStats gaussian_stats(const FeatureMatrix& features);

/// Frechet distance between two Gaussians, eps added to both covariance diagonals.
double fid_from_stats(const GaussianStats& a, const GaussianStats& b, double eps = 1e-6);
double fid(const FeatureMatrix& a, const FeatureMatrix& b, double eps = 1e-6);

/// Polynomial kernel (x.y / d + 1)^3.
double kid_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y);
/// Unbiased MMD^2 estimate with kid_kernel. May be slightly negative.
double kid(const FeatureMatrix& a, const FeatureMatrix& b);

struct ConfusionSummary {
  long long fa = 0;  // unchanged pixels marked changed
  long long ma = 0;  // changed pixels marked unchanged
  long long oe = 0;  // fa + ma
  long long n = 0;
  double pcc = 100.0;

  static ConfusionSummary from_counts(long long fa, long long ma, long long n);
};

/// Binary [H, W] maps; entries > 0.5 count as changed.
ConfusionSummary score_change_map(const Tensor& predicted, const Tensor& truth);

}  // namespace rsit::metrics
