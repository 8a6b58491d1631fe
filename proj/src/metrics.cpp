#include "rsit/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rsit::metrics {

namespace {

void require_rows(const FeatureMatrix& m, Eigen::Index min_rows, const char* what) {
  if (m.rows() < min_rows || m.cols() < 1) {
    throw std::invalid_argument(std::string(what) + ": need at least " + std::to_string(min_rows) +
                                " samples with non-empty features");
  }
}

void require_same_dim(const FeatureMatrix& a, const FeatureMatrix& b, const char* what) {
  if (a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": feature dimension mismatch " + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.cols()));
  }
}

double split_score(const FeatureMatrix& p) {
  const Eigen::RowVectorXd marginal = p.colwise().mean();
  double kl_sum = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index k = 0; k < p.cols(); ++k) {
      const double pk = p(i, k);
      if (pk > 0.0) kl_sum += pk * (std::log(pk) - std::log(marginal(k)));
    }
  }
  return std::exp(kl_sum / static_cast<double>(p.rows()));
}

}  // namespace

double inception_score(const FeatureMatrix& probs, int splits) {
  require_rows(probs, 2, "inception_score");
  if (splits < 1 || splits > probs.rows()) throw std::invalid_argument("inception_score: bad split count");
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if ((probs.row(i).array() < 0.0).any() || std::abs(probs.row(i).sum() - 1.0) > 1e-6) {
      throw std::invalid_argument("inception_score: row " + std::to_string(i) + " is not a distribution");
    }
  }
  double total = 0.0;
  const Eigen::Index n = probs.rows();
  for (int s = 0; s < splits; ++s) {
    const Eigen::Index lo = n * s / splits, hi = n * (s + 1) / splits;
    total += split_score(probs.middleRows(lo, hi - lo));
  }
  return total / splits;
}

GaussianStats gaussian_stats(const FeatureMatrix& features) {
  require_rows(features, 2, "gaussian_stats");
  GaussianStats s;
  s.mean = features.colwise().mean().transpose();
  const FeatureMatrix centered = features.rowwise() - s.mean.transpose();
  s.cov = (centered.transpose() * centered) / static_cast<double>(features.rows() - 1);
  return s;
}

double fid_from_stats(const GaussianStats& a, const GaussianStats& b, double eps) {
  if (a.mean.size() != b.mean.size()) throw ShapeError("fid: feature dimension mismatch");
  const auto d = a.mean.size();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd sa = a.cov + eps * id, sb = b.cov + eps * id;
  // Tr sqrt(Sa Sb) = Tr sqrt(sqrt(Sa) Sb sqrt(Sa)); the inner matrix is symmetric PSD.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(sa);
  const Eigen::VectorXd la = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd root_a = ea.eigenvectors() * la.asDiagonal() * ea.eigenvectors().transpose();
  const Eigen::MatrixXd inner = root_a * sb * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ei(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = ei.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double mean_term = (a.mean - b.mean).squaredNorm();
  // Distance between the regularized Gaussians, so eps cancels for identical inputs.
  return mean_term + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
}

double fid(const FeatureMatrix& a, const FeatureMatrix& b, double eps) {
  require_same_dim(a, b, "fid");
  return fid_from_stats(gaussian_stats(a), gaussian_stats(b), eps);
}

double kid_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double v = x.dot(y) / static_cast<double>(x.size()) + 1.0;
  return v * v * v;
}

double kid(const FeatureMatrix& a, const FeatureMatrix& b) {
  require_rows(a, 2, "kid");
  require_rows(b, 2, "kid");
  require_same_dim(a, b, "kid");
  const double d = static_cast<double>(a.cols());
  auto kernel = [d](const FeatureMatrix& p, const FeatureMatrix& q) {
    return (((p * q.transpose()).array() / d + 1.0).cube()).matrix().eval();
  };
  const Eigen::MatrixXd kaa = kernel(a, a), kbb = kernel(b, b), kab = kernel(a, b);
  const double m = static_cast<double>(a.rows()), n = static_cast<double>(b.rows());
  const double saa = (kaa.sum() - kaa.trace()) / (m * (m - 1.0));
  const double sbb = (kbb.sum() - kbb.trace()) / (n * (n - 1.0));
  const double sab = kab.sum() / (m * n);
  return saa + sbb - 2.0 * sab;
}

ConfusionSummary ConfusionSummary::from_counts(long long fa, long long ma, long long n) {
  if (fa < 0 || ma < 0 || n < 1 || fa + ma > n) {
    throw std::invalid_argument("confusion counts must satisfy 0 <= FA + MA <= N, N >= 1");
  }
  ConfusionSummary s;
  s.fa = fa;
  s.ma = ma;
  s.oe = fa + ma;
  s.n = n;
  s.pcc = 100.0 * static_cast<double>(n - s.oe) / static_cast<double>(n);
  return s;
}

ConfusionSummary score_change_map(const Tensor& predicted, const Tensor& truth) {
  if (predicted.rank() != 2 || !predicted.same_shape(truth) || predicted.empty()) {
    throw ShapeError("score_change_map: need equal non-empty [H, W] maps, got " +
                     shape_str(predicted.shape()) + " and " + shape_str(truth.shape()));
  }
  long long fa = 0, ma = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] > 0.5, t = truth[i] > 0.5;
    fa += p && !t;
    ma += !p && t;
  }
  return ConfusionSummary::from_counts(fa, ma, static_cast<long long>(predicted.size()));
}

}  // namespace rsit::metrics
