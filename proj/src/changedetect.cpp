#include "rsit/changedetect.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <random>
#include <stdexcept>

namespace rsit::cd {

void PcakmConfig::validate() const {
  if (block < 2) throw std::invalid_argument("pcakm: block size h must be >= 2");
  if (eigen_count < 1 || eigen_count > block * block) {
    throw std::invalid_argument("pcakm: eigen_count S must lie in [1, h*h]");
  }
  if (max_iterations < 1) throw std::invalid_argument("pcakm: max_iterations must be >= 1");
  if (!(tolerance >= 0.0)) throw std::invalid_argument("pcakm: tolerance must be >= 0");
}

Tensor difference_image(const Tensor& a, const Tensor& b, const std::array<double, 3>& luminance) {
  if (a.rank() != 3 || a.dim(0) != 3 || !a.same_shape(b)) {
    throw ShapeError("difference_image: need two [3, H, W] images of equal shape, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const int h = a.dim(1), w = a.dim(2);
  Tensor out(Shape{h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double ga = 0.0, gb = 0.0;
      for (int c = 0; c < 3; ++c) {
        ga += luminance[static_cast<std::size_t>(c)] * a.at(c, y, x);
        gb += luminance[static_cast<std::size_t>(c)] * b.at(c, y, x);
      }
      out[static_cast<std::size_t>(y) * w + x] = std::abs(ga - gb);
    }
  return out;
}

namespace {

// Edge-replicated read.
double at_clamped(const Tensor& d, int y, int x) {
  y = std::clamp(y, 0, d.dim(0) - 1);
  x = std::clamp(x, 0, d.dim(1) - 1);
  return d[static_cast<std::size_t>(y) * d.dim(1) + x];
}

// 2-means with k-means++ seeding; returns labels or an empty vector when all points coincide.
std::vector<int> two_means(const Eigen::MatrixXd& pts, const PcakmConfig& cfg) {
  const Eigen::Index n = pts.rows();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  Eigen::MatrixXd centers(2, pts.cols());
  centers.row(0) = pts.row(first(rng));
  Eigen::VectorXd d2 = (pts.rowwise() - centers.row(0)).rowwise().squaredNorm();
  const double total = d2.sum();
  if (!(total > 0.0)) return {};
  std::uniform_real_distribution<double> u(0.0, total);
  double r = u(rng);
  Eigen::Index pick = n - 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    r -= d2(i);
    if (r < 0.0 && d2(i) > 0.0) {
      pick = i;
      break;
    }
  }
  if (d2(pick) == 0.0) {
    for (Eigen::Index i = n - 1; i >= 0; --i)
      if (d2(i) > 0.0) {
        pick = i;
        break;
      }
  }
  centers.row(1) = pts.row(pick);

  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = (pts.row(i) - centers.row(0)).squaredNorm();
      const double b = (pts.row(i) - centers.row(1)).squaredNorm();
      labels[static_cast<std::size_t>(i)] = b < a ? 1 : 0;
    }
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(2, pts.cols());
    double count[2] = {0.0, 0.0};
    for (Eigen::Index i = 0; i < n; ++i) {
      const int l = labels[static_cast<std::size_t>(i)];
      next.row(l) += pts.row(i);
      count[l] += 1.0;
    }
    for (int k = 0; k < 2; ++k) {
      if (count[k] > 0) next.row(k) /= count[k];
      else next.row(k) = centers.row(k);
    }
    const double shift = (next - centers).rowwise().norm().maxCoeff();
    centers = next;
    if (shift <= cfg.tolerance) break;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = (pts.row(i) - centers.row(0)).squaredNorm();
    const double b = (pts.row(i) - centers.row(1)).squaredNorm();
    labels[static_cast<std::size_t>(i)] = b < a ? 1 : 0;
  }
  return labels;
}

}  // namespace

Tensor pcakm(const Tensor& diff, const PcakmConfig& cfg) {
  cfg.validate();
  if (diff.rank() != 2 || diff.empty()) throw ShapeError("pcakm: expected a non-empty [H, W] map, got " + shape_str(diff.shape()));
  if (!diff.all_finite()) throw std::invalid_argument("pcakm: difference image has non-finite entries");
  const int height = diff.dim(0), width = diff.dim(1);
  Tensor out(Shape{height, width});
  const auto [lo, hi] = std::minmax_element(diff.storage().begin(), diff.storage().end());
  if (*lo == *hi) return out;

  const int h = cfg.block, dim = h * h;
  const int ph = (height + h - 1) / h * h, pw = (width + h - 1) / h * h;
  const int blocks = (ph / h) * (pw / h);
  Eigen::MatrixXd block_vecs(blocks, dim);
  int row = 0;
  for (int by = 0; by < ph; by += h)
    for (int bx = 0; bx < pw; bx += h, ++row)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < h; ++j) block_vecs(row, i * h + j) = at_clamped(diff, by + i, bx + j);
  const Eigen::RowVectorXd mean = block_vecs.colwise().mean();
  const Eigen::MatrixXd centered = block_vecs.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(blocks);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // Eigenvalues ascend; keep the S leading directions.
  const Eigen::MatrixXd basis = eig.eigenvectors().rightCols(cfg.eigen_count);

  const int off = h / 2;
  Eigen::MatrixXd neigh(static_cast<Eigen::Index>(height) * width, dim);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Eigen::Index p = static_cast<Eigen::Index>(y) * width + x;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < h; ++j) neigh(p, i * h + j) = at_clamped(diff, y - off + i, x - off + j);
    }
  const Eigen::MatrixXd features = (neigh.rowwise() - mean) * basis;

  const auto labels = two_means(features, cfg);
  if (labels.empty()) return out;
  double sum[2] = {0.0, 0.0}, count[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sum[labels[i]] += diff[i];
    count[labels[i]] += 1.0;
  }
  if (count[0] == 0.0 || count[1] == 0.0) return out;
  const int changed = sum[1] / count[1] > sum[0] / count[0] ? 1 : 0;
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] == changed ? 1.0 : 0.0;
  return out;
}

Tensor detect_with_translation(const Tensor& t1, const Tensor& t2, const train::TranslationModel& model,
                               CdDirection direction, const PcakmConfig& cfg) {
  if (!t1.same_shape(t2)) {
    throw ShapeError("detect_with_translation: acquisitions differ in shape " + shape_str(t1.shape()) +
                     " vs " + shape_str(t2.shape()));
  }
  if (direction == CdDirection::WinterToSummer) {
    return pcakm(difference_image(t1, model.translate(t2, train::Direction::YX), cfg.luminance), cfg);
  }
  return pcakm(difference_image(model.translate(t1, train::Direction::XY), t2, cfg.luminance), cfg);
}

}  // namespace rsit::cd
