#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "rsit/features.hpp"
#include "rsit/metrics.hpp"

using namespace rsit;
using namespace rsit::metrics;

namespace {

FeatureMatrix random_matrix(int rows, int cols, std::mt19937_64& rng, double shift = 0.0, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = shift + scale * n(rng);
  return m;
}

FeatureMatrix shuffled_rows(const FeatureMatrix& m, std::mt19937_64& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  FeatureMatrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.row(i) = m.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

// Pairwise-sum oracle written out term by term.
double kid_oracle(const FeatureMatrix& a, const FeatureMatrix& b) {
  const auto d = static_cast<double>(a.cols());
  auto k = [d](const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y) {
    double dot = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) dot += x(i) * y(i);
    return std::pow(dot / d + 1.0, 3.0);
  };
  const auto m = a.rows(), n = b.rows();
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j) xx += k(a.row(i), a.row(j));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) yy += k(b.row(i), b.row(j));
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) xy += k(a.row(i), b.row(j));
  return xx / static_cast<double>(m * (m - 1)) + yy / static_cast<double>(n * (n - 1)) -
         2.0 * xy / static_cast<double>(m * n);
}

}  // namespace

TEST_CASE("inception score") {
  SUBCASE("identical distributions give 1") {
    FeatureMatrix p(5, 4);
    p.rowwise() = Eigen::RowVector4d(0.1, 0.2, 0.3, 0.4);
    CHECK(std::abs(inception_score(p) - 1.0) < 1e-9);
  }
  SUBCASE("two distinct one-hot rows give 2") {
    FeatureMatrix p(2, 3);
    p << 1, 0, 0, 0, 1, 0;
    CHECK(std::abs(inception_score(p) - 2.0) < 1e-9);
  }
  SUBCASE("k one-hot rows with uniform marginal give k") {
    FeatureMatrix p = FeatureMatrix::Identity(6, 6);
    CHECK(std::abs(inception_score(p) - 6.0) < 1e-9);
  }
  SUBCASE("at least 1 and order invariant") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
      FeatureMatrix logits = random_matrix(7, 5, rng, 0.0, 2.0);
      FeatureMatrix p = logits.array().exp();
      for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) /= p.row(i).sum();
      const double s = inception_score(p);
      CHECK(s >= 1.0 - 1e-12);
      CHECK(s <= 5.0);
      CHECK(inception_score(shuffled_rows(p, rng)) == doctest::Approx(s).epsilon(1e-12));
    }
  }
  SUBCASE("splits average chunk scores") {
    FeatureMatrix p(4, 2);
    p << 1, 0, 0, 1, 1, 0, 1, 0;
    const double first = inception_score(p.topRows(2)), second = inception_score(p.bottomRows(2));
    CHECK(inception_score(p, 2) == doctest::Approx(0.5 * (first + second)).epsilon(1e-14));
  }
  SUBCASE("input validation") {
    CHECK_THROWS(inception_score(FeatureMatrix(1, 3)));
    FeatureMatrix bad(2, 2);
    bad << 0.5, 0.6, 0.5, 0.5;
    CHECK_THROWS(inception_score(bad));
  }
}

TEST_CASE("frechet distance") {
  std::mt19937_64 rng(2);
  SUBCASE("identical sets") {
    FeatureMatrix a = random_matrix(40, 6, rng);
    CHECK(std::abs(fid(a, a)) <= 1e-6);
  }
  SUBCASE("closed-form 1-d Gaussians") {
    GaussianStats a{Eigen::VectorXd::Constant(1, 0.0), Eigen::MatrixXd::Constant(1, 1, 1.0)};
    GaussianStats b{Eigen::VectorXd::Constant(1, 1.0), Eigen::MatrixXd::Constant(1, 1, 1.0)};
    CHECK(std::abs(fid_from_stats(a, b) - 1.0) <= 1e-6);
  }
  SUBCASE("diagonal Gaussians match the per-axis formula") {
    Eigen::VectorXd ma(3), mb(3), sa(3), sb(3);
    ma << 0.5, -1.0, 2.0;
    mb << 0.0, 1.0, 2.5;
    sa << 1.0, 4.0, 0.25;
    sb << 2.0, 1.0, 0.5;
    GaussianStats a{ma, sa.cwiseAbs2().asDiagonal()}, b{mb, sb.cwiseAbs2().asDiagonal()};
    // Per-axis Frechet distance of the eps-regularized variances.
    double expect = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double ra = std::sqrt(sa(i) * sa(i) + 1e-6), rb = std::sqrt(sb(i) * sb(i) + 1e-6);
      expect += (ma(i) - mb(i)) * (ma(i) - mb(i)) + (ra - rb) * (ra - rb);
    }
    CHECK(fid_from_stats(a, b) == doctest::Approx(expect).epsilon(1e-8));
  }
  SUBCASE("symmetric, non-negative, order invariant") {
    for (int trial = 0; trial < 10; ++trial) {
      FeatureMatrix a = random_matrix(30, 5, rng), b = random_matrix(25, 5, rng, 0.3, 1.5);
      const double ab = fid(a, b);
      CHECK(ab >= -1e-6);
      CHECK(fid(b, a) == doctest::Approx(ab).epsilon(1e-9));
      CHECK(fid(shuffled_rows(a, rng), b) == doctest::Approx(ab).epsilon(1e-9));
    }
  }
  SUBCASE("small-sample singular covariance stays finite") {
    FeatureMatrix a = random_matrix(4, 16, rng), b = random_matrix(4, 16, rng);
    CHECK(std::isfinite(fid(a, b)));
  }
  SUBCASE("dimension mismatch") { CHECK_THROWS_AS(fid(random_matrix(5, 3, rng), random_matrix(5, 4, rng)), ShapeError); }
}

TEST_CASE("kernel inception distance") {
  std::mt19937_64 rng(3);
  SUBCASE("hand-sized case") {
    FeatureMatrix a(2, 1), b(2, 1);
    a << 1, 1;
    b << -1, -1;
    // k(a,a) = 8, k(b,b) = 8, k(a,b) = 0 => 8 + 8 - 0 = 16.
    CHECK(std::abs(kid(a, b) - 16.0) < 1e-9);
    CHECK(std::abs(kid(a, b) - kid_oracle(a, b)) < 1e-9);
  }
  SUBCASE("matches the pairwise oracle on small sets") {
    for (int trial = 0; trial < 30; ++trial) {
      const int m = 2 + static_cast<int>(rng() % 7), n = 2 + static_cast<int>(rng() % 7);
      const int d = 1 + static_cast<int>(rng() % 6);
      FeatureMatrix a = random_matrix(m, d, rng), b = random_matrix(n, d, rng, 0.5);
      CHECK(std::abs(kid(a, b) - kid_oracle(a, b)) < 1e-9);
      CHECK(std::abs(kid(a, a) - kid_oracle(a, a)) < 1e-9);
      CHECK(kid(b, a) == doctest::Approx(kid(a, b)).epsilon(1e-12));
      CHECK(kid(shuffled_rows(a, rng), b) == doctest::Approx(kid(a, b)).epsilon(1e-12));
    }
  }
  SUBCASE("same distribution gives a value near zero") {
    FeatureMatrix a = random_matrix(400, 4, rng), b = random_matrix(400, 4, rng);
    FeatureMatrix far = random_matrix(400, 4, rng, 1.0);
    CHECK(std::abs(kid(a, b)) < 0.05);
    CHECK(kid(a, far) > 10.0 * std::abs(kid(a, b)));
  }
}

TEST_CASE("confusion summary") {
  SUBCASE("perfect prediction") {
    Tensor t({4, 4});
    t[3] = 1.0;
    auto s = score_change_map(t, t);
    CHECK(s.fa == 0);
    CHECK(s.ma == 0);
    CHECK(s.oe == 0);
    CHECK(s.pcc == 100.0);
  }
  SUBCASE("all changed against all unchanged") {
    auto s = score_change_map(Tensor::full({8, 8}, 1.0), Tensor({8, 8}));
    CHECK(s.fa == 64);
    CHECK(s.pcc == 0.0);
  }
  SUBCASE("counts add up") {
    auto s = ConfusionSummary::from_counts(390, 146, 256 * 256);
    CHECK(s.oe == 536);
    CHECK(s.pcc == doctest::Approx(100.0 * (65536 - 536) / 65536.0).epsilon(1e-14));
  }
  SUBCASE("random maps") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
      Tensor p({9, 7}), t({9, 7});
      long long fa = 0, ma = 0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = static_cast<double>(rng() % 2);
        t[i] = static_cast<double>(rng() % 2);
        fa += p[i] == 1.0 && t[i] == 0.0;
        ma += p[i] == 0.0 && t[i] == 1.0;
      }
      auto s = score_change_map(p, t);
      CHECK(s.fa == fa);
      CHECK(s.ma == ma);
      CHECK(s.oe == s.fa + s.ma);
      CHECK(s.pcc >= 0.0);
      CHECK(s.pcc <= 100.0);
    }
  }
  SUBCASE("shape mismatch") { CHECK_THROWS_AS(score_change_map(Tensor({4, 4}), Tensor({4, 5})), ShapeError); }
}

TEST_CASE("tiny-cnn extractor") {
  auto ex = features::make_extractor("tiny-cnn");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Tensor> images;
  for (int i = 0; i < 4; ++i) {
    Tensor t({3, 32, 32});
    for (double& v : t.storage()) v = u(rng);
    images.push_back(t);
  }
  auto set = features::extract_all(*ex, images);
  CHECK(set.features.rows() == 4);
  CHECK(set.features.cols() == ex->feature_dim());
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(std::abs(set.probs.row(i).sum() - 1.0) < 1e-6);
  auto again = features::make_extractor("tiny-cnn")->extract(images[2]);
  CHECK((again.features - set.features.row(2).transpose()).norm() == 0.0);
  // Batch composition does not change per-image features.
  auto single = features::extract_all(*ex, {images[1]});
  CHECK((single.features.row(0) - set.features.row(1)).norm() == 0.0);
  CHECK(fid(set.features, set.features) <= 1e-6);
}

TEST_CASE("extractor selection") {
  CHECK_THROWS_AS(features::make_extractor("vgg"), std::invalid_argument);
  try {
    features::make_extractor("pretrained-inception", "/nonexistent/inception.rsit");
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("tiny-cnn") != std::string::npos);
  }
}
