#pragma once

#include <array>
#include <cstdint>

#include "rsit/tensor.hpp"
#include "rsit/trainer.hpp"

namespace rsit::cd {

struct PcakmConfig {
  int block = 4;        // h
  int eigen_count = 3;  // S, 1 <= S <= h*h
  int max_iterations = 100;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
  std::array<double, 3> luminance{0.299, 0.587, 0.114};

  void validate() const;
};

/// |gray(a) - gray(b)| per pixel for two [3, H, W] images.
Tensor difference_image(const Tensor& a, const Tensor& b,
                        const std::array<double, 3>& luminance = {0.299, 0.587, 0.114});

/// PCA over non-overlapping h x h blocks of the (edge-padded) difference image, projection
/// of every pixel's h x h neighbourhood onto the top S eigenvectors, then 2-means. The
/// cluster with the larger mean difference is labelled changed (1).
Tensor pcakm(const Tensor& diff, const PcakmConfig& cfg = {});

/// Which acquisition gets translated before comparing.
enum class CdDirection {
  WinterToSummer,  // t2 (winter) through G_YX, compared with t1
  SummerToWinter,  // t1 (summer) through G_XY, compared with t2
};

/// t1 is the summer image and t2 the winter image.
Tensor detect_with_translation(const Tensor& t1, const Tensor& t2, const train::TranslationModel& model,
                               CdDirection direction, const PcakmConfig& cfg = {});

}  // namespace rsit::cd
