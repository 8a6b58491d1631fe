#include "rsit/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <stdexcept>

namespace rsit::io {

std::uint8_t to_byte(double v) {
  const double u = std::round((std::clamp(v, -1.0, 1.0) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(u);
}

void quantize_to_bytes(Tensor& image) {
  for (double& v : image.storage()) v = from_byte(to_byte(v));
}

bool has_image_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

Tensor read_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("cannot decode image " + path.string());
  Tensor out(Shape{3, bgr.rows, bgr.cols});
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = from_byte(row[x][2 - c]);
    }
  }
  return out;
}

void write_image(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("write_image: expected [3, H, W], got " + shape_str(image.shape()));
  }
  cv::Mat bgr(image.dim(1), image.dim(2), CV_8UC3);
  for (int y = 0; y < bgr.rows; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      for (int c = 0; c < 3; ++c) row[x][2 - c] = to_byte(image.at(c, y, x));
    }
  }
  if (!cv::imwrite(path.string(), bgr)) throw std::runtime_error("cannot write " + path.string());
}

Tensor read_mask(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw std::runtime_error("cannot decode mask " + path.string());
  Tensor out(Shape{m.rows, m.cols});
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) out[static_cast<std::size_t>(y) * m.cols + x] = row[x] >= 128 ? 1.0 : 0.0;
  }
  return out;
}

void write_mask(const std::filesystem::path& path, const Tensor& mask) {
  if (mask.rank() != 2) throw ShapeError("write_mask: expected [H, W], got " + shape_str(mask.shape()));
  cv::Mat m(mask.dim(0), mask.dim(1), CV_8UC1);
  for (int y = 0; y < m.rows; ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) row[x] = mask[static_cast<std::size_t>(y) * m.cols + x] > 0.5 ? 255 : 0;
  }
  if (!cv::imwrite(path.string(), m)) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace rsit::io
