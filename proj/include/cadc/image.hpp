#pragma once

#include <cmath>
#include <filesystem>
#include <limits>

#include <Eigen/Core>

namespace cadc {

/// RGB image stored one pixel per row (row index = y * width + x).
template <typename Scalar>
struct ImageT {
  using Pixels = Eigen::Array<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;

  int width = 0;
  int height = 0;
  Pixels pixels;

  ImageT() = default;
  ImageT(int w, int h) : width(w), height(h), pixels(Pixels::Zero(Eigen::Index(w) * h, 3)) {}

  static ImageT filled(int w, int h, const Eigen::Matrix<Scalar, 3, 1>& color) {
    ImageT img(w, h);
    img.pixels.rowwise() = color.transpose().array();
    return img;
  }

  Eigen::Index index(int x, int y) const { return Eigen::Index(y) * width + x; }
  auto at(int x, int y) { return pixels.row(index(x, y)); }
  auto at(int x, int y) const { return pixels.row(index(x, y)); }

  bool same_shape(const ImageT& other) const {
    return width == other.width && height == other.height;
  }
};

using Image = ImageT<double>;

/// Pixel keep-mask, height rows by width columns; true = pixel supervises.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// PSNR in dB for unit-range images; +inf for identical inputs.
template <typename Scalar>
Scalar psnr(const ImageT<Scalar>& a, const ImageT<Scalar>& b) {
  const Scalar mse = (a.pixels - b.pixels).square().mean();
  if (mse == Scalar(0)) return std::numeric_limits<Scalar>::infinity();
  return Scalar(-10) * std::log10(mse);
}

// 8-bit RGB PNG. Values are clamped to [0, 1] and rounded.
void write_png(const Image& img, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

// NPY (format 1.0), little-endian float64 of shape (height, width, 3).
void write_npy(const Image& img, const std::filesystem::path& path);
Image read_npy(const std::filesystem::path& path);

}  // namespace cadc
