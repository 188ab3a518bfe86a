#include <png.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>
#include <string>
#include <vector>

#include "cadc/error.hpp"
#include "cadc/image.hpp"

namespace cadc {

void write_png(const Image& img, const std::filesystem::path& path) {
  std::vector<std::uint8_t> buffer(static_cast<std::size_t>(img.pixels.size()));
  for (Eigen::Index i = 0; i < img.pixels.rows(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(img.pixels(i, c), 0.0, 1.0);
      buffer[static_cast<std::size_t>(i * 3 + c)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw Error(Errc::Io, "cannot write PNG '" + path.string() + "': " + image.message);
  }
}

Image read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(Errc::Io, "cannot read PNG '" + path.string() + "': " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    throw Error(Errc::Io, "cannot decode PNG '" + path.string() + "': " + image.message);
  }
  Image img(static_cast<int>(image.width), static_cast<int>(image.height));
  for (Eigen::Index i = 0; i < img.pixels.rows(); ++i) {
    for (int c = 0; c < 3; ++c) img.pixels(i, c) = buffer[static_cast<std::size_t>(i * 3 + c)] / 255.0;
  }
  return img;
}

void write_npy(const Image& img, const std::filesystem::path& path) {
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" +
                       std::to_string(img.height) + ", " + std::to_string(img.width) + ", 3), }";
  const std::size_t preamble = 10;
  const std::size_t total = ((preamble + header.size() + 1 + 63) / 64) * 64;
  header.append(total - preamble - header.size() - 1, ' ');
  header.push_back('\n');

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot open '" + path.string() + "' for writing");
  out.write("\x93NUMPY\x01\x00", 8);
  const auto len = static_cast<std::uint16_t>(header.size());
  const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  out.write(len_bytes, 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  // Row-major pixel storage already matches the C-order (H, W, 3) layout.
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size() * sizeof(double)));
  if (!out) throw Error(Errc::Io, "failed writing '" + path.string() + "'");
}

Image read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open '" + path.string() + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0 || magic[6] != 1) {
    throw Error(Errc::Io, "'" + path.string() + "' is not an NPY v1 file");
  }
  unsigned char len_bytes[2];
  in.read(reinterpret_cast<char*>(len_bytes), 2);
  std::string header(static_cast<std::size_t>(len_bytes[0] | (len_bytes[1] << 8)), '\0');
  in.read(header.data(), static_cast<std::streamsize>(header.size()));

  static const std::regex shape_re(R"('shape':\s*\((\d+),\s*(\d+),\s*3\))");
  std::smatch m;
  if (header.find("'<f8'") == std::string::npos ||
      header.find("'fortran_order': False") == std::string::npos ||
      !std::regex_search(header, m, shape_re)) {
    throw Error(Errc::Io, "'" + path.string() + "' must hold a C-order float64 (H, W, 3) array");
  }
  Image img(std::stoi(m[2].str()), std::stoi(m[1].str()));
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size() * sizeof(double)));
  if (!in) throw Error(Errc::Io, "'" + path.string() + "' is truncated");
  return img;
}

}  // namespace cadc
