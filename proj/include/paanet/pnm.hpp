#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace paanet {

struct PnmImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 = PGM, 3 = PPM
  std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

namespace detail {

inline int pnm_token(std::istream& is, const std::string& path) {
  // Skips whitespace and '#' comments, then reads one non-negative integer.
  int c = is.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = is.get();
    } else if (std::isspace(c)) {
      c = is.get();
    } else {
      break;
    }
  }
  if (c == EOF || !std::isdigit(c))
    throw std::runtime_error(path + ": malformed header (expected integer)");
  long v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    if (v > 1 << 24) throw std::runtime_error(path + ": implausible header value");
    c = is.get();
  }
  if (c == EOF) throw std::runtime_error(path + ": truncated header");
  return static_cast<int>(v);
}

}  // namespace detail

inline PnmImage read_pnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path + ": cannot open");
  char magic[2] = {0, 0};
  is.read(magic, 2);
  PnmImage img;
  if (magic[0] == 'P' && magic[1] == '6')
    img.channels = 3;
  else if (magic[0] == 'P' && magic[1] == '5')
    img.channels = 1;
  else
    throw std::runtime_error(path + ": not a binary PPM/PGM (magic must be P6 or P5)");
  img.width = detail::pnm_token(is, path);
  img.height = detail::pnm_token(is, path);
  const int maxval = detail::pnm_token(is, path);
  if (maxval != 255) throw std::runtime_error(path + ": unsupported maxval " + std::to_string(maxval));
  if (img.width <= 0 || img.height <= 0) throw std::runtime_error(path + ": empty image");
  // pnm_token consumed exactly one whitespace byte after the maxval.
  const std::size_t count =
      static_cast<std::size_t>(img.width) * img.height * img.channels;
  img.pixels.resize(count);
  is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(is.gcount()) != count)
    throw std::runtime_error(path + ": truncated pixel data");
  return img;
}

inline void write_pnm(const std::string& path, const PnmImage& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument(path + ": only 1- or 3-channel images are supported");
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * img.channels)
    throw std::invalid_argument(path + ": pixel buffer does not match dimensions");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path + ": cannot write");
  os << (img.channels == 3 ? "P6" : "P5") << "\n" << img.width << " " << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw std::runtime_error(path + ": write failed");
}

}  // namespace paanet
