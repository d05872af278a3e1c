#include "nowcast/datasets/pnm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "nowcast/error.hpp"

namespace nowcast::datasets {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1u << 30)) throw FormatError(std::string("pnm: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("pnm: expected ") + what, start);
    return value;
  }

  std::size_t pos_ = 0;

 private:
  const std::vector<std::uint8_t>& bytes_;
};

void write_pnm(const Image& img, const std::string& path, char kind, std::size_t channels) {
  if (img.channels != channels) {
    throw std::invalid_argument(std::string("write P") + kind + ": expected " +
                                std::to_string(channels) + " channel(s)");
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << 'P' << kind << '\n' << img.width << ' ' << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace

Image decode_pnm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("pnm: expected P5 or P6 magic", 0);
  }
  HeaderReader r(bytes);
  r.pos_ = 2;
  Image img;
  img.channels = bytes[1] == '5' ? 1 : 3;
  img.width = r.number("width");
  img.height = r.number("height");
  const std::size_t maxval_at = r.pos_;
  const std::size_t maxval = r.number("maxval");
  if (maxval != 255) throw FormatError("pnm: only maxval 255 is supported", maxval_at);
  if (img.width == 0 || img.height == 0) throw FormatError("pnm: empty image", maxval_at);
  if (r.pos_ >= bytes.size() || !std::isspace(bytes[r.pos_])) {
    throw FormatError("pnm: expected whitespace after header", r.pos_);
  }
  ++r.pos_;
  const std::size_t n = img.width * img.height * img.channels;
  if (bytes.size() - r.pos_ < n) throw FormatError("pnm: truncated pixel data", bytes.size());
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos_),
                    bytes.begin() + static_cast<std::ptrdiff_t>(r.pos_ + n));
  return img;
}

Image read_pnm(const std::string& path) { return decode_pnm(read_file(path)); }

std::vector<std::uint8_t> encode_pgm(const Image& gray) {
  if (gray.channels != 1) throw std::invalid_argument("encode_pgm: expected a gray image");
  const std::string header =
      "P5\n" + std::to_string(gray.width) + " " + std::to_string(gray.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), gray.pixels.begin(), gray.pixels.end());
  return out;
}

void write_pgm(const Image& gray, const std::string& path) { write_pnm(gray, path, '5', 1); }
void write_ppm(const Image& rgb, const std::string& path) { write_pnm(rgb, path, '6', 3); }

Image to_gray(const Image& image) {
  if (image.channels == 1) return image;
  if (image.channels != 3) throw std::invalid_argument("to_gray: expected 1 or 3 channels");
  Image g;
  g.width = image.width;
  g.height = image.height;
  g.pixels.resize(image.width * image.height);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    const auto* p = &image.pixels[3 * i];
    const double y = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    g.pixels[i] = static_cast<std::uint8_t>(std::min(255.0, std::floor(y + 0.5)));
  }
  return g;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace nowcast::datasets
