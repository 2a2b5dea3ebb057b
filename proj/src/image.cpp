#include "rrtrack/image.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "rrtrack/errors.hpp"

namespace rrtrack {

Image::Image(int w, int h, std::uint8_t fill) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

Image Image::flipped_horizontally() const {
  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(width - 1 - x, y, c) = at(x, y, c);
    }
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (!os) throw FormatError("write failed: " + path.string());
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& is) {
  std::string tok;
  int ch;
  while ((ch = is.get()) != EOF) {
    if (ch == '#') {
      while ((ch = is.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  if (header_token(is) != "P6") throw FormatError(path.string() + ": not a binary PPM (P6)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(header_token(is));
    h = std::stoi(header_token(is));
    maxval = std::stoi(header_token(is));
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed PPM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw FormatError(path.string() + ": unsupported PPM dimensions/maxval");
  Image img(w, h);
  is.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (is.gcount() != static_cast<std::streamsize>(img.rgb.size())) throw FormatError(path.string() + ": truncated");
  return img;
}

}  // namespace rrtrack
