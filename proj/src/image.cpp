#include "mathrec/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mathrec::data {

void write_pgm(const Image& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("IoFailure", "cannot open '" + path + "' for writing");
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(image.width));
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      const float v = std::clamp(image.at(r, c), 0.0f, 1.0f);
      row[static_cast<size_t>(c)] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(row.data()), image.width);
  }
  if (!out) fail("IoFailure", "write failed for '" + path + "'");
}

Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("IoFailure", "cannot open '" + path + "'");
  std::string magic;
  in >> magic;
  if (magic != "P5") fail("CorruptRecord", "'" + path + "' is not a P5 PGM");
  // Skip whitespace and '#' comment lines between header fields.
  auto next_int = [&]() {
    int value = 0;
    while (true) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
        continue;
      }
      if (std::isspace(c)) {
        in.get();
        continue;
      }
      break;
    }
    if (!(in >> value)) fail("CorruptRecord", "truncated PGM header in '" + path + "'");
    return value;
  };
  const int width = next_int();
  const int height = next_int();
  const int maxval = next_int();
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255)
    fail("CorruptRecord", "bad PGM dimensions in '" + path + "'");
  in.get();  // single whitespace after maxval
  Image image(height, width);
  std::vector<unsigned char> raw(static_cast<size_t>(width) * height);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    fail("CorruptRecord", "truncated PGM payload in '" + path + "'");
  for (size_t i = 0; i < raw.size(); ++i)
    image.pixels[i] = static_cast<float>(raw[i]) / static_cast<float>(maxval);
  return image;
}

}  // namespace mathrec::data
