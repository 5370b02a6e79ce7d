#include <algorithm>
#include <cstdint>
#include <fstream>

#include "lcmae/image.hpp"

namespace lcmae {

namespace {

uint16_t quantize16(float v) {
  float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<uint16_t>(std::lround(c * 65535.0f));
}

void write_header(std::ofstream& f, const char* magic, int w, int h) {
  f << magic << "\n" << w << " " << h << "\n65535\n";
}

int read_token(std::istream& f) {
  // skips whitespace and '#' comments
  for (;;) {
    int c = f.peek();
    if (c == '#') {
      std::string line;
      std::getline(f, line);
    } else if (std::isspace(c)) {
      f.get();
    } else {
      break;
    }
  }
  int v;
  if (!(f >> v)) throw FormatError("pnm: bad header token");
  return v;
}

void read_payload(std::istream& f, int maxval, size_t count, std::vector<float>& out) {
  out.resize(count);
  f.get();  // single whitespace after maxval
  if (maxval < 256) {
    std::vector<uint8_t> raw(count);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
    if (!f) throw FormatError("pnm: truncated payload");
    for (size_t i = 0; i < count; ++i) out[i] = raw[i] / static_cast<float>(maxval);
  } else {
    std::vector<uint8_t> raw(count * 2);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * 2));
    if (!f) throw FormatError("pnm: truncated payload");
    for (size_t i = 0; i < count; ++i) {
      uint16_t v = static_cast<uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
      out[i] = v / static_cast<float>(maxval);
    }
  }
}

}  // namespace

void write_pgm(const std::string& path, const Image& img, int channel) {
  if (channel < 0 || channel >= img.channels) throw ShapeError("write_pgm: bad channel");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("write_pgm: cannot open " + path);
  write_header(f, "P5", img.width, img.height);
  const float* p = img.plane(channel);
  for (size_t i = 0; i < static_cast<size_t>(img.height) * img.width; ++i) {
    uint16_t v = quantize16(p[i]);
    f.put(static_cast<char>(v >> 8));
    f.put(static_cast<char>(v & 0xff));
  }
}

void write_ppm(const std::string& path, const Image& img) {
  if (img.channels != 3) throw ShapeError("write_ppm: needs 3 channels");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("write_ppm: cannot open " + path);
  write_header(f, "P6", img.width, img.height);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        uint16_t v = quantize16(img.at(ch, r, c));
        f.put(static_cast<char>(v >> 8));
        f.put(static_cast<char>(v & 0xff));
      }
}

Image read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("read_pgm: cannot open " + path);
  std::string magic(2, '\0');
  f.read(magic.data(), 2);
  if (magic != "P5") throw FormatError("read_pgm: not a binary PGM");
  int w = read_token(f), h = read_token(f), maxval = read_token(f);
  std::vector<float> vals;
  read_payload(f, maxval, static_cast<size_t>(w) * h, vals);
  Image img(h, w, 1);
  std::copy(vals.begin(), vals.end(), img.d.begin());
  return img;
}

Image read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("read_ppm: cannot open " + path);
  std::string magic(2, '\0');
  f.read(magic.data(), 2);
  if (magic != "P6") throw FormatError("read_ppm: not a binary PPM");
  int w = read_token(f), h = read_token(f), maxval = read_token(f);
  std::vector<float> vals;
  read_payload(f, maxval, static_cast<size_t>(w) * h * 3, vals);
  Image img(h, w, 3);
  size_t i = 0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < 3; ++ch) img.at(ch, r, c) = vals[i++];
  return img;
}

}  // namespace lcmae
