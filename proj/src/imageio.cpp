#include "nsf/imageio.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace nsf::io {

namespace {

std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

void append_le_float(std::string& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
  char b[4];
  std::memcpy(b, &bits, 4);
  out.append(b, 4);
}

// Reads one whitespace-delimited header token starting at pos.
std::string next_token(const std::string& s, std::size_t& pos) {
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  std::size_t start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  return s.substr(start, pos - start);
}

std::uint8_t to_byte(float v) {
  float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::string encode_pfm(const Image& map) {
  if (map.channels != 1) throw ShapeError("write_pfm: expected a single-channel map");
  std::string out = "Pf\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n-1.0\n";
  out.reserve(out.size() + map.data.size() * 4);
  for (int y = map.height - 1; y >= 0; --y) {
    for (int x = 0; x < map.width; ++x) append_le_float(out, map.at(x, y));
  }
  return out;
}

void write_pfm(const Image& map, const std::filesystem::path& path) {
  write_file(path, encode_pfm(map));
}

Image decode_pfm(const std::string& bytes) {
  std::size_t pos = 0;
  const std::string magic = next_token(bytes, pos);
  int channels = 0;
  if (magic == "Pf") {
    channels = 1;
  } else if (magic == "PF") {
    channels = 3;
  } else {
    throw ParseError("PFM: bad magic '" + magic + "'", 1);
  }
  const std::string ws = next_token(bytes, pos);
  const std::string hs = next_token(bytes, pos);
  const std::string ss = next_token(bytes, pos);
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    std::size_t used = 0;
    w = std::stoi(ws, &used);
    if (used != ws.size()) throw std::invalid_argument(ws);
    h = std::stoi(hs, &used);
    if (used != hs.size()) throw std::invalid_argument(hs);
    scale = std::stod(ss, &used);
    if (used != ss.size()) throw std::invalid_argument(ss);
  } catch (const std::logic_error&) {
    throw ParseError("PFM: malformed dimension or scale line", 2);
  }
  if (w <= 0 || h <= 0 || scale == 0.0 || !std::isfinite(scale)) {
    throw ParseError("PFM: invalid dimensions or scale", 2);
  }
  // Exactly one whitespace byte separates the scale line from the payload.
  if (pos >= bytes.size()) throw ParseError("PFM: missing payload", 3);
  ++pos;
  const std::size_t count = static_cast<std::size_t>(w) * h * channels;
  if (bytes.size() - pos < count * 4) throw ParseError("PFM: truncated payload", 3);

  const bool little = scale < 0.0;
  const bool swap = little != (std::endian::native == std::endian::little);
  Image img(w, h, channels);
  const char* p = bytes.data() + pos;
  for (int row = 0; row < h; ++row) {
    const int y = h - 1 - row;
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        std::uint32_t bits;
        std::memcpy(&bits, p, 4);
        p += 4;
        if (swap) bits = byteswap32(bits);
        img.at(x, y, c) = std::bit_cast<float>(bits);
      }
    }
  }
  return img;
}

Image read_pfm(const std::filesystem::path& path) { return decode_pfm(read_file(path)); }

void write_png(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 1 && img.channels != 3) throw ShapeError("write_png: need 1 or 3 channels");
  std::vector<std::uint8_t> buf(img.data.size());
  std::transform(img.data.begin(), img.data.end(), buf.begin(), to_byte);
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.width);
  pi.height = static_cast<png_uint_32>(img.height);
  pi.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&pi, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + pi.message);
  }
}

void write_mask_png(const Mask& mask, const std::filesystem::path& path) {
  std::vector<std::uint8_t> buf(mask.data.size());
  std::transform(mask.data.begin(), mask.data.end(), buf.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(mask.width);
  pi.height = static_cast<png_uint_32>(mask.height);
  pi.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&pi, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + pi.message);
  }
}

namespace {

std::vector<std::uint8_t> read_png_bytes(const std::filesystem::path& path, png_uint_32 format,
                                         int& w, int& h) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&pi, path.c_str())) {
    throw ParseError("cannot read PNG " + path.string() + ": " + pi.message);
  }
  pi.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&pi);
    throw ParseError("cannot decode PNG " + path.string() + ": " + pi.message);
  }
  w = static_cast<int>(pi.width);
  h = static_cast<int>(pi.height);
  return buf;
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto buf = read_png_bytes(path, PNG_FORMAT_RGB, w, h);
  Image img(w, h, 3);
  for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = static_cast<float>(buf[i]) / 255.0f;
  return img;
}

Mask read_mask_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto buf = read_png_bytes(path, PNG_FORMAT_GRAY, w, h);
  Mask m(w, h, 1);
  for (std::size_t i = 0; i < buf.size(); ++i) m.data[i] = buf[i] >= 128 ? 1 : 0;
  return m;
}

}  // namespace nsf::io
