#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "nsf/image.hpp"

namespace nsf::test {

inline Image random_image(int w, int h, int c, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  Image img(w, h, c);
  for (auto& v : img.data) v = u(rng);
  return img;
}

// Smooth texture so photometric losses have useful gradients.
inline Image smooth_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 6.283);
  const double p0 = u(rng), p1 = u(rng), p2 = u(rng);
  Image img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = static_cast<float>(0.5 + 0.2 * std::sin(0.7 * x + p0 + c) + 0.15 * std::cos(0.45 * y + p1) +
                                             0.1 * std::sin(0.3 * (x + y) + p2));
  return img;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const char* base = std::getenv("NSF_TEST_TMP");
  std::filesystem::path p = base ? std::filesystem::path(base) : std::filesystem::temp_directory_path() / "nsf_unit";
  p /= name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace nsf::test
