#include "tofu/pfm.hpp"

#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace tofu {

namespace {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
}  // namespace

void save_pfm(const std::string& path, const DenseArray& image) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw std::invalid_argument("save_pfm: expects [3,H,W], got " + image.shape_str());
  const int64_t H = image.dim(1), W = image.dim(2);
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("save_pfm: cannot open " + path);
  std::fprintf(f.get(), "PF\n%lld %lld\n-1.0\n", static_cast<long long>(W),
               static_cast<long long>(H));
  std::vector<float> row(static_cast<size_t>(W) * 3);
  for (int64_t y = H - 1; y >= 0; --y) {  // bottom row first
    for (int64_t x = 0; x < W; ++x)
      for (int64_t c = 0; c < 3; ++c)
        row[static_cast<size_t>(x * 3 + c)] =
            static_cast<float>(image[c * H * W + y * W + x]);
    if (std::fwrite(row.data(), sizeof(float), row.size(), f.get()) != row.size())
      throw std::runtime_error("save_pfm: short write to " + path);
  }
}

DenseArray load_pfm(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("load_pfm: cannot open " + path);
  char magic[3] = {};
  long long W = 0, H = 0;
  double scale = 0.0;
  if (std::fscanf(f.get(), "%2s %lld %lld %lf", magic, &W, &H, &scale) != 4 ||
      std::string(magic) != "PF" || W < 1 || H < 1)
    throw std::runtime_error("load_pfm: bad header in " + path);
  if (scale >= 0.0)
    throw std::runtime_error("load_pfm: big-endian data not supported in " + path);
  std::fgetc(f.get());  // single whitespace after the scale

  DenseArray img({3, H, W});
  std::vector<float> row(static_cast<size_t>(W) * 3);
  for (int64_t y = H - 1; y >= 0; --y) {
    if (std::fread(row.data(), sizeof(float), row.size(), f.get()) != row.size())
      throw std::runtime_error("load_pfm: truncated data in " + path);
    for (int64_t x = 0; x < W; ++x)
      for (int64_t c = 0; c < 3; ++c)
        img[c * H * W + y * W + x] = static_cast<double>(row[static_cast<size_t>(x * 3 + c)]);
  }
  return img;
}

}  // namespace tofu
