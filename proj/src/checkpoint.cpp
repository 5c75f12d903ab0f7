#include "tofu/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace tofu {

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_all(std::FILE* f, const void* p, size_t n, const std::string& path) {
  if (std::fwrite(p, 1, n, f) != n)
    throw std::runtime_error("checkpoint: short write to " + path);
}

void read_all(std::FILE* f, void* p, size_t n, const std::string& path) {
  if (std::fread(p, 1, n, f) != n)
    throw std::runtime_error("checkpoint: truncated file " + path);
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const DenseArray*>>& entries) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  write_all(f.get(), "TOFU", 4, path);
  const uint32_t version = kCheckpointVersion;
  write_all(f.get(), &version, 4, path);
  const uint64_t count = entries.size();
  write_all(f.get(), &count, 8, path);
  for (const auto& [name, arr] : entries) {
    const uint32_t len = static_cast<uint32_t>(name.size());
    write_all(f.get(), &len, 4, path);
    write_all(f.get(), name.data(), len, path);
    const uint32_t rank = static_cast<uint32_t>(arr->rank());
    write_all(f.get(), &rank, 4, path);
    for (int a = 0; a < arr->rank(); ++a) {
      const uint64_t e = static_cast<uint64_t>(arr->dim(a));
      write_all(f.get(), &e, 8, path);
    }
    write_all(f.get(), arr->data(), sizeof(double) * static_cast<size_t>(arr->size()), path);
  }
}

std::map<std::string, DenseArray> load_checkpoint(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  read_all(f.get(), magic, 4, path);
  if (std::memcmp(magic, "TOFU", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  uint32_t version = 0;
  read_all(f.get(), &version, 4, path);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                             " in " + path);
  uint64_t count = 0;
  read_all(f.get(), &count, 8, path);
  std::map<std::string, DenseArray> out;
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t len = 0;
    read_all(f.get(), &len, 4, path);
    std::string name(len, '\0');
    read_all(f.get(), name.data(), len, path);
    uint32_t rank = 0;
    read_all(f.get(), &rank, 4, path);
    if (rank > 5) throw std::runtime_error("checkpoint: bad rank in " + path);
    std::vector<int64_t> shape(rank);
    for (uint32_t a = 0; a < rank; ++a) {
      uint64_t e = 0;
      read_all(f.get(), &e, 8, path);
      shape[a] = static_cast<int64_t>(e);
    }
    DenseArray arr(shape);
    read_all(f.get(), arr.data(), sizeof(double) * static_cast<size_t>(arr.size()), path);
    if (!out.emplace(name, std::move(arr)).second)
      throw std::runtime_error("checkpoint: duplicate entry '" + name + "' in " + path);
  }
  return out;
}

}  // namespace tofu
