#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chaoscorr/correlators.hpp"
#include "chaoscorr/tensorops.hpp"

namespace chaoscorr::io {

namespace fs = std::filesystem;

// 64-bit FNV-1a
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t x);
std::string read_file(const fs::path& p);

// Writes to a sibling temporary file and renames it into place.
void atomic_write(const fs::path& p, std::string_view content);

std::string format_double(double x); // 17 significant digits

using Metadata = std::vector<std::pair<std::string, std::string>>;

// '# key=value' header lines followed by a comma-separated numeric body.
std::string csv_text(const Metadata& meta, const std::vector<std::string>& columns,
                     const std::vector<std::vector<double>>& data);

struct CsvTable {
  std::map<std::string, std::string> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> data; // column-major
};
CsvTable parse_csv(const std::string& text);

std::string series_csv(const CorrelatorSeries& s, Metadata extra = {});

// Binary eigendecomposition cache:
//   "CHWF" | u32 version | u64 dim | dim f64 energies | dim*dim f64 vectors
//   (column-major) | u64 FNV-1a of everything before it. Little-endian.
inline constexpr std::uint32_t kCacheVersion = 1;

std::string encode_decomposition(const SpectralDecomposition<double>& d);
SpectralDecomposition<double> decode_decomposition(std::string_view bytes);

class DecompositionCache {
public:
  explicit DecompositionCache(fs::path dir);

  const fs::path& dir() const { return dir_; }
  fs::path path_for(const std::string& key) const;

  std::optional<SpectralDecomposition<double>> load(const std::string& key) const;
  void store(const std::string& key, const SpectralDecomposition<double>& d) const;

  // Loads or computes under an exclusive advisory lock on the key, so
  // concurrent processes compute each entry once. `hit` reports a cache hit.
  template <typename F>
  SpectralDecomposition<double> get_or_compute(const std::string& key, F&& compute,
                                               bool* hit = nullptr) const {
    const auto lock = lock_key(key);
    if (auto d = load(key)) {
      if (hit)
        *hit = true;
      return std::move(*d);
    }
    if (hit)
      *hit = false;
    SpectralDecomposition<double> d = compute();
    store(key, d);
    return d;
  }

private:
  struct Lock {
    int fd = -1;
    Lock() = default;
    Lock(const Lock&) = delete;
    Lock& operator=(const Lock&) = delete;
    Lock(Lock&& o) noexcept : fd(o.fd) { o.fd = -1; }
    ~Lock();
  };
  Lock lock_key(const std::string& key) const;

  fs::path dir_;
};

} // namespace chaoscorr::io
