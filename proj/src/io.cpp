#include "chaoscorr/io.hpp"

#include <bit>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

namespace chaoscorr::io {

static_assert(std::endian::native == std::endian::little,
              "cache format assumes a little-endian host");

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void atomic_write(const fs::path& p, std::string_view content) {
  if (p.has_parent_path())
    fs::create_directories(p.parent_path());
  std::random_device rd;
  const fs::path tmp = p.string() + ".tmp." + std::to_string(::getpid()) + "." +
                       hex64((std::uint64_t(rd()) << 32) ^ rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("cannot create " + tmp.string());
    out.write(content.data(), std::streamsize(content.size()));
    out.flush();
    if (!out)
      throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("rename to " + p.string() + " failed: " + ec.message());
  }
}

std::string format_double(double x) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

std::string csv_text(const Metadata& meta, const std::vector<std::string>& columns,
                     const std::vector<std::vector<double>>& data) {
  if (data.size() != columns.size())
    throw ArgumentError("csv: column count mismatch");
  const std::size_t n = data.empty() ? 0 : data.front().size();
  for (const auto& c : data)
    if (c.size() != n)
      throw ArgumentError("csv: ragged columns");
  std::string s;
  for (const auto& [k, v] : meta)
    s += "# " + k + "=" + v + "\n";
  for (std::size_t j = 0; j < columns.size(); ++j)
    s += (j ? "," : "") + columns[j];
  s += "\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (j)
        s += ',';
      s += format_double(data[j][i]);
    }
    s += '\n';
  }
  return s;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    if (line[0] == '#') {
      const auto body = line.substr(line.find_first_not_of("# "));
      const auto eq = body.find('=');
      if (eq != std::string::npos)
        t.meta[body.substr(0, eq)] = body.substr(eq + 1);
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ','))
      cells.push_back(cell);
    if (!header) {
      t.columns = cells;
      t.data.assign(cells.size(), {});
      header = true;
      continue;
    }
    if (cells.size() != t.columns.size())
      throw ArgumentError("csv: row has wrong number of cells");
    for (std::size_t j = 0; j < cells.size(); ++j)
      t.data[j].push_back(std::stod(cells[j]));
  }
  return t;
}

std::string series_csv(const CorrelatorSeries& s, Metadata extra) {
  Metadata meta{{"kind", to_string(s.kind)}, {"hamiltonian_tag", s.hamiltonian_tag}};
  std::string obs;
  for (const auto& o : s.observable_tags)
    obs += (obs.empty() ? "" : ";") + o;
  meta.emplace_back("observables", obs);
  for (auto& kv : extra)
    meta.push_back(std::move(kv));
  return csv_text(meta, {"time", "re", "im"}, {s.times, s.real(), s.imag()});
}

namespace {

template <typename T> void put(std::string& s, T x) {
  char b[sizeof(T)];
  std::memcpy(b, &x, sizeof(T));
  s.append(b, sizeof(T));
}

template <typename T> T get(std::string_view s, std::size_t& off) {
  if (off + sizeof(T) > s.size())
    throw ChecksumError("cache file truncated");
  T x;
  std::memcpy(&x, s.data() + off, sizeof(T));
  off += sizeof(T);
  return x;
}

} // namespace

std::string encode_decomposition(const SpectralDecomposition<double>& d) {
  const std::uint64_t n = std::uint64_t(d.dim());
  std::string s;
  s.reserve(4 + 4 + 8 + 8 * n * (n + 1) + 8);
  s.append("CHWF", 4);
  put<std::uint32_t>(s, kCacheVersion);
  put<std::uint64_t>(s, n);
  s.append(reinterpret_cast<const char*>(d.energies.data()), 8 * n);
  s.append(reinterpret_cast<const char*>(d.vectors.data()), 8 * n * n);
  put<std::uint64_t>(s, fnv1a(s));
  return s;
}

SpectralDecomposition<double> decode_decomposition(std::string_view bytes) {
  if (bytes.size() < 24 || bytes.substr(0, 4) != "CHWF")
    throw ChecksumError("cache file has bad magic");
  std::size_t off = 4;
  const auto version = get<std::uint32_t>(bytes, off);
  if (version != kCacheVersion)
    throw ChecksumError("cache file version " + std::to_string(version) + " unsupported");
  const auto n = get<std::uint64_t>(bytes, off);
  const std::size_t expected = 16 + 8 * n * (n + 1) + 8;
  if (n == 0 || n > (1u << 16) || bytes.size() != expected)
    throw ChecksumError("cache file size does not match its header");
  std::size_t tail = expected - 8;
  const auto stored = get<std::uint64_t>(bytes, tail);
  if (stored != fnv1a(bytes.substr(0, expected - 8)))
    throw ChecksumError("cache file checksum mismatch");
  SpectralDecomposition<double> d;
  d.energies.resize(Index(n));
  d.vectors.resize(Index(n), Index(n));
  std::memcpy(d.energies.data(), bytes.data() + off, 8 * n);
  std::memcpy(d.vectors.data(), bytes.data() + off + 8 * n, 8 * n * n);
  return d;
}

DecompositionCache::DecompositionCache(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
}

fs::path DecompositionCache::path_for(const std::string& key) const {
  return dir_ / (hex64(fnv1a(key)) + ".chwf");
}

std::optional<SpectralDecomposition<double>>
DecompositionCache::load(const std::string& key) const {
  const fs::path p = path_for(key);
  if (!fs::exists(p))
    return std::nullopt;
  try {
    return decode_decomposition(read_file(p));
  } catch (const ChecksumError& e) {
    throw ChecksumError(p.string() + ": " + e.what());
  }
}

void DecompositionCache::store(const std::string& key,
                               const SpectralDecomposition<double>& d) const {
  atomic_write(path_for(key), encode_decomposition(d));
}

DecompositionCache::Lock::~Lock() {
  if (fd >= 0) {
    ::flock(fd, LOCK_UN);
    ::close(fd);
  }
}

DecompositionCache::Lock DecompositionCache::lock_key(const std::string& key) const {
  Lock l;
  const fs::path p = path_for(key).string() + ".lock";
  l.fd = ::open(p.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (l.fd < 0)
    throw std::runtime_error("cannot open lock file " + p.string() + ": " +
                             std::strerror(errno));
  while (::flock(l.fd, LOCK_EX) != 0) {
    if (errno != EINTR)
      throw std::runtime_error("flock failed on " + p.string() + ": " + std::strerror(errno));
  }
  return l;
}

} // namespace chaoscorr::io
