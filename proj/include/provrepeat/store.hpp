#pragma once

// Content-addressed chunk store with Rabin-fingerprint content-defined chunking, container
// manifests and materialization.
//
// On-disk layout under the store root:
//   objects/aa/bb/<sha256>                       chunk payloads
//   sciunits/<name>/containers/<seq>.json        container manifests
//   sciunits/<name>/.lock                        advisory writer lock

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <json.hpp>

#include "digest.hpp"
#include "prov_graph.hpp"

namespace provrepeat {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Rabin fingerprinting over GF(2)

class RabinWindow {
 public:
  using Pol = std::uint64_t;

  /// Irreducible polynomial of degree 53.
  static constexpr Pol kDefaultPolynomial = 0x3DA3358B4DC173ULL;
  static constexpr std::size_t kWindowSize = 64;

  explicit RabinWindow(Pol polynomial = kDefaultPolynomial) : pol_(polynomial) {
    const int k = degree(pol_);
    shift_ = k - 8;
    for (unsigned b = 0; b < 256; ++b) {
      Pol h = append_byte(0, static_cast<std::uint8_t>(b));
      for (std::size_t i = 0; i + 1 < kWindowSize; ++i) h = append_byte(h, 0);
      out_table_[b] = h;
      mod_table_[b] = mod(static_cast<Pol>(b) << k, pol_) | (static_cast<Pol>(b) << k);
    }
    reset();
  }

  void reset() {
    window_.fill(0);
    pos_ = 0;
    digest_ = 0;
  }

  Pol slide(std::uint8_t b) {
    const std::uint8_t out = window_[pos_];
    window_[pos_] = b;
    pos_ = (pos_ + 1) % kWindowSize;
    digest_ ^= out_table_[out];
    const auto index = static_cast<std::uint8_t>(digest_ >> shift_);
    digest_ = ((digest_ << 8) | b) ^ mod_table_[index];
    return digest_;
  }

  [[nodiscard]] Pol digest() const { return digest_; }

  static int degree(Pol p) { return p == 0 ? -1 : 63 - std::countl_zero(p); }

  static Pol mod(Pol x, Pol p) {
    const int dp = degree(p);
    for (int dx = degree(x); dx >= dp; dx = degree(x)) x ^= p << (dx - dp);
    return x;
  }

 private:
  Pol append_byte(Pol h, std::uint8_t b) const { return mod((h << 8) | b, pol_); }

  Pol pol_;
  int shift_ = 0;
  std::array<Pol, 256> out_table_{};
  std::array<Pol, 256> mod_table_{};
  std::array<std::uint8_t, kWindowSize> window_{};
  std::size_t pos_ = 0;
  Pol digest_ = 0;
};

struct ChunkerParams {
  std::size_t min_size = 16 * 1024;
  std::size_t avg_size = 64 * 1024;
  std::size_t max_size = 256 * 1024;
};

struct Chunk {
  std::string hash;
  std::uint64_t length = 0;
  friend bool operator==(const Chunk&, const Chunk&) = default;
};

/// Boundary offsets (exclusive ends) of content-defined chunks. A cut happens once a chunk
/// is at least min_size long and the window fingerprint is divisible by (avg - min), or
/// unconditionally at max_size; the expected chunk length is therefore avg_size.
inline std::vector<std::size_t> chunk_boundaries(std::span<const std::uint8_t> bytes,
                                                 const ChunkerParams& p = {}) {
  std::vector<std::size_t> cuts;
  if (bytes.empty()) return cuts;
  const std::uint64_t divisor = p.avg_size > p.min_size ? p.avg_size - p.min_size : 1;
  RabinWindow w;
  std::size_t start = 0;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const auto fp = w.slide(bytes[i]);
    const std::size_t len = i + 1 - start;
    if ((len >= p.min_size && fp % divisor == 0) || len >= p.max_size) {
      cuts.push_back(i + 1);
      start = i + 1;
      w.reset();
    }
  }
  if (start < bytes.size()) cuts.push_back(bytes.size());
  return cuts;
}

inline std::vector<Chunk> chunk_stream(std::span<const std::uint8_t> bytes, const ChunkerParams& p = {}) {
  std::vector<Chunk> out;
  std::size_t start = 0;
  for (auto end : chunk_boundaries(bytes, p)) {
    auto piece = bytes.subspan(start, end - start);
    out.push_back({sha256_hex(piece), piece.size()});
    start = end;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifests

struct FileEntry {
  std::vector<Chunk> chunks;
  std::uint32_t mode = 0644;
  std::uint64_t size = 0;
  std::optional<std::string> link_target;

  friend bool operator==(const FileEntry&, const FileEntry&) = default;
};

struct ContainerRef {
  std::string sciunit;
  std::uint64_t seq = 0;
  friend bool operator==(const ContainerRef&, const ContainerRef&) = default;
};

struct ContainerManifest {
  std::string sciunit;
  std::uint64_t seq = 0;
  std::optional<ContainerRef> parent;
  std::string created;
  std::map<std::string, std::string> meta;
  std::map<std::string, FileEntry> files;  // container-relative path -> content
  std::vector<std::string> missing;         // referenced paths not found at store time
  ProvenanceGraph provenance;

  [[nodiscard]] std::string container_id() const { return sciunit + "/" + std::to_string(seq); }
  [[nodiscard]] std::uint64_t total_bytes() const {
    std::uint64_t n = 0;
    for (const auto& [p, f] : files) n += f.size;
    return n;
  }
};

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Container-relative path for an absolute or relative on-host path.
inline std::string container_path(std::string_view host_path) {
  auto p = canonical_path(host_path);
  while (!p.empty() && p.front() == '/') p.erase(p.begin());
  return p;
}

inline nlohmann::ordered_json to_json(const ContainerManifest& m) {
  nlohmann::ordered_json j;
  j["format"] = "provrepeat-manifest/1";
  j["container_id"] = m.container_id();
  j["sciunit"] = m.sciunit;
  j["seq"] = m.seq;
  j["parent"] = m.parent ? nlohmann::ordered_json{{"sciunit", m.parent->sciunit}, {"seq", m.parent->seq}}
                         : nlohmann::ordered_json(nullptr);
  j["created"] = m.created;
  j["meta"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.meta) j["meta"][k] = v;
  j["files"] = nlohmann::ordered_json::object();
  for (const auto& [path, f] : m.files) {
    nlohmann::ordered_json fj;
    fj["mode"] = f.mode;
    fj["size"] = f.size;
    if (f.link_target) fj["link_target"] = *f.link_target;
    fj["chunks"] = nlohmann::ordered_json::array();
    for (const auto& c : f.chunks) fj["chunks"].push_back({{"hash", c.hash}, {"length", c.length}});
    j["files"][path] = std::move(fj);
  }
  j["missing"] = m.missing;
  j["provenance"] = to_prov_json(m.provenance);
  return j;
}

inline ContainerManifest manifest_from_json(const nlohmann::json& j) {
  try {
    ContainerManifest m;
    m.sciunit = j.at("sciunit").get<std::string>();
    m.seq = j.at("seq").get<std::uint64_t>();
    if (const auto& p = j.at("parent"); !p.is_null())
      m.parent = ContainerRef{p.at("sciunit").get<std::string>(), p.at("seq").get<std::uint64_t>()};
    m.created = j.value("created", "");
    if (auto it = j.find("meta"); it != j.end())
      for (const auto& [k, v] : it->items()) m.meta[k] = v.get<std::string>();
    for (const auto& [path, fj] : j.at("files").items()) {
      FileEntry f;
      f.mode = fj.at("mode").get<std::uint32_t>();
      f.size = fj.at("size").get<std::uint64_t>();
      if (auto lt = fj.find("link_target"); lt != fj.end()) f.link_target = lt->get<std::string>();
      for (const auto& c : fj.at("chunks"))
        f.chunks.push_back({c.at("hash").get<std::string>(), c.at("length").get<std::uint64_t>()});
      m.files.emplace(path, std::move(f));
    }
    if (auto it = j.find("missing"); it != j.end()) m.missing = it->get<std::vector<std::string>>();
    m.provenance = from_prov_json(j.at("provenance"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw StoreError(std::string("malformed manifest: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Store

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw StoreError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_atomic(const fs::path& target, std::span<const std::uint8_t> bytes) {
  fs::create_directories(target.parent_path());
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  auto tmp = target.parent_path() / (".tmp-" + std::to_string(rng()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw StoreError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw StoreError("cannot rename into " + target.string() + ": " + ec.message());
  }
}

inline std::string now_iso8601() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

}  // namespace detail

/// RAII advisory lock (flock) on a lock file.
class FileLock {
 public:
  explicit FileLock(const fs::path& path) {
    fs::create_directories(path.parent_path());
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0 || ::flock(fd_, LOCK_EX) != 0) {
      if (fd_ >= 0) ::close(fd_);
      throw StoreError("cannot lock " + path.string());
    }
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }

 private:
  int fd_ = -1;
};

struct PutOptions {
  bool skip_unreadable = true;  // false: abort on the first unreadable file
  std::optional<ContainerRef> parent;
  std::map<std::string, std::string> meta;
};

struct PutStats {
  std::uint64_t new_chunks = 0;
  std::uint64_t new_bytes = 0;
  std::uint64_t reused_chunks = 0;
};

struct MaterializeReport {
  std::vector<std::string> written;
  std::uint64_t bytes = 0;
};

struct GcReport {
  std::uint64_t removed_chunks = 0;
  std::uint64_t removed_bytes = 0;
};

/// Source of one container file: its container-relative path and where to read it.
struct SourceFile {
  std::string rel_path;
  fs::path host_path;
};

class Store {
 public:
  explicit Store(fs::path root, ChunkerParams params = {}) : root_(std::move(root)), params_(params) {
    fs::create_directories(root_ / "objects");
    fs::create_directories(root_ / "sciunits");
  }

  [[nodiscard]] const fs::path& root() const { return root_; }
  [[nodiscard]] const ChunkerParams& params() const { return params_; }
  [[nodiscard]] const PutStats& last_put() const { return last_put_; }

  [[nodiscard]] fs::path object_path(const std::string& hash) const {
    if (hash.size() < 5) throw StoreError("bad chunk hash '" + hash + "'");
    return root_ / "objects" / hash.substr(0, 2) / hash.substr(2, 2) / hash;
  }
  [[nodiscard]] bool has_chunk(const std::string& hash) const { return fs::exists(object_path(hash)); }

  /// Stores a chunk unless already present. Returns true when bytes were written.
  bool put_chunk(const std::string& hash, std::span<const std::uint8_t> bytes) {
    auto p = object_path(hash);
    if (fs::exists(p)) return false;
    detail::write_file_atomic(p, bytes);
    return true;
  }

  /// Reads a chunk and checks it against its key.
  [[nodiscard]] std::vector<std::uint8_t> read_chunk(const std::string& hash) const {
    auto p = object_path(hash);
    if (!fs::exists(p)) throw StoreError("missing chunk " + hash);
    auto bytes = detail::read_file_bytes(p);
    if (sha256_hex(bytes) != hash) throw StoreError("digest mismatch for chunk " + hash);
    return bytes;
  }

  FileEntry put_bytes(std::span<const std::uint8_t> bytes) {
    FileEntry f;
    f.size = bytes.size();
    std::size_t start = 0;
    for (auto end : chunk_boundaries(bytes, params_)) {
      auto piece = bytes.subspan(start, end - start);
      Chunk c{sha256_hex(piece), piece.size()};
      if (put_chunk(c.hash, piece)) {
        ++last_put_.new_chunks;
        last_put_.new_bytes += piece.size();
      } else {
        ++last_put_.reused_chunks;
      }
      f.chunks.push_back(std::move(c));
      start = end;
    }
    return f;
  }

  /// Stores the listed files as a new container of `sciunit` with the next sequence number.
  ContainerManifest put_files(const std::string& sciunit, const std::vector<SourceFile>& sources,
                              const ProvenanceGraph& graph, const PutOptions& opts = {}) {
    check_name(sciunit);
    FileLock lock(sciunit_dir(sciunit) / ".lock");
    last_put_ = {};
    ContainerManifest m;
    m.sciunit = sciunit;
    m.parent = opts.parent;
    m.meta = opts.meta;
    m.created = detail::now_iso8601();
    m.provenance = graph;
    for (const auto& src : sources) {
      std::error_code ec;
      auto st = fs::symlink_status(src.host_path, ec);
      if (ec || !fs::exists(st)) {
        m.missing.push_back(src.rel_path);
        continue;
      }
      if (fs::is_symlink(st)) {
        FileEntry f;
        f.link_target = fs::read_symlink(src.host_path).string();
        f.mode = 0777;
        m.files[src.rel_path] = std::move(f);
        continue;
      }
      if (!fs::is_regular_file(st)) {
        if (fs::is_directory(st)) continue;
        throw StoreError("special file rejected: " + src.host_path.string());
      }
      std::vector<std::uint8_t> bytes;
      try {
        bytes = detail::read_file_bytes(src.host_path);
      } catch (const StoreError&) {
        if (!opts.skip_unreadable) throw;
        m.missing.push_back(src.rel_path);
        m.meta["unreadable"] += (m.meta["unreadable"].empty() ? "" : ",") + src.rel_path;
        continue;
      }
      auto f = put_bytes(bytes);
      f.mode = static_cast<std::uint32_t>(st.permissions() & fs::perms::mask);
      m.files[src.rel_path] = std::move(f);
    }
    m.seq = next_seq_locked(sciunit);
    save_manifest_locked(m);
    return m;
  }

  /// Stores every regular file and symlink under `dir`.
  ContainerManifest put_container(const fs::path& dir, const ProvenanceGraph& graph,
                                  const std::string& sciunit, const PutOptions& opts = {}) {
    if (!fs::is_directory(dir)) throw StoreError("not a directory: " + dir.string());
    std::vector<SourceFile> sources;
    for (auto it = fs::recursive_directory_iterator(dir, fs::directory_options::skip_permission_denied);
         it != fs::recursive_directory_iterator(); ++it) {
      const auto st = it->symlink_status();
      if (fs::is_directory(st)) continue;
      sources.push_back({it->path().lexically_relative(dir).generic_string(), it->path()});
    }
    std::sort(sources.begin(), sources.end(),
              [](const SourceFile& a, const SourceFile& b) { return a.rel_path < b.rel_path; });
    return put_files(sciunit, sources, graph, opts);
  }

  /// Registers an already-built manifest (e.g. a sub-container) under the next sequence number.
  ContainerManifest add_manifest(ContainerManifest m) {
    check_name(m.sciunit);
    FileLock lock(sciunit_dir(m.sciunit) / ".lock");
    for (const auto& [path, f] : m.files)
      for (const auto& c : f.chunks)
        if (!has_chunk(c.hash)) throw StoreError("dangling chunk " + c.hash + " for " + path);
    m.seq = next_seq_locked(m.sciunit);
    if (m.created.empty()) m.created = detail::now_iso8601();
    save_manifest_locked(m);
    return m;
  }

  /// Writes a manifest exactly as given (used by archive import).
  void write_manifest(const ContainerManifest& m) {
    check_name(m.sciunit);
    FileLock lock(sciunit_dir(m.sciunit) / ".lock");
    save_manifest_locked(m);
  }

  [[nodiscard]] std::vector<std::uint64_t> list_containers(const std::string& sciunit) const {
    std::vector<std::uint64_t> seqs;
    auto dir = sciunit_dir(sciunit) / "containers";
    if (!fs::exists(dir)) return seqs;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() != ".json") continue;
      try {
        seqs.push_back(std::stoull(e.path().stem().string()));
      } catch (const std::exception&) {
      }
    }
    std::sort(seqs.begin(), seqs.end());
    return seqs;
  }

  [[nodiscard]] std::vector<std::string> list_sciunits() const {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(root_ / "sciunits"))
      if (e.is_directory()) out.push_back(e.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
  }

  [[nodiscard]] ContainerManifest load_manifest(const std::string& sciunit, std::uint64_t seq) const {
    auto p = manifest_path(sciunit, seq);
    if (!fs::exists(p)) throw StoreError("no container " + sciunit + "/" + std::to_string(seq));
    std::ifstream in(p);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw StoreError("malformed manifest " + p.string() + ": " + e.what());
    }
    return manifest_from_json(j);
  }

  [[nodiscard]] fs::path manifest_path(const std::string& sciunit, std::uint64_t seq) const {
    return sciunit_dir(sciunit) / "containers" / (std::to_string(seq) + ".json");
  }
  [[nodiscard]] fs::path sciunit_dir(const std::string& sciunit) const { return root_ / "sciunits" / sciunit; }

  /// Reconstructs manifest files under `dest`, verifying every chunk digest. When `only` is
  /// given, just those container-relative paths are written.
  MaterializeReport materialize(const ContainerManifest& m, const fs::path& dest,
                                const std::optional<std::set<std::string>>& only = {}) const {
    MaterializeReport report;
    std::error_code ec;
    fs::create_directories(dest, ec);
    if (ec) throw StoreError("destination not writable: " + dest.string());
    for (const auto& [path, f] : m.files) {
      if (only && !only->count(path)) continue;
      auto target = dest / path;
      fs::create_directories(target.parent_path(), ec);
      if (ec) throw StoreError("destination not writable: " + target.parent_path().string());
      if (f.link_target) {
        fs::remove(target, ec);
        fs::create_symlink(*f.link_target, target, ec);
        if (ec) throw StoreError("cannot create symlink " + target.string() + ": " + ec.message());
        report.written.push_back(path);
        continue;
      }
      std::vector<std::uint8_t> bytes;
      bytes.reserve(f.size);
      for (const auto& c : f.chunks) {
        std::vector<std::uint8_t> piece;
        try {
          piece = read_chunk(c.hash);
        } catch (const StoreError& e) {
          throw StoreError(std::string(e.what()) + " (file " + path + ")");
        }
        if (piece.size() != c.length)
          throw StoreError("chunk " + c.hash + " length mismatch (file " + path + ")");
        bytes.insert(bytes.end(), piece.begin(), piece.end());
      }
      if (bytes.size() != f.size) throw StoreError("size mismatch for file " + path);
      fs::remove(target, ec);
      std::ofstream out(target, std::ios::binary | std::ios::trunc);
      if (!out) throw StoreError("destination not writable: " + target.string());
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      out.close();
      fs::permissions(target, static_cast<fs::perms>(f.mode) & fs::perms::mask, ec);
      report.written.push_back(path);
      report.bytes += bytes.size();
    }
    return report;
  }

  /// Hashes of chunks whose content no longer matches their key.
  [[nodiscard]] std::vector<std::string> scrub() const {
    std::vector<std::string> bad;
    for (const auto& e : fs::recursive_directory_iterator(root_ / "objects")) {
      if (!e.is_regular_file() || e.path().filename().string().rfind(".tmp-", 0) == 0) continue;
      auto name = e.path().filename().string();
      if (sha256_hex(detail::read_file_bytes(e.path())) != name) bad.push_back(name);
    }
    std::sort(bad.begin(), bad.end());
    return bad;
  }

  /// Removes chunks not referenced by any manifest.
  GcReport gc() {
    std::set<std::string> live;
    for (const auto& s : list_sciunits())
      for (auto seq : list_containers(s))
        for (const auto& [p, f] : load_manifest(s, seq).files)
          for (const auto& c : f.chunks) live.insert(c.hash);
    GcReport r;
    std::vector<fs::path> dead;
    for (const auto& e : fs::recursive_directory_iterator(root_ / "objects"))
      if (e.is_regular_file() && !live.count(e.path().filename().string())) dead.push_back(e.path());
    for (const auto& p : dead) {
      r.removed_bytes += fs::file_size(p);
      fs::remove(p);
      ++r.removed_chunks;
    }
    return r;
  }

  /// Total bytes held in chunk objects.
  [[nodiscard]] std::uint64_t stored_bytes() const {
    std::uint64_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(root_ / "objects"))
      if (e.is_regular_file()) n += e.file_size();
    return n;
  }

  static void check_name(const std::string& name) {
    if (name.empty() || name == "." || name == ".." || name.find('/') != std::string::npos)
      throw StoreError("invalid sciunit name '" + name + "'");
  }

 private:
  std::uint64_t next_seq_locked(const std::string& sciunit) const {
    auto seqs = list_containers(sciunit);
    return seqs.empty() ? 1 : seqs.back() + 1;
  }

  void save_manifest_locked(const ContainerManifest& m) const {
    auto text = to_json(m).dump(2) + "\n";
    detail::write_file_atomic(manifest_path(m.sciunit, m.seq),
                              {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  }

  fs::path root_;
  ChunkerParams params_;
  PutStats last_put_;
};

}  // namespace provrepeat
