#pragma once

// Self-contained container archives: a ustar file holding `manifest.json` plus every chunk
// the manifest references under `objects/<hash>`.

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "store.hpp"

namespace provrepeat {

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void tar_octal(char* field, std::size_t width, std::uint64_t value) {
  std::snprintf(field, width, "%0*llo", static_cast<int>(width - 1), static_cast<unsigned long long>(value));
}

inline void tar_append(std::string& out, const std::string& name, const std::vector<std::uint8_t>& body) {
  if (name.size() >= 100) throw ArchiveError("archive member name too long: " + name);
  std::array<char, 512> h{};
  std::memcpy(h.data(), name.data(), name.size());
  tar_octal(h.data() + 100, 8, 0644);
  tar_octal(h.data() + 108, 8, 0);
  tar_octal(h.data() + 116, 8, 0);
  tar_octal(h.data() + 124, 12, body.size());
  tar_octal(h.data() + 136, 12, 0);
  h[156] = '0';
  std::memcpy(h.data() + 257, "ustar", 6);
  std::memcpy(h.data() + 263, "00", 2);
  std::memset(h.data() + 148, ' ', 8);
  unsigned sum = 0;
  for (char c : h) sum += static_cast<unsigned char>(c);
  std::snprintf(h.data() + 148, 8, "%06o", sum);
  h[155] = ' ';
  out.append(h.data(), h.size());
  out.append(reinterpret_cast<const char*>(body.data()), body.size());
  out.append((512 - body.size() % 512) % 512, '\0');
}

inline std::map<std::string, std::vector<std::uint8_t>> tar_read(const std::string& data) {
  std::map<std::string, std::vector<std::uint8_t>> members;
  std::size_t pos = 0;
  while (pos + 512 <= data.size()) {
    const char* h = data.data() + pos;
    if (std::all_of(h, h + 512, [](char c) { return c == '\0'; })) break;
    unsigned sum = 0;
    for (int i = 0; i < 512; ++i) sum += (i >= 148 && i < 156) ? ' ' : static_cast<unsigned char>(h[i]);
    if (std::strtoul(std::string(h + 148, 8).c_str(), nullptr, 8) != sum)
      throw ArchiveError("bad tar header checksum at offset " + std::to_string(pos));
    std::string name(h, strnlen(h, 100));
    auto size = std::strtoull(std::string(h + 124, 12).c_str(), nullptr, 8);
    pos += 512;
    if (pos + size > data.size()) throw ArchiveError("truncated archive member " + name);
    if (h[156] == '0' || h[156] == '\0')
      members[name] = std::vector<std::uint8_t>(data.begin() + static_cast<std::ptrdiff_t>(pos),
                                                data.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += (size + 511) / 512 * 512;
  }
  return members;
}

}  // namespace detail

/// Writes the container and every referenced chunk to a tar archive.
inline void export_container(const Store& store, const ContainerManifest& m, const fs::path& archive) {
  std::string out;
  auto manifest = to_json(m).dump(2);
  detail::tar_append(out, "manifest.json", std::vector<std::uint8_t>(manifest.begin(), manifest.end()));
  std::set<std::string> done;
  for (const auto& [path, f] : m.files)
    for (const auto& c : f.chunks)
      if (done.insert(c.hash).second) detail::tar_append(out, "objects/" + c.hash, store.read_chunk(c.hash));
  out.append(1024, '\0');
  std::ofstream file(archive, std::ios::binary | std::ios::trunc);
  if (!file) throw ArchiveError("cannot write " + archive.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw ArchiveError("cannot write " + archive.string());
}

/// Loads an archive into `store` as a new container of `sciunit` (the archived sciunit name
/// when empty). Chunk contents are verified against their digests.
inline ContainerManifest import_container(Store& store, const fs::path& archive, const std::string& sciunit = {}) {
  std::ifstream file(archive, std::ios::binary);
  if (!file) throw ArchiveError("cannot read " + archive.string());
  std::string data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  auto members = detail::tar_read(data);
  auto it = members.find("manifest.json");
  if (it == members.end()) throw ArchiveError("archive has no manifest.json");
  ContainerManifest m;
  try {
    m = manifest_from_json(nlohmann::json::parse(it->second.begin(), it->second.end()));
  } catch (const nlohmann::json::exception& e) {
    throw ArchiveError(std::string("bad manifest in archive: ") + e.what());
  }
  for (const auto& [name, body] : members) {
    if (name.rfind("objects/", 0) != 0) continue;
    auto hash = name.substr(8);
    if (sha256_hex(body) != hash) throw ArchiveError("corrupt chunk " + hash + " in archive");
    store.put_chunk(hash, body);
  }
  m.meta["imported_from"] = m.container_id();
  m.parent.reset();
  if (!sciunit.empty()) m.sciunit = sciunit;
  return store.add_manifest(std::move(m));
}

}  // namespace provrepeat
