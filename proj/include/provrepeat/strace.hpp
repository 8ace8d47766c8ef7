#pragma once

// Converts `strace -f -ttt` output into an execution trace.
//
// Recognized calls: open, openat, creat, close, execve, fork, vfork, clone, clone3.
// Split lines ("<unfinished ...>" / "<... resumed>") are joined per pid. File intervals
// span open() to close(); descriptors still open when the log ends close at the pid's
// last observed timestamp. Children do not inherit the parent's descriptor table.

#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "trace_model.hpp"

namespace provrepeat {

struct StraceOptions {
  /// Paths with these prefixes are dropped (pseudo filesystems by default).
  std::vector<std::string> ignore_prefixes{"/proc/", "/sys/", "/dev/"};
  /// Directory used to resolve relative paths opened with AT_FDCWD.
  std::string cwd = "/";
  /// Pid assigned to lines without a pid prefix (strace omits it before the first fork).
  std::int64_t root_pid = 1;
};

namespace detail {

struct StraceCall {
  std::int64_t pid = 0;
  Timestamp time = 0;
  std::string name;
  std::string args;
  std::string result;
};

inline Timestamp parse_strace_time(const std::string& s) {
  auto dot = s.find('.');
  Timestamp sec = std::stoll(s.substr(0, dot));
  Timestamp ns = 0;
  if (dot != std::string::npos) {
    auto frac = s.substr(dot + 1);
    frac.resize(9, '0');
    ns = std::stoll(frac);
  }
  return sec * 1'000'000'000 + ns;
}

// First double-quoted argument, with C escapes for quote and backslash undone.
inline std::optional<std::string> first_quoted(const std::string& args) {
  auto q = args.find('"');
  if (q == std::string::npos) return std::nullopt;
  std::string out;
  for (std::size_t i = q + 1; i < args.size(); ++i) {
    if (args[i] == '\\' && i + 1 < args.size()) {
      out += args[++i];
    } else if (args[i] == '"') {
      return out;
    } else {
      out += args[i];
    }
  }
  return std::nullopt;
}

inline std::string basename_of(const std::string& path) {
  auto s = path.rfind('/');
  return s == std::string::npos ? path : path.substr(s + 1);
}

}  // namespace detail

class StraceIngest {
 public:
  explicit StraceIngest(StraceOptions opts = {}) : opts_(std::move(opts)) {}

  ExecutionTrace parse(std::istream& in) {
    static const std::regex head(R"(^\s*(?:\[pid\s+(\d+)\]\s*|(\d+)\s+)?(\d+(?:\.\d+)?)\s+(.*)$)");
    static const std::regex call(R"(^([a-z0-9_]+)\((.*)\)\s+=\s+(-?\w+).*$)");
    static const std::regex unfinished(R"(^([a-z0-9_]+)\((.*?)\s*<unfinished \.\.\.>\s*$)");
    static const std::regex resumed(R"(^<\.\.\.\s+([a-z0-9_]+)\s+resumed>\s*(.*)$)");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::smatch m;
      if (!std::regex_match(line, m, head)) throw TraceParseError(lineno, "unrecognized strace line");
      std::int64_t pid = m[1].matched ? std::stoll(m[1]) : m[2].matched ? std::stoll(m[2]) : opts_.root_pid;
      Timestamp t = detail::parse_strace_time(m[3]);
      std::string rest = m[4];
      last_time_[pid] = t;
      seen(pid);

      std::smatch c;
      if (std::regex_match(rest, c, unfinished)) {
        pending_[pid] = {pid, t, c[1], c[2], {}};
        continue;
      }
      if (std::regex_match(rest, c, resumed)) {
        auto it = pending_.find(pid);
        if (it == pending_.end()) continue;
        auto joined = it->second.name + "(" + it->second.args + " " + std::string(c[2]);
        Timestamp start = it->second.time;
        pending_.erase(it);
        std::smatch full;
        if (std::regex_match(joined, full, call)) handle({pid, start, full[1], full[2], full[3]}, t);
        continue;
      }
      if (std::regex_match(rest, c, call)) handle({pid, t, c[1], c[2], c[3]}, t);
      // Signals, exits and unknown output are ignored.
    }
    for (auto& [pid, fds] : fds_) {
      for (auto& [fd, f] : fds) emit_file(pid, f, last_time_[pid]);
      fds.clear();
    }
    auto trace = std::move(builder_).build();
    trace.meta["source"] = "strace";
    if (auto v = validate_trace(trace); !v.empty())
      throw TraceParseError(0, "invalid trace: " + v.front().subject + ": " + v.front().message);
    return trace;
  }

  ExecutionTrace parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse(in);
  }

 private:
  struct OpenFile {
    std::string path;
    bool read = false;
    bool write = false;
    Timestamp opened = 0;
  };

  void seen(std::int64_t pid) {
    if (!labels_.count(pid)) {
      labels_[pid] = "";
      builder_.add_activity(pid, "");
    }
  }

  [[nodiscard]] bool ignored(const std::string& path) const {
    for (const auto& p : opts_.ignore_prefixes)
      if (path.rfind(p, 0) == 0) return true;
    return false;
  }

  [[nodiscard]] std::string resolve(const std::string& path) const {
    if (!path.empty() && path.front() == '/') return canonical_path(path);
    return canonical_path(opts_.cwd + "/" + path);
  }

  void emit_file(std::int64_t pid, const OpenFile& f, Timestamp closed) {
    const std::string proc = builder_.add_activity(pid, labels_[pid]);
    const std::string ent = builder_.add_entity(f.path);
    TimeInterval iv{f.opened, std::max(f.opened, closed)};
    if (f.read) builder_.add_edge(ent, proc, TraceLabel::ReadFrom, iv);
    if (f.write) builder_.add_edge(proc, ent, TraceLabel::HasWritten, iv);
  }

  void handle(const detail::StraceCall& c, Timestamp done) {
    long long result = 0;
    try {
      result = std::stoll(c.result);
    } catch (const std::exception&) {
      return;  // "?" or symbolic results
    }
    if (result < 0) return;
    const auto& n = c.name;
    if (n == "open" || n == "openat" || n == "creat") {
      auto path = detail::first_quoted(c.args);
      if (!path) return;
      auto full = resolve(*path);
      if (ignored(full)) return;
      OpenFile f{full, false, false, c.time};
      if (n == "creat" || c.args.find("O_WRONLY") != std::string::npos) {
        f.write = true;
      } else if (c.args.find("O_RDWR") != std::string::npos) {
        f.read = f.write = true;
      } else {
        f.read = true;
      }
      if (c.args.find("O_DIRECTORY") != std::string::npos) return;
      auto& slot = fds_[c.pid][result];
      if (!slot.path.empty()) emit_file(c.pid, slot, c.time);
      slot = f;
    } else if (n == "close") {
      std::int64_t fd = 0;
      try {
        fd = std::stoll(c.args);
      } catch (const std::exception&) {
        return;
      }
      auto& fds = fds_[c.pid];
      if (auto it = fds.find(fd); it != fds.end()) {
        emit_file(c.pid, it->second, done);
        fds.erase(it);
      }
    } else if (n == "execve") {
      auto path = detail::first_quoted(c.args);
      if (!path) return;
      auto full = resolve(*path);
      labels_[c.pid] = detail::basename_of(full);
      builder_.relabel_activity(c.pid, labels_[c.pid]);
      const std::string proc = builder_.add_activity(c.pid, labels_[c.pid]);
      const std::string exe = builder_.add_entity(full);
      builder_.add_edge(exe, proc, TraceLabel::ReadFrom, {c.time, c.time});
    } else if (n == "fork" || n == "vfork" || n == "clone" || n == "clone3") {
      if (result == 0) return;
      if (c.args.find("CLONE_THREAD") != std::string::npos) return;
      seen(result);
      labels_[result] = labels_[c.pid];
      builder_.relabel_activity(result, labels_[c.pid]);
      const std::string parent = builder_.add_activity(c.pid, labels_[c.pid]);
      builder_.add_edge(parent, activity_id(result), TraceLabel::Executed, {c.time, c.time});
    }
  }

  StraceOptions opts_;
  TraceBuilder builder_;
  std::map<std::int64_t, std::map<std::int64_t, OpenFile>> fds_;
  std::map<std::int64_t, detail::StraceCall> pending_;
  std::map<std::int64_t, Timestamp> last_time_;
  std::map<std::int64_t, std::string> labels_;
};

inline ExecutionTrace parse_strace(std::istream& in, StraceOptions opts = {}) {
  return StraceIngest(std::move(opts)).parse(in);
}

inline ExecutionTrace parse_strace(std::string_view text, StraceOptions opts = {}) {
  return StraceIngest(std::move(opts)).parse(text);
}

}  // namespace provrepeat
