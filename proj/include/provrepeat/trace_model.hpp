#pragma once

// Execution-trace data model and the newline-delimited JSON trace-log format.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace provrepeat {

using Timestamp = std::int64_t;

/// Closed interval of integer nanosecond timestamps. Instantaneous events use begin == end.
struct TimeInterval {
  Timestamp begin = 0;
  Timestamp end = 0;

  [[nodiscard]] bool valid() const { return begin <= end; }
  [[nodiscard]] bool overlaps(const TimeInterval& o) const {
    return begin <= o.end && o.begin <= end;
  }
  [[nodiscard]] TimeInterval hull(const TimeInterval& o) const {
    return {std::min(begin, o.begin), std::max(end, o.end)};
  }
  friend bool operator==(const TimeInterval&, const TimeInterval&) = default;
  friend auto operator<=>(const TimeInterval&, const TimeInterval&) = default;
};

enum class NodeKind { Activity, Entity };

inline std::string_view to_string(NodeKind k) {
  return k == NodeKind::Activity ? "activity" : "entity";
}

struct TraceNode {
  std::string id;
  NodeKind kind = NodeKind::Entity;
  std::string label;
  std::optional<std::int64_t> pid;
  std::optional<std::string> path;

  friend bool operator==(const TraceNode&, const TraceNode&) = default;
};

enum class TraceLabel { ReadFrom, HasWritten, Executed };

inline std::string_view to_string(TraceLabel l) {
  switch (l) {
    case TraceLabel::ReadFrom: return "readFrom";
    case TraceLabel::HasWritten: return "hasWritten";
    case TraceLabel::Executed: return "executed";
  }
  return "?";
}

inline std::optional<TraceLabel> parse_trace_label(std::string_view s) {
  if (s == "readFrom") return TraceLabel::ReadFrom;
  if (s == "hasWritten") return TraceLabel::HasWritten;
  if (s == "executed") return TraceLabel::Executed;
  return std::nullopt;
}

struct TraceEdge {
  std::string src;
  std::string dst;
  TraceLabel label = TraceLabel::ReadFrom;
  TimeInterval interval;

  friend bool operator==(const TraceEdge&, const TraceEdge&) = default;
};

/// Raw audited record: nodes, temporally annotated edges, free-form metadata.
struct ExecutionTrace {
  std::vector<TraceNode> nodes;
  std::vector<TraceEdge> edges;
  std::map<std::string, std::string> meta;

  [[nodiscard]] const TraceNode* find(std::string_view id) const {
    for (const auto& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }

  /// Nodes and edges sorted into canonical order; record order does not matter for equality.
  void canonicalize() {
    std::sort(nodes.begin(), nodes.end(),
              [](const TraceNode& a, const TraceNode& b) { return a.id < b.id; });
    std::sort(edges.begin(), edges.end(), [](const TraceEdge& a, const TraceEdge& b) {
      return std::tie(a.src, a.dst, a.label, a.interval) <
             std::tie(b.src, b.dst, b.label, b.interval);
    });
  }

  [[nodiscard]] bool same_content(ExecutionTrace other) const {
    ExecutionTrace self = *this;
    self.canonicalize();
    other.canonicalize();
    return self.nodes == other.nodes && self.edges == other.edges;
  }
};

/// Positioned parse failure. `line` is 1-based; 0 means "after the whole input".
class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Violation {
  std::string subject;  // "node <id>" or "edge #<i> <src> -<label>-> <dst>"
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

inline std::string activity_id(std::int64_t pid) { return "proc:" + std::to_string(pid); }

inline std::string canonical_path(std::string_view raw) {
  auto p = std::filesystem::path(std::string(raw)).lexically_normal().generic_string();
  if (p.size() > 1 && p.back() == '/') p.pop_back();
  return p;
}

namespace detail {

inline std::string edge_subject(std::size_t i, const TraceEdge& e) {
  return "edge #" + std::to_string(i) + " " + e.src + " -" + std::string(to_string(e.label)) +
         "-> " + e.dst;
}

struct EdgeKey {
  std::string src, dst;
  TraceLabel label;
  friend auto operator<=>(const EdgeKey&, const EdgeKey&) = default;
};

}  // namespace detail

inline std::vector<Violation> validate_trace(const ExecutionTrace& trace) {
  std::vector<Violation> out;
  std::unordered_map<std::string, const TraceNode*> by_id;
  for (const auto& n : trace.nodes) {
    if (!by_id.emplace(n.id, &n).second)
      out.push_back({"node " + n.id, "duplicate node id"});
    if (n.kind == NodeKind::Activity && (!n.pid || n.path))
      out.push_back({"node " + n.id, "activity must carry a pid and no path"});
    if (n.kind == NodeKind::Entity && (!n.path || n.pid))
      out.push_back({"node " + n.id, "entity must carry a path and no pid"});
  }
  for (std::size_t i = 0; i < trace.edges.size(); ++i) {
    const auto& e = trace.edges[i];
    const auto subject = detail::edge_subject(i, e);
    if (!e.interval.valid())
      out.push_back({subject, "interval begin " + std::to_string(e.interval.begin) +
                                  " > end " + std::to_string(e.interval.end)});
    auto s = by_id.find(e.src);
    auto d = by_id.find(e.dst);
    if (s == by_id.end() || d == by_id.end()) {
      out.push_back({subject, "dangling endpoint"});
      continue;
    }
    const NodeKind sk = s->second->kind, dk = d->second->kind;
    bool typed = false;
    switch (e.label) {
      case TraceLabel::ReadFrom: typed = sk == NodeKind::Entity && dk == NodeKind::Activity; break;
      case TraceLabel::HasWritten: typed = sk == NodeKind::Activity && dk == NodeKind::Entity; break;
      case TraceLabel::Executed: typed = sk == NodeKind::Activity && dk == NodeKind::Activity; break;
    }
    if (!typed)
      out.push_back({subject, std::string(to_string(e.label)) + " cannot connect " +
                                  std::string(to_string(sk)) + " to " +
                                  std::string(to_string(dk))});
  }
  return out;
}

/// Incrementally assembles a trace from records, merging repeated (src, dst, label)
/// interactions into a single edge over the interval hull.
class TraceBuilder {
 public:
  const std::string& add_activity(std::int64_t pid, std::string label) {
    auto id = activity_id(pid);
    auto [it, inserted] = index_.emplace(id, trace_.nodes.size());
    if (inserted) {
      trace_.nodes.push_back({id, NodeKind::Activity, std::move(label), pid, std::nullopt});
    } else {
      auto& n = trace_.nodes[it->second];
      if (n.kind != NodeKind::Activity)
        throw std::invalid_argument("node " + id + " already declared as entity");
      if (n.label.empty()) n.label = std::move(label);
    }
    return trace_.nodes[it->second].id;
  }

  void relabel_activity(std::int64_t pid, std::string label) {
    auto& id = add_activity(pid, label);
    trace_.nodes[index_.at(id)].label = std::move(label);
  }

  const std::string& add_entity(std::string_view raw_path) {
    auto path = canonical_path(raw_path);
    auto [it, inserted] = index_.emplace(path, trace_.nodes.size());
    if (inserted) {
      trace_.nodes.push_back({path, NodeKind::Entity, path, std::nullopt, path});
    } else if (trace_.nodes[it->second].kind != NodeKind::Entity) {
      throw std::invalid_argument("node " + path + " already declared as activity");
    }
    return trace_.nodes[it->second].id;
  }

  void add_edge(const std::string& src, const std::string& dst, TraceLabel label,
                TimeInterval iv) {
    detail::EdgeKey key{src, dst, label};
    auto it = edge_index_.find(key);
    if (it == edge_index_.end()) {
      edge_index_.emplace(key, trace_.edges.size());
      trace_.edges.push_back({src, dst, label, iv});
      return;
    }
    auto& e = trace_.edges[it->second];
    e.interval = e.interval.hull(iv);
    ++merged_;
  }

  void set_meta(std::string key, std::string value) { trace_.meta[std::move(key)] = std::move(value); }

  [[nodiscard]] ExecutionTrace build() && {
    if (merged_) trace_.meta["merged_records"] = std::to_string(merged_);
    return std::move(trace_);
  }

 private:
  ExecutionTrace trace_;
  std::unordered_map<std::string, std::size_t> index_;
  std::map<detail::EdgeKey, std::size_t> edge_index_;
  std::size_t merged_ = 0;
};

namespace detail {

struct ParsedEndpoint {
  NodeKind kind;
  std::int64_t pid = 0;
  std::string text;  // label for activities, path for entities
};

inline ParsedEndpoint parse_endpoint(const nlohmann::json& j, std::size_t line, const char* role) {
  if (!j.is_object()) throw TraceParseError(line, std::string(role) + " must be an object");
  auto kind = j.find("kind");
  if (kind == j.end() || !kind->is_string())
    throw TraceParseError(line, std::string(role) + ".kind missing");
  if (*kind == "activity") {
    auto pid = j.find("pid");
    if (pid == j.end() || !pid->is_number_integer())
      throw TraceParseError(line, std::string(role) + ".pid must be an integer");
    std::string label;
    if (auto l = j.find("label"); l != j.end()) {
      if (!l->is_string()) throw TraceParseError(line, std::string(role) + ".label must be a string");
      label = l->get<std::string>();
    }
    return {NodeKind::Activity, pid->get<std::int64_t>(), std::move(label)};
  }
  if (*kind == "entity") {
    auto path = j.find("path");
    if (path == j.end() || !path->is_string() || path->get<std::string>().empty())
      throw TraceParseError(line, std::string(role) + ".path must be a non-empty string");
    return {NodeKind::Entity, 0, path->get<std::string>()};
  }
  throw TraceParseError(line, std::string(role) + ".kind must be \"activity\" or \"entity\"");
}

inline Timestamp parse_time(const nlohmann::json& rec, const char* key, std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_number_integer())
    throw TraceParseError(line, std::string(key) + " must be an integer");
  return it->get<Timestamp>();
}

}  // namespace detail

/// Parses one newline-delimited JSON trace log. Blank lines are ignored.
/// Throws TraceParseError carrying the offending line.
inline ExecutionTrace parse_trace_log(std::istream& in) {
  TraceBuilder builder;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw TraceParseError(lineno, std::string("malformed record: ") + e.what());
    }
    if (!rec.is_object()) throw TraceParseError(lineno, "record must be a JSON object");
    auto op = rec.find("op");
    if (op == rec.end() || !op->is_string()) throw TraceParseError(lineno, "op missing");
    auto label = parse_trace_label(op->get<std::string>());
    if (!label) throw TraceParseError(lineno, "unknown label '" + op->get<std::string>() + "'");
    if (!rec.contains("subject") || !rec.contains("object"))
      throw TraceParseError(lineno, "subject and object are required");
    auto subj = detail::parse_endpoint(rec["subject"], lineno, "subject");
    auto obj = detail::parse_endpoint(rec["object"], lineno, "object");
    TimeInterval iv{detail::parse_time(rec, "t_begin", lineno),
                    detail::parse_time(rec, "t_end", lineno)};
    if (!iv.valid())
      throw TraceParseError(lineno, "interval begin " + std::to_string(iv.begin) + " > end " +
                                        std::to_string(iv.end));

    const NodeKind want_s = *label == TraceLabel::ReadFrom ? NodeKind::Entity : NodeKind::Activity;
    const NodeKind want_o = *label == TraceLabel::HasWritten ? NodeKind::Entity : NodeKind::Activity;
    if (subj.kind != want_s || obj.kind != want_o)
      throw TraceParseError(lineno, std::string(to_string(*label)) + " expects " +
                                        std::string(to_string(want_s)) + " subject and " +
                                        std::string(to_string(want_o)) + " object");
    try {
      auto add = [&](const detail::ParsedEndpoint& ep) -> std::string {
        return ep.kind == NodeKind::Activity ? builder.add_activity(ep.pid, ep.text)
                                             : builder.add_entity(ep.text);
      };
      auto s = add(subj);
      auto o = add(obj);
      builder.add_edge(s, o, *label, iv);
    } catch (const std::invalid_argument& e) {
      throw TraceParseError(lineno, e.what());
    }
  }
  auto trace = std::move(builder).build();
  if (auto v = validate_trace(trace); !v.empty())
    throw TraceParseError(0, "invalid trace: " + v.front().subject + ": " + v.front().message);
  return trace;
}

inline ExecutionTrace parse_trace_log(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_trace_log(in);
}

namespace detail {

inline nlohmann::json endpoint_json(const TraceNode& n) {
  if (n.kind == NodeKind::Activity)
    return {{"kind", "activity"}, {"pid", n.pid.value_or(0)}, {"label", n.label}};
  return {{"kind", "entity"}, {"path", n.path.value_or(n.id)}};
}

}  // namespace detail

/// Writes one record per edge in canonical order.
inline void serialize_trace(const ExecutionTrace& trace, std::ostream& out) {
  std::unordered_map<std::string, const TraceNode*> by_id;
  for (const auto& n : trace.nodes) by_id.emplace(n.id, &n);
  ExecutionTrace sorted = trace;
  sorted.canonicalize();
  for (const auto& e : sorted.edges) {
    nlohmann::json rec = {{"op", to_string(e.label)},
                          {"subject", detail::endpoint_json(*by_id.at(e.src))},
                          {"object", detail::endpoint_json(*by_id.at(e.dst))},
                          {"t_begin", e.interval.begin},
                          {"t_end", e.interval.end}};
    out << rec.dump() << '\n';
  }
}

inline std::string serialize_trace(const ExecutionTrace& trace) {
  std::ostringstream out;
  serialize_trace(trace, out);
  return out.str();
}

}  // namespace provrepeat
