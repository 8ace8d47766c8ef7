#pragma once

// W3C-PROV style labeled graph shared by inference, isomorphism, planning and summarization.
//
// Edges are stored in information-flow orientation:
//   used            entity   -> activity   (the activity used the entity)
//   wasGeneratedBy  activity -> entity     (the entity was generated by the activity)
//   wasInformedBy   activity -> activity   (parent informed / spawned child)
// PROV-JSON export writes the standard PROV roles, so the on-disk relation reads the
// W3C way round regardless of this storage orientation.

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "trace_model.hpp"

namespace provrepeat {

enum class ProvLabel { Used, WasGeneratedBy, WasInformedBy };

inline constexpr ProvLabel kAllProvLabels[] = {ProvLabel::Used, ProvLabel::WasGeneratedBy,
                                              ProvLabel::WasInformedBy};

inline std::string_view to_string(ProvLabel l) {
  switch (l) {
    case ProvLabel::Used: return "used";
    case ProvLabel::WasGeneratedBy: return "wasGeneratedBy";
    case ProvLabel::WasInformedBy: return "wasInformedBy";
  }
  return "?";
}

inline std::optional<ProvLabel> parse_prov_label(std::string_view s) {
  if (s == "used") return ProvLabel::Used;
  if (s == "wasGeneratedBy") return ProvLabel::WasGeneratedBy;
  if (s == "wasInformedBy") return ProvLabel::WasInformedBy;
  return std::nullopt;
}

/// Expected (src kind, dst kind) for a label in flow orientation.
inline std::pair<NodeKind, NodeKind> endpoint_kinds(ProvLabel l) {
  switch (l) {
    case ProvLabel::Used: return {NodeKind::Entity, NodeKind::Activity};
    case ProvLabel::WasGeneratedBy: return {NodeKind::Activity, NodeKind::Entity};
    case ProvLabel::WasInformedBy: return {NodeKind::Activity, NodeKind::Activity};
  }
  return {NodeKind::Activity, NodeKind::Activity};
}

struct ProvNode {
  std::string id;
  NodeKind kind = NodeKind::Entity;
  std::string label;
  std::map<std::string, std::string> attrs;

  friend bool operator==(const ProvNode&, const ProvNode&) = default;
};

struct ProvEdge {
  std::string src;
  std::string dst;
  ProvLabel label = ProvLabel::Used;
  std::optional<TimeInterval> interval;

  friend bool operator==(const ProvEdge&, const ProvEdge&) = default;
};

inline bool edge_less(const ProvEdge& a, const ProvEdge& b) {
  return std::tie(a.src, a.dst, a.label, a.interval) < std::tie(b.src, b.dst, b.label, b.interval);
}

enum class Direction { In, Out };

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable labeled graph. Nodes and edges are held in canonical (id-sorted) order, so
/// equality and every export are independent of insertion order.
class ProvenanceGraph {
 public:
  ProvenanceGraph() = default;

  [[nodiscard]] const std::vector<ProvNode>& nodes() const { return nodes_; }
  [[nodiscard]] const std::vector<ProvEdge>& edges() const { return edges_; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] bool empty() const { return nodes_.empty(); }
  [[nodiscard]] const std::string& source_digest() const { return source_digest_; }

  [[nodiscard]] std::optional<std::size_t> index_of(std::string_view id) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                               [](const ProvNode& n, std::string_view k) { return n.id < k; });
    if (it == nodes_.end() || it->id != id) return std::nullopt;
    return static_cast<std::size_t>(it - nodes_.begin());
  }
  [[nodiscard]] bool contains(std::string_view id) const { return index_of(id).has_value(); }

  [[nodiscard]] const ProvNode& node(std::string_view id) const {
    auto i = index_of(id);
    if (!i) throw GraphError("unknown node id '" + std::string(id) + "'");
    return nodes_[*i];
  }
  [[nodiscard]] const ProvNode& node_at(std::size_t i) const { return nodes_[i]; }

  /// Edge indices incident to node index `i` (outgoing or incoming).
  [[nodiscard]] const std::vector<std::size_t>& out_edges(std::size_t i) const { return out_[i]; }
  [[nodiscard]] const std::vector<std::size_t>& in_edges(std::size_t i) const { return in_[i]; }
  [[nodiscard]] std::size_t src_index(std::size_t e) const { return ends_[e].first; }
  [[nodiscard]] std::size_t dst_index(std::size_t e) const { return ends_[e].second; }

  [[nodiscard]] std::size_t count(NodeKind k) const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [k](const ProvNode& n) { return n.kind == k; }));
  }

  /// Neighbor ids of `id`, sorted and de-duplicated. Throws GraphError for unknown ids.
  [[nodiscard]] std::vector<std::string> neighbors(std::string_view id, Direction dir,
                                                   std::optional<ProvLabel> label = {}) const {
    auto i = index_of(id);
    if (!i) throw GraphError("unknown node id '" + std::string(id) + "'");
    std::vector<std::string> out;
    const auto& list = dir == Direction::Out ? out_[*i] : in_[*i];
    for (auto e : list) {
      if (label && edges_[e].label != *label) continue;
      out.push_back(dir == Direction::Out ? edges_[e].dst : edges_[e].src);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Typing violations (flow orientation); empty for well-formed graphs.
  [[nodiscard]] std::vector<std::string> typing_violations() const {
    std::vector<std::string> out;
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      auto [sk, dk] = endpoint_kinds(edges_[e].label);
      if (nodes_[ends_[e].first].kind != sk || nodes_[ends_[e].second].kind != dk)
        out.push_back(edges_[e].src + " -" + std::string(to_string(edges_[e].label)) + "-> " +
                      edges_[e].dst);
    }
    return out;
  }

  /// Subgraph induced by `keep` (ids absent from the graph are ignored).
  [[nodiscard]] ProvenanceGraph induced(const std::set<std::string>& keep) const;

  friend bool operator==(const ProvenanceGraph& a, const ProvenanceGraph& b) {
    return a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
  }

 private:
  friend class GraphBuilder;

  void finalize() {
    std::sort(nodes_.begin(), nodes_.end(),
              [](const ProvNode& a, const ProvNode& b) { return a.id < b.id; });
    std::sort(edges_.begin(), edges_.end(), edge_less);
    out_.assign(nodes_.size(), {});
    in_.assign(nodes_.size(), {});
    ends_.clear();
    ends_.reserve(edges_.size());
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      auto s = index_of(edges_[e].src);
      auto d = index_of(edges_[e].dst);
      if (!s || !d)
        throw GraphError("edge references unknown node: " + edges_[e].src + " -> " + edges_[e].dst);
      ends_.emplace_back(*s, *d);
      out_[*s].push_back(e);
      in_[*d].push_back(e);
    }
  }

  std::vector<ProvNode> nodes_;
  std::vector<ProvEdge> edges_;
  std::vector<std::vector<std::size_t>> out_, in_;
  std::vector<std::pair<std::size_t, std::size_t>> ends_;
  std::string source_digest_;
};

/// Single-threaded builder. Duplicate (src, dst, label) edges merge over the interval hull.
class GraphBuilder {
 public:
  GraphBuilder& add_node(ProvNode n) {
    if (!ids_.insert(n.id).second) throw GraphError("duplicate node id '" + n.id + "'");
    g_.nodes_.push_back(std::move(n));
    return *this;
  }
  GraphBuilder& add_node(std::string id, NodeKind kind, std::string label = {}) {
    if (label.empty()) label = id;
    return add_node(ProvNode{std::move(id), kind, std::move(label), {}});
  }
  GraphBuilder& activity(std::string id, std::string label = {}) {
    return add_node(std::move(id), NodeKind::Activity, std::move(label));
  }
  GraphBuilder& entity(std::string id, std::string label = {}) {
    return add_node(std::move(id), NodeKind::Entity, std::move(label));
  }

  GraphBuilder& add_edge(std::string src, std::string dst, ProvLabel label,
                         std::optional<TimeInterval> iv = {}) {
    auto key = std::make_tuple(src, dst, label);
    if (auto it = edge_index_.find(key); it != edge_index_.end()) {
      auto& e = g_.edges_[it->second];
      if (iv) e.interval = e.interval ? e.interval->hull(*iv) : *iv;
      return *this;
    }
    edge_index_.emplace(key, g_.edges_.size());
    g_.edges_.push_back({std::move(src), std::move(dst), label, iv});
    return *this;
  }

  GraphBuilder& source_digest(std::string d) {
    g_.source_digest_ = std::move(d);
    return *this;
  }

  [[nodiscard]] bool has_node(const std::string& id) const { return ids_.count(id) != 0; }

  [[nodiscard]] ProvenanceGraph build() && {
    g_.finalize();
    return std::move(g_);
  }

 private:
  ProvenanceGraph g_;
  std::set<std::string> ids_;
  std::map<std::tuple<std::string, std::string, ProvLabel>, std::size_t> edge_index_;
};

inline ProvenanceGraph ProvenanceGraph::induced(const std::set<std::string>& keep) const {
  GraphBuilder b;
  for (const auto& n : nodes_)
    if (keep.count(n.id)) b.add_node(n);
  for (const auto& e : edges_)
    if (keep.count(e.src) && keep.count(e.dst)) b.add_edge(e.src, e.dst, e.label, e.interval);
  b.source_digest(source_digest_);
  return std::move(b).build();
}

// ---------------------------------------------------------------------------
// Serialization

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline const char* prov_role_src(ProvLabel l) {
  switch (l) {
    case ProvLabel::Used: return "prov:entity";
    case ProvLabel::WasGeneratedBy: return "prov:activity";
    case ProvLabel::WasInformedBy: return "prov:informant";
  }
  return "";
}

inline const char* prov_role_dst(ProvLabel l) {
  switch (l) {
    case ProvLabel::Used: return "prov:activity";
    case ProvLabel::WasGeneratedBy: return "prov:entity";
    case ProvLabel::WasInformedBy: return "prov:informed";
  }
  return "";
}

inline nlohmann::ordered_json node_json(const ProvNode& n) {
  nlohmann::ordered_json j;
  j["prov:label"] = n.label;
  for (const auto& [k, v] : n.attrs) j["provrepeat:" + k] = v;
  return j;
}

}  // namespace detail

inline nlohmann::ordered_json to_prov_json(const ProvenanceGraph& g) {
  nlohmann::ordered_json doc;
  doc["prefix"] = {{"provrepeat", "urn:provrepeat:"}};
  doc["activity"] = nlohmann::ordered_json::object();
  doc["entity"] = nlohmann::ordered_json::object();
  for (const auto& n : g.nodes())
    doc[n.kind == NodeKind::Activity ? "activity" : "entity"][n.id] = detail::node_json(n);
  for (auto l : kAllProvLabels) doc[std::string(to_string(l))] = nlohmann::ordered_json::object();
  std::map<ProvLabel, std::size_t> counter;
  for (const auto& e : g.edges()) {
    nlohmann::ordered_json rel;
    rel[detail::prov_role_dst(e.label)] = e.dst;
    rel[detail::prov_role_src(e.label)] = e.src;
    if (e.interval) rel["prov:time"] = {e.interval->begin, e.interval->end};
    auto key = "_:" + std::string(to_string(e.label)) + std::to_string(++counter[e.label]);
    doc[std::string(to_string(e.label))][key] = std::move(rel);
  }
  if (!g.source_digest().empty()) doc["provrepeat:sourceDigest"] = g.source_digest();
  return doc;
}

inline std::string export_prov_json(const ProvenanceGraph& g) { return to_prov_json(g).dump(2) + "\n"; }

inline ProvenanceGraph from_prov_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw FormatError("PROV-JSON document must be an object");
  GraphBuilder b;
  auto read_nodes = [&](const char* key, NodeKind kind) {
    auto it = doc.find(key);
    if (it == doc.end()) return;
    if (!it->is_object()) throw FormatError(std::string(key) + " must be an object");
    for (const auto& [id, body] : it->items()) {
      if (!body.is_object()) throw FormatError(std::string(key) + "/" + id + " must be an object");
      ProvNode n{id, kind, id, {}};
      for (const auto& [k, v] : body.items()) {
        if (!v.is_string()) throw FormatError(std::string(key) + "/" + id + "/" + k + " must be a string");
        if (k == "prov:label") n.label = v.get<std::string>();
        else if (k.rfind("provrepeat:", 0) == 0) n.attrs[k.substr(11)] = v.get<std::string>();
      }
      try {
        b.add_node(std::move(n));
      } catch (const GraphError& e) {
        throw FormatError(e.what());
      }
    }
  };
  read_nodes("activity", NodeKind::Activity);
  read_nodes("entity", NodeKind::Entity);
  for (auto l : kAllProvLabels) {
    const std::string key(to_string(l));
    auto it = doc.find(key);
    if (it == doc.end()) continue;
    if (!it->is_object()) throw FormatError(key + " must be an object");
    for (const auto& [rid, rel] : it->items()) {
      auto where = key + "/" + rid;
      if (!rel.is_object()) throw FormatError(where + " must be an object");
      auto src = rel.find(detail::prov_role_src(l));
      auto dst = rel.find(detail::prov_role_dst(l));
      if (src == rel.end() || dst == rel.end() || !src->is_string() || !dst->is_string())
        throw FormatError(where + " is missing " + detail::prov_role_src(l) + " or " +
                          detail::prov_role_dst(l));
      std::optional<TimeInterval> iv;
      if (auto t = rel.find("prov:time"); t != rel.end()) {
        if (!t->is_array() || t->size() != 2 || !(*t)[0].is_number_integer() ||
            !(*t)[1].is_number_integer())
          throw FormatError(where + "/prov:time must be [begin, end]");
        iv = TimeInterval{(*t)[0].get<Timestamp>(), (*t)[1].get<Timestamp>()};
      }
      b.add_edge(src->get<std::string>(), dst->get<std::string>(), l, iv);
    }
  }
  if (auto d = doc.find("provrepeat:sourceDigest"); d != doc.end() && d->is_string())
    b.source_digest(d->get<std::string>());
  try {
    return std::move(b).build();
  } catch (const GraphError& e) {
    throw FormatError(e.what());
  }
}

inline ProvenanceGraph import_prov_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed PROV-JSON at byte ") + std::to_string(e.byte) + ": " +
                      e.what());
  }
  return from_prov_json(doc);
}

namespace detail {

inline std::string dot_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

/// Graphviz rendering: activities as boxes, entities as ellipses, one edge per ProvEdge.
inline std::string export_dot(const ProvenanceGraph& g, std::string_view name = "provenance") {
  std::ostringstream out;
  out << "digraph \"" << detail::dot_escape(name) << "\" {\n";
  for (const auto& n : g.nodes())
    out << "  \"" << detail::dot_escape(n.id) << "\" [shape="
        << (n.kind == NodeKind::Activity ? "box" : "ellipse") << ", label=\""
        << detail::dot_escape(n.label) << "\"];\n";
  for (const auto& e : g.edges())
    out << "  \"" << detail::dot_escape(e.src) << "\" -> \"" << detail::dot_escape(e.dst)
        << "\" [label=\"" << to_string(e.label) << "\"];\n";
  out << "}\n";
  return out.str();
}

}  // namespace provrepeat
