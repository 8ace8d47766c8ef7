#pragma once

// Compact views of full (library-level) provenance graphs.
//
// Two independent methods:
//  * the collapse pipeline (similarity -> packability -> annotation, to fixpoint), which
//    builds an expandable hierarchy of supernodes over the original nodes;
//  * ancestry-degree grouping, the coarsest kind-homogeneous partition whose members share
//    ancestor groups and per-label in/out degrees toward every group.

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "dependency_inference.hpp"
#include "prov_graph.hpp"

namespace provrepeat {

class SummaryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SuperNode {
  std::string id;
  NodeKind kind = NodeKind::Entity;
  std::string label;
  std::vector<std::string> children;  // empty for original nodes
  std::string rule;                   // "similarity" | "packability"; empty for original nodes
  std::size_t pass = 0;               // collapse pass that created it

  [[nodiscard]] bool leaf() const { return children.empty(); }
};

struct SuperEdge {
  std::string src;
  std::string dst;
  ProvLabel label = ProvLabel::Used;
  std::size_t multiplicity = 0;

  friend bool operator==(const SuperEdge&, const SuperEdge&) = default;
};

/// A view over an original graph: visible top-level nodes, some possibly hidden behind
/// annotations, each expandable back to the original nodes it stands for.
class SummaryGraph {
 public:
  SummaryGraph() = default;

  explicit SummaryGraph(std::shared_ptr<const ProvenanceGraph> original) : original_(std::move(original)) {
    for (const auto& n : original_->nodes()) {
      nodes_[n.id] = SuperNode{n.id, n.kind, n.label, {}, {}, 0};
      roots_.insert(n.id);
    }
  }
  explicit SummaryGraph(const ProvenanceGraph& g)
      : SummaryGraph(std::make_shared<const ProvenanceGraph>(g)) {}

  [[nodiscard]] const ProvenanceGraph& original() const { return *original_; }
  [[nodiscard]] const std::map<std::string, SuperNode>& all_nodes() const { return nodes_; }
  [[nodiscard]] const SuperNode& node(const std::string& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw SummaryError("unknown supernode '" + id + "'");
    return it->second;
  }
  [[nodiscard]] std::size_t passes() const { return passes_; }

  /// Top-level nodes that are shown (roots minus annotation-hidden ones).
  [[nodiscard]] std::vector<std::string> visible() const {
    std::vector<std::string> out;
    for (const auto& r : roots_)
      if (!hidden_.count(r)) out.push_back(r);
    return out;
  }
  [[nodiscard]] const std::set<std::string>& roots() const { return roots_; }
  [[nodiscard]] const std::set<std::string>& hidden() const { return hidden_; }
  [[nodiscard]] bool is_visible(const std::string& id) const { return roots_.count(id) && !hidden_.count(id); }

  [[nodiscard]] std::size_t visible_count(NodeKind k) const {
    std::size_t n = 0;
    for (const auto& v : visible())
      if (nodes_.at(v).kind == k) ++n;
    return n;
  }

  /// Top-level node currently standing for an original node.
  [[nodiscard]] std::string top_of(const std::string& id) const {
    std::string cur = id;
    for (auto it = parent_.find(cur); it != parent_.end(); it = parent_.find(cur)) cur = it->second;
    return cur;
  }

  /// Original node ids under a (super)node.
  [[nodiscard]] std::vector<std::string> leaves(const std::string& id) const {
    std::vector<std::string> out;
    std::vector<std::string> stack{id};
    while (!stack.empty()) {
      auto cur = stack.back();
      stack.pop_back();
      const auto& n = node(cur);
      if (n.leaf()) out.push_back(cur);
      for (const auto& c : n.children) stack.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Edges among top-level nodes, aggregated by (src, dst, label). Edges internal to one
  /// node, or touching hidden nodes unless `include_hidden`, are omitted.
  [[nodiscard]] std::vector<SuperEdge> edges(bool include_hidden = false) const {
    std::map<std::tuple<std::string, std::string, ProvLabel>, std::size_t> agg;
    for (const auto& e : original_->edges()) {
      auto s = top_of(e.src), d = top_of(e.dst);
      if (s == d) continue;
      if (!include_hidden && (hidden_.count(s) || hidden_.count(d))) continue;
      ++agg[{s, d, e.label}];
    }
    std::vector<SuperEdge> out;
    for (const auto& [k, m] : agg) out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), m});
    return out;
  }

  /// Labels of hidden files attached to each visible process they touch.
  [[nodiscard]] std::map<std::string, std::vector<std::string>> annotations() const {
    std::map<std::string, std::set<std::string>> acc;
    for (const auto& e : edges(true)) {
      if (hidden_.count(e.src) && is_visible(e.dst)) acc[e.dst].insert(nodes_.at(e.src).label);
      if (hidden_.count(e.dst) && is_visible(e.src)) acc[e.src].insert(nodes_.at(e.dst).label);
    }
    std::map<std::string, std::vector<std::string>> out;
    for (auto& [k, v] : acc) out[k] = {v.begin(), v.end()};
    return out;
  }

  /// One-level expansion: a hidden node becomes visible; a visible supernode is replaced by
  /// its children.
  [[nodiscard]] SummaryGraph expand(const std::string& id) const {
    SummaryGraph out = *this;
    if (out.hidden_.erase(id)) return out;
    if (!roots_.count(id) || !nodes_.count(id)) throw SummaryError("unknown supernode '" + id + "'");
    const auto& n = nodes_.at(id);
    if (n.leaf()) throw SummaryError("'" + id + "' is an original node and cannot be expanded");
    out.roots_.erase(id);
    for (const auto& c : n.children) {
      out.parent_.erase(c);
      out.roots_.insert(c);
    }
    out.nodes_.erase(id);
    return out;
  }

  [[nodiscard]] SummaryGraph expand_all() const {
    SummaryGraph cur = *this;
    for (;;) {
      std::optional<std::string> next;
      for (const auto& r : cur.roots_)
        if (cur.hidden_.count(r) || !cur.nodes_.at(r).leaf()) {
          next = r;
          break;
        }
      if (!next) return cur;
      cur = cur.expand(*next);
    }
  }

  /// Clicks needed to reveal each original node: one per enclosing supernode, plus one if
  /// its top-level node is hidden.
  [[nodiscard]] std::map<std::string, std::size_t> click_depths() const {
    std::map<std::string, std::size_t> out;
    for (const auto& n : original_->nodes()) {
      std::size_t d = 0;
      std::string cur = n.id;
      for (auto it = parent_.find(cur); it != parent_.end(); it = parent_.find(cur)) {
        cur = it->second;
        ++d;
      }
      if (hidden_.count(cur)) ++d;
      out[n.id] = d;
    }
    return out;
  }

  [[nodiscard]] std::size_t max_click_depth() const {
    std::size_t m = 0;
    for (const auto& [id, d] : click_depths()) m = std::max(m, d);
    return m;
  }

  /// The visible view as a plain graph; after expand_all() this equals the original.
  [[nodiscard]] ProvenanceGraph to_graph() const {
    GraphBuilder b;
    for (const auto& v : visible()) {
      const auto& sn = nodes_.at(v);
      if (sn.leaf()) b.add_node(original_->node(v));
      else b.add_node(ProvNode{sn.id, sn.kind, sn.label, {{"members", std::to_string(leaves(v).size())}}});
    }
    std::map<std::tuple<std::string, std::string, ProvLabel>, std::optional<TimeInterval>> single;
    for (const auto& e : original_->edges()) single[{e.src, e.dst, e.label}] = e.interval;
    for (const auto& e : edges()) {
      std::optional<TimeInterval> iv;
      if (e.multiplicity == 1)
        if (auto it = single.find({e.src, e.dst, e.label}); it != single.end()) iv = it->second;
      b.add_edge(e.src, e.dst, e.label, iv);
    }
    return std::move(b).build();
  }

  // Mutators used by the collapse passes.
  std::string add_supernode(NodeKind kind, std::string label, std::vector<std::string> children,
                            std::string rule) {
    auto id = "group:" + std::to_string(++counter_);
    for (const auto& c : children) {
      roots_.erase(c);
      parent_[c] = id;
    }
    roots_.insert(id);
    nodes_[id] = SuperNode{id, kind, std::move(label), std::move(children), std::move(rule), passes_};
    return id;
  }
  void dissolve(const std::string& id) {  // re-parent children to the caller; node removed
    nodes_.erase(id);
    roots_.erase(id);
    parent_.erase(id);
  }
  void hide(const std::string& id) { hidden_.insert(id); }
  void begin_pass() { ++passes_; }

 private:
  std::shared_ptr<const ProvenanceGraph> original_;
  std::map<std::string, SuperNode> nodes_;
  std::map<std::string, std::string> parent_;
  std::set<std::string> roots_;
  std::set<std::string> hidden_;
  std::size_t counter_ = 0;
  std::size_t passes_ = 0;
};

namespace detail {

struct ViewAdj {
  std::map<std::string, std::vector<SuperEdge>> in, out;
};

inline ViewAdj view_adjacency(const SummaryGraph& s) {
  ViewAdj a;
  for (const auto& e : s.edges()) {
    a.out[e.src].push_back(e);
    a.in[e.dst].push_back(e);
  }
  return a;
}

}  // namespace detail

/// Merges visible nodes of equal kind whose input and output connection sets, taken as
/// (label, endpoint group) pairs, coincide. Endpoint groups are coarsened iteratively until
/// no further merge happens. Returns true when anything merged.
inline bool apply_similarity(SummaryGraph& s) {
  auto vis = s.visible();
  auto adj = detail::view_adjacency(s);
  std::map<std::string, std::string> group;  // node -> representative
  for (const auto& v : vis) group[v] = v;
  using Key = std::tuple<NodeKind, std::set<std::pair<ProvLabel, std::string>>,
                         std::set<std::pair<ProvLabel, std::string>>>;
  for (;;) {
    std::map<Key, std::string> rep;
    std::map<std::string, std::string> next;
    for (const auto& v : vis) {
      Key k{s.node(v).kind, {}, {}};
      for (const auto& e : adj.in[v]) std::get<1>(k).insert({e.label, group[e.src]});
      for (const auto& e : adj.out[v]) std::get<2>(k).insert({e.label, group[e.dst]});
      auto [it, fresh] = rep.emplace(std::move(k), v);
      next[v] = it->second;
    }
    bool changed = false;
    for (const auto& v : vis)
      if (next[v] != group[v]) changed = true;
    std::set<std::string> before, after;
    for (const auto& [k, g] : group) before.insert(g);
    for (const auto& [k, g] : next) after.insert(g);
    group = std::move(next);
    if (!changed || after.size() == before.size()) break;
  }

  std::map<std::string, std::vector<std::string>> members;
  for (const auto& v : vis) members[group[v]].push_back(v);
  bool any = false;
  for (auto& [r, ms] : members) {
    if (ms.size() < 2) continue;
    if (!any) s.begin_pass();
    any = true;
    const auto kind = s.node(ms.front()).kind;
    std::size_t leaves = 0;
    for (const auto& m : ms) leaves += s.leaves(m).size();
    auto label = s.original().node(s.leaves(ms.front()).front()).label + " (x" + std::to_string(leaves) + ")";
    std::vector<std::string> children;
    for (const auto& m : ms) {
      const auto& sn = s.node(m);
      if (sn.rule == "similarity") {
        auto grand = sn.children;
        s.dissolve(m);
        children.insert(children.end(), grand.begin(), grand.end());
      } else {
        children.push_back(m);
      }
    }
    std::sort(children.begin(), children.end());
    s.add_supernode(kind, std::move(label), std::move(children), "similarity");
  }
  return any;
}

/// Packs visible nodes into a parent process:
///  (1) a file with exactly one connection, to process v;
///  (2) a process whose only incoming connection is being spawned by process v;
///  (3) a file with exactly two connections, generated by process v and used by another
///      process x; the packed file leaves an edge v -> x behind.
/// Returns true when anything was packed.
inline bool apply_packability(SummaryGraph& s) {
  auto vis = s.visible();
  auto adj = detail::view_adjacency(s);
  auto kind = [&](const std::string& id) { return s.node(id).kind; };
  std::map<std::string, std::string> target;
  for (const auto& u : vis) {
    const auto& in = adj.in[u];
    const auto& out = adj.out[u];
    if (kind(u) == NodeKind::Entity) {
      if (in.size() + out.size() == 1) {
        const auto& other = in.empty() ? out.front().dst : in.front().src;
        if (kind(other) == NodeKind::Activity) target[u] = other;
      } else if (in.size() == 1 && out.size() == 1 && in.front().label == ProvLabel::WasGeneratedBy &&
                 out.front().label == ProvLabel::Used && in.front().src != out.front().dst &&
                 kind(in.front().src) == NodeKind::Activity && kind(out.front().dst) == NodeKind::Activity) {
        target[u] = in.front().src;
      }
    } else if (in.size() == 1 && in.front().label == ProvLabel::WasInformedBy &&
               kind(in.front().src) == NodeKind::Activity && in.front().src != u) {
      target[u] = in.front().src;
    }
  }
  if (target.empty()) return false;

  // Resolve chains to a final host; a node on a target cycle stays put.
  std::map<std::string, std::string> host;
  for (const auto& [u, v] : target) {
    std::set<std::string> seen{u};
    std::string cur = v;
    bool loop = false;
    while (target.count(cur)) {
      if (!seen.insert(cur).second) {
        loop = true;
        break;
      }
      cur = target.at(cur);
    }
    if (!loop) host[u] = cur;
  }
  if (host.empty()) return false;

  std::map<std::string, std::vector<std::string>> packed;
  for (const auto& [u, h] : host) packed[h].push_back(u);
  s.begin_pass();
  for (auto& [h, us] : packed) {
    std::vector<std::string> children{h};
    children.insert(children.end(), us.begin(), us.end());
    std::sort(children.begin(), children.end());
    s.add_supernode(NodeKind::Activity, s.node(h).label, std::move(children), "packability");
  }
  return true;
}

/// Hides every visible file with n >= 2 connections, all to processes; its name becomes an
/// annotation on each adjacent process. Returns true when anything was hidden.
inline bool apply_annotation(SummaryGraph& s) {
  auto adj = detail::view_adjacency(s);
  std::vector<std::string> victims;
  for (const auto& u : s.visible()) {
    if (s.node(u).kind != NodeKind::Entity) continue;
    const auto& in = adj.in[u];
    const auto& out = adj.out[u];
    if (in.size() + out.size() < 2) continue;
    bool all_proc = true;
    for (const auto& e : in) all_proc &= s.node(e.src).kind == NodeKind::Activity;
    for (const auto& e : out) all_proc &= s.node(e.dst).kind == NodeKind::Activity;
    if (all_proc) victims.push_back(u);
  }
  if (victims.empty()) return false;
  s.begin_pass();
  for (const auto& v : victims) s.hide(v);
  return true;
}

inline SummaryGraph collapse_similarity(const SummaryGraph& in) {
  SummaryGraph s = in;
  apply_similarity(s);
  return s;
}
inline SummaryGraph collapse_similarity(const ProvenanceGraph& g) { return collapse_similarity(SummaryGraph(g)); }

inline SummaryGraph collapse_packability(const SummaryGraph& in) {
  SummaryGraph s = in;
  apply_packability(s);
  return s;
}
inline SummaryGraph collapse_packability(const ProvenanceGraph& g) { return collapse_packability(SummaryGraph(g)); }

inline SummaryGraph annotate_shared_files(const SummaryGraph& in) {
  SummaryGraph s = in;
  apply_annotation(s);
  return s;
}

/// similarity -> packability -> annotation, repeated until no pass changes the view.
inline SummaryGraph collapse_pipeline(const ProvenanceGraph& g, std::size_t max_rounds = 16) {
  SummaryGraph s(g);
  for (std::size_t round = 0; round < max_rounds; ++round) {
    bool changed = apply_similarity(s);
    changed |= apply_packability(s);
    changed |= apply_annotation(s);
    if (!changed) break;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Ancestry-degree grouping

enum class GroupingMode { AncestryDegree, AncestryOnly };

struct GroupEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  ProvLabel label = ProvLabel::Used;
  std::size_t multiplicity = 0;
  friend bool operator==(const GroupEdge&, const GroupEdge&) = default;
};

struct Grouping {
  std::vector<std::vector<std::string>> groups;  // sorted members; groups ordered by first member
  std::vector<GroupEdge> group_edges;
  std::map<std::string, std::size_t> group_of;
};

namespace detail {

// Node/edge arrays with the virtual start node appended at index n. Label index 3 = start.
struct StartAugmented {
  std::size_t n = 0;
  std::vector<int> kind;  // 0 activity, 1 entity, 2 start
  std::vector<std::tuple<std::size_t, std::size_t, int>> edges;
  std::vector<std::vector<std::pair<std::size_t, int>>> out, in;

  explicit StartAugmented(const ProvenanceGraph& g) : n(g.size()) {
    kind.resize(n + 1);
    for (std::size_t i = 0; i < n; ++i) kind[i] = g.node_at(i).kind == NodeKind::Activity ? 0 : 1;
    kind[n] = 2;
    for (std::size_t e = 0; e < g.edges().size(); ++e)
      edges.emplace_back(g.src_index(e), g.dst_index(e), static_cast<int>(g.edges()[e].label));
    for (std::size_t i = 0; i < n; ++i)
      if (g.in_edges(i).empty()) edges.emplace_back(n, i, 3);
    out.resize(n + 1);
    in.resize(n + 1);
    for (const auto& [s, d, l] : edges) {
      out[s].emplace_back(d, l);
      in[d].emplace_back(s, l);
    }
  }
};

inline Grouping finish_grouping(const ProvenanceGraph& g, const std::vector<int>& group_id) {
  std::map<int, std::vector<std::string>> by;
  for (std::size_t i = 0; i < g.size(); ++i) by[group_id[i]].push_back(g.node_at(i).id);
  Grouping out;
  for (auto& [k, ms] : by) {
    std::sort(ms.begin(), ms.end());
    out.groups.push_back(std::move(ms));
  }
  std::sort(out.groups.begin(), out.groups.end());
  for (std::size_t gi = 0; gi < out.groups.size(); ++gi)
    for (const auto& m : out.groups[gi]) out.group_of[m] = gi;
  std::map<std::tuple<std::size_t, std::size_t, ProvLabel>, std::size_t> agg;
  for (const auto& e : g.edges()) ++agg[{out.group_of[e.src], out.group_of[e.dst], e.label}];
  for (const auto& [k, m] : agg) out.group_edges.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), m});
  return out;
}

}  // namespace detail

/// Coarsest partition satisfying ancestry grouping (and, in AncestryDegree mode, per-label
/// in/out degree equality toward every group). Worklist refinement: start from the kind
/// partition on a stack; pop a group and, per label and direction, split every group by
/// its members' edge counts toward the popped group, pushing each changed piece.
/// Nodes without predecessors hang off a virtual start node. Rejects cyclic input.
inline Grouping ancestry_degree_grouping(const ProvenanceGraph& g, GroupingMode mode = GroupingMode::AncestryDegree) {
  if (!detect_cycles(g, 1).acyclic()) throw SummaryError("ancestry grouping requires an acyclic graph");
  detail::StartAugmented a(g);
  const auto total = a.n + 1;
  std::vector<int> gid(total);
  std::vector<std::vector<std::size_t>> members;
  for (int k = 0; k < 3; ++k) {
    std::vector<std::size_t> ms;
    for (std::size_t i = 0; i < total; ++i)
      if (a.kind[i] == k) ms.push_back(i);
    if (ms.empty()) continue;
    for (auto i : ms) gid[i] = static_cast<int>(members.size());
    members.push_back(std::move(ms));
  }

  if (mode == GroupingMode::AncestryOnly) {
    // Set-based refinement on (label, predecessor group) pairs until stable.
    for (;;) {
      std::map<std::pair<int, std::set<std::pair<int, int>>>, int> dict;
      std::vector<int> next(total);
      for (std::size_t i = 0; i < total; ++i) {
        std::set<std::pair<int, int>> anc;
        for (auto [p, l] : a.in[i]) anc.insert({l, gid[p]});
        next[i] = dict.emplace(std::make_pair(gid[i], std::move(anc)), static_cast<int>(dict.size())).first->second;
      }
      std::set<int> before(gid.begin(), gid.end());
      gid = std::move(next);
      if (dict.size() == before.size()) break;
    }
    gid.pop_back();
    return detail::finish_grouping(g, gid);
  }

  std::vector<int> stack;
  std::vector<bool> in_stack;
  auto push = [&](int grp) {
    if (static_cast<std::size_t>(grp) >= in_stack.size()) in_stack.resize(grp + 1, false);
    if (in_stack[grp]) return;
    in_stack[grp] = true;
    stack.push_back(grp);
  };
  // Stack is seeded in reverse canonical order so the smallest key pops first.
  for (int k = static_cast<int>(members.size()) - 1; k >= 0; --k) push(k);

  auto divide = [&](const std::vector<std::size_t>& vg, bool from) {
    for (int label = 0; label < 4; ++label) {
      std::map<std::size_t, int> degree;  // node -> edge count toward vg
      std::set<int> touched;
      for (auto v : vg) {
        // "from": edges (u, v) with v in vg; "to": edges (v, u).
        for (auto [u, l] : from ? a.in[v] : a.out[v]) {
          if (l != label) continue;
          ++degree[u];
          touched.insert(gid[u]);
        }
      }
      for (int grp : touched) {
        std::map<int, std::vector<std::size_t>> pieces;
        for (auto u : members[grp]) {
          auto it = degree.find(u);
          pieces[it == degree.end() ? 0 : it->second].push_back(u);
        }
        if (pieces.size() < 2) continue;
        bool first = true;
        for (auto& [deg, ms] : pieces) {
          int id = grp;
          if (first) {
            members[grp] = ms;
            first = false;
          } else {
            id = static_cast<int>(members.size());
            members.push_back(ms);
            for (auto u : ms) gid[u] = id;
          }
          push(id);
        }
      }
    }
  };

  while (!stack.empty()) {
    int grp = stack.back();
    stack.pop_back();
    in_stack[grp] = false;
    const auto vg = members[grp];
    divide(vg, true);
    divide(vg, false);
  }
  gid.pop_back();
  return detail::finish_grouping(g, gid);
}

// ---------------------------------------------------------------------------
// Statistics and exports

struct SummaryStats {
  double file_node_reduction = 0;     // percent
  double process_node_reduction = 0;  // percent
  double edge_reduction = 0;          // percent
  double combined_reduction = 0;      // percent over nodes + edges together
};

namespace detail {

inline double reduction(std::size_t original, std::size_t summary) {
  if (original == 0) return 0.0;
  return 100.0 * (1.0 - static_cast<double>(summary) / static_cast<double>(original));
}

inline SummaryStats make_stats(const ProvenanceGraph& g, std::size_t files, std::size_t procs, std::size_t edges) {
  SummaryStats s;
  s.file_node_reduction = reduction(g.count(NodeKind::Entity), files);
  s.process_node_reduction = reduction(g.count(NodeKind::Activity), procs);
  s.edge_reduction = reduction(g.edges().size(), edges);
  s.combined_reduction = reduction(g.size() + g.edges().size(), files + procs + edges);
  return s;
}

}  // namespace detail

inline SummaryStats summary_stats(const ProvenanceGraph& original, const SummaryGraph& summary) {
  return detail::make_stats(original, summary.visible_count(NodeKind::Entity),
                            summary.visible_count(NodeKind::Activity), summary.edges().size());
}

inline SummaryStats summary_stats(const ProvenanceGraph& original, const Grouping& grouping) {
  std::size_t files = 0, procs = 0;
  for (const auto& grp : grouping.groups)
    (original.node(grp.front()).kind == NodeKind::Entity ? files : procs) += 1;
  return detail::make_stats(original, files, procs, grouping.group_edges.size());
}

inline nlohmann::ordered_json to_json(const SummaryStats& s) {
  return {{"file_node_reduction", s.file_node_reduction},
          {"process_node_reduction", s.process_node_reduction},
          {"edge_reduction", s.edge_reduction},
          {"combined_reduction", s.combined_reduction}};
}

inline nlohmann::ordered_json to_json(const SummaryGraph& s) {
  nlohmann::ordered_json j;
  j["groups"] = nlohmann::ordered_json::object();
  for (const auto& v : s.visible()) {
    const auto& n = s.node(v);
    j["groups"][v] = {{"kind", to_string(n.kind)}, {"label", n.label}, {"members", s.leaves(v)}};
  }
  j["group_edges"] = nlohmann::ordered_json::array();
  for (const auto& e : s.edges())
    j["group_edges"].push_back({{"src", e.src}, {"dst", e.dst}, {"label", to_string(e.label)},
                                {"multiplicity", e.multiplicity}});
  j["annotations"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : s.annotations()) j["annotations"][k] = v;
  j["expansion_map"] = nlohmann::ordered_json::object();
  for (const auto& [id, n] : s.all_nodes())
    if (!n.leaf()) j["expansion_map"][id] = {{"rule", n.rule}, {"children", n.children}};
  j["hidden"] = s.hidden();
  return j;
}

inline nlohmann::ordered_json to_json(const Grouping& gr) {
  nlohmann::ordered_json j;
  j["groups"] = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < gr.groups.size(); ++i) j["groups"]["g" + std::to_string(i)] = {{"members", gr.groups[i]}};
  j["group_edges"] = nlohmann::ordered_json::array();
  for (const auto& e : gr.group_edges)
    j["group_edges"].push_back({{"src", "g" + std::to_string(e.src)}, {"dst", "g" + std::to_string(e.dst)},
                                {"label", to_string(e.label)}, {"multiplicity", e.multiplicity}});
  j["annotations"] = nlohmann::ordered_json::object();
  j["expansion_map"] = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < gr.groups.size(); ++i) j["expansion_map"]["g" + std::to_string(i)] = gr.groups[i];
  return j;
}

inline std::string export_dot(const SummaryGraph& s) {
  std::ostringstream out;
  auto ann = s.annotations();
  out << "digraph \"summary\" {\n";
  for (const auto& v : s.visible()) {
    const auto& n = s.node(v);
    auto members = s.leaves(v).size();
    std::string label = n.label;
    if (!n.leaf()) label += "\\n[" + std::to_string(members) + " nodes]";
    out << "  \"" << detail::dot_escape(v) << "\" [shape=" << (n.kind == NodeKind::Activity ? "box" : "ellipse")
        << ", label=\"" << detail::dot_escape(label) << "\"";
    if (auto it = ann.find(v); it != ann.end()) {
      std::string tip;
      for (const auto& a : it->second) tip += (tip.empty() ? "" : ", ") + a;
      out << ", tooltip=\"" << detail::dot_escape(tip) << "\"";
    }
    out << "];\n";
  }
  for (const auto& e : s.edges()) {
    out << "  \"" << detail::dot_escape(e.src) << "\" -> \"" << detail::dot_escape(e.dst) << "\" [label=\""
        << to_string(e.label);
    if (e.multiplicity > 1) out << " x" << e.multiplicity;
    out << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

inline std::string export_dot(const ProvenanceGraph& g, const Grouping& gr) {
  std::ostringstream out;
  out << "digraph \"grouping\" {\n";
  for (std::size_t i = 0; i < gr.groups.size(); ++i) {
    const auto& first = g.node(gr.groups[i].front());
    std::string label = first.label;
    if (gr.groups[i].size() > 1) label += "\\n[" + std::to_string(gr.groups[i].size()) + " nodes]";
    out << "  \"g" << i << "\" [shape=" << (first.kind == NodeKind::Activity ? "box" : "ellipse") << ", label=\""
        << detail::dot_escape(label) << "\"];\n";
  }
  for (const auto& e : gr.group_edges) {
    out << "  \"g" << e.src << "\" -> \"g" << e.dst << "\" [label=\"" << to_string(e.label);
    if (e.multiplicity > 1) out << " x" << e.multiplicity;
    out << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace provrepeat
