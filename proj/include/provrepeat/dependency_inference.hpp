#pragma once

// Turns an execution trace into a provenance graph and answers temporally-causal
// dependency queries over it. Connectivity alone does not imply dependency: information
// can only flow along a path if there are non-decreasing times T1 <= ... <= Tn with each
// Ti inside the interval of the i-th edge.

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "digest.hpp"
#include "prov_graph.hpp"
#include "trace_model.hpp"

namespace provrepeat {

inline ProvLabel prov_label_for(TraceLabel l) {
  switch (l) {
    case TraceLabel::ReadFrom: return ProvLabel::Used;
    case TraceLabel::HasWritten: return ProvLabel::WasGeneratedBy;
    case TraceLabel::Executed: return ProvLabel::WasInformedBy;
  }
  return ProvLabel::Used;
}

/// Splits a versioned entity id "path#vN" into (path, N); N == 0 when unversioned.
inline std::pair<std::string, int> split_version(const std::string& id) {
  auto pos = id.rfind("#v");
  if (pos == std::string::npos || pos + 2 >= id.size()) return {id, 0};
  int v = 0;
  for (std::size_t i = pos + 2; i < id.size(); ++i) {
    if (id[i] < '0' || id[i] > '9') return {id, 0};
    v = v * 10 + (id[i] - '0');
  }
  return {id.substr(0, pos), v};
}

inline std::string versioned_id(const std::string& path, int version) {
  return path + "#v" + std::to_string(version);
}

/// Relabels trace edges into PROV labels (orientation unchanged) and keeps intervals.
/// Precondition: validate_trace(trace) is empty.
inline ProvenanceGraph infer_provenance(const ExecutionTrace& trace) {
  GraphBuilder b;
  for (const auto& n : trace.nodes) {
    ProvNode p{n.id, n.kind, n.label, {}};
    if (n.pid) p.attrs["pid"] = std::to_string(*n.pid);
    if (n.path) {
      p.attrs["path"] = *n.path;
      if (auto [base, v] = split_version(n.id); v > 0) p.attrs["version"] = std::to_string(v);
    }
    b.add_node(std::move(p));
  }
  for (const auto& e : trace.edges) b.add_edge(e.src, e.dst, prov_label_for(e.label), e.interval);
  b.source_digest(sha256_hex(serialize_trace(trace)));
  return std::move(b).build();
}

struct CausalPathWitness {
  std::vector<ProvEdge> path;
  std::vector<Timestamp> times;
};

/// Earliest-feasible-time reachability from one source node.
struct CausalReach {
  static constexpr Timestamp kUnreached = std::numeric_limits<Timestamp>::max();
  static constexpr Timestamp kStart = std::numeric_limits<Timestamp>::min();
  std::vector<Timestamp> arrival;       // per node index; kUnreached if not reachable
  std::vector<std::size_t> via_edge;    // edge index used to reach node (npos for source)

  [[nodiscard]] bool reached(std::size_t i) const { return arrival[i] != kUnreached; }
};

inline constexpr std::size_t kNoEdge = std::numeric_limits<std::size_t>::max();

/// Greedy forward propagation of the smallest reachable time. An edge (u, v) is traversable
/// at time t iff t <= interval.end, and yields max(t, interval.begin) at v. Untimed edges
/// pass the time through unchanged.
inline CausalReach propagate_earliest(const ProvenanceGraph& g, std::size_t source) {
  CausalReach r;
  r.arrival.assign(g.size(), CausalReach::kUnreached);
  r.via_edge.assign(g.size(), kNoEdge);
  using Item = std::pair<Timestamp, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  r.arrival[source] = CausalReach::kStart;
  pq.emplace(CausalReach::kStart, source);
  while (!pq.empty()) {
    auto [t, u] = pq.top();
    pq.pop();
    if (t != r.arrival[u]) continue;
    for (auto e : g.out_edges(u)) {
      const auto& edge = g.edges()[e];
      Timestamp next = t;
      if (edge.interval) {
        if (t > edge.interval->end) continue;
        next = std::max(t, edge.interval->begin);
      }
      auto v = g.dst_index(e);
      if (v == source) continue;
      if (next < r.arrival[v]) {
        r.arrival[v] = next;
        r.via_edge[v] = e;
        pq.emplace(next, v);
      }
    }
  }
  return r;
}

/// Lazily computed, per-source cached dependency annotations over an immutable graph.
/// Queries are safe to issue concurrently.
class CausalIndex {
 public:
  explicit CausalIndex(std::shared_ptr<const ProvenanceGraph> g) : g_(std::move(g)) {}
  explicit CausalIndex(const ProvenanceGraph& g)
      : g_(std::make_shared<const ProvenanceGraph>(g)) {}

  [[nodiscard]] const ProvenanceGraph& graph() const { return *g_; }

  /// Reachability (with earliest arrival times) from `source`.
  const CausalReach& reach_from(const std::string& source) const {
    auto idx = g_->index_of(source);
    if (!idx) throw GraphError("unknown node id '" + source + "'");
    std::lock_guard lock(mu_);
    auto it = cache_.find(*idx);
    if (it == cache_.end())
      it = cache_.emplace(*idx, std::make_unique<CausalReach>(propagate_earliest(*g_, *idx))).first;
    return *it->second;
  }

  /// True iff `target` depends on `source`: some path source ~> target admits
  /// non-decreasing witness times.
  bool depends(const std::string& target, const std::string& source) const {
    auto t = g_->index_of(target);
    if (!t) throw GraphError("unknown node id '" + target + "'");
    if (target == source) return false;
    return reach_from(source).reached(*t);
  }

  std::optional<CausalPathWitness> witness(const std::string& target,
                                           const std::string& source) const {
    if (!depends(target, source)) return std::nullopt;
    const auto& r = reach_from(source);
    CausalPathWitness w;
    for (auto v = *g_->index_of(target); r.via_edge[v] != kNoEdge; v = g_->src_index(r.via_edge[v])) {
      w.path.push_back(g_->edges()[r.via_edge[v]]);
      w.times.push_back(r.arrival[v]);
    }
    std::reverse(w.path.begin(), w.path.end());
    std::reverse(w.times.begin(), w.times.end());
    return w;
  }

  /// Ids of all nodes causally downstream of `source` (excluding itself).
  std::vector<std::string> downstream(const std::string& source) const {
    const auto& r = reach_from(source);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < g_->size(); ++i)
      if (r.reached(i) && g_->node_at(i).id != source) out.push_back(g_->node_at(i).id);
    return out;
  }

 private:
  std::shared_ptr<const ProvenanceGraph> g_;
  mutable std::mutex mu_;
  mutable std::map<std::size_t, std::unique_ptr<CausalReach>> cache_;
};

struct CycleReport {
  std::vector<std::vector<std::string>> cycles;
  std::set<std::string> affected_entities;
  bool truncated = false;

  [[nodiscard]] bool acyclic() const { return cycles.empty(); }
};

namespace detail {

// Tarjan SCC restricted to nodes >= lo.
inline std::vector<int> scc_ids(const ProvenanceGraph& g, std::size_t lo) {
  const auto n = g.size();
  std::vector<int> comp(n, -1), index(n, -1), low(n, 0);
  std::vector<bool> on(n, false);
  std::vector<std::size_t> stack;
  int counter = 0, ncomp = 0;
  std::function<void(std::size_t)> strong = [&](std::size_t v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on[v] = true;
    for (auto e : g.out_edges(v)) {
      auto w = g.dst_index(e);
      if (w < lo) continue;
      if (index[w] < 0) {
        strong(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on[w] = false;
        comp[w] = ncomp;
      } while (w != v);
      ++ncomp;
    }
  };
  for (std::size_t v = lo; v < n; ++v)
    if (index[v] < 0) strong(v);
  return comp;
}

}  // namespace detail

/// Enumerates elementary cycles (length >= 2) of the dependency relation. Cycles are
/// reported in flow orientation, rotated to start at their smallest id; the dependency
/// orientation is the same cycle reversed. Enumeration stops after `max_cycles`.
inline CycleReport detect_cycles(const ProvenanceGraph& g, std::size_t max_cycles = 10000) {
  CycleReport report;
  const auto n = g.size();
  std::vector<std::size_t> path;
  std::vector<bool> on_path(n, false);
  for (std::size_t s = 0; s < n && !report.truncated; ++s) {
    auto comp = detail::scc_ids(g, s);
    // DFS over simple paths from s through nodes > s within s's component.
    std::function<void(std::size_t)> dfs = [&](std::size_t v) {
      if (report.truncated) return;
      path.push_back(v);
      on_path[v] = true;
      std::set<std::size_t> seen;
      for (auto e : g.out_edges(v)) {
        auto w = g.dst_index(e);
        if (w < s || comp[w] != comp[s] || !seen.insert(w).second) continue;
        if (w == s) {
          if (path.size() >= 2) {
            if (report.cycles.size() >= max_cycles) {
              report.truncated = true;
              break;
            }
            std::vector<std::string> cyc;
            for (auto p : path) {
              cyc.push_back(g.node_at(p).id);
              if (g.node_at(p).kind == NodeKind::Entity) report.affected_entities.insert(g.node_at(p).id);
            }
            report.cycles.push_back(std::move(cyc));
          }
        } else if (!on_path[w]) {
          dfs(w);
        }
      }
      on_path[v] = false;
      path.pop_back();
    };
    dfs(s);
  }
  return report;
}

/// Splits entities that are written in several episodes, or read before a later write,
/// into per-state version nodes "path#v1" .. "path#v(k+1)". Version boundaries sit at
/// write-interval ends; a read attaches to the version current at its interval start.
/// Reads whose interval straddles a write stay on the earlier version and are listed in
/// meta["ambiguous_reads"]. Entities without such conflicts are left untouched.
inline ExecutionTrace version_entities(const ExecutionTrace& trace) {
  ExecutionTrace out;
  out.meta = trace.meta;
  std::map<std::string, std::vector<std::size_t>> writes, reads;
  for (std::size_t i = 0; i < trace.edges.size(); ++i) {
    const auto& e = trace.edges[i];
    if (e.label == TraceLabel::HasWritten) writes[e.dst].push_back(i);
    if (e.label == TraceLabel::ReadFrom) reads[e.src].push_back(i);
  }

  std::map<std::size_t, std::string> rewired;  // edge index -> new entity endpoint
  std::vector<std::string> versioned, ambiguous;
  std::map<std::string, int> version_count;
  for (auto& [entity, ws] : writes) {
    std::sort(ws.begin(), ws.end(), [&](std::size_t a, std::size_t b) {
      const auto& x = trace.edges[a];
      const auto& y = trace.edges[b];
      return std::tie(x.interval.end, x.interval.begin, x.src) <
             std::tie(y.interval.end, y.interval.begin, y.src);
    });
    const auto k = static_cast<int>(ws.size());
    auto version_of = [&](const TraceEdge& r) {
      int v = 1;
      for (auto w : ws)
        if (trace.edges[w].interval.end <= r.interval.begin) ++v;
      return v;
    };
    bool conflict = k >= 2;
    for (auto r : reads[entity])
      if (version_of(trace.edges[r]) <= k) conflict = true;
    if (!conflict) continue;

    versioned.push_back(entity);
    version_count[entity] = k + 1;
    for (int j = 0; j < k; ++j) rewired[ws[j]] = versioned_id(entity, j + 2);
    for (auto r : reads[entity]) {
      const auto& re = trace.edges[r];
      rewired[r] = versioned_id(entity, version_of(re));
      for (auto w : ws) {
        const auto& we = trace.edges[w].interval;
        if (re.interval.begin < we.end && we.begin < re.interval.end) {
          ambiguous.push_back(re.dst + " reads " + entity + " during a write");
          break;
        }
      }
    }
  }

  for (const auto& n : trace.nodes) {
    auto vc = version_count.find(n.id);
    if (vc == version_count.end()) {
      out.nodes.push_back(n);
      continue;
    }
    for (int v = 1; v <= vc->second; ++v) {
      auto id = versioned_id(n.id, v);
      out.nodes.push_back({id, NodeKind::Entity, id, std::nullopt, n.path});
    }
  }
  for (std::size_t i = 0; i < trace.edges.size(); ++i) {
    auto e = trace.edges[i];
    if (auto it = rewired.find(i); it != rewired.end()) {
      (e.label == TraceLabel::HasWritten ? e.dst : e.src) = it->second;
    }
    out.edges.push_back(std::move(e));
  }
  if (!versioned.empty()) {
    std::string joined;
    for (const auto& v : versioned) joined += (joined.empty() ? "" : ",") + v;
    out.meta["versioned_entities"] = joined;
  }
  if (!ambiguous.empty()) {
    std::string joined;
    for (const auto& a : ambiguous) joined += (joined.empty() ? "" : "; ") + a;
    out.meta["ambiguous_reads"] = joined;
  }
  return out;
}

}  // namespace provrepeat
