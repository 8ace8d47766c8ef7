#pragma once

// Partial-repeat sub-containers and modified-repeat re-run sets, computed from the
// provenance graph embedded in a container.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dependency_inference.hpp"
#include "prov_graph.hpp"
#include "store.hpp"

namespace provrepeat {

class PlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DescendantMode { Direct, All };

using IdSet = std::set<std::string>;

namespace detail {

inline void require_kind(const ProvenanceGraph& g, const IdSet& ids, NodeKind kind, const char* what) {
  for (const auto& id : ids) {
    if (!g.contains(id)) throw PlanError("unknown " + std::string(what) + " id '" + id + "'");
    if (g.node(id).kind != kind)
      throw PlanError("'" + id + "' is not " + (kind == NodeKind::Activity ? "a process" : "a file"));
  }
}

// Processes one step downstream of `proc`: spawned children and consumers of files it generated.
inline IdSet direct_descendants(const ProvenanceGraph& g, const std::string& proc) {
  IdSet out;
  for (const auto& child : g.neighbors(proc, Direction::Out, ProvLabel::WasInformedBy)) out.insert(child);
  for (const auto& file : g.neighbors(proc, Direction::Out, ProvLabel::WasGeneratedBy))
    for (const auto& reader : g.neighbors(file, Direction::Out, ProvLabel::Used)) out.insert(reader);
  out.erase(proc);
  return out;
}

}  // namespace detail

/// selected plus their direct descendants (or the full downstream closure in All mode).
inline IdSet get_procs(const IdSet& selected, const ProvenanceGraph& g,
                       DescendantMode mode = DescendantMode::Direct) {
  detail::require_kind(g, selected, NodeKind::Activity, "process");
  IdSet result = selected;
  std::vector<std::string> frontier(selected.begin(), selected.end());
  while (!frontier.empty()) {
    std::vector<std::string> next;
    for (const auto& p : frontier)
      for (const auto& d : detail::direct_descendants(g, p))
        if (result.insert(d).second) next.push_back(d);
    if (mode == DescendantMode::Direct) break;
    frontier = std::move(next);
  }
  return result;
}

/// Every entity directly touched (used or generated) by the given processes.
inline IdSet get_deps(const IdSet& procs, const ProvenanceGraph& g) {
  detail::require_kind(g, procs, NodeKind::Activity, "process");
  IdSet out;
  for (const auto& p : procs) {
    for (const auto& e : g.neighbors(p, Direction::In, ProvLabel::Used)) out.insert(e);
    for (const auto& e : g.neighbors(p, Direction::Out, ProvLabel::WasGeneratedBy)) out.insert(e);
  }
  return out;
}

struct SubContainerPlan {
  IdSet required_procs;
  /// Entities read by required procs; these are shipped in the sub-container.
  IdSet required_files;
  /// Shipped entities that were generated by processes outside the plan (pre-computed inputs).
  IdSet reused_outputs;
  /// Entities the required procs write; recreated on replay, not shipped.
  IdSet regenerated_files;

  friend bool operator==(const SubContainerPlan&, const SubContainerPlan&) = default;
};

inline SubContainerPlan plan_sub_container(const IdSet& selected, const ProvenanceGraph& g,
                                           DescendantMode mode = DescendantMode::Direct) {
  if (selected.empty()) throw PlanError("no processes selected");
  SubContainerPlan plan;
  plan.required_procs = get_procs(selected, g, mode);
  for (const auto& p : plan.required_procs) {
    for (const auto& e : g.neighbors(p, Direction::In, ProvLabel::Used)) plan.required_files.insert(e);
    for (const auto& e : g.neighbors(p, Direction::Out, ProvLabel::WasGeneratedBy))
      plan.regenerated_files.insert(e);
  }
  for (const auto& f : plan.required_files) {
    if (plan.regenerated_files.count(f)) continue;
    if (!g.neighbors(f, Direction::In, ProvLabel::WasGeneratedBy).empty()) plan.reused_outputs.insert(f);
  }
  return plan;
}

/// Full plan: every process, every entity that any process reads.
inline SubContainerPlan plan_full_repeat(const ProvenanceGraph& g) {
  IdSet all;
  for (const auto& n : g.nodes())
    if (n.kind == NodeKind::Activity) all.insert(n.id);
  if (all.empty()) return {};
  return plan_sub_container(all, g, DescendantMode::Direct);
}

/// Container-relative file path backing an entity node.
inline std::string entity_file_path(const ProvNode& n) {
  auto it = n.attrs.find("path");
  return container_path(it != n.attrs.end() ? it->second : split_version(n.id).first);
}

struct SubContainer {
  SubContainerPlan plan;
  ContainerManifest manifest;
};

/// Builds the sub-container manifest: payloads of the plan's required files at their
/// original container-relative paths, plus the induced provenance subgraph. The returned
/// manifest is not registered in the store (seq 0) until Store::add_manifest is called.
inline SubContainer build_sub_container(const IdSet& selected, const ContainerManifest& source,
                                        const Store& store, DescendantMode mode = DescendantMode::Direct) {
  const auto& g = source.provenance;
  SubContainer out;
  out.plan = plan_sub_container(selected, g, mode);
  auto& m = out.manifest;
  m.sciunit = source.sciunit;
  m.parent = ContainerRef{source.sciunit, source.seq};
  m.meta = source.meta;
  m.meta["partial_of"] = source.container_id();
  for (const auto& id : out.plan.required_files) {
    auto path = entity_file_path(g.node(id));
    auto it = source.files.find(path);
    if (it == source.files.end()) {
      m.missing.push_back(path);
      continue;
    }
    for (const auto& c : it->second.chunks)
      if (!store.has_chunk(c.hash)) throw PlanError("dangling chunk " + c.hash + " for " + path);
    m.files[path] = it->second;
  }
  IdSet keep = out.plan.required_procs;
  keep.insert(out.plan.required_files.begin(), out.plan.required_files.end());
  keep.insert(out.plan.regenerated_files.begin(), out.plan.regenerated_files.end());
  m.provenance = g.induced(keep);
  return out;
}

struct RerunSet {
  IdSet changed_inputs;
  IdSet procs_to_rerun;
  IdSet entities_reused;

  friend bool operator==(const RerunSet&, const RerunSet&) = default;
};

/// Processes temporally-causally downstream of any changed input must re-run; every other
/// entity that they do not regenerate is reused from the container.
inline RerunSet plan_modified_repeat(const IdSet& changed, const CausalIndex& index) {
  const auto& g = index.graph();
  detail::require_kind(g, changed, NodeKind::Entity, "file");
  for (const auto& id : changed)
    if (!g.neighbors(id, Direction::In, ProvLabel::WasGeneratedBy).empty())
      throw PlanError("'" + id + "' is generated by the run, not an input; change its producer instead");
  RerunSet r;
  r.changed_inputs = changed;
  for (const auto& c : changed)
    for (const auto& d : index.downstream(c))
      if (g.node(d).kind == NodeKind::Activity) r.procs_to_rerun.insert(d);
  IdSet regenerated;
  for (const auto& p : r.procs_to_rerun)
    for (const auto& e : g.neighbors(p, Direction::Out, ProvLabel::WasGeneratedBy)) regenerated.insert(e);
  for (const auto& n : g.nodes())
    if (n.kind == NodeKind::Entity && !changed.count(n.id) && !regenerated.count(n.id))
      r.entities_reused.insert(n.id);
  return r;
}

/// Outcome of re-walking the recorded run against a plan.
struct ReplayResult {
  ProvenanceGraph reference;          // original graph restricted to the plan
  ProvenanceGraph rerun;              // graph produced by the simulated replay
  IdSet touched;                      // entities read or written during replay
  std::vector<std::string> outside;   // reads of entities neither shipped nor regenerated
  IdSet unused;                       // shipped entities never touched ("files not used")
};

/// Replays the recorded interactions of the plan's processes in time order. A read succeeds
/// if the entity was shipped (and `available` confirms it) or was written earlier in the
/// replay; failed reads are dropped from the rerun graph and reported. Replayed processes
/// get fresh ids, as a real re-execution would assign new pids.
template <typename Available>
ReplayResult simulate_replay(const ProvenanceGraph& g, const SubContainerPlan& plan, Available&& available) {
  ReplayResult r;
  IdSet keep = plan.required_procs;
  keep.insert(plan.required_files.begin(), plan.required_files.end());
  keep.insert(plan.regenerated_files.begin(), plan.regenerated_files.end());
  r.reference = g.induced(keep);

  std::vector<const ProvEdge*> events;
  for (const auto& e : r.reference.edges()) events.push_back(&e);
  std::stable_sort(events.begin(), events.end(), [](const ProvEdge* a, const ProvEdge* b) {
    auto ka = a->interval ? a->interval->begin : 0;
    auto kb = b->interval ? b->interval->begin : 0;
    return ka < kb;
  });

  std::map<std::string, std::string> renamed;
  std::size_t next = 0;
  for (const auto& p : plan.required_procs) renamed[p] = "replay:" + std::to_string(++next);
  auto rid = [&](const std::string& id) {
    auto it = renamed.find(id);
    return it == renamed.end() ? id : it->second;
  };

  GraphBuilder b;
  for (const auto& n : r.reference.nodes()) {
    ProvNode copy = n;
    copy.id = rid(n.id);
    copy.attrs.erase("pid");
    b.add_node(std::move(copy));
  }
  IdSet present;
  for (const auto& f : plan.required_files)
    if (available(f)) present.insert(f);
  for (const auto* e : events) {
    if (e->label == ProvLabel::Used) {
      if (!present.count(e->src)) {
        r.outside.push_back(e->src);
        continue;
      }
      r.touched.insert(e->src);
    } else if (e->label == ProvLabel::WasGeneratedBy) {
      present.insert(e->dst);
      r.touched.insert(e->dst);
    }
    b.add_edge(rid(e->src), rid(e->dst), e->label, e->interval);
  }
  r.rerun = std::move(b).build();
  for (const auto& f : plan.required_files)
    if (!r.touched.count(f)) r.unused.insert(f);
  return r;
}

inline ReplayResult simulate_replay(const ProvenanceGraph& g, const SubContainerPlan& plan) {
  return simulate_replay(g, plan, [](const std::string&) { return true; });
}

inline nlohmann::ordered_json to_json(const SubContainerPlan& p) {
  return {{"required_procs", p.required_procs},
          {"required_files", p.required_files},
          {"reused_outputs", p.reused_outputs},
          {"regenerated_files", p.regenerated_files}};
}

inline nlohmann::ordered_json to_json(const RerunSet& r) {
  return {{"changed_inputs", r.changed_inputs},
          {"procs_to_rerun", r.procs_to_rerun},
          {"entities_reused", r.entities_reused}};
}

}  // namespace provrepeat
