#pragma once

// Small hand-built runs used across the suites.

#include <filesystem>
#include <fstream>

#include <provrepeat/dependency_inference.hpp>
#include <provrepeat/store.hpp>
#include <provrepeat/trace_model.hpp>

namespace fixtures {

using provrepeat::ExecutionTrace;
using provrepeat::ProvenanceGraph;
using provrepeat::TraceBuilder;
using provrepeat::TraceLabel;

// P1 reads A, writes B; P2 reads B (before P1 wrote it), writes C.
inline ExecutionTrace stale_read_trace(bool overlap = false) {
  TraceBuilder b;
  auto p1 = std::string(b.add_activity(1, "P1"));
  auto p2 = std::string(b.add_activity(2, "P2"));
  auto a = std::string(b.add_entity("/A"));
  auto bb = std::string(b.add_entity("/B"));
  auto c = std::string(b.add_entity("/C"));
  b.add_edge(a, p1, TraceLabel::ReadFrom, {1, 2});
  b.add_edge(p1, bb, TraceLabel::HasWritten, {5, 6});
  b.add_edge(bb, p2, TraceLabel::ReadFrom, {1, overlap ? 5 : 2});
  b.add_edge(p2, c, TraceLabel::HasWritten, {7, 8});
  return std::move(b).build();
}

// P reads A, writes B, then spawns Q; Q reads B and C and writes D. The container variant
// also records each process reading its executable.
inline ExecutionTrace spawn_trace(bool with_executables = false) {
  TraceBuilder b;
  auto p = std::string(b.add_activity(10, "P"));
  auto q = std::string(b.add_activity(11, "Q"));
  auto a = std::string(b.add_entity("/A"));
  auto bb = std::string(b.add_entity("/B"));
  auto c = std::string(b.add_entity("/C"));
  auto d = std::string(b.add_entity("/D"));
  b.add_edge(a, p, TraceLabel::ReadFrom, {1, 2});
  b.add_edge(p, bb, TraceLabel::HasWritten, {3, 4});
  b.add_edge(p, q, TraceLabel::Executed, {5, 5});
  b.add_edge(bb, q, TraceLabel::ReadFrom, {6, 7});
  b.add_edge(c, q, TraceLabel::ReadFrom, {6, 7});
  b.add_edge(q, d, TraceLabel::HasWritten, {8, 9});
  if (with_executables) {
    auto pe = std::string(b.add_entity("/P-exe"));
    auto qe = std::string(b.add_entity("/Q-exe"));
    b.add_edge(pe, p, TraceLabel::ReadFrom, {0, 0});
    b.add_edge(qe, q, TraceLabel::ReadFrom, {5, 5});
  }
  return std::move(b).build();
}

// A -> P1 -> B -> P2 -> C with strictly increasing times.
inline ExecutionTrace chain_trace() {
  TraceBuilder b;
  auto p1 = std::string(b.add_activity(1, "P1"));
  auto p2 = std::string(b.add_activity(2, "P2"));
  auto a = std::string(b.add_entity("/A"));
  auto bb = std::string(b.add_entity("/B"));
  auto c = std::string(b.add_entity("/C"));
  b.add_edge(a, p1, TraceLabel::ReadFrom, {1, 2});
  b.add_edge(p1, bb, TraceLabel::HasWritten, {3, 4});
  b.add_edge(bb, p2, TraceLabel::ReadFrom, {5, 6});
  b.add_edge(p2, c, TraceLabel::HasWritten, {7, 8});
  return std::move(b).build();
}

// P1 reads F1, spawns P2, and P2 then overwrites F1: F1 -> P1 -> P2 -> F1.
inline ExecutionTrace cyclic_trace() {
  TraceBuilder b;
  auto p1 = std::string(b.add_activity(1, "P1"));
  auto p2 = std::string(b.add_activity(2, "P2"));
  auto f1 = std::string(b.add_entity("/F1"));
  b.add_edge(f1, p1, TraceLabel::ReadFrom, {1, 2});
  b.add_edge(p1, p2, TraceLabel::Executed, {3, 3});
  b.add_edge(p2, f1, TraceLabel::HasWritten, {4, 5});
  return std::move(b).build();
}

// Three processes each read their own file and a shared one.
inline ProvenanceGraph shared_input_graph() {
  provrepeat::GraphBuilder b;
  for (int i = 1; i <= 3; ++i) {
    b.activity("P" + std::to_string(i));
    b.entity("F" + std::to_string(i));
  }
  b.entity("F4");
  for (int i = 1; i <= 3; ++i) {
    b.add_edge("F" + std::to_string(i), "P" + std::to_string(i), provrepeat::ProvLabel::Used);
    b.add_edge("F4", "P" + std::to_string(i), provrepeat::ProvLabel::Used);
  }
  return std::move(b).build();
}

// The same shape as a trace: Pi reads Fi and the shared F4.
inline ExecutionTrace shared_input_trace() {
  TraceBuilder b;
  auto f4 = std::string(b.add_entity("/F4"));
  for (int i = 1; i <= 3; ++i) {
    auto p = std::string(b.add_activity(i, "P" + std::to_string(i)));
    auto f = std::string(b.add_entity("/F" + std::to_string(i)));
    b.add_edge(f, p, TraceLabel::ReadFrom, {i, i + 1});
    b.add_edge(f4, p, TraceLabel::ReadFrom, {i, i + 1});
  }
  return std::move(b).build();
}

// Writes a small file for every entity of `t` under `root`, at its container-relative path.
inline void write_payloads(const ExecutionTrace& t, const std::filesystem::path& root) {
  for (const auto& n : t.nodes) {
    if (n.kind != provrepeat::NodeKind::Entity) continue;
    auto rel = provrepeat::container_path(n.path.value_or(n.id));
    auto p = root / rel;
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p) << "contents of " << rel << "\n";
  }
}

inline ProvenanceGraph graph_of(const ExecutionTrace& t) { return provrepeat::infer_provenance(t); }

}  // namespace fixtures
