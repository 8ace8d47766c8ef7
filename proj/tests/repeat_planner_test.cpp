#include <gtest/gtest.h>

#include <filesystem>

#include <provrepeat/repeat_planner.hpp>

#include "support/fixtures.hpp"
#include "support/generators.hpp"

using namespace provrepeat;
namespace fs = std::filesystem;

namespace {

ProvenanceGraph spawn_graph(bool exes = false) { return fixtures::graph_of(fixtures::spawn_trace(exes)); }

const std::string P = "proc:10";
const std::string Q = "proc:11";

ProvenanceGraph spawn_chain() {
  GraphBuilder b;
  b.activity("p1", "P1");
  b.activity("p2", "P2");
  b.activity("p3", "P3");
  b.add_edge("p1", "p2", ProvLabel::WasInformedBy);
  b.add_edge("p2", "p3", ProvLabel::WasInformedBy);
  return std::move(b).build();
}

IdSet activities(const ProvenanceGraph& g) {
  IdSet out;
  for (const auto& n : g.nodes())
    if (n.kind == NodeKind::Activity) out.insert(n.id);
  return out;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("planner-test-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST(GetProcs, Spawn) {
  auto g = spawn_graph();
  EXPECT_EQ(get_procs({P}, g), (IdSet{P, Q}));
  EXPECT_EQ(get_procs({Q}, g), (IdSet{Q}));
}

TEST(GetProcs, ChainDirectVersusAll) {
  auto g = spawn_chain();
  EXPECT_EQ(get_procs({"p1"}, g, DescendantMode::All), (IdSet{"p1", "p2", "p3"}));
  EXPECT_EQ(get_procs({"p1"}, g, DescendantMode::Direct), (IdSet{"p1", "p2"}));
}

TEST(GetProcs, DataflowConsumerIsDirectDescendant) {
  // P1 writes B, P2 reads it; no spawn edge.
  auto g = fixtures::graph_of(fixtures::chain_trace());
  EXPECT_EQ(get_procs({"proc:1"}, g), (IdSet{"proc:1", "proc:2"}));
}

TEST(GetProcs, RejectsUnknownAndEntities) {
  auto g = spawn_graph();
  EXPECT_THROW(get_procs({"proc:99"}, g), PlanError);
  EXPECT_THROW(get_procs({"/A"}, g), PlanError);
}

TEST(GetDeps, Spawn) {
  auto g = spawn_graph();
  EXPECT_EQ(get_deps({Q}, g), (IdSet{"/B", "/C", "/D"}));
  EXPECT_EQ(get_deps({}, g), IdSet{});
}

TEST(PlanSubContainer, SpawnSelectQ) {
  auto plan = plan_sub_container({Q}, spawn_graph(true));
  EXPECT_EQ(plan.required_procs, IdSet{Q});
  EXPECT_EQ(plan.required_files, (IdSet{"/B", "/C", "/Q-exe"}));
  EXPECT_EQ(plan.regenerated_files, IdSet{"/D"});
  EXPECT_EQ(plan.reused_outputs, IdSet{"/B"});
  EXPECT_FALSE(plan.required_files.count("/A"));
}

TEST(PlanSubContainer, PreviouslyGeneratedInputIsPulledIn) {
  GraphBuilder b;
  b.activity("heat", "Calculate heat map");
  b.activity("model", "Generate model data");
  b.entity("raw", "/data/raw.csv");
  b.entity("heatmap", "/data/heatmap.Rds");
  b.entity("model_out", "/data/model.Rds");
  b.add_edge("raw", "heat", ProvLabel::Used);
  b.add_edge("heat", "heatmap", ProvLabel::WasGeneratedBy);
  b.add_edge("heatmap", "model", ProvLabel::Used);
  b.add_edge("model", "model_out", ProvLabel::WasGeneratedBy);
  auto g = std::move(b).build();
  auto plan = plan_sub_container({"model"}, g);
  EXPECT_EQ(plan.required_procs, IdSet{"model"});
  EXPECT_TRUE(plan.required_files.count("heatmap"));
  EXPECT_TRUE(plan.reused_outputs.count("heatmap"));
  EXPECT_FALSE(plan.required_procs.count("heat"));
}

TEST(PlanSubContainer, EmptySelectionRejected) { EXPECT_THROW(plan_sub_container({}, spawn_graph()), PlanError); }

TEST(PlanModifiedRepeat, Spawn) {
  CausalIndex idx(spawn_graph());
  auto c = plan_modified_repeat({"/C"}, idx);
  EXPECT_EQ(c.procs_to_rerun, IdSet{Q});
  EXPECT_TRUE(c.entities_reused.count("/B"));
  EXPECT_FALSE(c.entities_reused.count("/D"));

  auto a = plan_modified_repeat({"/A"}, idx);
  EXPECT_EQ(a.procs_to_rerun, (IdSet{P, Q}));

  EXPECT_TRUE(plan_modified_repeat({}, idx).procs_to_rerun.empty());
  EXPECT_THROW(plan_modified_repeat({"/B"}, idx), PlanError);
  EXPECT_THROW(plan_modified_repeat({P}, idx), PlanError);
}

TEST(PlanModifiedRepeat, TimingMatters) {
  // In the non-overlapping stale-read run, P2 read B before P1 wrote it: changing A cannot affect P2.
  CausalIndex idx(fixtures::graph_of(fixtures::stale_read_trace(false)));
  EXPECT_EQ(plan_modified_repeat({"/A"}, idx).procs_to_rerun, IdSet{"proc:1"});
  CausalIndex overlap(fixtures::graph_of(fixtures::stale_read_trace(true)));
  EXPECT_EQ(plan_modified_repeat({"/A"}, overlap).procs_to_rerun, (IdSet{"proc:1", "proc:2"}));
}

TEST(SimulateReplay, SpawnSelectQTouchesEverything) {
  auto g = spawn_graph(true);
  auto plan = plan_sub_container({Q}, g);
  auto r = simulate_replay(g, plan);
  EXPECT_TRUE(r.outside.empty());
  EXPECT_TRUE(r.unused.empty());
  EXPECT_TRUE(r.touched.count("/D"));
  EXPECT_TRUE(r.rerun.contains("/D"));
}

TEST(SimulateReplay, MissingShippedFileReported) {
  auto g = spawn_graph(true);
  auto plan = plan_sub_container({Q}, g);
  auto r = simulate_replay(g, plan, [](const std::string& id) { return id != "/C"; });
  EXPECT_EQ(r.outside, std::vector<std::string>{"/C"});
  EXPECT_TRUE(r.unused.count("/C"));
}

TEST(PlannerProperties, ClosureSoundnessAndNoUnusedFiles) {
  gen::Rng rng(42);
  std::uniform_real_distribution<double> u(0, 1);
  int checked = 0;
  for (int i = 0; i < 300; ++i) {
    auto g = gen::layered_timed_dag(rng, 6, 5, 0.5, 100);
    auto acts = activities(g);
    if (acts.empty()) continue;
    IdSet sel;
    for (const auto& a : acts)
      if (u(rng) < 0.3) sel.insert(a);
    if (sel.empty()) sel.insert(*acts.begin());
    for (auto mode : {DescendantMode::Direct, DescendantMode::All}) {
      auto plan = plan_sub_container(sel, g, mode);
      auto r = simulate_replay(g, plan);
      EXPECT_TRUE(r.outside.empty());
      EXPECT_TRUE(r.unused.empty());
      // Every entity adjacent to a required proc is shipped or regenerated.
      for (const auto& p : plan.required_procs)
        for (const auto& e : get_deps({p}, g))
          EXPECT_TRUE(plan.required_files.count(e) || plan.regenerated_files.count(e));
      for (const auto& f : plan.reused_outputs) EXPECT_FALSE(plan.regenerated_files.count(f));
      ++checked;
    }
  }
  EXPECT_GT(checked, 400);
}

TEST(PlannerProperties, Monotonicity) {
  gen::Rng rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 200; ++i) {
    auto g = gen::random_dag(rng, {.nodes = 25, .edge_prob = 0.15});
    auto acts = activities(g);
    if (acts.size() < 2) continue;
    IdSet small, big;
    for (const auto& a : acts) {
      double x = u(rng);
      if (x < 0.2) small.insert(a);
      if (x < 0.6) big.insert(a);
    }
    if (small.empty()) continue;
    auto ps = plan_sub_container(small, g), pb = plan_sub_container(big, g);
    EXPECT_TRUE(std::includes(pb.required_files.begin(), pb.required_files.end(), ps.required_files.begin(),
                              ps.required_files.end()));
  }
}

TEST(PlannerProperties, TreesHaveNoOverInclusion) {
  gen::Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    // Random out-tree: every node but the root has exactly one parent.
    GraphBuilder b;
    b.activity("n0", "root");
    std::vector<std::pair<std::string, NodeKind>> nodes{{"n0", NodeKind::Activity}};
    for (int k = 1; k < 20; ++k) {
      std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
      auto [pid, pk] = nodes[pick(rng)];
      auto id = "n" + std::to_string(k);
      auto kind = rng() % 2 ? NodeKind::Activity : NodeKind::Entity;
      b.add_node(id, kind, id);
      b.add_edge(pid, id, *gen::label_between(pk, kind));
      nodes.push_back({id, kind});
    }
    auto g = std::move(b).build();
    for (const auto& a : activities(g)) {
      auto plan = plan_sub_container({a}, g);
      IdSet adjacent;
      for (const auto& p : plan.required_procs)
        for (const auto& e : get_deps({p}, g)) adjacent.insert(e);
      IdSet shipped = plan.required_files;
      shipped.insert(plan.regenerated_files.begin(), plan.regenerated_files.end());
      EXPECT_EQ(shipped, adjacent);
    }
  }
}

TEST(PlannerProperties, ModifiedRepeatCoversReachableEntities) {
  gen::Rng rng(19);
  for (int i = 0; i < 150; ++i) {
    auto g = gen::layered_timed_dag(rng, 6, 5, 0.5, 100);
    CausalIndex idx(g);
    IdSet inputs;
    for (const auto& n : g.nodes())
      if (n.kind == NodeKind::Entity && g.neighbors(n.id, Direction::In, ProvLabel::WasGeneratedBy).empty() &&
          rng() % 3 == 0)
        inputs.insert(n.id);
    auto r = plan_modified_repeat(inputs, idx);
    IdSet regenerated;
    for (const auto& p : r.procs_to_rerun) {
      bool downstream = std::any_of(inputs.begin(), inputs.end(), [&](const auto& c) { return idx.depends(p, c); });
      EXPECT_TRUE(downstream);
      for (const auto& e : g.neighbors(p, Direction::Out, ProvLabel::WasGeneratedBy)) regenerated.insert(e);
    }
    for (const auto& c : inputs)
      for (const auto& d : idx.downstream(c))
        if (g.node(d).kind == NodeKind::Entity)
          EXPECT_TRUE(r.entities_reused.count(d) || regenerated.count(d)) << d;
  }
}

TEST(BuildSubContainer, SpawnSelectQ) {
  TempDir tmp;
  fs::path data = tmp.path / "data";
  fs::create_directories(data);
  for (auto name : {"A", "B", "C", "D", "P-exe", "Q-exe"}) std::ofstream(data / name) << "content of " << name;
  Store store(tmp.path / "store");
  auto g = spawn_graph(true);
  auto source = store.put_container(data, g, "spawn");
  auto sub = build_sub_container({Q}, source, store);
  std::set<std::string> paths;
  for (const auto& [p, f] : sub.manifest.files) paths.insert(p);
  EXPECT_EQ(paths, (std::set<std::string>{"B", "C", "Q-exe"}));
  EXPECT_EQ(sub.manifest.meta.at("partial_of"), "spawn/1");
  EXPECT_TRUE(sub.manifest.provenance.contains("/D"));
  EXPECT_FALSE(sub.manifest.provenance.contains("/A"));

  auto saved = store.add_manifest(sub.manifest);
  EXPECT_EQ(saved.seq, 2u);
  auto out = tmp.path / "out";
  store.materialize(saved, out);
  EXPECT_TRUE(fs::exists(out / "B"));
  EXPECT_TRUE(fs::exists(out / "C"));
  EXPECT_FALSE(fs::exists(out / "A"));
}

TEST(BuildSubContainer, FullSelectionShipsEveryUsedFile) {
  TempDir tmp;
  fs::path data = tmp.path / "data";
  fs::create_directories(data);
  for (auto name : {"A", "B", "C", "D", "P-exe", "Q-exe"}) std::ofstream(data / name) << name;
  Store store(tmp.path / "store");
  auto g = spawn_graph(true);
  auto source = store.put_container(data, g, "spawn");
  auto sub = build_sub_container(activities(g), source, store);
  std::set<std::string> paths;
  for (const auto& [p, f] : sub.manifest.files) paths.insert(p);
  // D is only written, never read; everything else was used.
  EXPECT_EQ(paths, (std::set<std::string>{"A", "B", "C", "P-exe", "Q-exe"}));
  EXPECT_TRUE(sub.manifest.missing.empty());
}
