#include <gtest/gtest.h>

#include <chrono>

#include <provrepeat/isomorphism.hpp>

#include "support/fixtures.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace provrepeat;

namespace {

ProvenanceGraph spawn_graph() { return fixtures::graph_of(fixtures::spawn_trace()); }

// Rebuilds g with one edge's label replaced (kinds permitting) or flipped in direction.
ProvenanceGraph with_edge(const ProvenanceGraph& g, std::size_t which, ProvLabel label) {
  GraphBuilder b;
  for (const auto& n : g.nodes()) b.add_node(n);
  for (std::size_t e = 0; e < g.edges().size(); ++e) {
    const auto& x = g.edges()[e];
    b.add_edge(x.src, x.dst, e == which ? label : x.label, x.interval);
  }
  return std::move(b).build();
}

}  // namespace

TEST(Signatures, IsolatedNode) {
  GraphBuilder b;
  b.entity("x", "/data/x");
  auto sig = build_hash_values(std::move(b).build());
  EXPECT_EQ(sig.at("x").kind, NodeKind::Entity);
  EXPECT_TRUE(sig.at("x").hash_values.empty());
}

TEST(Signatures, SpawnInputsDependOnProcessLabels) {
  auto g = spawn_graph();
  auto sig = build_hash_values(g);
  // A is read by P, C by Q; with distinct labels the signatures differ.
  EXPECT_EQ(sig.at("/A").hash_values, (std::vector<SignatureTriple>{{ProvLabel::Used, Direction::Out, "P"}}));
  EXPECT_EQ(sig.at("/C").hash_values, (std::vector<SignatureTriple>{{ProvLabel::Used, Direction::Out, "Q"}}));
  EXPECT_NE(sig.at("/A").key(), sig.at("/C").key());
  // Ignoring labels, A and C both look like a file read by some process.
  IsoOptions unl;
  unl.compare_labels = false;
  auto sig2 = build_hash_values(g, unl);
  auto strip = [](NodeSignature s) {
    s.node_id.clear();
    return s.key();
  };
  EXPECT_EQ(strip(sig2.at("/A")), strip(sig2.at("/C")));
}

TEST(Signatures, IndependentOfIds) {
  gen::Rng rng(3);
  auto g = gen::random_dag(rng, {.nodes = 20, .edge_prob = 0.2});
  auto h = gen::permute_ids(rng, g);
  std::multiset<std::string> a, b;
  for (const auto& [id, s] : build_hash_values(g)) a.insert(s.key());
  for (const auto& [id, s] : build_hash_values(h)) b.insert(s.key());
  EXPECT_EQ(a, b);
}

TEST(FindBijection, PermutedIdsFound) {
  gen::Rng rng(8);
  for (int i = 0; i < 30; ++i) {
    auto g = gen::random_dag(rng, {.nodes = 30, .edge_prob = 0.15});
    auto h = gen::permute_ids(rng, g);
    auto f = find_bijection(g, h);
    ASSERT_TRUE(f.has_value());
    EXPECT_EQ(f->pairs.size(), g.size());
    for (const auto& e : g.edges()) {
      auto ok = std::any_of(h.edges().begin(), h.edges().end(), [&](const ProvEdge& x) {
        return x.src == f->pairs.at(e.src) && x.dst == f->pairs.at(e.dst) && x.label == e.label;
      });
      EXPECT_TRUE(ok);
    }
  }
}

TEST(FindBijection, EdgeLabelMismatch) {
  auto g = spawn_graph();
  // Turn "C used by Q" into a wasGeneratedBy-labeled edge with the same endpoints.
  std::size_t idx = 0;
  for (std::size_t e = 0; e < g.edges().size(); ++e)
    if (g.edges()[e].src == "/C") idx = e;
  auto h = with_edge(g, idx, ProvLabel::WasGeneratedBy);
  EXPECT_FALSE(find_bijection(g, h).has_value());
}

TEST(FindBijection, EmptyGraphsAndSizeMismatch) {
  EXPECT_TRUE(find_bijection(ProvenanceGraph{}, ProvenanceGraph{}).has_value());
  EXPECT_FALSE(find_bijection(spawn_graph(), ProvenanceGraph{}).has_value());
}

TEST(FindBijection, AgreesWithPermutationOracle) {
  gen::Rng rng(1234);
  IsoOptions unl;
  unl.compare_labels = false;
  int iso = 0;
  for (int i = 0; i < 150; ++i) {
    auto n = 2 + static_cast<std::size_t>(i % 6);
    auto g = gen::random_dag(rng, {.nodes = n, .edge_prob = 0.4, .label_variety = 1});
    ProvenanceGraph h;
    switch (i % 3) {
      case 0: h = gen::permute_ids(rng, g); break;
      case 1: h = gen::random_dag(rng, {.nodes = n, .edge_prob = 0.4, .label_variety = 1}); break;
      default: {
        auto p = gen::permute_ids(rng, g);
        h = p.edges().empty() ? p : with_edge(p, 0, p.edges()[0].label);
        break;
      }
    }
    bool expect = oracle::isomorphic_bruteforce(g, h);
    EXPECT_EQ(find_bijection(g, h, unl).has_value(), expect) << export_prov_json(g) << export_prov_json(h);
    iso += expect;
  }
  EXPECT_GT(iso, 30);
  EXPECT_LT(iso, 150);
}

TEST(FindBijection, LabeledModeAgreesWithLabelPreservingOracle) {
  gen::Rng rng(77);
  IsoOptions opts;
  auto label = [&](const ProvNode& n) { return opts.normalizer.apply(n); };
  for (int i = 0; i < 100; ++i) {
    auto n = 3 + static_cast<std::size_t>(i % 5);
    auto g = gen::random_dag(rng, {.nodes = n, .edge_prob = 0.4, .label_variety = 2});
    auto h = i % 2 ? gen::permute_ids(rng, g) : gen::random_dag(rng, {.nodes = n, .edge_prob = 0.4, .label_variety = 2});
    EXPECT_EQ(find_bijection(g, h, opts).has_value(), oracle::isomorphic_bruteforce(g, h, label));
  }
}

TEST(FindBijection, RefinementDoesNotChangeAnswers) {
  gen::Rng rng(5);
  IsoOptions plain;
  plain.refine = false;
  for (int i = 0; i < 100; ++i) {
    auto g = gen::random_dag(rng, {.nodes = 12, .edge_prob = 0.3, .label_variety = 1});
    auto h = i % 2 ? gen::permute_ids(rng, g) : gen::random_dag(rng, {.nodes = 12, .edge_prob = 0.3, .label_variety = 1});
    EXPECT_EQ(find_bijection(g, h).has_value(), find_bijection(g, h, plain).has_value());
  }
}

TEST(FindBijection, SymmetricStructureNeedsBacktracking) {
  // Two disjoint 3-cycles vs one 6-cycle of alternating kinds: same local degrees everywhere.
  auto ring = [](const std::vector<std::vector<int>>& cycles) {
    GraphBuilder b;
    int k = 0;
    for (const auto& c : cycles) {
      for (int x : c) {
        (void)x;
        b.activity("a" + std::to_string(k), "p");
        b.entity("e" + std::to_string(k), "/f");
        ++k;
      }
    }
    k = 0;
    for (const auto& c : cycles) {
      int base = k;
      for (std::size_t i = 0; i < c.size(); ++i) {
        int next = base + static_cast<int>((i + 1) % c.size());
        b.add_edge("a" + std::to_string(k), "e" + std::to_string(k), ProvLabel::WasGeneratedBy);
        b.add_edge("e" + std::to_string(k), "a" + std::to_string(next), ProvLabel::Used);
        ++k;
      }
    }
    return std::move(b).build();
  };
  auto two = ring({{0, 1, 2}, {0, 1, 2}});
  auto one = ring({{0, 1, 2, 3, 4, 5}});
  EXPECT_FALSE(find_bijection(two, one).has_value());
  EXPECT_TRUE(find_bijection(two, ring({{0, 1, 2}, {0, 1, 2}})).has_value());
}

TEST(VerifyExactRepeat, IdenticalGraphs) {
  auto g = spawn_graph();
  auto v = verify_exact_repeat(g, g);
  EXPECT_TRUE(v.isomorphic);
  EXPECT_EQ(v.mismatch_summary.entity_delta, 0);
}

TEST(VerifyExactRepeat, ExtraTempFileReported) {
  auto g = spawn_graph();
  GraphBuilder b;
  for (const auto& n : g.nodes()) b.add_node(n);
  for (const auto& e : g.edges()) b.add_edge(e.src, e.dst, e.label, e.interval);
  b.entity("/tmp/extra", "/tmp/extra");
  b.add_edge("proc:11", "/tmp/extra", ProvLabel::WasGeneratedBy);
  auto v = verify_exact_repeat(g, std::move(b).build());
  EXPECT_FALSE(v.isomorphic);
  EXPECT_EQ(v.mismatch_summary.entity_delta, 1);
  EXPECT_EQ(v.mismatch_summary.edge_delta, 1);
  EXPECT_FALSE(v.mismatch_summary.unmatched_signatures.empty());
  auto j = to_json(v);
  EXPECT_FALSE(j["isomorphic"].get<bool>());
}

TEST(VerifyExactRepeat, RenamedTempFilesAndPidsStillMatch) {
  auto make = [](const std::string& tmp, int pid) {
    GraphBuilder b;
    auto p = "proc:" + std::to_string(pid);
    b.activity(p, "Rscript " + std::to_string(pid));
    b.entity("/in", "/in");
    b.entity(tmp, tmp);
    b.add_edge("/in", p, ProvLabel::Used);
    b.add_edge(p, tmp, ProvLabel::WasGeneratedBy);
    return std::move(b).build();
  };
  EXPECT_TRUE(verify_exact_repeat(make("/tmp/RtmpA1/file1", 100), make("/tmp/RtmpZ9/file7", 200)).isomorphic);
  EXPECT_FALSE(verify_exact_repeat(make("/tmp/RtmpA1/file1", 100), make("/data/out", 200)).isomorphic);
}

TEST(VerifyExactRepeat, HundredFiftyNodesUnderOneSecond) {
  gen::Rng rng(150);
  auto g = gen::random_dag(rng, {.nodes = 150, .edge_prob = 320.0 / (150 * 149 / 2.0 * 0.5), .label_variety = 3});
  auto h = gen::permute_ids(rng, g);
  auto t0 = std::chrono::steady_clock::now();
  auto v = verify_exact_repeat(g, h);
  auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_TRUE(v.isomorphic);
  EXPECT_LT(dt, 1.0);
}
