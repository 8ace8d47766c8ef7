#pragma once

// Provenance-graph isomorphism: neighbor-hash signatures prune candidate pairs, then a
// backtracking search looks for one kind- and label-preserving bijection. One bijection
// is enough to certify an exact repeat, so no automorphism group is computed.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "prov_graph.hpp"

namespace provrepeat {

/// Strips run-dependent parts (pid digits, temp-file names) from display labels.
class LabelNormalizer {
 public:
  struct Rule {
    std::optional<NodeKind> applies_to;
    std::regex pattern;
    std::string replacement;
  };

  LabelNormalizer() = default;
  explicit LabelNormalizer(std::vector<Rule> rules) : rules_(std::move(rules)) {}

  static LabelNormalizer defaults() {
    return LabelNormalizer({
        {NodeKind::Activity, std::regex("[0-9]+"), "#"},
        {NodeKind::Entity, std::regex("^/tmp/.+$"), "/tmp/*"},
    });
  }

  LabelNormalizer& add(std::optional<NodeKind> kind, const std::string& pattern, std::string repl) {
    rules_.push_back({kind, std::regex(pattern), std::move(repl)});
    return *this;
  }

  [[nodiscard]] std::string apply(const ProvNode& n) const {
    std::string s = n.label;
    for (const auto& r : rules_)
      if (!r.applies_to || *r.applies_to == n.kind) s = std::regex_replace(s, r.pattern, r.replacement);
    return s;
  }

 private:
  std::vector<Rule> rules_;
};

struct IsoOptions {
  LabelNormalizer normalizer = LabelNormalizer::defaults();
  /// When false, node labels are ignored entirely and only kinds and edge labels matter.
  bool compare_labels = true;
  /// Iterated neighbor-hash refinement before the search. Sound (isomorphisms preserve
  /// refined colors); it only shrinks candidate sets.
  bool refine = true;
};

struct SignatureTriple {
  ProvLabel label;
  Direction direction;
  std::string neighbor_label;

  friend bool operator==(const SignatureTriple&, const SignatureTriple&) = default;
  friend auto operator<=>(const SignatureTriple&, const SignatureTriple&) = default;
};

struct NodeSignature {
  std::string node_id;
  NodeKind kind = NodeKind::Entity;
  std::string label;                         // normalized own label ("" when labels ignored)
  std::vector<SignatureTriple> hash_values;  // sorted multiset

  /// Id-independent comparison key.
  [[nodiscard]] std::string key() const {
    std::ostringstream out;
    out << to_string(kind) << '|' << label << '|';
    for (const auto& t : hash_values)
      out << to_string(t.label) << (t.direction == Direction::In ? "<" : ">") << t.neighbor_label << ';';
    return out.str();
  }
};

inline std::map<std::string, NodeSignature> build_hash_values(const ProvenanceGraph& g,
                                                              const IsoOptions& opts = {}) {
  std::vector<std::string> labels(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    labels[i] = opts.compare_labels ? opts.normalizer.apply(g.node_at(i))
                                    : std::string(to_string(g.node_at(i).kind));
  std::map<std::string, NodeSignature> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    NodeSignature s{g.node_at(i).id, g.node_at(i).kind, opts.compare_labels ? labels[i] : "", {}};
    for (auto e : g.out_edges(i))
      s.hash_values.push_back({g.edges()[e].label, Direction::Out, labels[g.dst_index(e)]});
    for (auto e : g.in_edges(i))
      s.hash_values.push_back({g.edges()[e].label, Direction::In, labels[g.src_index(e)]});
    std::sort(s.hash_values.begin(), s.hash_values.end());
    out.emplace(s.node_id, std::move(s));
  }
  return out;
}

/// Maps node ids of the first graph onto node ids of the second.
struct Bijection {
  std::map<std::string, std::string> pairs;
  friend bool operator==(const Bijection&, const Bijection&) = default;
};

namespace detail {

inline std::uint64_t edge_code(std::size_t s, std::size_t d, ProvLabel l, std::size_t n) {
  return (static_cast<std::uint64_t>(s) * n + d) * 3 + static_cast<std::uint64_t>(l);
}

struct IsoSide {
  const ProvenanceGraph* g;
  std::vector<int> color;
  std::unordered_set<std::uint64_t> edges;
  // (neighbor, label, is_out) for each node, both directions.
  std::vector<std::vector<std::tuple<std::size_t, ProvLabel, bool>>> adj;

  explicit IsoSide(const ProvenanceGraph& graph) : g(&graph), adj(graph.size()) {
    const auto n = graph.size();
    for (std::size_t e = 0; e < graph.edges().size(); ++e) {
      auto s = graph.src_index(e), d = graph.dst_index(e);
      auto l = graph.edges()[e].label;
      edges.insert(edge_code(s, d, l, n));
      adj[s].emplace_back(d, l, true);
      adj[d].emplace_back(s, l, false);
    }
  }
  [[nodiscard]] bool has_edge(std::size_t s, std::size_t d, ProvLabel l) const {
    return edges.count(edge_code(s, d, l, g->size())) != 0;
  }
};

// Joint color refinement over both graphs with a shared color dictionary.
inline void refine_colors(IsoSide& a, IsoSide& b, bool iterate) {
  using Key = std::pair<int, std::vector<std::tuple<int, int, int>>>;
  for (;;) {
    std::map<Key, int> dict;
    auto recolor = [&](IsoSide& side) {
      std::vector<int> next(side.color.size());
      for (std::size_t i = 0; i < side.color.size(); ++i) {
        Key k{side.color[i], {}};
        for (auto [nb, l, out] : side.adj[i])
          k.second.emplace_back(static_cast<int>(l), out ? 1 : 0, side.color[nb]);
        std::sort(k.second.begin(), k.second.end());
        next[i] = dict.emplace(std::move(k), static_cast<int>(dict.size())).first->second;
      }
      return next;
    };
    auto na = recolor(a), nb = recolor(b);
    auto distinct = [](const std::vector<int>& c) { return std::set<int>(c.begin(), c.end()).size(); };
    const bool grew = distinct(na) + distinct(nb) > distinct(a.color) + distinct(b.color);
    a.color = std::move(na);
    b.color = std::move(nb);
    if (!iterate || !grew) return;
  }
}

}  // namespace detail

/// Returns a bijection f with (u, v, L) in g1 iff (f(u), f(v), L) in g2, preserving node
/// kinds (and normalized labels unless disabled), or nullopt when none exists. Two empty
/// graphs are trivially isomorphic.
inline std::optional<Bijection> find_bijection(const ProvenanceGraph& g1, const ProvenanceGraph& g2,
                                               const IsoOptions& opts = {}) {
  const auto n = g1.size();
  if (n != g2.size() || g1.edges().size() != g2.edges().size()) return std::nullopt;
  if (n == 0) return Bijection{};

  detail::IsoSide a(g1), b(g2);
  {
    auto s1 = build_hash_values(g1, opts), s2 = build_hash_values(g2, opts);
    std::map<std::string, int> dict;
    auto seed = [&](const ProvenanceGraph& g, const std::map<std::string, NodeSignature>& sig) {
      std::vector<int> c(g.size());
      for (std::size_t i = 0; i < g.size(); ++i)
        c[i] = dict.emplace(sig.at(g.node_at(i).id).key(), static_cast<int>(dict.size())).first->second;
      return c;
    };
    a.color = seed(g1, s1);
    b.color = seed(g2, s2);
  }
  detail::refine_colors(a, b, opts.refine);

  std::map<int, std::vector<std::size_t>> class2;
  std::map<int, std::size_t> class1_size;
  for (std::size_t i = 0; i < n; ++i) {
    class2[b.color[i]].push_back(i);
    ++class1_size[a.color[i]];
  }
  for (const auto& [c, sz] : class1_size) {
    auto it = class2.find(c);
    if (it == class2.end() || it->second.size() != sz) return std::nullopt;
  }

  // Rarest class first; among equals prefer nodes adjacent to already-ordered ones.
  std::vector<std::size_t> order;
  {
    std::vector<bool> placed(n, false);
    std::vector<int> links(n, 0);
    for (std::size_t step = 0; step < n; ++step) {
      std::size_t best = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (placed[i]) continue;
        if (best == n) {
          best = i;
          continue;
        }
        auto key = [&](std::size_t x) {
          return std::make_tuple(class1_size[a.color[x]], -links[x], x);
        };
        if (key(i) < key(best)) best = i;
      }
      placed[best] = true;
      order.push_back(best);
      for (auto [nb, l, out] : a.adj[best]) ++links[nb];
    }
  }

  std::vector<std::size_t> f(n, n), finv(n, n);
  auto consistent = [&](std::size_t u, std::size_t c) {
    std::size_t mapped_a = 0, mapped_b = 0;
    for (auto [nb, l, out] : a.adj[u]) {
      if (f[nb] == n) continue;
      ++mapped_a;
      if (out ? !b.has_edge(c, f[nb], l) : !b.has_edge(f[nb], c, l)) return false;
    }
    for (auto [nb, l, out] : b.adj[c])
      if (finv[nb] != n) ++mapped_b;
    return mapped_a == mapped_b;
  };

  std::function<bool(std::size_t)> search = [&](std::size_t depth) {
    if (depth == n) return true;
    const auto u = order[depth];
    for (auto c : class2[a.color[u]]) {
      if (finv[c] != n || !consistent(u, c)) continue;
      f[u] = c;
      finv[c] = u;
      if (search(depth + 1)) return true;
      f[u] = n;
      finv[c] = n;
    }
    return false;
  };
  if (!search(0)) return std::nullopt;

  // Edge-by-edge verification of the final mapping.
  for (std::size_t e = 0; e < g1.edges().size(); ++e)
    if (!b.has_edge(f[g1.src_index(e)], f[g1.dst_index(e)], g1.edges()[e].label)) return std::nullopt;
  for (std::size_t i = 0; i < n; ++i)
    if (g1.node_at(i).kind != g2.node_at(f[i]).kind) return std::nullopt;

  Bijection out;
  for (std::size_t i = 0; i < n; ++i) out.pairs.emplace(g1.node_at(i).id, g2.node_at(f[i]).id);
  return out;
}

struct MismatchSummary {
  long activity_delta = 0;  // rerun - reference
  long entity_delta = 0;
  long edge_delta = 0;
  std::vector<std::string> unmatched_signatures;  // "<count diff> <signature key>"
};

struct RepeatVerdict {
  bool isomorphic = false;
  std::optional<Bijection> bijection;
  MismatchSummary mismatch_summary;
};

inline RepeatVerdict verify_exact_repeat(const ProvenanceGraph& reference, const ProvenanceGraph& rerun,
                                         const IsoOptions& opts = {}) {
  RepeatVerdict v;
  v.bijection = find_bijection(reference, rerun, opts);
  v.isomorphic = v.bijection.has_value();
  auto& m = v.mismatch_summary;
  m.activity_delta = static_cast<long>(rerun.count(NodeKind::Activity)) -
                     static_cast<long>(reference.count(NodeKind::Activity));
  m.entity_delta = static_cast<long>(rerun.count(NodeKind::Entity)) -
                   static_cast<long>(reference.count(NodeKind::Entity));
  m.edge_delta = static_cast<long>(rerun.edges().size()) - static_cast<long>(reference.edges().size());
  if (!v.isomorphic) {
    std::map<std::string, long> diff;
    for (const auto& [id, s] : build_hash_values(reference, opts)) --diff[s.key()];
    for (const auto& [id, s] : build_hash_values(rerun, opts)) ++diff[s.key()];
    for (const auto& [k, d] : diff)
      if (d != 0) m.unmatched_signatures.push_back((d > 0 ? "+" : "") + std::to_string(d) + " " + k);
  }
  return v;
}

inline nlohmann::ordered_json to_json(const RepeatVerdict& v) {
  nlohmann::ordered_json j;
  j["isomorphic"] = v.isomorphic;
  if (v.bijection) {
    nlohmann::ordered_json pairs = nlohmann::ordered_json::object();
    for (const auto& [k, val] : v.bijection->pairs) pairs[k] = val;
    j["bijection"] = pairs;
  } else {
    j["bijection"] = nullptr;
  }
  j["mismatch_summary"] = {{"activity_delta", v.mismatch_summary.activity_delta},
                           {"entity_delta", v.mismatch_summary.entity_delta},
                           {"edge_delta", v.mismatch_summary.edge_delta},
                           {"unmatched_signatures", v.mismatch_summary.unmatched_signatures}};
  return j;
}

}  // namespace provrepeat
