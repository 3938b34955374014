#include <algorithm>
#include <limits>
#include <random>

#include "doctest.h"
#include "riskbn/dataset.hpp"
#include "riskbn/error.hpp"
#include "riskbn/graph.hpp"
#include "support/testkit.hpp"

using namespace riskbn;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Random matrix over named P/C/E variables, no rank annotations.
BinaryDataset random_matrix(std::mt19937_64& rng, std::size_t problems, std::size_t causes,
                            std::size_t effects, std::size_t m, double density) {
  std::vector<VariableDescriptor> vars;
  for (std::size_t i = 0; i < problems; ++i) vars.push_back(testkit::var("P:p" + std::to_string(i), tags::problem));
  for (std::size_t i = 0; i < causes; ++i) vars.push_back(testkit::var("C:c" + std::to_string(i), tags::cause));
  for (std::size_t i = 0; i < effects; ++i) vars.push_back(testkit::var("E:e" + std::to_string(i), tags::effect));
  std::bernoulli_distribution on(density);
  std::vector<std::uint8_t> bits(vars.size() * m);
  for (auto& b : bits) b = on(rng) ? 1 : 0;
  return BinaryDataset(std::move(vars), std::move(bits));
}

ArchitectureSpec occurrence_spec(std::vector<TypePair> pairs, double f, double g) {
  ArchitectureSpec spec;
  spec.name = "custom";
  spec.pairs = std::move(pairs);
  spec.default_node_filter = f;
  spec.default_edge_filter = g;
  spec.weight_mode = WeightMode::occurrence;
  return spec;
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("unfiltered cause-problem architecture is complete bipartite") {
  std::mt19937_64 rng(31);
  const auto ds = random_matrix(rng, 21, 92, 0, 40, 0.05);
  const auto dag = build_graph(ds, occurrence_spec({{tags::cause, tags::problem}}, 0, 0));
  CHECK(dag.node_count() == 113);
  CHECK(dag.edge_count() == 1932);
  const auto ds2 = random_matrix(rng, 20, 120, 0, 10, 0.05);
  CHECK(build_graph(ds2, occurrence_spec({{tags::cause, tags::problem}}, 0, 0)).edge_count() == 2400);
}

TEST_CASE("filters are monotone and infinite thresholds empty the graph") {
  std::mt19937_64 rng(32);
  const auto ds = random_matrix(rng, 8, 12, 6, 120, 0.2);
  const std::vector<TypePair> pairs = {{tags::cause, tags::problem}, {tags::problem, tags::effect}};
  std::size_t last_edges = std::numeric_limits<std::size_t>::max();
  for (double g = 0; g <= 40; g += 1) {
    const auto dag = build_graph(ds, occurrence_spec(pairs, 0, g));
    CHECK(dag.edge_count() <= last_edges);
    CHECK(dag.node_count() == 26);
    last_edges = dag.edge_count();
  }
  CHECK(last_edges == 0);
  std::size_t last_nodes = std::numeric_limits<std::size_t>::max();
  for (double f = 0; f <= 40; f += 2) {
    const auto dag = build_graph(ds, occurrence_spec(pairs, f, 3));
    CHECK(dag.node_count() <= last_nodes);
    last_nodes = dag.node_count();
  }
  CHECK(build_graph(ds, occurrence_spec(pairs, 0, kInf)).edge_count() == 0);
  auto spec = occurrence_spec(pairs, 0, 0);
  spec.node_filter[tags::cause] = kInf;
  const auto dag = build_graph(ds, spec);
  CHECK(dag.nodes_with_tag(tags::cause).empty());
  CHECK(dag.nodes_with_tag(tags::problem).size() == 8);
}

TEST_CASE("edges join surviving nodes and store the co-occurrence count") {
  std::mt19937_64 rng(33);
  const auto ds = random_matrix(rng, 6, 9, 0, 90, 0.3);
  const auto dag = build_graph(ds, occurrence_spec({{tags::cause, tags::problem}}, 25, 6));
  for (const auto& e : dag.edges()) {
    const auto a = ds.index_of(dag.node(e.from).name);
    const auto b = ds.index_of(dag.node(e.to).name);
    double both = 0;
    for (std::size_t s = 0; s < ds.sample_count(); ++s) both += ds.value(s, a) && ds.value(s, b);
    CHECK(e.support == both);
    CHECK(both >= 6);
    CHECK(weighted_count(ds, a, WeightMode::occurrence) >= 25);
    CHECK(dag.node(e.from).tag == tags::cause);
    CHECK(dag.node(e.to).tag == tags::problem);
  }
}

TEST_CASE("cause seen in two records is dropped by f = 3") {
  std::vector<VariableDescriptor> vars = {testkit::var("P:p", tags::problem), testkit::var("C:c1", tags::cause),
                                          testkit::var("C:c2", tags::cause)};
  const std::vector<std::uint8_t> bits = {1, 1, 1, 1, 1, 1, 1, 0, 1, 1, 0, 0};
  const BinaryDataset ds(vars, bits);
  auto spec = occurrence_spec({{tags::cause, tags::problem}}, 3, 0);
  const auto dag = build_graph(ds, spec);
  CHECK_FALSE(dag.find("C:c1"));
  CHECK(dag.find("C:c2"));
}

TEST_CASE("missing tag is a spec error") {
  std::mt19937_64 rng(34);
  const auto ds = random_matrix(rng, 3, 3, 0, 10, 0.3);
  CHECK_THROWS_AS(build_graph(ds, occurrence_spec({{tags::problem, tags::effect}}, 0, 0)), SpecError);
  CHECK_THROWS_AS(predefined_architecture("A1", ds), SpecError);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(occurrence_spec({{tags::cause, tags::problem}, {tags::problem, tags::cause}}, 0, 0).validate(),
                  SpecError);
  CHECK_THROWS_AS(occurrence_spec({{tags::cause, tags::problem}, {tags::cause, tags::problem}}, 0, 0).validate(),
                  SpecError);
  CHECK_THROWS_AS(occurrence_spec({{tags::cause, tags::problem}}, -1, 0).validate(), SpecError);
  auto capped = occurrence_spec({{tags::cause, tags::problem}}, 0, 0);
  capped.parent_cap = 0;
  CHECK_THROWS_AS(capped.validate(), SpecError);
  CHECK_THROWS_AS(predefined_architecture("A9"), SpecError);
}

TEST_CASE("predefined architectures") {
  const std::vector<Tag> ctx = {Tag("CS"), Tag("CT")};
  const auto a0 = predefined_architecture("A0");
  CHECK(a0.baseline);
  CHECK(a0.pairs.empty());
  const auto a3 = predefined_architecture("A3");
  CHECK(a3.pairs == std::vector<TypePair>{{tags::cause, tags::problem}, {tags::problem, tags::effect}});
  const auto a4 = predefined_architecture("A4");
  CHECK(a4.pairs == inverted(a3).pairs);
  CHECK(predefined_architecture("A5").pairs ==
        std::vector<TypePair>{{tags::problem, tags::cause}, {tags::problem, tags::effect}});
  const auto a6 = predefined_architecture("A6", ctx);
  CHECK(a6.pairs.size() == 4);
  CHECK(a6.parent_cap == 15);
  CHECK(std::count(a6.pairs.begin(), a6.pairs.end(), TypePair{Tag("CT"), tags::problem}) == 1);
  CHECK(predefined_architecture("A7").pairs == inverted(predefined_architecture("A5")).pairs);
  CHECK(predefined_architecture("A8", ctx).pairs == inverted(a6).pairs);
  const auto a1 = predefined_architecture("A1");
  CHECK(a1.pairs.size() == 4);
  CHECK(predefined_architecture("A2").pairs == inverted(a1).pairs);
  for (const char* code : {"A0", "A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8"}) {
    const auto s = predefined_architecture(code, ctx);
    CHECK(s.default_node_filter == 5.0);
    CHECK(s.default_edge_filter == 3.0);
    CHECK(s.weight_mode == WeightMode::inverse_rank);
    CHECK_NOTHROW(s.validate());
  }
}

TEST_CASE("parent cap keeps the strongest parents, ties by name") {
  std::vector<VariableDescriptor> nodes = {testkit::var("target", tags::problem)};
  std::vector<Edge> edges;
  for (int i = 0; i < 20; ++i) {
    char name[8];
    std::snprintf(name, sizeof name, "c%02d", 19 - i);
    nodes.push_back(testkit::var(name, tags::cause));
    edges.push_back({static_cast<std::size_t>(i + 1), 0, 5.0});
  }
  const Dag dag(nodes, edges);
  const auto capped = enforce_parent_cap(dag, 15);
  REQUIRE(capped.parents(0).size() == 15);
  std::vector<std::string> kept;
  for (auto p : capped.parents(0)) kept.push_back(capped.node(p).name);
  std::sort(kept.begin(), kept.end());
  std::vector<std::string> expect;
  for (int i = 0; i < 15; ++i) {
    char name[8];
    std::snprintf(name, sizeof name, "c%02d", i);
    expect.push_back(name);
  }
  CHECK(kept == expect);
  CHECK(enforce_parent_cap(capped, 15) == capped);
  CHECK(enforce_parent_cap(dag, 25) == dag);
}

TEST_CASE("cap 1 keeps the single strongest parent and is idempotent") {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 20; ++trial) {
    const auto ds = random_matrix(rng, 5, 8, 4, 60, 0.3);
    auto spec = occurrence_spec({{tags::cause, tags::problem}, {tags::problem, tags::effect}}, 0, 1);
    const auto dag = build_graph(ds, spec);
    const auto capped = enforce_parent_cap(dag, 1);
    for (std::size_t v = 0; v < dag.node_count(); ++v) {
      const auto& ps = dag.parents(v);
      if (ps.empty()) {
        CHECK(capped.parents(v).empty());
        continue;
      }
      REQUIRE(capped.parents(v).size() == 1);
      const double best = *dag.edge_support(capped.parents(v)[0], v);
      for (auto p : ps) CHECK(*dag.edge_support(p, v) <= best);
    }
    CHECK(enforce_parent_cap(capped, 1) == capped);
    spec.parent_cap = 2;
    const auto built = build_graph(ds, spec);
    for (std::size_t v = 0; v < built.node_count(); ++v) CHECK(built.parents(v).size() <= 2);
  }
}

TEST_CASE("random type graphs stay acyclic at the variable level") {
  std::mt19937_64 rng(36);
  const std::vector<Tag> tgs = {tags::problem, tags::cause, tags::effect};
  for (int trial = 0; trial < 40; ++trial) {
    const auto ds = random_matrix(rng, 4, 5, 3, 30, 0.3);
    std::vector<Tag> order = tgs;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<TypePair> pairs;
    for (std::size_t i = 0; i < order.size(); ++i)
      for (std::size_t j = i + 1; j < order.size(); ++j)
        if (rng() % 2) pairs.push_back({order[i], order[j]});
    if (pairs.empty()) continue;
    const auto dag = build_graph(ds, occurrence_spec(pairs, 0, 0));
    std::vector<std::size_t> pos(dag.node_count());
    const auto& topo = dag.topological_order();
    REQUIRE(topo.size() == dag.node_count());
    for (std::size_t i = 0; i < topo.size(); ++i) pos[topo[i]] = i;
    for (const auto& e : dag.edges()) CHECK(pos[e.from] < pos[e.to]);
  }
}

TEST_CASE("dag rejects cycles, self-loops and dangling edges") {
  const std::vector<VariableDescriptor> nodes = {testkit::var("a"), testkit::var("b")};
  CHECK_THROWS_AS(Dag(nodes, {{0, 1, 1}, {1, 0, 1}}), ContractError);
  CHECK_THROWS_AS(Dag(nodes, {{0, 0, 1}}), ContractError);
  CHECK_THROWS_AS(Dag(nodes, {{0, 2, 1}}), ContractError);
  CHECK_THROWS_AS(Dag(nodes, {{0, 1, 1}, {0, 1, 2}}), ContractError);
}

TEST_CASE("baseline outputs are the output-tag variables passing f") {
  std::mt19937_64 rng(37);
  const auto ds = random_matrix(rng, 4, 6, 0, 50, 0.2);
  auto spec = predefined_architecture("A0");
  spec.weight_mode = WeightMode::occurrence;
  spec.default_node_filter = 9;
  for (auto v : baseline_outputs(ds, spec, UseCase::diagnostic)) {
    CHECK(ds.variable(v).tag == tags::cause);
    CHECK(weighted_count(ds, v, WeightMode::occurrence) >= 9);
  }
  CHECK_THROWS(build_graph(ds, spec));
}

TEST_CASE("DOT output parses and carries pen widths") {
  CHECK(export_dot(Dag{}) == "digraph {\n}\n");
  CHECK(testkit::check_dot(export_dot(Dag{})).ok);

  const Dag two({testkit::var("P:a \"quoted\""), testkit::var("C:b", tags::cause)}, {{1, 0, 4.0}});
  const auto check = testkit::check_dot(export_dot(two));
  CHECK_MESSAGE(check.ok, check.error);
  CHECK(check.edge_statements == 1);
  CHECK(check.penwidth_edges == 1);
  CHECK(check.node_statements == 2);

  std::mt19937_64 rng(38);
  const auto ds = random_matrix(rng, 5, 7, 4, 60, 0.3);
  const auto dag = build_graph(ds, occurrence_spec({{tags::cause, tags::problem}, {tags::problem, tags::effect}}, 0, 3));
  const auto big = testkit::check_dot(export_dot(dag));
  CHECK_MESSAGE(big.ok, big.error);
  CHECK(big.edge_statements == dag.edge_count());
  CHECK(big.penwidth_edges == dag.edge_count());
  CHECK_FALSE(testkit::check_dot("digraph { a -- b }").ok);
  CHECK_FALSE(testkit::check_dot("digraph { a -> }").ok);
}

TEST_CASE("pen width grows with support") {
  const Dag dag({testkit::var("a"), testkit::var("b"), testkit::var("c")}, {{0, 1, 1.0}, {0, 2, 4.0}});
  const auto dot = export_dot(dag);
  CHECK(dot.find("\"a\" -> \"b\" [penwidth=1.250") != std::string::npos);
  CHECK(dot.find("\"a\" -> \"c\" [penwidth=5.000") != std::string::npos);
}

}  // TEST_SUITE
