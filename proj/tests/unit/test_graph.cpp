#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "grafenne/allotropic.hpp"
#include "grafenne/dataset.hpp"
#include "grafenne/io.hpp"
#include "grafenne/stream.hpp"
#include "support/graphs.hpp"
#include "support/tempdir.hpp"

using namespace grafenne;
namespace fs = std::filesystem;

using testing::TempDir;

namespace {

// Nodes A, B, C; edge (A, B); A:{f1:1, f2:2}, B:{f2:3}, C:{}.
HeteroGraph abc_graph() {
  HeteroGraph g;
  for (auto name : {"A", "B", "C"}) g.add_node(g.node_names().intern(name));
  const auto f1 = g.feature_names().intern("f1");
  const auto f2 = g.feature_names().intern("f2");
  g.add_edge(0, 1);
  g.set_feature(0, f1, 1.0);
  g.set_feature(0, f2, 2.0);
  g.set_feature(1, f2, 3.0);
  return g;
}

}  // namespace

TEST_CASE("hetero graph basics") {
  auto g = abc_graph();
  CHECK(g.num_nodes() == 3);
  CHECK(g.num_edges() == 1);
  CHECK(g.feature_set() == std::set<FeatureId>{0, 1});
  CHECK_FALSE(g.add_edge(1, 0));
  CHECK_THROWS_AS(g.add_edge(2, 2), IntegrityError);
  CHECK_THROWS_AS(g.add_edge(0, 7), IntegrityError);

  g.set_feature(2, 0, 0.0);
  CHECK(g.features(2).empty());
  g.set_feature(0, 0, 0.0);
  CHECK(g.features(0).size() == 1);
}

TEST_CASE("to_allotropic on the three node example") {
  auto alt = to_allotropic(abc_graph());
  CHECK(alt.graph_nodes() == std::vector<NodeId>{0, 1, 2});
  CHECK(alt.feature_nodes() == std::vector<FeatureId>{0, 1});
  CHECK(alt.num_nodes() == 5);
  CHECK(alt.graph_edges() == std::vector<Edge>{{0, 1}});
  CHECK(alt.feature_edges() == std::vector<FeatureEdge>{{0, 0, 1.0}, {0, 1, 2.0}, {1, 1, 3.0}});
  CHECK(alt.node_feature_edges(2).empty());
  CHECK(alt.feature_node_edges(1).size() == 2);
  CHECK(alt.node_neighbors(0) == std::vector<std::size_t>{1});
  CHECK(alt.ge_src().size() == 2);
}

TEST_CASE("to_allotropic without features") {
  HeteroGraph g;
  g.add_node(0);
  g.add_node(1);
  g.add_edge(0, 1);
  auto alt = to_allotropic(g);
  CHECK(alt.num_feature_nodes() == 0);
  CHECK(alt.num_nodes() == 2);
  CHECK(alt.num_edges() == 1);
}

TEST_CASE("allotropic counts and round trip on random graphs") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto g = testing::random_graph(seed, 50, 12);
    auto alt = to_allotropic(g);
    CHECK(alt.num_nodes() == g.num_nodes() + g.feature_set().size());
    std::size_t entries = 0;
    for (auto v : g.node_ids()) entries += g.features(v).size();
    CHECK(alt.num_edges() == g.num_edges() + entries);
    auto back = project_back(alt);
    for (auto v : g.node_ids()) CHECK(back.at(v) == g.features(v));
    for (const auto& fe : alt.feature_edges()) CHECK(fe.weight == g.features(fe.node).at(fe.feature));
  }
}

TEST_CASE("missing mask") {
  auto g = testing::random_graph(3, 40, 20, 0.1, 0.5);
  auto same = apply_missing_mask(g, 0.0, 1);
  CHECK(same.same_content(g));
  auto none = apply_missing_mask(g, 1.0, 1);
  CHECK(none.num_feature_entries() == 0);
  CHECK(none.edges() == g.edges());
  for (auto v : g.node_ids()) CHECK(none.label(v) == g.label(v));
  CHECK_THROWS_AS(apply_missing_mask(g, 1.5, 1), ConfigError);
  CHECK(apply_missing_mask(g, 0.5, 7).same_content(apply_missing_mask(g, 0.5, 7)));

  // 10000 entries at p = 0.5: deletions within 3 sigma of the binomial mean.
  HeteroGraph big;
  for (NodeId v = 0; v < 100; ++v) {
    big.add_node(v);
    for (FeatureId f = 0; f < 100; ++f) big.set_feature(v, f, 1.0);
  }
  const auto kept = apply_missing_mask(big, 0.5, 99).num_feature_entries();
  const double deleted = 10000.0 - static_cast<double>(kept);
  CHECK(std::abs(deleted - 5000.0) <= 3.0 * std::sqrt(10000 * 0.25));
}

TEST_CASE("make_split") {
  HeteroGraph g;
  for (NodeId v = 0; v < 10; ++v) g.add_node(v, 0);
  auto s = make_split(g, {0.6, 0.2, 0.2}, 5);
  CHECK(s.train.size() == 6);
  CHECK(s.val.size() == 2);
  CHECK(s.test.size() == 2);
  std::set<NodeId> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 10);

  auto whole = make_split(g, {1, 0, 0}, 5);
  CHECK(whole.train.size() == 10);
  auto again = make_split(g, {0.6, 0.2, 0.2}, 5);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);

  HeteroGraph odd;
  for (NodeId v = 0; v < 7; ++v) odd.add_node(v, v == 3 ? kNoLabel : 1);
  auto t = make_split(odd, {0.6, 0.2, 0.2}, 1);
  CHECK(t.train.size() + t.val.size() + t.test.size() == 6);
  CHECK(t.val.size() == 1);
}

TEST_CASE("apply_delta") {
  auto g = abc_graph();
  auto same = apply_delta(g, StreamDelta{});
  CHECK(same.graph.same_content(g));
  CHECK(same.affected.empty());

  StreamDelta del;
  del.deleted_nodes = {0};
  auto r = apply_delta(g, del);
  CHECK_FALSE(r.graph.has_node(0));
  CHECK(r.graph.num_edges() == 0);
  CHECK(r.graph.feature_set() == std::set<FeatureId>{1});
  CHECK(r.graph.neighbors(1).empty());

  StreamDelta bad;
  bad.deleted_edges = {{0, 2}};
  CHECK_THROWS_AS(apply_delta(g, bad), IntegrityError);
  StreamDelta bad_feature;
  bad_feature.deleted_features = {{2, 0}};
  CHECK_THROWS_AS(apply_delta(g, bad_feature), IntegrityError);
  CHECK_THROWS_AS(apply_delta(to_allotropic(g), bad_feature), IntegrityError);
}

TEST_CASE("apply_delta matches a rebuild") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    auto g = testing::random_graph(seed + 100, 50, 10);
    Rng rng(seed);
    StreamDelta d;
    const auto ids = g.node_ids();
    NodeId fresh = ids.back() + 1;
    d.added_nodes = {{fresh, 1}, {fresh + 1, kNoLabel}};
    std::set<NodeId> doomed;
    for (auto v : ids) {
      if (rng.bernoulli(0.1)) doomed.insert(v);
    }
    for (const auto& e : g.edges()) {
      if (rng.bernoulli(0.2)) d.deleted_edges.push_back(e);
    }
    for (auto v : ids) {
      if (doomed.count(v)) continue;
      for (const auto& [f, _] : g.features(v)) {
        if (rng.bernoulli(0.2)) d.deleted_features.push_back({v, f});
      }
      for (FeatureId f = 0; f < 14; ++f) {
        if (!g.features(v).count(f) && rng.bernoulli(0.05)) d.added_features.push_back({v, f, rng.uniform(0.5, 1.0)});
      }
    }
    d.deleted_nodes.assign(doomed.begin(), doomed.end());
    d.added_edges.push_back(Edge::canonical(fresh, fresh + 1));
    for (auto v : ids) {
      if (!doomed.count(v) && rng.bernoulli(0.1)) d.added_edges.push_back(Edge::canonical(v, fresh));
    }
    d.added_features.push_back({fresh, 13, 2.5});

    auto applied = apply_delta(g, d);

    // From-scratch rebuild of the expected snapshot.
    HeteroGraph rebuilt;
    std::set<Edge> deleted_edges(d.deleted_edges.begin(), d.deleted_edges.end());
    std::set<std::pair<NodeId, FeatureId>> deleted_features;
    for (const auto& x : d.deleted_features) deleted_features.insert({x.node, x.feature});
    for (auto v : ids) {
      if (doomed.count(v)) continue;
      rebuilt.add_node(v, g.label(v));
      for (const auto& [f, x] : g.features(v)) {
        if (!deleted_features.count({v, f})) rebuilt.set_feature(v, f, x);
      }
    }
    rebuilt.add_node(fresh, 1);
    rebuilt.add_node(fresh + 1, kNoLabel);
    for (const auto& e : g.edges()) {
      if (!deleted_edges.count(e) && !doomed.count(e.u) && !doomed.count(e.v)) rebuilt.add_edge(e.u, e.v);
    }
    for (const auto& e : d.added_edges) rebuilt.add_edge(e.u, e.v);
    for (const auto& x : d.added_features) rebuilt.set_feature(x.node, x.feature, x.value);

    CHECK(applied.graph.same_content(rebuilt));
    CHECK(to_allotropic(applied.graph) == to_allotropic(rebuilt));
    CHECK(apply_delta(to_allotropic(g), d) == to_allotropic(rebuilt));
    CHECK(applied.affected.count(fresh));
    for (auto v : doomed) CHECK_FALSE(applied.affected.count(v));
  }
}

TEST_CASE("generate_stream") {
  auto g = testing::random_graph(9, 60, 15, 0.1, 0.4);

  StreamConfig quiet;
  quiet.steps = 4;
  quiet.p_n = quiet.p_f_add = quiet.p_f_del = quiet.p_e_add = quiet.p_e_del = 0.0;
  auto empty = generate_stream(g, quiet);
  CHECK(empty.size() == 4);
  for (const auto& d : empty) CHECK(d.empty());
  CHECK(empty.front().timestamp == 2);

  StreamConfig wipe = quiet;
  wipe.steps = 1;
  wipe.p_n = 1.0;
  wipe.p_f_del = 1.0;
  auto w = generate_stream(g, wipe);
  CHECK(apply_delta(g, w[0]).graph.num_feature_entries() == 0);

  StreamConfig cfg;
  cfg.steps = 9;
  cfg.p_n = 0.2;
  cfg.p_e_add = 0.05;
  cfg.p_e_del = 0.05;
  cfg.seed = 4;
  auto deltas = generate_stream(g, cfg);
  CHECK(deltas == generate_stream(g, cfg));
  CHECK_THROWS_AS(generate_stream(g, StreamConfig{.steps = 0}), ConfigError);
  CHECK_THROWS_AS(generate_stream(g, StreamConfig{.p_n = 2.0}), ConfigError);

  // Replay vs independent bookkeeping of counts.
  HeteroGraph cur = g;
  auto nodes = g.num_nodes();
  auto edges = g.num_edges();
  auto entries = g.num_feature_entries();
  for (const auto& d : deltas) {
    cur = apply_delta(cur, d).graph;
    nodes += d.added_nodes.size() - d.deleted_nodes.size();
    edges += d.added_edges.size() - d.deleted_edges.size();
    entries += d.added_features.size() - d.deleted_features.size();
    CHECK(cur.num_nodes() == nodes);
    CHECK(cur.num_edges() == edges);
    CHECK(cur.num_feature_entries() == entries);
  }
}

TEST_CASE("load_graph") {
  TempDir dir;
  auto g = load_graph({dir.write("e", "0\t1\n"), dir.write("x", "0\tf0\t1.0\n"), dir.write("y", "0\ta\n1\tb\n")});
  CHECK(g.num_nodes() == 2);
  CHECK(g.num_edges() == 1);
  CHECK(g.feature_set().size() == 1);
  CHECK(g.num_classes() == 2);

  auto bare = load_graph({dir.write("e2", "# comment\n0\t1\n1\t2\n"), dir.write("x2", ""), {}});
  CHECK(bare.feature_set().empty());
  CHECK(bare.num_nodes() == 3);

  // Numeric ids sort numerically.
  auto numeric = load_graph({dir.write("e3", "10\t9\n"), dir.write("x3", "10\t2\t1\n9\t10\t1\n"), {}});
  CHECK(numeric.node_names().name(0) == "9");
  CHECK(numeric.feature_names().name(0) == "2");

  CHECK_THROWS_AS(load_graph({dir.write("e4", "0\t7\n"), dir.write("x4", ""), dir.write("y4", "0\ta\n")}), DataError);
  CHECK_THROWS_AS(load_graph({dir.write("e5", ""), dir.write("x5", "0\tf\t1\n0\tf\t2\n"), {}}), DataError);
  try {
    load_graph({dir.write("e6", "0\t1\n2\n"), dir.write("x6", ""), {}});
    FAIL("no throw");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  LoadReport rep;
  auto loops = load_graph({dir.write("e7", "a\ta\na\tb\nb\ta\n"), dir.write("x7", "a\tf\t0\n"), {}}, &rep);
  CHECK(loops.num_edges() == 1);
  CHECK(rep.self_loops_dropped == 1);
  CHECK(rep.duplicate_edges == 1);
  CHECK(rep.zero_values_dropped == 1);
}

TEST_CASE("file round trips") {
  TempDir dir;
  auto g = testing::random_graph(21, 30, 8);
  GraphFiles files{dir.path / "e", dir.path / "x", dir.path / "y"};
  write_graph(g, files);
  auto back = load_graph(files);
  CHECK(back.num_nodes() == g.num_nodes());
  CHECK(back.num_edges() == g.num_edges());
  CHECK(back.num_feature_entries() == g.num_feature_entries());

  StreamConfig cfg;
  cfg.steps = 3;
  cfg.p_n = 0.3;
  cfg.p_e_add = 0.1;
  cfg.seed = 2;
  auto deltas = generate_stream(back, cfg);
  write_stream(dir.path / "s", deltas, back);
  auto reread = read_stream(dir.path / "s", back);
  REQUIRE(reread.size() == deltas.size());
  HeteroGraph a = back, b = back;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    a = apply_delta(a, deltas[i]).graph;
    b = apply_delta(b, reread[i]).graph;
  }
  CHECK(a.same_content(b));

  auto alt = to_allotropic(back);
  write_allotropic(dir.path / "alt", alt, back);
  auto alt_back = read_allotropic(dir.path / "alt", back);
  CHECK(alt_back == alt);
}
