#include "grafenne/stream.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "grafenne/random.hpp"

namespace grafenne {

bool StreamDelta::empty() const {
  return added_nodes.empty() && deleted_nodes.empty() && added_edges.empty() && deleted_edges.empty() &&
         added_features.empty() && deleted_features.empty();
}

std::set<NodeId> StreamDelta::touched_nodes() const {
  std::set<NodeId> out;
  for (const auto& a : added_nodes) out.insert(a.node);
  out.insert(deleted_nodes.begin(), deleted_nodes.end());
  for (const auto& e : added_edges) out.insert({e.u, e.v});
  for (const auto& e : deleted_edges) out.insert({e.u, e.v});
  for (const auto& f : added_features) out.insert(f.node);
  for (const auto& f : deleted_features) out.insert(f.node);
  return out;
}

DeltaResult apply_delta(const HeteroGraph& g, const StreamDelta& delta) {
  DeltaResult r{g, {}};
  HeteroGraph& h = r.graph;
  for (const auto& a : delta.added_nodes) h.add_node(a.node, a.label);
  for (const auto& e : delta.deleted_edges) h.remove_edge(e.u, e.v);
  for (const auto& f : delta.deleted_features) h.remove_feature(f.node, f.feature);
  for (NodeId v : delta.deleted_nodes) h.remove_node(v);
  for (const auto& e : delta.added_edges) {
    if (!h.add_edge(e.u, e.v)) {
      throw IntegrityError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ") already exists");
    }
  }
  for (const auto& f : delta.added_features) {
    if (!h.has_node(f.node)) throw IntegrityError("feature added to missing node " + std::to_string(f.node));
    if (h.features(f.node).count(f.feature) != 0) {
      throw IntegrityError("feature " + std::to_string(f.feature) + " already present on node " +
                           std::to_string(f.node));
    }
    h.set_feature(f.node, f.feature, f.value);
  }
  for (NodeId v : delta.touched_nodes()) {
    if (h.has_node(v)) r.affected.insert(v);
  }
  return r;
}

AllotropicGraph apply_delta(const AllotropicGraph& alt, const StreamDelta& delta) {
  std::set<NodeId> nodes(alt.graph_nodes().begin(), alt.graph_nodes().end());
  std::set<Edge> edges(alt.graph_edges().begin(), alt.graph_edges().end());
  std::map<std::pair<NodeId, FeatureId>, double> fedges;
  for (const auto& fe : alt.feature_edges()) fedges[{fe.node, fe.feature}] = fe.weight;

  auto fail = [](const std::string& what) { throw IntegrityError(what); };
  for (const auto& a : delta.added_nodes) {
    if (!nodes.insert(a.node).second) fail("node " + std::to_string(a.node) + " already exists");
  }
  for (const auto& e : delta.deleted_edges) {
    if (edges.erase(Edge::canonical(e.u, e.v)) == 0) fail("edge to delete does not exist");
  }
  for (const auto& f : delta.deleted_features) {
    if (fedges.erase({f.node, f.feature}) == 0) fail("feature edge to delete does not exist");
  }
  for (NodeId v : delta.deleted_nodes) {
    if (nodes.erase(v) == 0) fail("node " + std::to_string(v) + " does not exist");
    std::erase_if(edges, [v](const Edge& e) { return e.u == v || e.v == v; });
    std::erase_if(fedges, [v](const auto& kv) { return kv.first.first == v; });
  }
  for (const auto& e : delta.added_edges) {
    if (!nodes.count(e.u) || !nodes.count(e.v)) fail("edge added between missing nodes");
    if (!edges.insert(Edge::canonical(e.u, e.v)).second) fail("edge already exists");
  }
  for (const auto& f : delta.added_features) {
    if (!nodes.count(f.node)) fail("feature added to missing node " + std::to_string(f.node));
    if (!fedges.emplace(std::pair{f.node, f.feature}, f.value).second) fail("feature edge already exists");
  }

  std::vector<FeatureEdge> fes;
  fes.reserve(fedges.size());
  for (const auto& [key, w] : fedges) fes.push_back({key.first, key.second, w});
  return AllotropicGraph::build(std::vector<NodeId>(nodes.begin(), nodes.end()),
                                std::vector<Edge>(edges.begin(), edges.end()), std::move(fes));
}

namespace {

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0,1]");
}

}  // namespace

std::vector<StreamDelta> generate_stream(const HeteroGraph& g, const StreamConfig& config) {
  if (config.steps < 1) throw ConfigError("stream length must be at least 1");
  check_probability(config.p_n, "p_n");
  check_probability(config.p_f_add, "p_f_add");
  check_probability(config.p_f_del, "p_f_del");
  check_probability(config.p_e_add, "p_e_add");
  check_probability(config.p_e_del, "p_e_del");

  std::size_t universe = config.feature_universe;
  if (universe == 0) {
    universe = g.feature_names().size();
    const auto present = g.feature_set();
    if (!present.empty()) universe = std::max<std::size_t>(universe, *present.rbegin() + 1);
  }

  Rng rng(derive_seed(config.seed, "stream"));
  HeteroGraph current = g;
  std::vector<StreamDelta> deltas;
  for (int step = 0; step < config.steps; ++step) {
    StreamDelta d;
    d.timestamp = step + 2;
    for (const auto& [v, rec] : current.records()) {
      if (!rng.bernoulli(config.p_n)) continue;
      for (FeatureId f = 0; f < universe; ++f) {
        if (rec.features.count(f) != 0 || !rng.bernoulli(config.p_f_add)) continue;
        const double value = config.values == FeatureValueMode::kBinary ? 1.0 : 1.0 - rng.uniform();
        d.added_features.push_back({v, f, value});
      }
      for (const auto& [f, _] : rec.features) {
        if (rng.bernoulli(config.p_f_del)) d.deleted_features.push_back({v, f});
      }
    }
    for (const auto& e : current.edges()) {
      if (rng.bernoulli(config.p_e_del)) d.deleted_edges.push_back(e);
    }
    std::size_t additions = 0;
    for (std::size_t i = 0; i < current.num_edges(); ++i) additions += rng.bernoulli(config.p_e_add) ? 1 : 0;
    const auto ids = current.node_ids();
    std::set<Edge> chosen;
    const std::size_t max_attempts = 100 * (additions + 1);
    for (std::size_t attempt = 0; chosen.size() < additions && attempt < max_attempts && ids.size() > 1; ++attempt) {
      const NodeId a = ids[rng.index(ids.size())];
      const NodeId b = ids[rng.index(ids.size())];
      if (a == b || current.has_edge(a, b)) continue;
      if (chosen.insert(Edge::canonical(a, b)).second) d.added_edges.push_back(Edge::canonical(a, b));
    }
    current = apply_delta(current, d).graph;
    deltas.push_back(std::move(d));
  }
  return deltas;
}

}  // namespace grafenne
