#include "grafenne/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace grafenne {

namespace {

struct Line {
  std::size_t number = 0;
  std::vector<std::string> fields;
};

class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path) : path_(path), in_(path) {
    if (!in_) throw DataError("cannot open " + path.string());
  }

  // Next non-comment line split on tabs.
  bool next(Line& line) {
    std::string text;
    while (std::getline(in_, text)) {
      ++number_;
      if (!text.empty() && text.back() == '\r') text.pop_back();
      if (text.empty() || text.front() == '#') continue;
      line.number = number_;
      line.fields.clear();
      std::size_t start = 0;
      while (true) {
        const auto tab = text.find('\t', start);
        line.fields.push_back(text.substr(start, tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
      }
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const Line& line, const std::string& what) const {
    throw DataError(path_.string() + ":" + std::to_string(line.number) + ": " + what);
  }

  void expect_fields(const Line& line, std::size_t n) const {
    if (line.fields.size() != n) {
      fail(line, "expected " + std::to_string(n) + " fields, got " + std::to_string(line.fields.size()));
    }
    for (const auto& f : line.fields) {
      if (f.empty()) fail(line, "empty field");
    }
  }

  double parse_double(const Line& line, const std::string& text) const {
    double x = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, x);
    if (ec != std::errc() || ptr != end) fail(line, "not a number: '" + text + "'");
    return x;
  }

  int parse_int(const Line& line, const std::string& text) const {
    int x = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, x);
    if (ec != std::errc() || ptr != end) fail(line, "not an integer: '" + text + "'");
    return x;
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t number_ = 0;
};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

bool is_integer(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size() || s.size() - i > 18) return false;
  return std::all_of(s.begin() + static_cast<std::ptrdiff_t>(i), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

std::vector<std::string> sorted_ids(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (std::all_of(ids.begin(), ids.end(), is_integer)) {
    std::stable_sort(ids.begin(), ids.end(),
                     [](const std::string& a, const std::string& b) { return std::stoll(a) < std::stoll(b); });
  }
  return ids;
}

HeteroGraph load_graph(const GraphFiles& files, LoadReport* report) {
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  rep = LoadReport{};

  std::map<std::string, std::string> labels;
  std::set<std::string> node_names;
  const bool have_labels = !files.labels.empty();
  if (have_labels) {
    LineReader r(files.labels);
    Line line;
    while (r.next(line)) {
      r.expect_fields(line, 2);
      if (!labels.emplace(line.fields[0], line.fields[1]).second) r.fail(line, "duplicate label for " + line.fields[0]);
      node_names.insert(line.fields[0]);
    }
  }

  struct Triple {
    std::string node, feature;
    double value;
  };
  std::vector<Triple> triples;
  std::set<std::pair<std::string, std::string>> seen_entries;
  std::set<std::string> feature_names;
  {
    LineReader r(files.features);
    Line line;
    while (r.next(line)) {
      r.expect_fields(line, 3);
      const double value = r.parse_double(line, line.fields[2]);
      if (!seen_entries.emplace(line.fields[0], line.fields[1]).second) {
        r.fail(line, "duplicate entry for node " + line.fields[0] + " feature " + line.fields[1]);
      }
      node_names.insert(line.fields[0]);
      feature_names.insert(line.fields[1]);
      triples.push_back({line.fields[0], line.fields[1], value});
    }
  }

  std::vector<std::pair<std::string, std::string>> edges;
  {
    LineReader r(files.edges);
    Line line;
    while (r.next(line)) {
      r.expect_fields(line, 2);
      const auto& a = line.fields[0];
      const auto& b = line.fields[1];
      if (have_labels) {
        for (const auto* end : {&a, &b}) {
          if (!node_names.count(*end)) r.fail(line, "dangling edge endpoint " + *end);
        }
      }
      if (a == b) {
        ++rep.self_loops_dropped;
        continue;
      }
      edges.emplace_back(a, b);
    }
  }
  if (!have_labels) {
    for (const auto& [a, b] : edges) node_names.insert({a, b});
  }

  HeteroGraph g;
  for (const auto& name : sorted_ids({feature_names.begin(), feature_names.end()})) g.feature_names().intern(name);
  std::vector<std::string> classes;
  for (const auto& [_, c] : labels) {
    if (c != "-") classes.push_back(c);
  }
  for (const auto& name : sorted_ids(classes)) g.class_names().intern(name);
  g.set_num_classes(static_cast<int>(g.class_names().size()));

  for (const auto& name : sorted_ids({node_names.begin(), node_names.end()})) {
    const NodeId v = g.node_names().intern(name);
    int label = kNoLabel;
    if (auto it = labels.find(name); it != labels.end() && it->second != "-") {
      label = static_cast<int>(*g.class_names().find(it->second));
    }
    g.add_node(v, label);
  }
  for (const auto& t : triples) {
    if (t.value == 0.0) {
      ++rep.zero_values_dropped;
      continue;
    }
    g.set_feature(*g.node_names().find(t.node), *g.feature_names().find(t.feature), t.value);
  }
  for (const auto& [a, b] : edges) {
    if (!g.add_edge(*g.node_names().find(a), *g.node_names().find(b))) ++rep.duplicate_edges;
  }
  return g;
}

void write_graph(const HeteroGraph& g, const GraphFiles& files) {
  {
    auto out = open_out(files.edges);
    for (const auto& e : g.edges()) out << g.node_names().name(e.u) << '\t' << g.node_names().name(e.v) << '\n';
  }
  {
    auto out = open_out(files.features);
    for (const auto& [v, rec] : g.records()) {
      for (const auto& [f, x] : rec.features) {
        out << g.node_names().name(v) << '\t' << g.feature_names().name(f) << '\t' << format_double(x) << '\n';
      }
    }
  }
  if (!files.labels.empty()) {
    auto out = open_out(files.labels);
    for (const auto& [v, rec] : g.records()) {
      out << g.node_names().name(v) << '\t'
          << (rec.label == kNoLabel ? std::string("-") : g.class_names().name(static_cast<std::uint32_t>(rec.label)))
          << '\n';
    }
  }
}

std::vector<StreamDelta> read_stream(const std::filesystem::path& path, HeteroGraph& g) {
  LineReader r(path);
  Line line;
  std::map<int, StreamDelta> by_time;
  while (r.next(line)) {
    if (line.fields.size() < 2) r.fail(line, "expected timestamp and op");
    const int t = r.parse_int(line, line.fields[0]);
    const std::string& op = line.fields[1];
    auto& d = by_time[t];
    d.timestamp = t;
    auto node = [&](std::size_t i) { return g.node_names().intern(line.fields[i]); };
    auto feature = [&](std::size_t i) { return g.feature_names().intern(line.fields[i]); };
    if (op == "ADDN") {
      r.expect_fields(line, 4);
      int label = kNoLabel;
      if (line.fields[3] != "-") {
        auto c = g.class_names().find(line.fields[3]);
        if (!c) r.fail(line, "unknown class " + line.fields[3]);
        label = static_cast<int>(*c);
      }
      d.added_nodes.push_back({node(2), label});
    } else if (op == "DELN") {
      r.expect_fields(line, 3);
      d.deleted_nodes.push_back(node(2));
    } else if (op == "ADDE" || op == "DELE") {
      r.expect_fields(line, 4);
      const NodeId a = node(2), b = node(3);
      if (a == b) r.fail(line, "self loop");
      (op == "ADDE" ? d.added_edges : d.deleted_edges).push_back(Edge::canonical(a, b));
    } else if (op == "ADDF") {
      r.expect_fields(line, 5);
      const double value = r.parse_double(line, line.fields[4]);
      if (value == 0.0) r.fail(line, "zero feature value");
      d.added_features.push_back({node(2), feature(3), value});
    } else if (op == "DELF") {
      r.expect_fields(line, 4);
      d.deleted_features.push_back({node(2), feature(3)});
    } else {
      r.fail(line, "unknown op " + op);
    }
  }
  std::vector<StreamDelta> out;
  for (auto& [_, d] : by_time) out.push_back(std::move(d));
  return out;
}

void write_stream(const std::filesystem::path& path, const std::vector<StreamDelta>& deltas, const HeteroGraph& g) {
  auto out = open_out(path);
  auto n = [&](NodeId v) { return g.node_names().name(v); };
  auto f = [&](FeatureId x) { return g.feature_names().name(x); };
  for (const auto& d : deltas) {
    const int t = d.timestamp;
    for (const auto& a : d.added_nodes) {
      out << t << "\tADDN\t" << n(a.node) << '\t'
          << (a.label == kNoLabel ? std::string("-") : g.class_names().name(static_cast<std::uint32_t>(a.label)))
          << '\n';
    }
    for (const auto& e : d.deleted_edges) out << t << "\tDELE\t" << n(e.u) << '\t' << n(e.v) << '\n';
    for (const auto& x : d.deleted_features) out << t << "\tDELF\t" << n(x.node) << '\t' << f(x.feature) << '\n';
    for (NodeId v : d.deleted_nodes) out << t << "\tDELN\t" << n(v) << '\n';
    for (const auto& e : d.added_edges) out << t << "\tADDE\t" << n(e.u) << '\t' << n(e.v) << '\n';
    for (const auto& x : d.added_features) {
      out << t << "\tADDF\t" << n(x.node) << '\t' << f(x.feature) << '\t' << format_double(x.value) << '\n';
    }
  }
}

void write_allotropic(const std::filesystem::path& path, const AllotropicGraph& alt, const HeteroGraph& names) {
  auto out = open_out(path);
  out << "# allotropic graph: " << alt.num_graph_nodes() << " graph nodes, " << alt.num_feature_nodes()
      << " feature nodes, " << alt.graph_edges().size() << " graph edges, " << alt.feature_edges().size()
      << " feature edges\n";
  for (NodeId v : alt.graph_nodes()) out << "G\t" << names.node_names().name(v) << '\n';
  for (FeatureId f : alt.feature_nodes()) out << "F\t" << names.feature_names().name(f) << '\n';
  for (const auto& e : alt.graph_edges()) {
    out << "E\t" << names.node_names().name(e.u) << '\t' << names.node_names().name(e.v) << '\n';
  }
  for (const auto& fe : alt.feature_edges()) {
    out << "X\t" << names.node_names().name(fe.node) << '\t' << names.feature_names().name(fe.feature) << '\t'
        << format_double(fe.weight) << '\n';
  }
}

AllotropicGraph read_allotropic(const std::filesystem::path& path, HeteroGraph& names) {
  LineReader r(path);
  Line line;
  std::vector<NodeId> nodes;
  std::vector<FeatureId> features;
  std::vector<Edge> edges;
  std::vector<FeatureEdge> fes;
  while (r.next(line)) {
    const std::string& kind = line.fields[0];
    if (kind == "G") {
      r.expect_fields(line, 2);
      nodes.push_back(names.node_names().intern(line.fields[1]));
    } else if (kind == "F") {
      r.expect_fields(line, 2);
      features.push_back(names.feature_names().intern(line.fields[1]));
    } else if (kind == "E") {
      r.expect_fields(line, 3);
      edges.push_back(Edge::canonical(names.node_names().intern(line.fields[1]),
                                      names.node_names().intern(line.fields[2])));
    } else if (kind == "X") {
      r.expect_fields(line, 4);
      fes.push_back({names.node_names().intern(line.fields[1]), names.feature_names().intern(line.fields[2]),
                     r.parse_double(line, line.fields[3])});
    } else {
      r.fail(line, "unknown record kind " + kind);
    }
  }
  return AllotropicGraph::build(std::move(nodes), std::move(edges), std::move(fes), std::move(features));
}

}  // namespace grafenne
