#pragma once

// Tab-separated text formats for graphs, streams and allotropic dumps.
// Blank lines and lines starting with '#' are skipped; every other line must
// have exactly the expected number of fields.

#include <filesystem>
#include <string>
#include <vector>

#include "grafenne/allotropic.hpp"
#include "grafenne/graph.hpp"
#include "grafenne/stream.hpp"

namespace grafenne {

struct GraphFiles {
  std::filesystem::path edges;
  std::filesystem::path features;
  // Optional. When given, V is the set of nodes named here or in the feature
  // file and edges must stay inside it; a class of "-" marks an unlabeled
  // node. Without it, V is every node named in any file.
  std::filesystem::path labels;
};

struct LoadReport {
  std::size_t self_loops_dropped = 0;
  std::size_t duplicate_edges = 0;
  std::size_t zero_values_dropped = 0;
};

// Node, feature and class ids are assigned in sorted external-id order
// (numeric when every id is an integer, lexicographic otherwise).
HeteroGraph load_graph(const GraphFiles& files, LoadReport* report = nullptr);

void write_graph(const HeteroGraph& g, const GraphFiles& files);

// Resolves names against g's registries, registering names first seen in
// the stream (nodes added later, unseen features).
std::vector<StreamDelta> read_stream(const std::filesystem::path& path, HeteroGraph& g);
void write_stream(const std::filesystem::path& path, const std::vector<StreamDelta>& deltas,
                  const HeteroGraph& g);

void write_allotropic(const std::filesystem::path& path, const AllotropicGraph& alt, const HeteroGraph& names);
// Reads a dump back; names are interned into `names`.
AllotropicGraph read_allotropic(const std::filesystem::path& path, HeteroGraph& names);

// Shortest text that parses back to the same double.
std::string format_double(double x);

// Ordering used for registry ids.
std::vector<std::string> sorted_ids(std::vector<std::string> ids);

}  // namespace grafenne
