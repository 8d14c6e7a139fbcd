#pragma once

// Three-phase message passing over the allotropic graph: feature nodes to
// graph nodes, graph nodes among themselves, graph nodes back to feature
// nodes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grafenne/allotropic.hpp"
#include "grafenne/random.hpp"
#include "grafenne/tensor.hpp"

namespace grafenne {

enum class Phase2Backend { kSage, kGat, kGin };

const char* backend_name(Phase2Backend b);
Phase2Backend parse_backend(const std::string& name);

struct GrafenneConfig {
  int layers = 2;
  std::size_t dim = 64;
  Phase2Backend phase2 = Phase2Backend::kSage;
  double leaky_slope = 0.2;
  double gin_epsilon = 0.0;
  // Sampling caps, 0 = use every neighbor. cap_graph bounds graph neighbors
  // in phase 2, cap_nodes bounds graph nodes per feature node in phase 3,
  // cap_features bounds feature nodes per graph node in phase 1.
  std::size_t cap_graph = 0;
  std::size_t cap_nodes = 0;
  std::size_t cap_features = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Glorot-uniform parameter, seeded from (seed, name) so values do not depend
// on construction order.
Parameter glorot_parameter(const std::string& name, Shape shape, std::uint64_t seed);
Parameter zero_parameter(const std::string& name, Shape shape);
// Two-layer MLP in -> hidden -> out with biases.
std::vector<DenseLayer> make_mlp(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
                                 std::uint64_t seed);

// Learnable start vector per feature node. Rows are independent parameters,
// so adding a feature never touches existing rows.
class FeatureEmbeddingTable {
 public:
  FeatureEmbeddingTable() = default;
  FeatureEmbeddingTable(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }
  bool contains(FeatureId f) const { return rows_.count(f) != 0; }
  const Parameter& at(FeatureId f) const;
  // Creates a randomly initialised row when absent. Returns true if created.
  bool ensure(FeatureId f);
  void ensure_all(const AllotropicGraph& alt);
  void set(FeatureId f, std::vector<double> values);
  // Rows in ascending feature id.
  std::vector<Parameter> parameters() const;
  FeatureEmbeddingTable deep_copy() const;

  static std::string row_name(FeatureId f) { return "feat_emb/" + std::to_string(f); }

 private:
  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  std::map<FeatureId, Parameter> rows_;
};

// Loads `feature<TAB>v1<TAB>...<TAB>vd` lines into the table, resolving
// feature names through `names`. Returns the number of rows set.
std::size_t load_feature_embeddings(const std::filesystem::path& path, const NameRegistry& names,
                                    FeatureEmbeddingTable& table);

// Graph-to-graph convolution: phase 2 of every layer and the layers of the
// dense baselines. SAGE uses W13 [2in x out]; GAT uses W13, W14, W16
// [in x out] and w15 [2out]; GIN uses gin_mlp.
struct GraphConv {
  Phase2Backend backend = Phase2Backend::kSage;
  Parameter W13, W14, w15, W16;
  std::vector<DenseLayer> gin_mlp;

  static GraphConv create(const std::string& prefix, Phase2Backend backend, std::size_t in, std::size_t out,
                          std::uint64_t seed);
  std::vector<Parameter> parameters() const;
  GraphConv deep_copy() const;
};

// Messages flow src[k] -> dst[k]; edges sorted by (dst, src).
Tensor graph_conv(const Tensor& h, const GraphConv& conv, double slope, double gin_epsilon,
                  std::span<const std::size_t> src, std::span<const std::size_t> dst);

// Weight matrices act on row vectors: a state matrix H [n x d] maps to H * W.
struct GrafenneLayer {
  // Phase 1.
  Parameter W1, W2, w3, w4, W5, W6;
  std::vector<DenseLayer> combine1;
  // Phase 3.
  Parameter W7, W8, w9, w10, W11, W12;
  std::vector<DenseLayer> combine3;
  GraphConv conv;

  static GrafenneLayer create(const GrafenneConfig& config, int index);
  std::vector<Parameter> parameters() const;
};

// Node states at one layer; rows follow alt.graph_nodes() and
// alt.feature_nodes().
struct LayerState {
  Tensor graph;
  Tensor feature;
};

// Feature edges and graph adjacency used in one forward pass, in dense row
// coordinates and ascending neighbor order.
struct MessageIndex {
  struct FeatureEdges {
    std::vector<std::size_t> graph_row;
    std::vector<std::size_t> feature_row;
    std::vector<double> weight;
  };
  FeatureEdges phase1;
  FeatureEdges phase3;
  std::vector<std::size_t> nbr_src;
  std::vector<std::size_t> nbr_dst;

  static MessageIndex full(const AllotropicGraph& alt);
  // Caps from `config` applied per target node with fresh draws from `rng`.
  static MessageIndex sampled(const AllotropicGraph& alt, const GrafenneConfig& config, Rng& rng);
};

// Uniform sample without replacement of min(cap, size) entries, kept in
// input order. cap 0 returns the input.
std::vector<std::size_t> sample_caps(const std::vector<std::size_t>& items, std::size_t cap, Rng& rng);

LayerState init_states(const AllotropicGraph& alt, const FeatureEmbeddingTable& table);

// Each phase returns the refreshed rows of one node kind.
Tensor phase1(const LayerState& state, const GrafenneLayer& layer, const GrafenneConfig& config,
              const MessageIndex& index);
Tensor phase2(const Tensor& graph_h, const GrafenneLayer& layer, const GrafenneConfig& config,
              const MessageIndex& index);
Tensor phase3(const LayerState& state, const Tensor& graph_h, const GrafenneLayer& layer,
              const GrafenneConfig& config, const MessageIndex& index);

// Attention weights of phase 1 (per phase-1 edge) or phase 3, exposed for
// invariant checks.
Tensor phase1_attention(const LayerState& state, const GrafenneLayer& layer, const GrafenneConfig& config,
                        const MessageIndex& index);
Tensor phase3_attention(const LayerState& state, const Tensor& graph_h, const GrafenneLayer& layer,
                        const GrafenneConfig& config, const MessageIndex& index);

class GrafenneModel {
 public:
  GrafenneModel() = default;
  explicit GrafenneModel(GrafenneConfig config);

  const GrafenneConfig& config() const { return config_; }
  const std::vector<GrafenneLayer>& layers() const { return layers_; }
  FeatureEmbeddingTable& table() { return table_; }
  const FeatureEmbeddingTable& table() const { return table_; }

  // Layer weights only; independent of |V| and |F|.
  std::vector<Parameter> layer_parameters() const;
  // Layer weights followed by embedding rows.
  std::vector<Parameter> parameters() const;
  std::size_t parameter_count(bool include_embeddings) const;

  // L rounds of phase 1 -> 2 -> 3 from init_states. The table must cover
  // every feature node.
  LayerState forward(const AllotropicGraph& alt, const MessageIndex& index) const;
  LayerState forward(const AllotropicGraph& alt) const { return forward(alt, MessageIndex::full(alt)); }

  GrafenneModel deep_copy() const;

 private:
  GrafenneConfig config_;
  std::vector<GrafenneLayer> layers_;
  FeatureEmbeddingTable table_;
};

// Plain SAGE over every node of the allotropic graph, feature nodes acting as
// ordinary neighbors. Graph nodes start at zero, feature nodes at their
// embedding rows.
class VanillaAltModel {
 public:
  VanillaAltModel() = default;
  explicit VanillaAltModel(GrafenneConfig config);

  const GrafenneConfig& config() const { return config_; }
  FeatureEmbeddingTable& table() { return table_; }
  const FeatureEmbeddingTable& table() const { return table_; }
  const std::vector<Parameter>& weights() const { return weights_; }
  std::vector<Parameter> parameters() const;

  // Graph-node rows after L layers.
  Tensor forward(const AllotropicGraph& alt) const;

 private:
  GrafenneConfig config_;
  std::vector<Parameter> weights_;
  FeatureEmbeddingTable table_;
};

// Checkpoint: versioned text with config and named parameters; values are
// stored as hex floats so reloads are bit-exact.
void save_checkpoint(const std::filesystem::path& path, const GrafenneModel& model,
                     const std::vector<Parameter>& extra = {});
// Restores the model and fills `extra` (matched by name) when given.
GrafenneModel load_checkpoint(const std::filesystem::path& path, std::vector<Parameter>* extra = nullptr);

struct RecoveryConfig {
  std::size_t features = 4;  // d: length of each x_v
  std::size_t nodes = 256;
  std::size_t dim = 16;      // model width, at least `features`
  int layers = 2;
  int epochs = 3000;
  double lr = 0.01;
  std::uint64_t seed = 0;
};

struct RecoveryResult {
  double untrained_mse = 0.0;
  double trained_mse = 0.0;
  double target_variance = 0.0;
};

// Regresses x_v from the allotropic encoding with a phase-1-only stack and
// fixed one-hot feature embeddings. x_v entries are uniform in [0.1, 1].
RecoveryResult recovery_probe(const RecoveryConfig& config);

}  // namespace grafenne
