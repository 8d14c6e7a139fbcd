#pragma once

// Task heads, metrics and the full-batch training protocol for node
// classification and link prediction.

#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "grafenne/dataset.hpp"
#include "grafenne/imputation.hpp"
#include "grafenne/model.hpp"
#include "grafenne/random.hpp"

namespace grafenne {

enum class Task { kNodeClassification, kLinkPrediction };

const char* task_name(Task t);
Task parse_task(const std::string& name);

// Anything that maps a graph to one representation row per node, rows in
// ascending node id.
class Encoder {
 public:
  virtual ~Encoder() = default;
  // Prepares indices for `g`. Must be called before encode().
  virtual void bind(const HeteroGraph& g) = 0;
  // `training` enables neighbor sampling where the encoder supports it.
  virtual Tensor encode(bool training, Rng& rng) = 0;
  virtual std::vector<Parameter> parameters() const = 0;
  virtual std::size_t dim() const = 0;
};

class GrafenneEncoder : public Encoder {
 public:
  explicit GrafenneEncoder(GrafenneModel model) : model_(std::move(model)) {}
  void bind(const HeteroGraph& g) override;
  Tensor encode(bool training, Rng& rng) override;
  std::vector<Parameter> parameters() const override { return model_.parameters(); }
  std::size_t dim() const override { return model_.config().dim; }

  GrafenneModel& model() { return model_; }
  const GrafenneModel& model() const { return model_; }
  const AllotropicGraph& graph() const { return alt_; }

 private:
  GrafenneModel model_;
  AllotropicGraph alt_;
  MessageIndex full_;
};

// Standard GNN over a fixed dense feature matrix whose rows match the bound
// graph's nodes.
class DenseEncoder : public Encoder {
 public:
  DenseEncoder(DenseGnn model, DenseFeatures features);
  void bind(const HeteroGraph& g) override;
  Tensor encode(bool training, Rng& rng) override;
  std::vector<Parameter> parameters() const override { return model_.parameters(); }
  std::size_t dim() const override { return model_.config().dim; }

 private:
  DenseGnn model_;
  DenseFeatures features_;
  Tensor x_;
  Adjacency adj_;
};

class VanillaAltEncoder : public Encoder {
 public:
  explicit VanillaAltEncoder(VanillaAltModel model) : model_(std::move(model)) {}
  void bind(const HeteroGraph& g) override;
  Tensor encode(bool training, Rng& rng) override;
  std::vector<Parameter> parameters() const override { return model_.parameters(); }
  std::size_t dim() const override { return model_.config().dim; }

 private:
  VanillaAltModel model_;
  AllotropicGraph alt_;
};

// Linear map d -> C.
struct ClassifierHead {
  DenseLayer layer;
  static ClassifierHead create(std::size_t dim, std::size_t classes, std::uint64_t seed);
  std::vector<Parameter> parameters() const { return {layer.weight, layer.bias}; }
};

Tensor classify_head(const Tensor& h, const ClassifierHead& head);

// Dot-product decoder: logit = h_u . h_v per pair of rows.
Tensor link_score(const Tensor& h, std::span<const std::size_t> u, std::span<const std::size_t> v);
double link_score(std::span<const double> hu, std::span<const double> hv);

// `count` distinct uniform non-edges of `g` (unordered, canonical).
std::vector<Edge> negative_sample(const HeteroGraph& g, std::size_t count, std::uint64_t seed,
                                  std::span<const Edge> exclude = {});

double accuracy(std::span<const int> predictions, std::span<const int> labels);
std::vector<int> argmax_rows(const Tensor& logits);
// Mann-Whitney AUC with average ranks, so ties count one half.
double auc_roc(std::span<const double> scores, std::span<const int> targets);

struct TrainConfig {
  Task task = Task::kNodeClassification;
  int epochs = 1000;
  double lr = 1e-4;
  // Stop after this many epochs without a new best validation loss; 0 never
  // stops early.
  int patience = 200;
  // Negatives per positive edge in link prediction.
  std::size_t negative_ratio = 1;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  SplitFractions fractions;
};

struct TrainOutcome {
  double test_metric = 0.0;
  double best_val_loss = 0.0;
  int best_epoch = 0;  // 0 = the untrained state
  int epochs_run = 0;
  std::vector<double> val_losses;  // index 0 is the untrained state
};

// Node ids -> rows of g.node_ids().
std::vector<std::size_t> rows_for(const HeteroGraph& g, std::span<const NodeId> ids);

// Full-batch Adam on the train nodes; the parameters with the lowest
// validation loss are restored before the test accuracy is taken.
TrainOutcome train_node_classifier(Encoder& encoder, const HeteroGraph& g, const Split& split,
                                   const TrainConfig& config, std::uint64_t seed);
// Same, training the given head instead of a fresh one.
TrainOutcome train_node_classifier(Encoder& encoder, ClassifierHead& head, const HeteroGraph& g, const Split& split,
                                   const TrainConfig& config, std::uint64_t seed);
// Classes a head for `g` needs: the declared count or the largest label + 1.
std::size_t class_count(const HeteroGraph& g);

struct EdgeSplit {
  std::vector<Edge> train_pos, val_pos, test_pos;
  std::vector<Edge> train_neg, val_neg, test_neg;
};

// Shuffled positive edges cut by `fractions`; each part gets
// ratio x as many negatives, all distinct non-edges of `g`.
EdgeSplit split_edges(const HeteroGraph& g, const SplitFractions& fractions, std::size_t negative_ratio,
                      std::uint64_t seed);

HeteroGraph without_edges(const HeteroGraph& g, std::span<const Edge> edges);

// Trains on the graph without val/test positives; reports test AUC.
TrainOutcome train_link_predictor(Encoder& encoder, const HeteroGraph& g, const EdgeSplit& split,
                                  const TrainConfig& config, std::uint64_t seed);

struct RunResult {
  std::vector<std::uint64_t> seeds;
  std::vector<double> values;
  std::vector<double> seconds;

  double mean() const;
  // Population standard deviation.
  double stddev() const;
  double total_seconds() const;
};

// "mean ± std" with std below 0.01 shown as 0.
std::string display(const RunResult& r, double scale = 1.0);

struct ResultRow {
  std::string dataset, method, task;
  double p = 0.0;
  std::string seed;
  std::string metric;
  double value = 0.0;
  double seconds = 0.0;
};

// One row per seed plus `mean` and `std` rows.
std::vector<ResultRow> result_rows(const std::string& dataset, const std::string& method, Task task, double p,
                                   const std::string& metric, const RunResult& r);
void write_result_header(std::ostream& out);
void write_result_rows(std::ostream& out, std::span<const ResultRow> rows);

}  // namespace grafenne
