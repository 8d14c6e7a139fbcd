#pragma once

// Training over a stream of graph snapshots: elastic weight consolidation
// and the fine-tune, replay and retrain-from-scratch baselines.

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "grafenne/stream.hpp"
#include "grafenne/tasks.hpp"

namespace grafenne {

enum class Strategy { kEwc, kFineTune, kReplay, kOracle };

const char* strategy_name(Strategy s);
Strategy parse_strategy(const std::string& name);

// Previous parameters and their importance, flattened in parameter order.
// Replaced wholesale at every timestamp; nothing older is kept.
struct EwcState {
  double lambda = 100000.0;
  std::vector<NodeId> U;
  std::vector<std::string> names;
  std::vector<std::size_t> offsets;  // names.size() + 1 entries
  std::vector<double> previous;
  std::vector<double> omega;

  // Snapshot of `params` with importance `omega` (one entry per parameter
  // entry, same order).
  static EwcState capture(std::span<const Parameter> params, std::vector<double> omega, double lambda);
  std::size_t entries() const { return previous.size(); }
  // Index into names, or names.size() when absent.
  std::size_t find(const std::string& name) const;
};

// Omega_w = mean over `count` items of (dL_i/dw)^2, one backward pass per
// item. `item_loss(i)` builds the loss of item i. With no items every entry
// is 0 and a warning goes to `warnings`.
std::vector<double> compute_importance(std::vector<Parameter>& params, std::size_t count,
                                       const std::function<Tensor(std::size_t)>& item_loss,
                                       std::ostream* warnings = nullptr);

// task_loss + sum_w lambda/2 * Omega_w * (theta_w - previous_w)^2 over the
// parameters named in `ewc`. Parameters the state does not know add nothing.
Tensor continual_loss(const Tensor& task_loss, std::span<const Parameter> params, const EwcState& ewc);

// Uniform sample without replacement, returned in ascending id order.
std::vector<NodeId> sample_U(std::span<const NodeId> train_nodes, std::size_t size, std::uint64_t seed);

// Reservoir over distinct training nodes; a node offered twice counts once.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {}
  void offer(NodeId node, int label);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t offered() const { return seen_.size(); }
  // Stored (node, label) pairs in ascending node id.
  std::vector<std::pair<NodeId, int>> items() const;

 private:
  std::size_t capacity_;
  Rng rng_;
  std::vector<std::pair<NodeId, int>> items_;
  std::set<NodeId> seen_;
};

struct ContinualConfig {
  GrafenneConfig model;
  // Training on G_1 and every retrain from scratch.
  TrainConfig train;
  // Incremental updates: fixed epoch count with a fresh Adam each timestamp.
  int step_epochs = 100;
  double step_lr = 1e-3;
  double lambda = 100000.0;
  std::size_t u_size = 25;
  std::size_t replay_capacity = 25;
  SplitFractions fractions;
  std::uint64_t seed = 0;
  // Wall time per timestamp in `seconds`; off keeps output deterministic.
  bool timing = false;
};

struct StepRecord {
  int t = 1;
  double accuracy = 0.0;  // over the test nodes present at t
  double seconds = 0.0;
  std::size_t params_changed = 0;  // entries that differ from t-1, new ones included
  std::size_t trained_nodes = 0;   // nodes in the loss at t
  std::size_t state_entries = 0;   // EwcState size after t
  std::size_t parameter_entries = 0;
  std::uint64_t fingerprint = 0;   // hash of every parameter bit
};

struct StreamResult {
  Strategy strategy = Strategy::kEwc;
  std::vector<StepRecord> steps;  // t = 1 .. deltas.size() + 1
};

// Trains on g1 once, then follows each strategy through the deltas on its
// own copy of that model. Results come back in the order of `strategies`.
std::vector<StreamResult> run_streams(const HeteroGraph& g1, std::span<const StreamDelta> deltas,
                                      std::span<const Strategy> strategies, const ContinualConfig& config,
                                      std::ostream* warnings = nullptr);
StreamResult run_stream(const HeteroGraph& g1, std::span<const StreamDelta> deltas, Strategy strategy,
                        const ContinualConfig& config, std::ostream* warnings = nullptr);

// Split over every labeled node of g1 and of later node additions, so a
// node keeps its role for the whole stream.
Split stream_split(const HeteroGraph& g1, std::span<const StreamDelta> deltas, const SplitFractions& fractions,
                   std::uint64_t seed);

// Synthetic homophilous graph whose classes are told apart by disjoint
// feature groups, plus a stream over it. Streams add features from the
// whole universe, including `unseen_features` ids no node has at t = 1.
struct DriftConfig {
  std::size_t nodes = 500;
  int classes = 4;
  std::size_t features_per_class = 8;
  std::size_t noise_features = 32;
  std::size_t unseen_features = 16;
  std::size_t informative_per_node = 3;
  std::size_t noise_per_node = 4;
  double p_in = 0.02;
  double p_out = 0.003;
  // Share of nodes whose label is redrawn uniformly after features are set.
  double label_noise = 0.05;
  StreamConfig stream;
  std::uint64_t seed = 0;
};

struct DriftStream {
  HeteroGraph graph;
  std::vector<StreamDelta> deltas;
};

DriftStream make_drift_stream(const DriftConfig& config);

void write_stream_header(std::ostream& out);
void write_stream_rows(std::ostream& out, const StreamResult& result);

}  // namespace grafenne
