#pragma once

// Experiment plumbing shared by the command line tool, the acceptance
// runner and the Python module: flat key = value configs, dataset
// selection, methods, and the run / stream drivers.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "grafenne/continual.hpp"
#include "grafenne/imputation.hpp"
#include "grafenne/tasks.hpp"

namespace grafenne {

struct ExperimentConfig {
  // "toy" (bundled), "synthetic" (drift graph) or "files".
  std::string dataset = "toy";
  std::string name;  // dataset column of the results; empty = derived
  std::filesystem::path edges, features, labels;
  std::filesystem::path feature_embeddings;
  std::filesystem::path stream_file;

  Task task = Task::kNodeClassification;
  std::vector<std::string> methods{"grafenne"};
  std::vector<double> p{0.0};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  GrafenneConfig model;
  TrainConfig train;
  PropagationOptions fp;

  StreamConfig stream;
  DriftConfig drift;
  std::vector<Strategy> strategies{Strategy::kOracle, Strategy::kEwc, Strategy::kFineTune, Strategy::kReplay};
  double lambda = 100000.0;
  std::size_t u_size = 25;
  std::size_t replay_capacity = 25;
  int step_epochs = 100;
  double step_lr = 1e-3;

  double scale = 1.0;
  double shift = 0.0;

  std::filesystem::path out;
  std::uint64_t seed = 0;
  int workers = 1;
  bool timing = false;

  // Method names, p range, task/method compatibility, file presence.
  void validate() const;
  std::string dataset_name() const;
};

// Lines `key = value`; '#' starts a comment. Unknown keys, repeated keys and
// unparsable values are ConfigErrors naming the line.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);
// Every key with its default and meaning, for --help.
std::string config_reference();

const std::vector<std::string>& method_names();

// Small three-class graph with named nodes, features and classes.
HeteroGraph toy_graph();
HeteroGraph load_dataset(const ExperimentConfig& config);

struct CellResult {
  double value = 0.0;
  double seconds = 0.0;
};

// Seed of one repetition, mixed with the global seed.
std::uint64_t cell_seed(const ExperimentConfig& config, std::uint64_t seed);

// mask -> (impute) -> encoder -> train -> test metric for one
// (method, p, seed).
CellResult run_cell(const HeteroGraph& g, const ExperimentConfig& config, const std::string& method, double p,
                    std::uint64_t seed);

// Every (method, p, seed) cell, spread over config.workers threads. Rows
// come back in config order whatever the worker count.
std::vector<ResultRow> run_experiment(const HeteroGraph& g, const ExperimentConfig& config);

struct StreamInput {
  HeteroGraph graph;
  std::vector<StreamDelta> deltas;
};

StreamInput load_stream_input(const ExperimentConfig& config);
ContinualConfig continual_config(const ExperimentConfig& config);
std::vector<StreamResult> run_stream_experiment(const StreamInput& input, const ExperimentConfig& config);

}  // namespace grafenne
