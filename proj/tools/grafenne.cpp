// Command line front end: run, stream, transform, translate.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>

#include "CLI11.hpp"
#include "grafenne/allotropic.hpp"
#include "grafenne/experiment.hpp"
#include "grafenne/io.hpp"

namespace fs = std::filesystem;
using namespace grafenne;

namespace {

constexpr int kConfigExit = 2;
constexpr int kDataExit = 3;

struct Flags {
  std::string config;
  std::string out;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig resolve(const Flags& flags) {
  ExperimentConfig c = flags.config.empty() ? ExperimentConfig{} : load_config(flags.config);
  if (!flags.out.empty()) c.out = flags.out;
  if (flags.workers) c.workers = *flags.workers;
  if (flags.seed) c.seed = *flags.seed;
  c.validate();
  return c;
}

// Inputs are never written: the output must not be one of them.
void check_not_input(const ExperimentConfig& c, const fs::path& out) {
  for (const auto& in : {c.edges, c.features, c.labels, c.stream_file, c.feature_embeddings}) {
    if (in.empty()) continue;
    std::error_code ec;
    if (fs::equivalent(in, out, ec)) throw ConfigError("output " + out.string() + " would overwrite input " + in.string());
  }
}

// Whole file or nothing: write beside the target, then rename over it.
// Devices and pipes (/dev/stdout, /dev/null) are written in place.
void replace_file(const fs::path& path, const std::function<void(const fs::path&)>& write) {
  std::error_code ec;
  if (fs::exists(path, ec) && !fs::is_regular_file(path, ec)) {
    write(path);
    return;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp" + std::to_string(::getpid());
  try {
    write(tmp);
    fs::rename(tmp, path);
  } catch (...) {
    fs::remove(tmp, ec);
    throw;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw DataError("cannot write " + path.string());
}

void emit(const ExperimentConfig& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
    return;
  }
  check_not_input(c, c.out);
  replace_file(c.out, [&](const fs::path& p) { write_text(p, text); });
}

int cmd_run(const Flags& flags) {
  const ExperimentConfig c = resolve(flags);
  const HeteroGraph g = load_dataset(c);
  std::ostringstream csv;
  write_result_header(csv);
  write_result_rows(csv, run_experiment(g, c));
  emit(c, csv.str());
  return 0;
}

int cmd_stream(const Flags& flags) {
  const ExperimentConfig c = resolve(flags);
  const StreamInput input = load_stream_input(c);
  std::ostringstream csv;
  write_stream_header(csv);
  for (const auto& r : run_stream_experiment(input, c)) write_stream_rows(csv, r);
  emit(c, csv.str());
  return 0;
}

int cmd_transform(const Flags& flags) {
  const ExperimentConfig c = resolve(flags);
  if (c.out.empty()) throw ConfigError("transform needs --out or out in the config");
  check_not_input(c, c.out);
  const HeteroGraph g = load_dataset(c);
  const AllotropicGraph alt = to_allotropic(g);
  replace_file(c.out, [&](const fs::path& p) { write_allotropic(p, alt, g); });
  return 0;
}

int cmd_translate(const Flags& flags) {
  const ExperimentConfig c = resolve(flags);
  if (c.out.empty()) throw ConfigError("translate needs --out (a directory) or out in the config");
  const HeteroGraph g = translate_features(load_dataset(c), c.scale, c.shift);
  const GraphFiles files{c.out / "edges.tsv", c.out / "features.tsv", c.out / "labels.tsv"};
  for (const auto& p : {files.edges, files.features, files.labels}) check_not_input(c, p);
  fs::create_directories(c.out);
  write_graph(g, files);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph neural networks over nodes with heterogeneous, changing feature sets."};
  app.require_subcommand(1);
  app.footer("\n" + config_reference() +
             "\nExit codes: 0 success, 2 config error, 3 data error.");

  Flags flags;
  auto add_flags = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "key = value config file");
    sub->add_option("--out", flags.out, "output path (stdout for run/stream when absent)");
    sub->add_option("--workers", flags.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", flags.seed, "global seed");
  };
  auto* run = app.add_subcommand("run", "static experiments, results CSV");
  auto* stream = app.add_subcommand("stream", "continual learning over a stream, per-timestamp CSV");
  auto* transform = app.add_subcommand("transform", "write the feature-node graph of a dataset");
  auto* translate = app.add_subcommand("translate", "write a copy of a dataset with values scale*x + shift");
  for (auto* sub : {run, stream, transform, translate}) add_flags(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigExit;
  }

  try {
    if (run->parsed()) return cmd_run(flags);
    if (stream->parsed()) return cmd_stream(flags);
    if (transform->parsed()) return cmd_transform(flags);
    return cmd_translate(flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
