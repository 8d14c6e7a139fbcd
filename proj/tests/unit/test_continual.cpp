#include <cmath>
#include <map>
#include <sstream>

#include "doctest.h"
#include "grafenne/continual.hpp"
#include "support/graphs.hpp"

using namespace grafenne;

namespace {

// Labels follow feature c on most nodes so there is something to learn.
HeteroGraph labeled_graph(std::uint64_t seed, std::size_t n = 60) {
  Rng rng(seed);
  HeteroGraph g;
  g.set_num_classes(3);
  for (NodeId v = 0; v < n; ++v) {
    const int c = static_cast<int>(rng.index(3));
    g.add_node(v, c);
    g.set_feature(v, static_cast<FeatureId>(c), 1.0);
    if (rng.bernoulli(0.3)) g.set_feature(v, 3 + static_cast<FeatureId>(rng.index(3)), 1.0);
  }
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = a + 1; b < n; ++b) {
      if (rng.bernoulli(g.label(a) == g.label(b) ? 0.08 : 0.01)) g.add_edge(a, b);
    }
  }
  return g;
}

ContinualConfig quick_config(std::uint64_t seed) {
  ContinualConfig c;
  c.model.dim = 8;
  c.model.seed = seed;
  c.train.epochs = 30;
  c.train.lr = 0.01;
  c.step_epochs = 10;
  c.step_lr = 0.01;
  c.seed = seed;
  return c;
}

std::vector<StreamDelta> busy_stream(const HeteroGraph& g, std::uint64_t seed) {
  StreamConfig s;
  s.steps = 4;
  s.p_n = 0.2;
  s.p_f_add = 0.2;
  s.p_f_del = 0.4;
  s.p_e_add = 0.02;
  s.p_e_del = 0.02;
  s.feature_universe = 10;  // features 6..9 are new to the model
  s.seed = seed;
  return generate_stream(g, s);
}

}  // namespace

TEST_CASE("strategy names") {
  for (auto s : {Strategy::kEwc, Strategy::kFineTune, Strategy::kReplay, Strategy::kOracle}) {
    CHECK(parse_strategy(strategy_name(s)) == s);
  }
  CHECK_THROWS_AS(parse_strategy("EWC"), ConfigError);
}

TEST_CASE("importance of simple losses") {
  std::vector<Parameter> params{Parameter("w", Tensor::scalar(3.0, true)), Parameter("unused", Tensor::vector({1, 2}, true))};
  const auto omega = compute_importance(params, 1, [&](std::size_t) {
    return ops::mul(params[0].tensor(), params[0].tensor());
  });
  REQUIRE(omega.size() == 3);
  CHECK(omega[0] == 36.0);
  CHECK(omega[1] == 0.0);
  CHECK(omega[2] == 0.0);

  // Mean over items of squared per-item gradients: d(k w)/dw = k.
  const auto two = compute_importance(params, 2, [&](std::size_t i) {
    return ops::scale(params[0].tensor(), i == 0 ? 1.0 : 3.0);
  });
  CHECK(two[0] == 5.0);

  std::ostringstream warn;
  const auto none = compute_importance(params, 0, [&](std::size_t) { return Tensor(); }, &warn);
  CHECK(none == std::vector<double>(3, 0.0));
  CHECK(warn.str().find("importance is 0") != std::string::npos);
}

TEST_CASE("importance matches per-node softmax regression gradients") {
  // Five nodes, three inputs, three classes, loss CE(x_v W + b, y_v).
  const std::size_t n = 5, in = 3, k = 3;
  Rng rng(11);
  std::vector<double> x(n * in), w(in * k), b(k);
  for (auto& v : x) v = rng.uniform(-1, 1);
  for (auto& v : w) v = rng.uniform(-1, 1);
  for (auto& v : b) v = rng.uniform(-0.5, 0.5);
  const int y[] = {0, 2, 1, 1, 0};

  std::vector<Parameter> params{Parameter("W", Tensor::from({in, k}, w, true)), Parameter("b", Tensor::vector(b, true))};
  const Tensor X = Tensor::from({n, in}, x);
  const auto omega = compute_importance(params, n, [&](std::size_t v) {
    const std::size_t r[] = {v};
    const int l[] = {y[v]};
    return ops::cross_entropy(
        ops::add_bias(ops::matmul(ops::gather_rows(X, r), params[0].tensor()), params[1].tensor()), l,
        Reduction::kSum);
  });

  // dL/dz = softmax(z) - onehot(y); dL/dW = x^T dz; dL/db = dz.
  std::vector<double> expected(in * k + k, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    std::vector<double> z(k);
    for (std::size_t c = 0; c < k; ++c) {
      z[c] = b[c];
      for (std::size_t i = 0; i < in; ++i) z[c] += x[v * in + i] * w[i * k + c];
    }
    double norm = 0;
    for (double zc : z) norm += std::exp(zc);
    for (std::size_t c = 0; c < k; ++c) {
      const double dz = std::exp(z[c]) / norm - (static_cast<int>(c) == y[v] ? 1.0 : 0.0);
      for (std::size_t i = 0; i < in; ++i) expected[i * k + c] += std::pow(x[v * in + i] * dz, 2) / n;
      expected[in * k + c] += dz * dz / n;
    }
  }
  REQUIRE(omega.size() == expected.size());
  for (std::size_t i = 0; i < omega.size(); ++i) {
    CHECK(std::abs(omega[i] - expected[i]) <= 1e-8 * std::max(std::abs(expected[i]), 1e-12));
  }
}

TEST_CASE("importance on the full model is repeatable and nonnegative") {
  const auto g = labeled_graph(3, 20);
  GrafenneConfig mc;
  mc.dim = 4;
  GrafenneEncoder enc{GrafenneModel(mc)};
  enc.bind(g);
  const auto head = ClassifierHead::create(4, 3, 1);
  auto params = enc.parameters();
  for (const auto& p : head.parameters()) params.push_back(p);
  Rng unused(0);
  auto loss = [&](std::size_t v) {
    const std::size_t r[] = {v};
    const int l[] = {g.label(static_cast<NodeId>(v))};
    return ops::cross_entropy(ops::gather_rows(classify_head(enc.encode(false, unused), head), r), l, Reduction::kSum);
  };
  const auto a = compute_importance(params, 5, loss);
  const auto b = compute_importance(params, 5, loss);
  CHECK(a == b);
  double total = 0;
  for (double w : a) {
    CHECK(w >= 0.0);
    total += w;
  }
  CHECK(total > 0.0);
  for (const auto& p : params) CHECK_FALSE(p.tensor().has_grad());
}

TEST_CASE("continual loss") {
  std::vector<Parameter> params{Parameter("w", Tensor::scalar(1.5, true))};
  const Tensor task = Tensor::scalar(0.75);

  auto ewc = EwcState::capture(params, {1.0}, 2.0);
  params[0].tensor().mutable_values()[0] = 2.0;
  CHECK(continual_loss(task, params, ewc).item() == 0.75 + 0.25);

  auto same = EwcState::capture(params, {1.0}, 2.0);
  CHECK(continual_loss(task, params, same).item() == 0.75);

  auto off = EwcState::capture(params, {1.0}, 0.0);
  params[0].tensor().mutable_values()[0] = 7.0;
  CHECK(continual_loss(task, params, off).item() == 0.75);

  // d/dw lambda/2 * omega * (w - prev)^2 = lambda * omega * (w - prev).
  auto ewc3 = EwcState::capture(params, {0.5}, 4.0);
  params[0].tensor().mutable_values()[0] = 8.0;
  params[0].tensor().zero_grad();
  backward(continual_loss(task, params, ewc3));
  CHECK(params[0].tensor().grad()[0] == doctest::Approx(4.0 * 0.5 * 1.0));

  // Unknown parameters carry no penalty; a resized one is an error.
  std::vector<Parameter> more{params[0], Parameter("new", Tensor::vector({5, 5}, true))};
  CHECK(continual_loss(task, more, ewc3).item() == doctest::Approx(0.75 + 2.0 * 0.5));
  std::vector<Parameter> drift{Parameter("w", Tensor::vector({1, 2}, true))};
  CHECK_THROWS_AS(continual_loss(task, drift, ewc3), DimensionError);
  CHECK_THROWS_AS(EwcState::capture(params, {1.0, 2.0}, 1.0), DimensionError);
}

TEST_CASE("sample_U") {
  const std::vector<NodeId> train{2, 4, 6, 8, 10, 12};
  CHECK(sample_U(train, 0, 1).empty());
  CHECK(sample_U(train, 6, 1) == train);
  CHECK(sample_U(train, 3, 5) == sample_U(train, 3, 5));
  CHECK_THROWS_AS(sample_U(train, 7, 1), ConfigError);

  std::map<NodeId, int> counts;
  const int draws = 3000;
  for (int s = 0; s < draws; ++s) {
    const auto u = sample_U(train, 2, static_cast<std::uint64_t>(s));
    CHECK(u.size() == 2);
    CHECK(u[0] < u[1]);
    for (auto v : u) ++counts[v];
  }
  const double p = 2.0 / 6.0, sd = std::sqrt(draws * p * (1 - p));
  for (auto v : train) CHECK(std::abs(counts[v] - draws * p) < 3 * sd);
}

TEST_CASE("replay buffer") {
  ReplayBuffer zero(0, 1);
  for (NodeId v = 0; v < 10; ++v) zero.offer(v, 0);
  CHECK(zero.size() == 0);

  ReplayBuffer small(3, 1);
  small.offer(4, 1);
  small.offer(4, 2);
  CHECK(small.size() == 1);
  CHECK(small.offered() == 1);
  CHECK(small.items().front() == std::pair<NodeId, int>{4, 1});

  // Reservoir: each of 10 offered nodes stays with probability 3/10.
  std::map<NodeId, int> kept;
  const int draws = 4000;
  for (int s = 0; s < draws; ++s) {
    ReplayBuffer b(3, static_cast<std::uint64_t>(s));
    for (NodeId v = 0; v < 10; ++v) b.offer(v, static_cast<int>(v));
    CHECK(b.size() == 3);
    for (auto [v, label] : b.items()) {
      CHECK(label == static_cast<int>(v));
      ++kept[v];
    }
  }
  const double p = 0.3, sd = std::sqrt(draws * p * (1 - p));
  for (NodeId v = 0; v < 10; ++v) CHECK(std::abs(kept[v] - draws * p) < 3 * sd);
}

TEST_CASE("stream split keeps nodes added later") {
  const auto g = labeled_graph(4, 30);
  StreamDelta d;
  d.timestamp = 2;
  d.added_nodes = {{100, 1}, {101, kNoLabel}};
  const StreamDelta ds[] = {d};
  const Split s = stream_split(g, ds, {}, 9);
  CHECK(s.train.size() + s.val.size() + s.test.size() == 31);
  const bool placed = std::count(s.train.begin(), s.train.end(), 100) + std::count(s.val.begin(), s.val.end(), 100) +
                      std::count(s.test.begin(), s.test.end(), 100);
  CHECK(placed);
}

TEST_CASE("empty deltas give flat traces") {
  const auto g = labeled_graph(5);
  std::vector<StreamDelta> deltas(3);
  for (int i = 0; i < 3; ++i) deltas[static_cast<std::size_t>(i)].timestamp = i + 2;
  const Strategy all[] = {Strategy::kEwc, Strategy::kFineTune, Strategy::kReplay, Strategy::kOracle};
  const auto results = run_streams(g, deltas, all, quick_config(5));
  REQUIRE(results.size() == 4);
  for (const auto& r : results) {
    REQUIRE(r.steps.size() == 4);
    for (std::size_t t = 1; t < 4; ++t) {
      CHECK(r.steps[t].t == static_cast<int>(t) + 1);
      CHECK(r.steps[t].accuracy == r.steps[0].accuracy);
      CHECK(r.steps[t].params_changed == 0);
      CHECK(r.steps[t].fingerprint == r.steps[0].fingerprint);
    }
  }
}

TEST_CASE("EWC with lambda 0 and ER with capacity 0 follow fine-tuning exactly") {
  const auto g = labeled_graph(6);
  const auto deltas = busy_stream(g, 6);
  auto cfg = quick_config(6);
  const auto ft = run_stream(g, deltas, Strategy::kFineTune, cfg);

  auto zero = cfg;
  zero.lambda = 0.0;
  const auto ewc0 = run_stream(g, deltas, Strategy::kEwc, zero);
  auto empty = cfg;
  empty.replay_capacity = 0;
  const auto er0 = run_stream(g, deltas, Strategy::kReplay, empty);

  REQUIRE(ft.steps.size() == deltas.size() + 1);
  bool trained = false;
  for (std::size_t t = 0; t < ft.steps.size(); ++t) {
    CHECK(ewc0.steps[t].fingerprint == ft.steps[t].fingerprint);
    CHECK(er0.steps[t].fingerprint == ft.steps[t].fingerprint);
    CHECK(ewc0.steps[t].accuracy == ft.steps[t].accuracy);
    trained = trained || ft.steps[t].trained_nodes > 0;
  }
  CHECK(trained);

  // With the default penalty EWC moves differently.
  const auto ewc = run_stream(g, deltas, Strategy::kEwc, cfg);
  CHECK(ewc.steps.back().fingerprint != ft.steps.back().fingerprint);
}

TEST_CASE("continual state holds one snapshot of the current parameters") {
  const auto g = labeled_graph(7);
  const auto deltas = busy_stream(g, 7);
  const auto r = run_stream(g, deltas, Strategy::kEwc, quick_config(7));
  bool grew = false;
  for (std::size_t t = 1; t < r.steps.size(); ++t) {
    const auto& s = r.steps[t];
    CHECK(s.state_entries <= s.parameter_entries);
    if (s.trained_nodes > 0) CHECK(s.state_entries == s.parameter_entries);
    grew = grew || s.parameter_entries > r.steps[0].parameter_entries;
  }
  // New features arrived and extended the embedding table.
  CHECK(grew);
}

TEST_CASE("oracle equals training from scratch on the snapshot") {
  const auto g = labeled_graph(8);
  const auto deltas = busy_stream(g, 8);
  const auto cfg = quick_config(8);
  const auto r = run_stream(g, deltas, Strategy::kOracle, cfg);

  HeteroGraph gt = g;
  for (const auto& d : deltas) gt = apply_delta(gt, d).graph;
  const Split all = stream_split(g, deltas, cfg.fractions, cfg.seed);
  auto keep = [&](const std::vector<NodeId>& ids) {
    std::vector<NodeId> out;
    for (auto v : ids) {
      if (gt.has_node(v)) out.push_back(v);
    }
    return out;
  };
  const Split s{keep(all.train), keep(all.val), keep(all.test)};
  GrafenneEncoder enc{GrafenneModel(cfg.model)};
  auto head = ClassifierHead::create(cfg.model.dim, 3, derive_seed(cfg.seed, "head"));
  train_node_classifier(enc, head, gt, s, cfg.train, cfg.seed);
  NoGradGuard guard;
  Rng unused(0);
  const auto logits = classify_head(enc.encode(false, unused), head);
  std::vector<int> y;
  for (auto v : s.test) y.push_back(gt.label(v));
  const double acc = accuracy(argmax_rows(ops::gather_rows(logits, rows_for(gt, s.test))), y);
  CHECK(r.steps.back().accuracy == acc);
}

TEST_CASE("stream runs are deterministic and write CSV") {
  const auto g = labeled_graph(9);
  const auto deltas = busy_stream(g, 9);
  const Strategy both[] = {Strategy::kReplay, Strategy::kEwc};
  const auto a = run_streams(g, deltas, both, quick_config(9));
  const auto b = run_streams(g, deltas, both, quick_config(9));
  std::ostringstream sa, sb;
  write_stream_header(sa);
  write_stream_header(sb);
  for (const auto& r : a) write_stream_rows(sa, r);
  for (const auto& r : b) write_stream_rows(sb, r);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("strategy,t,accuracy,seconds,params_changed\ner,1,", 0) == 0);
  for (std::size_t t = 0; t < a[0].steps.size(); ++t) CHECK(a[0].steps[t].fingerprint == b[0].steps[t].fingerprint);
  // A stream run alone matches the same strategy run alongside others.
  const auto solo = run_stream(g, deltas, Strategy::kEwc, quick_config(9));
  CHECK(solo.steps.back().fingerprint == a[1].steps.back().fingerprint);
}
