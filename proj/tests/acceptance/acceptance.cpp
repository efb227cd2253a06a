// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <mpfr.h>
#include <spdlog/spdlog.h>

#include "fixtures.hpp"
#include "kcgn/checkpoint.hpp"
#include "kcgn/config.hpp"
#include "kcgn/gradcheck.hpp"
#include "kcgn/graphs.hpp"
#include "kcgn/temporal.hpp"

using namespace kcgn;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  const TrainingSet data = testing::canonical_training_set();
  const TrainConfig cfg = testing::canonical_config();
  const KcgnModel model = build_model(data, cfg);
  ModelParams params = testing::canonical_params(model.shape());

  const PositiveIndex index(data.split.train, 5, 8, 2);
  Rng rng(7);
  const auto triples = sample_bpr_triples(index, 6, rng);
  const auto& uc = model.social().components();
  const auto& ic = model.item_graph().components();
  const MiPairs up = make_mi_pairs(uc, corruption_sources(uc, rng));
  const MiPairs ip = make_mi_pairs(ic, corruption_sources(ic, rng));

  double bpr = 0, reg = 0, mi = 0;
  const LossBuilder loss = [&](Tape& tape, std::span<Tensor* const>) {
    const ParamVars v = bind_params(tape, params);
    const LossBreakdown l =
        total_loss(tape, triples, model.forward(v), v, cfg.l2, &up, &ip, cfg.mi_user, cfg.mi_item);
    bpr = l.bpr.value().item();
    reg = l.regularizer.value().item();
    mi = l.mi.value().item();
    return l.total;
  };
  const auto tensors = params.tensors();
  const GradCheckResult r = gradient_check(loss, tensors, 1e-5, 1e-4);
  const double secs = seconds_since(t0);
  const bool active = bpr > 0 && reg > 0 && mi > 0;
  return {r.passed && active && secs < 60.0,
          fmt::format("max rel err {:.3e} over {} entries (bpr {:.4f}, reg {:.4f}, mi {:.4f}), "
                      "{:.2f} s",
                      r.max_relative_error, r.checked_entries, bpr, reg, mi, secs)};
}

Outcome normalization_oracle() {
  Rng rng(2024);
  double worst = 0.0;
  for (int g = 0; g < 200; ++g) {
    const std::size_t n = 1 + rng.below(30);
    const double density = rng.uniform(0.0, 0.4);
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.uniform() < density) {
          edges.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
          a[i][j] = a[j][i] = 1.0;
        }
    for (std::size_t i = 0; i < n; ++i) a[i][i] = 1.0;
    std::vector<double> deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) deg[i] += a[i][j];
    const Tensor got = RelationGraph::from_edges(n, edges).normalized().to_dense();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double want = a[i][j] / std::sqrt(deg[i] * deg[j]);
        worst = std::max(worst, std::abs(got(i, j) - want));
      }
  }
  const std::vector<std::pair<std::uint32_t, std::uint32_t>> tri = {{0, 1}, {1, 2}, {0, 2}};
  const Tensor t = RelationGraph::from_edges(3, tri).normalized().to_dense();
  double tri_err = 0.0;
  for (double v : t.values()) tri_err = std::max(tri_err, std::abs(v - 1.0 / 3.0));
  return {worst <= 1e-12 && tri_err <= 1e-15,
          fmt::format("max dense diff {:.3e} over 200 graphs, triangle diff {:.3e}", worst,
                      tri_err)};
}

/// sin/cos(slot / 10000^(e/d)) in 256-bit arithmetic.
double literal_oracle(std::int64_t slot, std::size_t e, std::size_t d) {
  mpfr_t base, expo, angle, out;
  mpfr_inits2(256, base, expo, angle, out, static_cast<mpfr_ptr>(nullptr));
  mpfr_set_ui(base, 10000, MPFR_RNDN);
  mpfr_set_ui(expo, static_cast<unsigned long>(e), MPFR_RNDN);
  mpfr_div_ui(expo, expo, static_cast<unsigned long>(d), MPFR_RNDN);
  mpfr_pow(base, base, expo, MPFR_RNDN);
  mpfr_set_si(angle, static_cast<long>(slot), MPFR_RNDN);
  mpfr_div(angle, angle, base, MPFR_RNDN);
  if (e % 2 == 0) mpfr_sin(out, angle, MPFR_RNDN);
  else mpfr_cos(out, angle, MPFR_RNDN);
  const double v = mpfr_get_d(out, MPFR_RNDN);
  mpfr_clears(base, expo, angle, out, static_cast<mpfr_ptr>(nullptr));
  return v;
}

Outcome temporal_encoding() {
  TimeCodec codec;
  codec.dim = 16;
  bool zero_ok = true;
  const auto e0 = codec.embedding(0);
  for (std::size_t e = 0; e < e0.size(); ++e) zero_ok &= e0[e] == (e % 2 == 0 ? 0.0 : 1.0);

  bool bounded = true;
  for (std::size_t dim : {2u, 16u, 64u}) {
    codec.dim = dim;
    for (std::int64_t s = 0; s <= 10000; ++s)
      for (double v : codec.embedding(s)) bounded &= v >= -1.0 && v <= 1.0;
  }

  codec.dim = 16;
  Rng rng(31);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto slot = static_cast<std::int64_t>(rng.below(10001));
    const std::size_t e = rng.below(codec.dim);
    worst = std::max(worst, std::abs(codec.embedding(slot)[e] - literal_oracle(slot, e, codec.dim)));
  }
  return {zero_ok && bounded && worst <= 1e-12,
          fmt::format("slot 0 pattern {}, range {}, max oracle diff {:.3e}",
                      zero_ok ? "exact" : "wrong", bounded ? "ok" : "violated", worst)};
}

Outcome metric_oracles() {
  bool hand = true;
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-15; };
  const std::vector<std::size_t> r1{1}, r3{3}, r11{11};
  const auto m1 = hr_ndcg_at_n(r1, 10), m3 = hr_ndcg_at_n(r3, 10), m11 = hr_ndcg_at_n(r11, 10);
  hand &= near(m1.hit_ratio, 1) && near(m1.ndcg, 1);
  hand &= near(m3.hit_ratio, 1) && near(m3.ndcg, 0.5);
  hand &= m11.hit_ratio == 0 && m11.ndcg == 0;

  double worst = 0.0;
  for (std::uint64_t inst = 0; inst < 10; ++inst) {
    RandomOptions ro;
    ro.users = 50;
    ro.items = 150;
    ro.interactions_per_user = 5;
    ro.seed = 100 + inst;
    const SyntheticDataset ds = random_dataset(ro);
    const SplitDataset split = leave_one_out_split(ds.records, ds.users, ds.items, ds.types);
    Rng rng(inst);
    Embeddings emb{Tensor(ds.users, 4), Tensor(ds.items, 4)};
    for (double& v : emb.users.values()) v = std::round(rng.uniform(-2, 2) * 4) / 4;
    for (double& v : emb.items.values()) v = std::round(rng.uniform(-2, 2) * 4) / 4;

    EvalOptions eo;
    eo.seed = inst;
    const Evaluator ev(split, eo);
    const EvalReport report = ev.evaluate(emb);
    double hr = 0, ndcg = 0;
    std::size_t users = 0;
    for (std::size_t k = 0; k < ev.user_count(); ++k) {
      const auto& c = ev.candidates(k);
      const std::size_t u = ev.rank_users(emb)[k].user;
      const double test = emb.score(u, c[0]);
      std::size_t rank = 1;
      for (std::size_t j = 1; j < c.size(); ++j) rank += emb.score(u, c[j]) >= test ? 1 : 0;
      if (rank <= 10) {
        hr += 1;
        ndcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
      }
      ++users;
    }
    worst = std::max({worst, std::abs(hr / users - report.overall.hit_ratio),
                      std::abs(ndcg / users - report.overall.ndcg)});
  }
  return {hand && worst <= 1e-12,
          fmt::format("hand values {}, max brute-force diff {:.3e} over 10 x 50 users",
                      hand ? "match" : "differ", worst)};
}

struct PlantedRun {
  TrainingSet data;
  TrainConfig config;
  FitResult fit;
  double seconds = 0.0;
};

const PlantedRun& planted_run() {
  static const PlantedRun run = [] {
    PlantedRun r;
    r.data = to_training_set(planted_dataset(testing::planted_options()));
    r.config = testing::planted_config();
    const auto t0 = Clock::now();
    r.fit = fit(r.data, r.config);
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

Outcome overfit_check() {
  const PlantedRun& run = planted_run();
  const KcgnModel model = build_model(run.data, run.config);
  const Embeddings emb = model.embed(run.fit.last);
  const SplitDataset& split = run.data.split;

  std::set<std::pair<std::uint32_t, std::uint32_t>> positives;
  for (const auto& r : split.train) positives.insert({r.user, r.item});
  std::size_t hits = 0;
  for (auto [u, i] : positives) {
    const auto& seen = split.interacted[u];
    const double s = emb.score(u, i);
    std::size_t rank = 1;
    for (std::uint32_t j = 0; j < split.items; ++j) {
      if (std::binary_search(seen.begin(), seen.end(), j)) continue;
      rank += emb.score(u, j) >= s ? 1 : 0;
    }
    hits += rank <= 5 ? 1 : 0;
  }
  const double held_in = static_cast<double>(hits) / static_cast<double>(positives.size());
  EvalOptions eo;
  eo.seed = run.config.seed;
  const double test_hr = evaluate(emb, split, eo).overall.hit_ratio;
  return {held_in >= 0.95 && test_hr >= 0.8 && run.seconds < 180.0,
          fmt::format("held-in HR@5 {:.3f}, test HR@10 {:.3f}, {} epochs in {:.1f} s", held_in,
                      test_hr, run.fit.history.size(), run.seconds)};
}

struct Separation {
  double true_mean = 0, shuffled_mean = 0;
};

Separation discriminator_separation(const Tensor& z, const Tensor& f, const Components& comps,
                                    Rng& rng) {
  const MiPairs pairs = make_mi_pairs(comps, corruption_sources(comps, rng));
  Separation s;
  for (std::size_t p = 0; p < pairs.anchors.size(); ++p) {
    const auto summary = f.row(pairs.summaries[p]);
    s.true_mean += sigmoid(score(z.row(pairs.anchors[p]), summary));
    s.shuffled_mean += sigmoid(score(z.row(pairs.corrupted[p]), summary));
  }
  s.true_mean /= static_cast<double>(pairs.anchors.size());
  s.shuffled_mean /= static_cast<double>(pairs.anchors.size());
  return s;
}

Outcome mi_discrimination() {
  const PlantedRun& run = planted_run();
  const KcgnModel model = build_model(run.data, run.config);
  Tape tape;
  const ForwardOutput fwd = model.forward(bind_constants(tape, run.fit.last));
  Rng rng(77);
  const Separation su = discriminator_separation(
      fwd.user_propagated.value(), fwd.user_summary.value(), model.social().components(), rng);
  const Separation si = discriminator_separation(
      fwd.item_propagated.value(), fwd.item_summary.value(), model.item_graph().components(), rng);
  const double gu = su.true_mean - su.shuffled_mean;
  const double gi = si.true_mean - si.shuffled_mean;
  return {gu >= 0.1 && gi >= 0.1,
          fmt::format("users: true {:.3f} vs shuffled {:.3f} (gap {:.3f}); items: true {:.3f} vs "
                      "shuffled {:.3f} (gap {:.3f})",
                      su.true_mean, su.shuffled_mean, gu, si.true_mean, si.shuffled_mean, gi)};
}

Outcome random_baseline() {
  RandomOptions ro;
  ro.users = 600;
  ro.items = 300;
  ro.seed = 12;
  const TrainingSet data = to_training_set(random_dataset(ro));
  TrainConfig cfg;
  cfg.seed = 12;
  const KcgnModel model = build_model(data, cfg);
  const Embeddings emb = model.embed(init_params(model.shape(), cfg.seed));
  EvalOptions eo;
  eo.seed = 12;
  const EvalReport report = evaluate(emb, data.split, eo);
  const double hr = report.overall.hit_ratio;
  return {std::abs(hr - 0.10) <= 0.04 && report.overall.users >= 500,
          fmt::format("HR@10 {:.4f} over {} users", hr, report.overall.users)};
}

/// Interaction graph with `edges` distinct events over fixed I = 320,
/// J = 80, K = 4, d = 4 and edgeless relation graphs.
struct ScalingInstance {
  std::unique_ptr<KcgnModel> model;
  ModelParams params;

  explicit ScalingInstance(std::size_t edges) {
    constexpr std::size_t users = 320, items = 80, types = 4, dim = 4;
    const auto records = random_interactions(users, items, types, edges, 17);
    std::vector<std::int64_t> stamps;
    for (const auto& r : records) stamps.push_back(r.timestamp);
    const TimeCodec codec = TimeCodec::fit(stamps, 86400, dim);
    const MultiTypedGraph graph = build_multityped_graph(records, users, items, types, codec);
    const ModelShape shape{users, items, types, dim, 2, 2, 0.2};
    model = std::make_unique<KcgnModel>(shape, ModelOptions{}, graph, codec,
                                        RelationGraph::from_edges(users, {}),
                                        RelationGraph::from_edges(items, {}));
    params = init_params(shape, 1);
  }

  double seconds_per_forward(int reps) const {
    const auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) {
      Tape tape;
      const ForwardOutput out = model->forward(bind_constants(tape, params));
      if (!out.user_final.value().all_finite()) std::abort();
    }
    return seconds_since(t0) / reps;
  }
};

Outcome complexity_scaling() {
  const ScalingInstance small(10'000), large(100'000);
  // Interleaved trials, fastest of each, to damp scheduler noise.
  double ts = 1e300, tl = 1e300;
  for (int trial = 0; trial < 15; ++trial) {
    ts = std::min(ts, small.seconds_per_forward(40));
    tl = std::min(tl, large.seconds_per_forward(10));
  }
  const double ratio = tl / ts;
  return {ratio >= 5.0 && ratio <= 20.0,
          fmt::format("forward {:.3f} ms at 1e4 edges, {:.3f} ms at 1e5 edges, ratio {:.2f}",
                      ts * 1e3, tl * 1e3, ratio)};
}

Outcome ablation_machinery() {
  const TrainingSet data = to_training_set(planted_dataset(testing::planted_options()));
  TrainConfig base = testing::planted_config();
  base.epochs = 6;
  base.patience = 6;
  const std::vector<std::pair<std::string, std::vector<std::string>>> variants = {
      {"no_multi_type", {"no_multi_type"}}, {"no_social", {"no_social"}},
      {"no_item_graph", {"no_item_graph"}}, {"no_social+no_item_graph", {"no_social", "no_item_graph"}},
      {"no_temporal", {"no_temporal"}}};
  std::string detail;
  bool ok = true;
  for (const auto& [name, flags] : variants) {
    TrainConfig cfg = base;
    for (const auto& f : flags) apply_ablation(cfg.ablation, f);
    try {
      const FitResult r = fit(data, cfg);
      const KcgnModel model = build_model(data, cfg);
      EvalOptions eo;
      eo.seed = cfg.seed;
      const double hr = evaluate(model.embed(r.best), data.split, eo).overall.hit_ratio;
      detail += fmt::format("{} HR@10 {:.2f}; ", name, hr);
    } catch (const std::exception& e) {
      ok = false;
      detail += fmt::format("{} failed: {}; ", name, e.what());
    }
  }
  TrainConfig ui = base;
  ui.ablation.no_social = ui.ablation.no_item_graph = ui.ablation.no_mi = true;
  const FitResult r = fit(data, ui);
  bool mi_zero = !r.history.empty();
  for (const auto& h : r.history) mi_zero &= h.mi == 0.0;
  const KcgnModel model = build_model(data, ui);
  Tape tape;
  const ForwardOutput fwd = model.forward(bind_constants(tape, r.best));
  const bool no_eta = !fwd.user_propagated.valid() && !fwd.item_propagated.valid();
  ok &= mi_zero && no_eta;
  detail += fmt::format("interaction-only: mi {} over {} epochs, propagation {}",
                        mi_zero ? "== 0" : "!= 0", r.history.size(), no_eta ? "off" : "on");
  return {ok, detail};
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  const TrainingSet data = to_training_set(planted_dataset(testing::planted_options()));
  TrainConfig cfg = testing::planted_config();
  cfg.epochs = 10;
  std::vector<std::filesystem::path> dirs;
  for (int run = 0; run < 2; ++run) {
    const auto dir = testing::scratch_dir("determinism_" + std::to_string(run));
    const FitResult r = fit(data, cfg);
    save_checkpoint(dir / "checkpoint", {r.best, cfg, r.best_epoch, r.best_metric});
    std::ofstream(dir / "history.tsv", std::ios::binary) << format_history(r.history);
    dirs.push_back(dir);
  }
  std::size_t files = 0;
  bool same = true;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dirs[0])) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), dirs[0]);
    same &= read_file(entry.path()) == read_file(dirs[1] / rel);
    ++files;
  }
  return {same && files > 1, fmt::format("{} files compared, {}", files,
                                         same ? "bit-identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::err);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"normalization oracle", normalization_oracle},
      {"temporal encoding", temporal_encoding},
      {"metric oracles", metric_oracles},
      {"overfit check", overfit_check},
      {"MI discrimination", mi_discrimination},
      {"random-model baseline", random_baseline},
      {"complexity scaling", complexity_scaling},
      {"ablation machinery", ablation_machinery},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const int id = std::atoi(argv[i]);
    if (id < 1 || id > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "usage: %s [criterion 1-%zu ...]\n", argv[0], criteria.size());
      return 2;
    }
    only.insert(id);
  }

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s  %2d. %-22s %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
