#include <benchmark/benchmark.h>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <spdlog/spdlog.h>

#include "kcgn/evaluation.hpp"
#include "kcgn/synthetic.hpp"
#include "kcgn/training.hpp"

namespace {

using namespace kcgn;

constexpr std::size_t kUsers = 2000, kItems = 1000, kTypes = 3, kDim = 16;

// Interaction model over `edges` random events with relation graphs switched
// off, so time is dominated by message passing.
KcgnModel interaction_model(std::size_t edges) {
  auto records = random_interactions(kUsers, kItems, kTypes, edges, 7);
  auto codec = TimeCodec::fit({0}, 86400, kDim);
  ModelShape shape{kUsers, kItems, kTypes, kDim, 2, 2, 0.2};
  ModelOptions o;
  o.use_social = o.use_item_graph = false;
  return KcgnModel(shape, o, build_multityped_graph(records, kUsers, kItems, kTypes, codec), codec,
                   build_social_graph({}, kUsers), build_social_graph({}, kItems));
}

void BM_Forward(benchmark::State& state) {
  const auto edges = static_cast<std::size_t>(state.range(0));
  KcgnModel model = interaction_model(edges);
  ModelParams p = init_params(model.shape(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(model.embed(p));
  state.SetComplexityN(state.range(0));
  state.counters["edges"] = static_cast<double>(edges);
}
BENCHMARK(BM_Forward)->RangeMultiplier(4)->Range(4096, 262144)->Complexity(benchmark::oN)
    ->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const auto edges = static_cast<std::size_t>(state.range(0));
  KcgnModel model = interaction_model(edges);
  ModelParams p = init_params(model.shape(), 1);
  for (auto _ : state) {
    p.zero_grad();
    Tape tape;
    ParamVars v = bind_params(tape, p);
    auto out = model.forward(v);
    tape.backward(add(squared_norm(out.user_final), squared_norm(out.item_final)));
    benchmark::ClobberMemory();
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ForwardBackward)->RangeMultiplier(4)->Range(4096, 262144)
    ->Complexity(benchmark::oN)->Unit(benchmark::kMillisecond);

void BM_Spmm(benchmark::State& state) {
  const auto nnz = static_cast<std::size_t>(state.range(0));
  const auto cols = static_cast<std::size_t>(state.range(1));
  Rng rng(3);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < nnz; ++i) {
    t.push_back({static_cast<std::uint32_t>(rng.below(kUsers)),
                 static_cast<std::uint32_t>(rng.below(kItems * kTypes)), rng.uniform()});
  }
  auto a = SparseMatrix::from_triplets(kUsers, kItems * kTypes, std::move(t));
  Tensor x(kItems * kTypes, cols, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(a.multiply(x));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * a.nnz() * cols));
}
BENCHMARK(BM_Spmm)->ArgsProduct({{10000, 100000}, {8, 16, 64}})->Unit(benchmark::kMicrosecond);

void BM_TrainEpoch(benchmark::State& state) {
  RandomOptions ro;
  ro.users = 1000;
  ro.items = 500;
  TrainingSet data = to_training_set(random_dataset(ro));
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.dim = 16;
  for (auto _ : state) benchmark::DoNotOptimize(fit(data, cfg));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  RandomOptions ro;
  ro.users = 2000;
  ro.items = 1000;
  auto ds = random_dataset(ro);
  auto split = leave_one_out_split(ds.records, ds.users, ds.items, ds.types);
  Rng rng(5);
  Embeddings e{Tensor(ds.users, 48), Tensor(ds.items, 48)};
  for (double& v : e.users.values()) v = rng.uniform(-1, 1);
  for (double& v : e.items.values()) v = rng.uniform(-1, 1);
  EvalOptions o;
  o.threads = static_cast<std::size_t>(state.range(0));
  Evaluator ev(split, o);
  for (auto _ : state) benchmark::DoNotOptimize(ev.evaluate(e));
}
BENCHMARK(BM_Evaluate)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Same allocator settings as the kcgn tool.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  spdlog::set_level(spdlog::level::warn);
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
