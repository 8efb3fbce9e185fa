#include <benchmark/benchmark.h>

#include "dgwm/pipeline.hpp"

using namespace dgwm;

namespace {

// One self-contained benchmark world at the default desk scale.
struct World {
  MultiDomainDataset ds;
  TrainingView view;
  ModelBundle bundle;
  Augmenter aug;
  TrainConfig tcfg;

  World() {
    ShiftSpec spec;
    ds = generate(spec);
    SplitPlan plan;
    view = split(ds, plan);
    ModelConfig mc;
    mc.input_dim = ds.input_dim();
    mc.num_classes = ds.num_classes();
    Rng init(1);
    bundle = ModelBundle::init(mc, init);
    aug = Augmenter::fit(view);
  }
};

World& world() {
  static World w;
  return w;
}

}  // namespace

static void BM_FeatureForward(benchmark::State& state) {
  World& w = world();
  const int n = static_cast<int>(state.range(0));
  std::vector<std::vector<double>> batch;
  Rng rng(2);
  for (int i = 0; i < n; ++i) {
    std::vector<double> x(w.ds.input_dim());
    for (double& v : x) v = rng.normal();
    batch.push_back(std::move(x));
  }
  for (auto _ : state) {
    for (const auto& x : batch) {
      benchmark::DoNotOptimize(w.bundle.f.forward_values(x));
    }
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_FeatureForward)->Arg(16)->Arg(64);

static void BM_MaskBuild(benchmark::State& state) {
  World& w = world();
  Rng rng(3);
  std::vector<std::vector<double>> unlabeled;
  for (int i = 0; i < 16; ++i) {
    std::vector<double> x(w.ds.input_dim());
    for (double& v : x) v = rng.normal();
    unlabeled.push_back(std::move(x));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(mask_values_for_batch(w.bundle, unlabeled));
  }
}
BENCHMARK(BM_MaskBuild);

static void BM_PseudoLabel(benchmark::State& state) {
  World& w = world();
  Rng sample(4);
  StepBatch sb = sample_step_batches(w.view, 16, 16, sample);
  const DomainBatch& batch = sb.domains[0];
  for (auto _ : state) {
    Rng rng(5);
    benchmark::DoNotOptimize(
        pseudo_label(batch, w.bundle, {}, 0.95, w.aug, rng, nullptr));
  }
}
BENCHMARK(BM_PseudoLabel);

static void BM_TrainStep(benchmark::State& state) {
  World& w = world();
  const bool modulation = state.range(0) != 0;
  ModelConfig mc = w.bundle.cfg;
  Rng init(6);
  ModelBundle bundle = ModelBundle::init(mc, init);
  TrainConfig tc;
  tc.modulation = modulation;
  SgdConfig sgd = tc.sgd;
  sgd.total_epochs = tc.epochs;
  SgdOptimizer opt(sgd);
  for (const Tensor& t : bundle.backbone_params()) opt.add_backbone_param(t);
  for (const Tensor& t : bundle.head_params()) opt.add_head_param(t);
  opt.set_epoch(0);
  Rng rng(7);
  for (auto _ : state) {
    StepBatch sb = sample_step_batches(w.view, 16, 16, rng);
    benchmark::DoNotOptimize(train_step(sb, bundle, opt, tc, w.aug, rng));
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
