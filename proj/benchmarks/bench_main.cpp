#include <benchmark/benchmark.h>

#include "sdeblur/blur_model.hpp"
#include "sdeblur/parallel.hpp"
#include "sdeblur/solver.hpp"
#include "sdeblur/synth.hpp"

namespace {

using namespace sdeblur;

struct Fixture {
  SceneSpec scene;
  GroundTruth gt;
  RenderedFrames frames;
  BlurOperator op;

  explicit Fixture(int size)
      : scene(suite_scene("forward+yaw", size)),
        gt(ground_truth_sidecar(scene)),
        frames(render_blurred(scene)),
        op(assemble_operator(scene.camera, gt.patches, gt.segmentation, scene.spec)) {}
};

const Fixture& fixture(int size) {
  static const Fixture f128(128);
  static const Fixture f256(256);
  return size == 128 ? f128 : f256;
}

void BM_AssembleHomography(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        assemble_operator(f.scene.camera, f.gt.patches, f.gt.segmentation, f.scene.spec));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.op.pixel_count()));
}
BENCHMARK(BM_AssembleHomography)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_AssembleFlow(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(assemble_flow_operator(f.gt.flow, f.scene.spec));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.op.pixel_count()));
}
BENCHMARK(BM_AssembleFlow)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_ApplyBlur(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(apply_blur(f.op, f.frames.sharp_reference));
  }
  state.counters["nnz"] = static_cast<double>(f.op.nonzeros());
}
BENCHMARK(BM_ApplyBlur)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_ApplyBlurTranspose(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(apply_blur_transpose(f.op, f.frames.blurred));
  }
}
BENCHMARK(BM_ApplyBlurTranspose)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_SolveInner(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  const SolverConfig cfg;
  const GradientField rho = irls_prior_weights(gradient(f.frames.blurred), cfg);
  const WeightMap w(f.op.width(), f.op.height(), 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_inner(f.frames.blurred, f.op, w, rho, cfg, f.frames.blurred));
  }
}
BENCHMARK(BM_SolveInner)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Deblur(benchmark::State& state) {
  const Fixture& f = fixture(128);
  SolverConfig cfg;
  cfg.outer_iterations = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(deblur(f.frames.blurred, f.op, f.gt.occlusion, cfg));
  }
}
BENCHMARK(BM_Deblur)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_RenderBlurred(benchmark::State& state) {
  const Fixture& f = fixture(128);
  for (auto _ : state) {
    benchmark::DoNotOptimize(render_blurred(f.scene));
  }
}
BENCHMARK(BM_RenderBlurred)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
