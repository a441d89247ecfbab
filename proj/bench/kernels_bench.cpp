// Parallel kernels against their serial references on synthetic VoD scans.

#include <benchmark/benchmark.h>

#include "radar_mrf/geometry.hpp"
#include "radar_mrf/pipeline.hpp"
#include "radar_mrf/random.hpp"
#include "radar_mrf/synth.hpp"

namespace {

using namespace radar_mrf;

const PipelineConfig& vod() {
  static const PipelineConfig cfg = make_profile("vod");
  return cfg;
}

PointCloud scan(std::size_t n) {
  const auto& cfg = vod();
  return filter_roi(synth_scan(cfg.roi, cfg.schema, n, 7).cloud, cfg.roi);
}

KdeConfig kde_cfg() { return vod().kde_configs().front(); }

void BM_KdeGrid(benchmark::State& st) {
  const auto pc = scan(static_cast<std::size_t>(st.range(0)));
  const auto cfg = kde_cfg();
  for (auto _ : st) benchmark::DoNotOptimize(kde_densities(pc, cfg));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(pc.size()));
}

void BM_KdeBruteforce(benchmark::State& st) {
  const auto pc = scan(static_cast<std::size_t>(st.range(0)));
  const auto cfg = kde_cfg();
  for (auto _ : st) benchmark::DoNotOptimize(kde_bruteforce(pc, cfg));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(pc.size()));
}

template <bool Serial>
void BM_Pillarize(benchmark::State& st) {
  const auto pc = scan(static_cast<std::size_t>(st.range(0)));
  const auto density = kde_multiband(pc, vod().kde_configs());
  auto cfg = vod().pillar;
  cfg.append_density = true;
  for (auto _ : st) {
    benchmark::DoNotOptimize(Serial ? pillarize_serial(pc, &density, cfg) : pillarize(pc, &density, cfg));
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(pc.size()));
}

template <bool Serial>
void BM_Voxelize(benchmark::State& st) {
  const auto pc = scan(static_cast<std::size_t>(st.range(0)));
  const auto density = kde_densities(pc, kde_cfg());
  const auto& cfg = vod().voxel;
  for (auto _ : st) {
    benchmark::DoNotOptimize(Serial ? voxelize_serial(pc, density, cfg) : voxelize(pc, density, cfg));
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(pc.size()));
}

template <bool Serial>
void BM_IouTable(benchmark::State& st) {
  Rng rng(3);
  std::vector<Box3D> boxes;
  for (std::int64_t i = 0; i < st.range(0); ++i) {
    Box3D b;
    b.cx = rng.uniform(0, 40);
    b.cy = rng.uniform(-20, 20);
    b.w = rng.uniform(0.5, 2.5);
    b.l = rng.uniform(0.5, 5.0);
    b.h = rng.uniform(1.0, 2.0);
    b.theta = rng.uniform(-3.1, 3.1);
    boxes.push_back(b);
  }
  for (auto _ : st) {
    benchmark::DoNotOptimize(Serial ? iou_table_serial(boxes, boxes, IouKind::box3d)
                                    : iou_table(boxes, boxes, IouKind::box3d));
  }
}

void BM_Preprocess(benchmark::State& st) {
  const auto pc = scan(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(time_preprocessing(pc, vod()));
}

}  // namespace

BENCHMARK(BM_KdeGrid)->Arg(1000)->Arg(3000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KdeBruteforce)->Arg(1000)->Arg(3000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Pillarize<false>)->Name("BM_Pillarize")->Arg(3000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Pillarize<true>)->Name("BM_PillarizeSerial")->Arg(3000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Voxelize<false>)->Name("BM_Voxelize")->Arg(3000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Voxelize<true>)->Name("BM_VoxelizeSerial")->Arg(3000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IouTable<false>)->Name("BM_IouTable")->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IouTable<true>)->Name("BM_IouTableSerial")->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Preprocess)->Arg(3000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
