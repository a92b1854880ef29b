// Serial reference vs OpenMP kernels. Each benchmark takes the problem size as
// its argument; the parallel variants use the default OpenMP thread count.

#include "pv/kdtree.hpp"
#include "pv/kernels.hpp"

#include <benchmark/benchmark.h>

#include <limits>
#include <random>
#include <vector>

using namespace pv;

namespace {

std::vector<Point3> cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point3> p(n);
  for (auto& x : p) x = Point3(u(rng), u(rng), u(rng));
  return p;
}

RigidTransform some_pose(double angle, double shift) {
  return RigidTransform(Eigen::AngleAxisd(angle, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix(),
                        Eigen::Vector3d(shift, -shift, 0.5 * shift));
}

template <auto Kernel>
void fps_update(benchmark::State& state) {
  const auto pts = cloud(static_cast<std::size_t>(state.range(0)), 1);
  std::vector<double> d2(pts.size(), std::numeric_limits<double>::infinity());
  std::size_t next = 0;
  for (auto _ : state) {
    next = Kernel(pts, pts[next], d2);
    benchmark::DoNotOptimize(next);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void nearest_batch(benchmark::State& state) {
  const auto pts = cloud(static_cast<std::size_t>(state.range(0)), 2);
  const auto queries = cloud(static_cast<std::size_t>(state.range(0)), 3);
  const KdTree tree(pts);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(tree, queries));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void best_dot(benchmark::State& state) {
  const kernels::RowMatrix rows = Eigen::MatrixXd::Random(state.range(0), 2048);
  const Eigen::VectorXd q = Eigen::VectorXd::Random(2048);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(rows, q));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void mean_pair_distance(benchmark::State& state) {
  const auto pts = cloud(static_cast<std::size_t>(state.range(0)), 4);
  const auto a = some_pose(0.3, 0.1), b = some_pose(0.35, 0.12);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(pts, a, b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void mean_closest_distance(benchmark::State& state) {
  const auto pts = cloud(static_cast<std::size_t>(state.range(0)), 5);
  const auto a = some_pose(0.3, 0.1), b = some_pose(0.35, 0.12);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(pts, a, b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(fps_update<kernels::serial::fps_update>)->Name("fps_update/serial")->Arg(10000)->Arg(200000);
BENCHMARK(fps_update<kernels::parallel::fps_update>)->Name("fps_update/parallel")->Arg(10000)->Arg(200000);
BENCHMARK(nearest_batch<kernels::serial::nearest_batch>)->Name("nearest_batch/serial")->Arg(5000)->Arg(50000);
BENCHMARK(nearest_batch<kernels::parallel::nearest_batch>)->Name("nearest_batch/parallel")->Arg(5000)->Arg(50000);
BENCHMARK(best_dot<kernels::serial::best_dot>)->Name("best_dot/serial")->Arg(1000)->Arg(3000);
BENCHMARK(best_dot<kernels::parallel::best_dot>)->Name("best_dot/parallel")->Arg(1000)->Arg(3000);
BENCHMARK(mean_pair_distance<kernels::serial::mean_pair_distance>)->Name("mean_pair_distance/serial")->Arg(100000);
BENCHMARK(mean_pair_distance<kernels::parallel::mean_pair_distance>)->Name("mean_pair_distance/parallel")->Arg(100000);
// The serial ADD-S reference is quadratic; keep it small.
BENCHMARK(mean_closest_distance<kernels::serial::mean_closest_distance>)->Name("mean_closest_distance/serial")->Arg(2000);
BENCHMARK(mean_closest_distance<kernels::parallel::mean_closest_distance>)->Name("mean_closest_distance/parallel")->Arg(2000);

BENCHMARK_MAIN();
