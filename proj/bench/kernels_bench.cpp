// Serial reference kernels against their OpenMP variants.
#include <benchmark/benchmark.h>

#include <vector>

#include "pcflow/classify.hpp"
#include "pcflow/kernels.hpp"
#include "pcflow/phantom.hpp"
#include "pcflow/rng.hpp"

namespace {

using namespace pcflow;

struct Frames {
  std::vector<std::int16_t> phase;
  std::vector<std::uint16_t> magnitude;
  std::vector<double> velocity;
  std::vector<std::uint8_t> mask;
  std::size_t frame_size = 0;
  std::size_t frames = 0;
};

Frames make_frames(std::size_t frames, std::size_t side) {
  Frames f;
  f.frames = frames;
  f.frame_size = side * side;
  const std::size_t n = frames * f.frame_size;
  Rng rng(1);
  f.phase.resize(n);
  f.magnitude.resize(n);
  f.velocity.resize(n);
  f.mask.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.phase[i] = static_cast<std::int16_t>(static_cast<int>(rng.below(8192)) - 4096);
    f.magnitude[i] = static_cast<std::uint16_t>(rng.below(4096));
    f.velocity[i] = rng.uniform(-150.0, 150.0);
    f.mask[i] = rng.bernoulli(0.2) ? 1 : 0;
  }
  return f;
}

template <auto Kernel>
void velocity_product(benchmark::State& state) {
  auto f = make_frames(static_cast<std::size_t>(state.range(0)), 256);
  std::vector<double> out(f.phase.size());
  for (auto _ : state) {
    Kernel(f.phase, f.magnitude, 0.02, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(out.size()));
}

template <auto Kernel>
void masked_frame_sums(benchmark::State& state) {
  auto f = make_frames(static_cast<std::size_t>(state.range(0)), 256);
  std::vector<double> rates(f.frames);
  for (auto _ : state) {
    Kernel(f.velocity, f.mask, f.frame_size, 0.01, rates);
    benchmark::DoNotOptimize(rates.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.velocity.size()));
}

void train_epoch(benchmark::State& state) {
  const auto data = make_shape_corpus(32, 3);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.parallel = state.range(0) != 0;
  for (auto _ : state) {
    auto result = train(data, cfg, {});
    benchmark::DoNotOptimize(result.epoch_loss.data());
  }
  state.SetLabel(cfg.parallel ? "parallel" : "serial");
}

}  // namespace

BENCHMARK(velocity_product<kernels::velocity_product_serial>)->Arg(30)->Arg(120)->Name("velocity_product/serial");
BENCHMARK(velocity_product<kernels::velocity_product_parallel>)->Arg(30)->Arg(120)->Name("velocity_product/parallel");
BENCHMARK(masked_frame_sums<kernels::masked_frame_sums_serial>)->Arg(30)->Arg(120)->Name("masked_frame_sums/serial");
BENCHMARK(masked_frame_sums<kernels::masked_frame_sums_parallel>)->Arg(30)->Arg(120)->Name("masked_frame_sums/parallel");
BENCHMARK(train_epoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
