// Serial reference kernels against their OpenMP counterparts, on a
// 1920x1080 canvas unless noted. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>

#include "tilecast/block_codec.hpp"
#include "tilecast/color_space.hpp"
#include "tilecast/compositor.hpp"

namespace {

using namespace tilecast;

Frame noisy_frame(int w, int h, unsigned seed) {
  Frame f(w, h);
  std::mt19937 rng(seed);
  // Smooth gradient plus mild noise: closer to camera content than white noise.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      f.set(x, y, {static_cast<std::uint8_t>((x * 255 / w + rng() % 9) & 0xFF),
                   static_cast<std::uint8_t>((y * 255 / h + rng() % 9) & 0xFF),
                   static_cast<std::uint8_t>(((x + y) * 127 / (w + h) + rng() % 9) & 0xFF)});
  return f;
}

const Frame& canvas_frame() {
  static const Frame f = noisy_frame(1920, 1080, 1);
  return f;
}

template <Nv12Image (*Pack)(const Frame&)>
void BM_PackNv12(benchmark::State& state) {
  const Frame& f = canvas_frame();
  for (auto _ : state) benchmark::DoNotOptimize(Pack(f));
  state.SetItemsProcessed(state.iterations() * f.width * f.height);
}
BENCHMARK(BM_PackNv12<reference::pack_nv12>)->Name("pack_nv12/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PackNv12<pack_nv12>)->Name("pack_nv12/parallel")->Unit(benchmark::kMillisecond);

template <void (*Gamma)(Frame&)>
void BM_Gamma(benchmark::State& state) {
  Frame f = canvas_frame();
  for (auto _ : state) {
    Gamma(f);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * f.width * f.height);
}
BENCHMARK(BM_Gamma<reference::apply_gamma>)->Name("apply_gamma/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gamma<apply_gamma>)->Name("apply_gamma/parallel")->Unit(benchmark::kMillisecond);

template <void (*Scale)(const Frame&, Frame&, const TileGeometry&)>
void BM_Scale(benchmark::State& state) {
  const Frame src = noisy_frame(1280, 720, 2);
  Frame dst(1920, 1080);
  const TileGeometry full{0, 0, 1920, 1080};
  for (auto _ : state) {
    Scale(src, dst, full);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * dst.width * dst.height);
}
BENCHMARK(BM_Scale<reference::scale_into>)->Name("scale_into/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Scale<scale_into>)->Name("scale_into/parallel")->Unit(benchmark::kMillisecond);

template <EncodedFrame (*Encode)(const Nv12Image&, int, std::uint32_t, std::uint64_t)>
void BM_Encode(benchmark::State& state) {
  const Nv12Image img = pack_nv12(canvas_frame());
  const int step = static_cast<int>(state.range(0));
  std::size_t bytes = 0;
  for (auto _ : state) {
    const EncodedFrame e = Encode(img, step, 0, 0);
    bytes = e.payload.size();
    benchmark::DoNotOptimize(bytes);
  }
  state.counters["payload_bytes"] = static_cast<double>(bytes);
}
BENCHMARK(BM_Encode<reference::encode_frame>)->Name("encode_frame/serial")->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Encode<encode_frame>)->Name("encode_frame/parallel")->Arg(16)->Unit(benchmark::kMillisecond);

template <Nv12Image (*Decode)(const EncodedFrame&)>
void BM_Decode(benchmark::State& state) {
  const EncodedFrame e = encode_frame(pack_nv12(canvas_frame()), 16, 0, 0);
  for (auto _ : state) benchmark::DoNotOptimize(Decode(e));
}
BENCHMARK(BM_Decode<reference::decode_frame>)->Name("decode_frame/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Decode<decode_frame>)->Name("decode_frame/parallel")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
