#include <enstack/base_model.hpp>
#include <enstack/features.hpp>
#include <enstack/meta/meta_model.hpp>
#include <enstack/metrics.hpp>
#include <enstack/rng.hpp>
#include <enstack/tokenizer.hpp>

#include <benchmark/benchmark.h>

#include <string>

namespace {

using namespace enstack;

std::string function_body(SplitMix64& rng, int lines) {
  static const char* stmts[] = {"memcpy(dst, src, len);", "if (p == NULL) return -1;", "buf[i] = (char)c;",
                                "for (i = 0; i < n; ++i) sum += a[i];", "ptr = base + off * 4;",
                                "strcpy(name, input);", "x = y >> 3 | 0x1f;"};
  std::string code = "int handler(char *dst, const char *src, size_t len) {\n";
  for (int i = 0; i < lines; ++i) code += std::string("  ") + stmts[rng.below(7)] + "\n";
  return code + "  return 0;\n}\n";
}

void BM_Tokenize(benchmark::State& state) {
  SplitMix64 rng(1);
  const auto code = function_body(rng, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(tokenize(code));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * code.size()));
}
BENCHMARK(BM_Tokenize)->Arg(10)->Arg(100);

void BM_Featurize(benchmark::State& state) {
  SplitMix64 rng(2);
  const auto code = function_body(rng, 50);
  const auto kind = state.range(0) ? BaseKind::CharNgramSoftmax : BaseKind::HashedTokenSoftmax;
  for (auto _ : state) benchmark::DoNotOptimize(featurize_code(kind, code, 1u << 14));
}
BENCHMARK(BM_Featurize)->Arg(0)->Arg(1);

/// Concatenated noisy probability vectors for K base models.
struct MetaData {
  Matrix x;
  std::vector<Label> y;
};

MetaData meta_data(std::size_t n, std::size_t k) {
  SplitMix64 rng(3);
  MetaData d{Matrix(n, 5 * k), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<Label>(i % 5);
    d.y.push_back(label);
    for (std::size_t m = 0; m < k; ++m) {
      const auto peak = rng.uniform() < 0.7 ? label : static_cast<Label>(rng.below(5));
      double total = 0;
      for (std::size_t c = 0; c < 5; ++c)
        total += d.x(i, m * 5 + c) = 0.1 + rng.uniform() * 0.3 + (static_cast<Label>(c) == peak ? 1.0 : 0.0);
      for (std::size_t c = 0; c < 5; ++c) d.x(i, m * 5 + c) /= total;
    }
  }
  return d;
}

void BM_MetaFit(benchmark::State& state) {
  const auto kind = static_cast<meta::MetaKind>(state.range(0));
  const auto d = meta_data(static_cast<std::size_t>(state.range(1)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(meta::fit(kind, d.x, d.y));
  state.SetLabel(std::string(meta::to_string(kind)));
}
BENCHMARK(BM_MetaFit)
    ->ArgsProduct({{0, 1, 2, 3}, {200, 800}})
    ->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  const auto d = meta_data(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::evaluate(d.y, d.x));
}
BENCHMARK(BM_Evaluate)->Arg(1000)->Arg(10000);

}  // namespace

// The packaged benchmark_main archive is built with a different LTO version, so supply main here.
BENCHMARK_MAIN();
