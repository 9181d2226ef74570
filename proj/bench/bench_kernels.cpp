#include <benchmark/benchmark.h>

#include <random>

#include "harvest/kernels.hpp"
#include "harvest/pdf.hpp"

using namespace harvest;

namespace {

std::vector<std::vector<pdftab::TextSpan>> pages(std::size_t n) {
    static const auto base = pdf::load_spans(HARVEST_SPANS);
    return std::vector<std::vector<pdftab::TextSpan>>(n, base);
}

std::vector<std::set<std::string>> contexts(std::size_t n) {
    std::mt19937 rng(42);
    std::vector<std::set<std::string>> out(n);
    for (auto& c : out) {
        auto k = 4 + rng() % 20;
        for (std::size_t i = 0; i < k; ++i) c.insert("t" + std::to_string(rng() % 2000));
    }
    return out;
}

void BM_ReconstructPages(benchmark::State& st) {
    auto p = pages(static_cast<std::size_t>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(kernels::reconstruct_pages(p));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_ReconstructPagesSerial(benchmark::State& st) {
    auto p = pages(static_cast<std::size_t>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(kernels::reconstruct_pages_serial(p));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_BuildStats(benchmark::State& st) {
    auto c = contexts(static_cast<std::size_t>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(kernels::build_stats(c));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_BuildStatsSerial(benchmark::State& st) {
    auto c = contexts(static_cast<std::size_t>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(kernels::build_stats_serial(c));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

std::vector<std::string> haystack(std::size_t n) {
    std::mt19937 rng(7);
    std::vector<std::string> out(n);
    for (auto& s : out) s = "drug-" + std::to_string(rng() % 5000) + " milk sensitivity";
    return out;
}

void BM_Select(benchmark::State& st) {
    auto h = haystack(static_cast<std::size_t>(st.range(0)));
    auto pred = [&](std::size_t i) { return h[i].find("drug-42") != std::string::npos; };
    for (auto _ : st) benchmark::DoNotOptimize(kernels::select(h.size(), pred));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_SelectSerial(benchmark::State& st) {
    auto h = haystack(static_cast<std::size_t>(st.range(0)));
    auto pred = [&](std::size_t i) { return h[i].find("drug-42") != std::string::npos; };
    for (auto _ : st) benchmark::DoNotOptimize(kernels::select_serial(h.size(), pred));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(BM_ReconstructPages)->Arg(16)->Arg(128);
BENCHMARK(BM_ReconstructPagesSerial)->Arg(16)->Arg(128);
BENCHMARK(BM_BuildStats)->Arg(1000)->Arg(10000);
BENCHMARK(BM_BuildStatsSerial)->Arg(1000)->Arg(10000);
BENCHMARK(BM_Select)->Arg(100000)->Arg(1000000);
BENCHMARK(BM_SelectSerial)->Arg(100000)->Arg(1000000);

BENCHMARK_MAIN();
