#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "harvest/canon.hpp"
#include "harvest/pdftab.hpp"

// Data-parallel hot paths. Each OpenMP kernel has a serial reference with
// identical output, used by the tests and the benchmark.
namespace harvest::kernels {

int max_threads();

// Reconstructs every page with its own default tolerances.
std::vector<pdftab::Reconstruction> reconstruct_pages(const std::vector<std::vector<pdftab::TextSpan>>& pages);
std::vector<pdftab::Reconstruction> reconstruct_pages_serial(const std::vector<std::vector<pdftab::TextSpan>>& pages);

// Per-thread partial counts reduced with CooccurrenceStats::merge.
canon::CooccurrenceStats build_stats(const std::vector<std::set<std::string>>& contexts);
canon::CooccurrenceStats build_stats_serial(const std::vector<std::set<std::string>>& contexts);

// Indices i in [0, n) with pred(i), ascending.
template <typename Pred>
std::vector<std::size_t> select(std::size_t n, const Pred& pred) {
    std::vector<unsigned char> keep(n);
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < count; ++i) keep[static_cast<std::size_t>(i)] = pred(static_cast<std::size_t>(i)) ? 1 : 0;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (keep[i]) out.push_back(i);
    }
    return out;
}

template <typename Pred>
std::vector<std::size_t> select_serial(std::size_t n, const Pred& pred) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (pred(i)) out.push_back(i);
    }
    return out;
}

}  // namespace harvest::kernels
