#include "harvest/kernels.hpp"

#include <omp.h>

namespace harvest::kernels {

int max_threads() {
    return omp_get_max_threads();
}

std::vector<pdftab::Reconstruction> reconstruct_pages(const std::vector<std::vector<pdftab::TextSpan>>& pages) {
    std::vector<pdftab::Reconstruction> out(pages.size());
    const auto n = static_cast<long long>(pages.size());
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < n; ++i) {
        const auto& spans = pages[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = pdftab::reconstruct_table(spans);
    }
    return out;
}

std::vector<pdftab::Reconstruction> reconstruct_pages_serial(const std::vector<std::vector<pdftab::TextSpan>>& pages) {
    std::vector<pdftab::Reconstruction> out;
    out.reserve(pages.size());
    for (const auto& spans : pages) out.push_back(pdftab::reconstruct_table(spans));
    return out;
}

canon::CooccurrenceStats build_stats(const std::vector<std::set<std::string>>& contexts) {
    std::vector<canon::CooccurrenceStats> partial(static_cast<std::size_t>(omp_get_max_threads()));
    const auto n = static_cast<long long>(contexts.size());
#pragma omp parallel
    {
        auto& mine = partial[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(static)
        for (long long i = 0; i < n; ++i) mine.add_context(contexts[static_cast<std::size_t>(i)]);
    }
    auto total = std::move(partial.front());
    for (std::size_t t = 1; t < partial.size(); ++t) total.merge(partial[t]);
    return total;
}

canon::CooccurrenceStats build_stats_serial(const std::vector<std::set<std::string>>& contexts) {
    return canon::build_stats(contexts);
}

}  // namespace harvest::kernels
