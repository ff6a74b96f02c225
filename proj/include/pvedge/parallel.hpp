#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace pvedge {

/// Replications are grouped in chunks of this size for scheduling and reduction.
inline constexpr std::size_t kReductionChunk = 1024;

/// Worker count used when the caller passes 0.
int default_workers();

/// Calls body(begin, end) on consecutive chunks covering [0, count) from up to
/// `workers` threads. If any chunk throws, the exception of the lowest-indexed
/// failing chunk is rethrown after all threads have joined.
void parallel_chunks(std::size_t count, int workers,
                     const std::function<void(std::size_t, std::size_t)>& body,
                     std::size_t chunk = kReductionChunk);

/// Sum of values computed as sequential sums over fixed chunks followed by a
/// pairwise tree over the chunk sums. The result depends only on the values.
double tree_sum(std::span<const double> values, std::size_t chunk = kReductionChunk);

/// Mean and standard error of the mean, both via tree_sum.
struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};
MeanSe mean_se(std::span<const double> values);

}  // namespace pvedge
