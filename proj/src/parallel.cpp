#include "pvedge/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pvedge {

int default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_chunks(std::size_t count, int workers,
                     const std::function<void(std::size_t, std::size_t)>& body, std::size_t chunk) {
    if (count == 0) return;
    if (workers <= 0) workers = default_workers();
    const std::size_t chunks = (count + chunk - 1) / chunk;
    const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(workers), chunks);

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::size_t error_chunk = chunks;
    std::exception_ptr error;

    auto run = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            const std::size_t begin = c * chunk;
            const std::size_t end = std::min(count, begin + chunk);
            try {
                body(begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (c < error_chunk) {
                    error_chunk = c;
                    error = std::current_exception();
                }
            }
        }
    };

    if (threads <= 1) {
        run();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(run);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);
}

namespace {

double pairwise(std::span<const double> v) {
    if (v.size() == 1) return v[0];
    const std::size_t half = v.size() / 2;
    return pairwise(v.first(half)) + pairwise(v.subspan(half));
}

}  // namespace

double tree_sum(std::span<const double> values, std::size_t chunk) {
    if (values.empty()) return 0.0;
    std::vector<double> partial;
    partial.reserve(values.size() / chunk + 1);
    for (std::size_t begin = 0; begin < values.size(); begin += chunk) {
        const std::size_t end = std::min(values.size(), begin + chunk);
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i) s += values[i];
        partial.push_back(s);
    }
    return pairwise(partial);
}

MeanSe mean_se(std::span<const double> values) {
    MeanSe out;
    const std::size_t n = values.size();
    if (n == 0) return out;
    out.mean = tree_sum(values) / static_cast<double>(n);
    if (n < 2) return out;
    std::vector<double> dev(n);
    for (std::size_t i = 0; i < n; ++i) dev[i] = (values[i] - out.mean) * (values[i] - out.mean);
    const double var = tree_sum(dev) / static_cast<double>(n - 1);
    out.se = std::sqrt(var / static_cast<double>(n));
    return out;
}

}  // namespace pvedge
