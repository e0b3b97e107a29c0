#include "diwr/core.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace diwr {

Box3 Box3::of_points(const std::vector<Vec3>& pts) {
    Box3 b;
    if (pts.empty()) return b;
    b.lo = b.hi = pts[0];
    for (const Vec3& p : pts) {
        b.lo = b.lo.cwiseMin(p);
        b.hi = b.hi.cwiseMax(p);
    }
    return b;
}

namespace {
std::atomic<int> g_threads{0};

int hardware_default() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}
}  // namespace

int thread_count() {
    int n = g_threads.load(std::memory_order_relaxed);
    return n > 0 ? n : hardware_default();
}

void set_thread_count(int n) {
    g_threads.store(n, std::memory_order_relaxed);
#ifdef _OPENMP
    omp_set_num_threads(n > 0 ? n : hardware_default());
#endif
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    const int threads = thread_count();
    if (threads <= 1 || n < 64) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
#ifdef _OPENMP
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 64) num_threads(threads)
    for (std::int64_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
#else
    for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

double parallel_sum(std::size_t n, const std::function<double(std::size_t)>& body) {
    if (n == 0) return 0.0;
    constexpr std::size_t kChunk = 2048;
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    std::vector<double> partial(chunks, 0.0);
    parallel_for(chunks, [&](std::size_t ci) {
        const std::size_t begin = ci * kChunk;
        const std::size_t end = std::min(begin + kChunk, n);
        double acc = 0.0;
        for (std::size_t i = begin; i < end; ++i) acc += body(i);
        partial[ci] = acc;
    });
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

}  // namespace diwr
