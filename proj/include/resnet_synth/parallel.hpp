#ifndef RESNET_SYNTH_PARALLEL_HPP
#define RESNET_SYNTH_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace resnet_synth {

/// Stateless counter-based generator: the value for (seed, counter) does not
/// depend on evaluation order, so sharded sampling reproduces the serial run.
struct CounterRng {
    std::uint64_t seed = 0;

    static std::uint64_t mix(std::uint64_t z) {
        // splitmix64 finalizer
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t bits(std::uint64_t counter) const { return mix(mix(seed) ^ counter); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform(std::uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }
};

/// Worker count from RESNET_SYNTH_THREADS (unset or 0 = hardware concurrency).
inline std::size_t worker_count() {
    std::size_t n = 0;
    if (const char* env = std::getenv("RESNET_SYNTH_THREADS")) {
        try {
            n = static_cast<std::size_t>(std::stoul(env));
        } catch (...) {
            n = 0;
        }
    }
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

/// Calls body(chunk) for chunk in [0, chunks). Chunks are independent and
/// write to disjoint outputs; results must be merged by the caller in chunk
/// order, which keeps reductions bitwise identical for any worker count.
template <class Body>
void parallel_chunks(std::size_t chunks, Body&& body, std::size_t workers = 0) {
    if (workers == 0) workers = worker_count();
    workers = std::min(workers, chunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) body(c);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t c = w; c < chunks; c += workers) body(c);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace resnet_synth

#endif  // RESNET_SYNTH_PARALLEL_HPP
