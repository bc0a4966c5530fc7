#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <type_traits>
#include <vector>

namespace ottomech {

inline unsigned resolve_workers(unsigned requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

// Splits [0, n_items) into fixed-size blocks and reduces them in index
// order.  work(block, first, last) runs on whichever thread claims the
// block; merge(result) always sees blocks in ascending order, so a
// running floating-point reduction produces the same bits for any worker
// count.  Changing the block size regroups the partial sums and may move
// the result by rounding, so the block size is part of the contract.
template <typename Work, typename Merge>
void parallel_ordered(std::size_t n_items, std::size_t block_size, unsigned n_workers,
                      Work&& work, Merge&& merge) {
    using R = std::invoke_result_t<Work&, std::size_t, std::size_t, std::size_t>;
    if (block_size == 0)
        throw std::invalid_argument("parallel_ordered: block size must be positive");
    const std::size_t n_blocks = n_items == 0 ? 0 : (n_items + block_size - 1) / block_size;
    const unsigned workers = resolve_workers(n_workers);

    if (workers <= 1 || n_blocks <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) {
            const std::size_t lo = b * block_size;
            merge(work(b, lo, std::min(n_items, lo + block_size)));
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex m;
    std::map<std::size_t, R> parked; // finished out-of-order blocks
    std::size_t merged = 0;
    std::exception_ptr err;

    auto runner = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks || failed.load()) return;
            try {
                const std::size_t lo = b * block_size;
                R r = work(b, lo, std::min(n_items, lo + block_size));
                std::lock_guard<std::mutex> lock(m);
                parked.emplace(b, std::move(r));
                while (!parked.empty() && parked.begin()->first == merged) {
                    merge(std::move(parked.begin()->second));
                    parked.erase(parked.begin());
                    ++merged;
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(m);
                if (!err) err = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    const unsigned count =
        static_cast<unsigned>(std::min<std::size_t>(workers, n_blocks));
    pool.reserve(count);
    for (unsigned w = 0; w < count; ++w) pool.emplace_back(runner);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

} // namespace ottomech
