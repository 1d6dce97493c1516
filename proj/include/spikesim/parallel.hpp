#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace spikesim {

/// Worker count from SPIKESIM_WORKERS, else hardware concurrency.
inline unsigned worker_count()
{
    if (const char *env = std::getenv("SPIKESIM_WORKERS"))
    {
        try
        {
            const int n = std::stoi(env);
            if (n >= 1)
            {
                return static_cast<unsigned>(n);
            }
        }
        catch (const std::exception &)
        {
        }
    }
    return std::max(1U, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n). Each index is handled exactly once; callers
/// write results into per-index slots so the outcome does not depend on the
/// schedule. The first exception thrown by any body is rethrown.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body,
        unsigned workers = worker_count())
{
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    if (workers <= 1)
    {
        for (std::size_t i = 0; i < n; ++i)
        {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
    {
        pool.emplace_back([&] {
            while (true)
            {
                const auto i = next.fetch_add(1);
                if (i >= n)
                {
                    return;
                }
                try
                {
                    body(i);
                }
                catch (...)
                {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                    {
                        failure = std::current_exception();
                    }
                    next.store(n);
                }
            }
        });
    }
    for (auto &t : pool)
    {
        t.join();
    }
    if (failure)
    {
        std::rethrow_exception(failure);
    }
}

} // namespace spikesim
