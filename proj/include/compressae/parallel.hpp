// Copyright 2026-present the compressae project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace compressae {

/// Resolves a requested thread count: 0 means "use COMPRESSAE_THREADS or 1".
std::size_t resolve_threads(std::size_t requested);

/// Runs `body(task)` for task in [0, n_tasks) on up to `threads` workers.
/// Tasks are claimed in contiguous blocks; callers that need deterministic
/// results write into per-task slots and reduce in task order afterwards.
template <typename Body>
void parallel_for(std::size_t n_tasks, std::size_t threads, Body&& body) {
    threads = std::min(std::max<std::size_t>(threads, 1), n_tasks);
    if (threads <= 1) {
        for (std::size_t t = 0; t < n_tasks; ++t) body(t);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        workers.emplace_back([&, w] {
            const std::size_t begin = n_tasks * w / threads;
            const std::size_t end = n_tasks * (w + 1) / threads;
            try {
                for (std::size_t t = begin; t < end; ++t) body(t);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& worker : workers) worker.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace compressae
