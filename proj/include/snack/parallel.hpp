#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace snack::detail {

/// Calls body(i) for every i in [0, n) using up to @p threads workers.
/// Each index is handled exactly once; callers write only to slots owned by i,
/// so results never depend on the thread count.
template <typename Body>
void parallelFor(std::size_t n, std::size_t threads, Body&& body) {
	threads = std::max<std::size_t>(1, std::min(threads, n));
	if (threads == 1) {
		for (std::size_t i = 0; i < n; ++i)
			body(i);
		return;
	}
	std::vector<std::exception_ptr> errors(threads);
	std::vector<std::thread> pool;
	pool.reserve(threads);
	const std::size_t chunk = (n + threads - 1) / threads;
	for (std::size_t t = 0; t < threads; ++t) {
		pool.emplace_back([&, t] {
			try {
				const std::size_t end = std::min(n, (t + 1) * chunk);
				for (std::size_t i = t * chunk; i < end; ++i)
					body(i);
			} catch (...) {
				errors[t] = std::current_exception();
			}
		});
	}
	for (auto& th : pool)
		th.join();
	for (auto& e : errors) {
		if (e)
			std::rethrow_exception(e);
	}
}

} // namespace snack::detail
