#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace fedauc {

enum class Execution { kSerial, kParallel };

// Runs fn(i) for i in [0, n). Parallel mode gives each call its own thread;
// callers write results into slot i so the reduction order stays fixed.
template <typename Fn>
void for_each_client(Execution exec, std::size_t n, Fn&& fn) {
  if (exec == Execution::kSerial || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> workers;
    workers.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      workers.emplace_back([&, i] {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace fedauc
