#pragma once

#include <thread>

#include "actguard/error.hpp"

namespace actguard {

template <typename F>
auto with_retries(const RetryPolicy& policy, F&& op) -> decltype(op()) {
  auto delay = policy.base_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      return op();
    } catch (const Error& e) {
      if (!e.retryable() || attempt >= policy.max_attempts) throw;
    }
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * policy.multiplier));
  }
}

}  // namespace actguard
