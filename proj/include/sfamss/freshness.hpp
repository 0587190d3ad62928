#pragma once

// Timestamp freshness and the replay cache. A timestamp is fresh iff
// |now - t_s| <= window (inclusive bound, symmetric in clock skew). Freshness
// alone admits replays inside the window, so the bank also remembers every
// (user_id, t_s) it has seen; entries age out once they can no longer pass
// the freshness check anyway.

#include <chrono>
#include <cstdint>
#include <functional>
#include <set>
#include <utility>

#include "sfamss/field.hpp"

namespace sfamss {

using Clock = std::function<std::uint64_t()>;  // ms since epoch

inline std::uint64_t system_clock_ms() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count());
}

inline Clock fixed_clock(std::uint64_t ms) {
  return [ms] { return ms; };
}

inline std::uint64_t abs_diff(std::uint64_t a, std::uint64_t b) { return a > b ? a - b : b - a; }

struct FreshnessPolicy {
  std::uint64_t window_ms = 30'000;
};

enum class Freshness { OK, STALE, REPLAY };

using ReplayKey = std::pair<std::uint64_t, std::uint64_t>;  // (user_id, t_s)

class ReplayCache {
 public:
  bool contains(const ReplayKey& k) const { return seen_.count(k) != 0; }

  void insert(const ReplayKey& k) { seen_.insert(k); }

  // Lazy eviction: anything older than the window would be rejected as stale
  // regardless, so it no longer needs to be remembered.
  void evict_expired(std::uint64_t now, std::uint64_t window_ms) {
    for (auto it = seen_.begin(); it != seen_.end();) {
      if (it->second + window_ms < now)
        it = seen_.erase(it);
      else
        ++it;
    }
  }

  std::size_t size() const { return seen_.size(); }

 private:
  std::set<ReplayKey> seen_;
};

inline Freshness check_freshness(const FreshnessPolicy& policy, std::uint64_t t_s,
                                 std::uint64_t now, const ReplayCache& cache,
                                 const ReplayKey& key) {
  if (abs_diff(now, t_s) > policy.window_ms) return Freshness::STALE;
  if (cache.contains(key)) return Freshness::REPLAY;
  return Freshness::OK;
}

}  // namespace sfamss
