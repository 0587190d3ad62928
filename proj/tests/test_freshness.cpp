#include <catch2/catch.hpp>

#include "sfamss/freshness.hpp"

using namespace sfamss;

TEST_CASE("freshness window bound is inclusive and symmetric", "[freshness]") {
  FreshnessPolicy policy{30'000};
  ReplayCache cache;
  std::uint64_t now = 1'000'000;

  CHECK(check_freshness(policy, now - 30'000, now, cache, {1, now - 30'000}) == Freshness::OK);
  CHECK(check_freshness(policy, now - 30'001, now, cache, {1, now - 30'001}) == Freshness::STALE);
  CHECK(check_freshness(policy, now, now, cache, {1, now}) == Freshness::OK);
  // clock skew: timestamps from the future are treated the same way
  CHECK(check_freshness(policy, now + 30'000, now, cache, {1, now + 30'000}) == Freshness::OK);
  CHECK(check_freshness(policy, now + 30'001, now, cache, {1, now + 30'001}) == Freshness::STALE);
}

TEST_CASE("replay cache flags repeated keys", "[freshness]") {
  FreshnessPolicy policy{30'000};
  ReplayCache cache;
  std::uint64_t now = 500'000;
  ReplayKey key{9, now};

  CHECK(check_freshness(policy, now, now, cache, key) == Freshness::OK);
  cache.insert(key);
  CHECK(check_freshness(policy, now, now, cache, key) == Freshness::REPLAY);

  // same user, different timestamp is a different key
  CHECK(check_freshness(policy, now + 1, now, cache, {9, now + 1}) == Freshness::OK);
  // different user, same timestamp too
  CHECK(check_freshness(policy, now, now, cache, {10, now}) == Freshness::OK);
}

TEST_CASE("expired entries are evictable", "[freshness]") {
  ReplayCache cache;
  cache.insert({1, 1000});
  cache.insert({2, 5000});
  cache.insert({3, 90'000});
  REQUIRE(cache.size() == 3);

  cache.evict_expired(100'000, 30'000);
  CHECK(cache.size() == 1);
  CHECK(cache.contains({3, 90'000}));
  CHECK_FALSE(cache.contains({1, 1000}));
}

TEST_CASE("stale takes precedence over replay", "[freshness]") {
  FreshnessPolicy policy{1000};
  ReplayCache cache;
  ReplayKey key{4, 100};
  cache.insert(key);
  CHECK(check_freshness(policy, 100, 10'000, cache, key) == Freshness::STALE);
}
