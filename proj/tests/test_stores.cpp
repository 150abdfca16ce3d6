#include <cmath>
#include <map>
#include <thread>
#include <vector>

#include "doctest.h"
#include "preacc/rng.hpp"
#include "preacc/stores.hpp"

using namespace preacc;

TEST_CASE("fresh cells read zero and absent map entries stay absent") {
  SharedAdjointVector<true> shared;
  shared.ensure_size(10);
  FullLocalVector<true> full;
  full.ensure_size(10);
  OffsetLocalVector<true> offset(3, 10);
  OrderedMapAdjoints<true> ordered;
  HashMapAdjoints<true> hashed;

  {
    auto g = shared.evaluation_guard();
    CHECK_EQ(shared.get(7), 0.0);
  }
  CHECK_EQ(full.get(7), 0.0);
  CHECK_EQ(offset.get(7), 0.0);
  CHECK_EQ(ordered.get(7), 0.0);
  CHECK_EQ(hashed.get(999999), 0.0);

  // Reads and zero-writes do not materialize map entries.
  ordered.set(5, 0.0);
  hashed.set(5, 0.0);
  CHECK_EQ(ordered.size(), 0);
  CHECK_EQ(hashed.size(), 0);
  CHECK_EQ(ordered.memory_report().live_slots, 0);
  CHECK_EQ(hashed.memory_report().live_slots, 0);
}

TEST_CASE("set, add and take semantics agree across every store") {
  auto exercise = [](auto& store) {
    store.set(4, 1.5);
    store.add(4, 0.25);
    store.add(5, 2.0);
    CHECK_EQ(store.get(4), 1.75);
    CHECK_EQ(store.take(4), 1.75);
    CHECK_EQ(store.get(4), 0.0);   // take clears
    CHECK_EQ(store.take(4), 0.0);  // and is idempotent
    CHECK_EQ(store.get(5), 2.0);
  };

  SharedAdjointVector<true> shared_plain(false);
  shared_plain.ensure_size(8);
  {
    auto g = shared_plain.evaluation_guard();
    exercise(shared_plain);
  }
  SharedAdjointVector<true> shared_atomic(true);
  shared_atomic.ensure_size(8);
  {
    auto g = shared_atomic.evaluation_guard();
    exercise(shared_atomic);
  }
  FullLocalVector<true> full;
  full.ensure_size(8);
  exercise(full);
  OffsetLocalVector<true> offset(2, 8);
  exercise(offset);
  OrderedMapAdjoints<true> ordered;
  exercise(ordered);
  HashMapAdjoints<true> hashed;
  exercise(hashed);
}

TEST_CASE("shared vector growth and no-shrink") {
  SharedAdjointVector<true> shared;
  CHECK_EQ(shared.size(), 0);
  CHECK_THROWS_AS(shared.get(0), std::out_of_range);  // unsized access is an error

  shared.ensure_size(10);
  CHECK_EQ(shared.size(), 11);
  const auto grown = shared.memory_report();

  shared.ensure_size(5);  // never shrinks, no new allocation event
  CHECK_EQ(shared.size(), 11);
  const auto after = shared.memory_report();
  CHECK_EQ(after.live_slots, 11);
  CHECK_EQ(after.allocation_events, grown.allocation_events);

  shared.ensure_size(20);
  CHECK_EQ(shared.size(), 21);
  CHECK_EQ(shared.memory_report().allocation_events, grown.allocation_events + 1);
}

TEST_CASE("offset vector covers exactly its window and rejects the outside") {
  OffsetLocalVector<true> offset(5, 900);
  CHECK_EQ(offset.size(), 896);
  CHECK_EQ(offset.min_id(), 5);
  CHECK_EQ(offset.max_id(), 900);
  offset.set(5, 1.0);
  offset.set(900, 2.0);
  CHECK_EQ(offset.get(5), 1.0);
  CHECK_EQ(offset.get(900), 2.0);
  CHECK_THROWS_AS(offset.get(4), std::out_of_range);
  CHECK_THROWS_AS(offset.set(901, 1.0), std::out_of_range);
  CHECK_THROWS_AS((OffsetLocalVector<true>(9, 3)), std::invalid_argument);
}

TEST_CASE("make_local_store sizes stores from the region geometry") {
  RegionIdInfo info{5, 900, 1000};

  LocalStore offset = make_local_store(LocalStrategy::offset_vector, info);
  CHECK_EQ(std::visit([](const auto& s) { return s.size(); }, offset), 896);

  LocalStore full = make_local_store(LocalStrategy::full_vector, info);
  CHECK_EQ(std::visit([](const auto& s) { return s.size(); }, full), 1001);

  LocalStore hashed = make_local_store(LocalStrategy::hash_map, info);
  CHECK_EQ(std::visit([](const auto& s) { return s.size(); }, hashed), 0);
  LocalStore ordered = make_local_store(LocalStrategy::ordered_map, info);
  CHECK_EQ(std::visit([](const auto& s) { return s.size(); }, ordered), 0);

  CHECK_THROWS_AS(make_local_store(LocalStrategy::offset_vector, RegionIdInfo{0, 900, 1000}),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_local_store(LocalStrategy::offset_vector, RegionIdInfo{10, 9, 1000}),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_local_store(LocalStrategy::offset_vector, RegionIdInfo{5, 1200, 1000}),
                  std::invalid_argument);
}

TEST_CASE("modeled bytes follow the cost model") {
  SUBCASE("ordered map: three touched identifiers at 48 bytes each") {
    OrderedMapAdjoints<true> store;
    store.add(3, 1.0);
    store.add(900, 2.0);
    store.add(77, 3.0);
    const auto r = store.memory_report();
    CHECK_EQ(r.live_slots, 3);
    CHECK_EQ(r.peak_slots, 3);
    CHECK_EQ(r.modeled_bytes, 144);
  }
  SUBCASE("hash map: three touched identifiers at 24 bytes each") {
    HashMapAdjoints<true> store;
    store.add(3, 1.0);
    store.add(1000000, 2.0);
    store.add(77, 3.0);
    CHECK_EQ(store.memory_report().modeled_bytes, 72);
  }
  SUBCASE("full vector for a million identifiers") {
    FullLocalVector<true> store;
    store.ensure_size(1000000);
    CHECK_EQ(store.memory_report().modeled_bytes, 8000008u);
  }
  SUBCASE("cost model override") {
    MemoryCostModel model{4, 10, 6};
    OrderedMapAdjoints<true> ordered(model);
    ordered.add(1, 1.0);
    ordered.add(2, 1.0);
    ordered.add(3, 1.0);
    CHECK_EQ(ordered.memory_report().modeled_bytes, 30);
    HashMapAdjoints<true> hashed(model);
    hashed.add(1, 1.0);
    CHECK_EQ(hashed.memory_report().modeled_bytes, 6);
    OffsetLocalVector<true> offset(1, 4, model);
    CHECK_EQ(offset.memory_report().modeled_bytes, 16);
  }
}

TEST_CASE("map peak survives take but counts every fresh node") {
  HashMapAdjoints<true> store;
  store.add(1, 1.0);
  store.add(2, 1.0);
  (void)store.take(1);
  (void)store.take(2);
  CHECK_EQ(store.size(), 2);  // nodes stay live, values are zero
  store.clear_for_reuse();
  CHECK_EQ(store.size(), 0);
  const auto cleared = store.memory_report();
  CHECK_EQ(cleared.live_slots, 0);
  CHECK_EQ(cleared.peak_slots, 2);
  // Re-populating after the clear allocates fresh nodes.
  store.add(3, 1.0);
  CHECK_EQ(store.memory_report().allocation_events, cleared.allocation_events + 1);
}

namespace {

// Replays one operation trace against a store; ops and operands are drawn
// deterministically so every store sees the identical sequence.
template <class Store>
StoreMemoryReport replay_trace(Store& store, std::uint64_t seed, Identifier lo, Identifier hi,
                               std::map<Identifier, double>* model = nullptr) {
  SplitMix64 rng(seed);
  auto model_at = [&](Identifier id) -> double& { return (*model)[id]; };
  for (int op = 0; op < 4000; ++op) {
    const Identifier id = lo + rng.next_below(hi - lo + 1);
    const double v = rng.next_in(-2.0, 2.0);
    switch (rng.next_below(4)) {
      case 0:
        store.set(id, v);
        if (model) model_at(id) = v;
        break;
      case 1:
        store.add(id, v);
        if (model) model_at(id) += v;
        break;
      case 2: {
        const double got = store.take(id);
        if (model) {
          CHECK_EQ(got, model_at(id));
          model_at(id) = 0.0;
        }
        break;
      }
      default:
        if (model) CHECK_EQ(store.get(id), model_at(id));
        else (void)store.get(id);
        break;
    }
  }
  return store.memory_report();
}

}  // namespace

TEST_CASE("every store replays the same trace to the same cell values") {
  constexpr Identifier kLo = 100, kHi = 160;
  constexpr std::uint64_t kSeed = 2024;

  std::map<Identifier, double> model;
  SharedAdjointVector<true> shared_plain(false);
  shared_plain.ensure_size(kHi);
  StoreMemoryReport rep_shared;
  {
    auto g = shared_plain.evaluation_guard();
    rep_shared = replay_trace(shared_plain, kSeed, kLo, kHi, &model);
  }

  SharedAdjointVector<true> shared_atomic(true);
  shared_atomic.ensure_size(kHi);
  FullLocalVector<true> full;
  full.ensure_size(kHi);
  OffsetLocalVector<true> offset(kLo, kHi);
  OrderedMapAdjoints<true> ordered;
  HashMapAdjoints<true> hashed;

  StoreMemoryReport rep_atomic, rep_full, rep_offset, rep_ordered, rep_hashed;
  {
    auto g = shared_atomic.evaluation_guard();
    rep_atomic = replay_trace(shared_atomic, kSeed, kLo, kHi);
  }
  rep_full = replay_trace(full, kSeed, kLo, kHi);
  rep_offset = replay_trace(offset, kSeed, kLo, kHi);
  rep_ordered = replay_trace(ordered, kSeed, kLo, kHi);
  rep_hashed = replay_trace(hashed, kSeed, kLo, kHi);

  for (Identifier id = kLo; id <= kHi; ++id) {
    const double want = model.count(id) ? model.at(id) : 0.0;
    CHECK_EQ(shared_atomic.get(id), want);
    CHECK_EQ(full.get(id), want);
    CHECK_EQ(offset.get(id), want);
    CHECK_EQ(ordered.get(id), want);
    CHECK_EQ(hashed.get(id), want);
  }

  // The access-count convention (get/set/take 1, add 2) is store-independent.
  CHECK_EQ(rep_shared.access_count, rep_atomic.access_count);
  CHECK_EQ(rep_shared.access_count, rep_full.access_count);
  CHECK_EQ(rep_shared.access_count, rep_offset.access_count);
  CHECK_EQ(rep_shared.access_count, rep_ordered.access_count);
  CHECK_EQ(rep_shared.access_count, rep_hashed.access_count);

  // Only map stores pay per-operation container work.
  CHECK_EQ(rep_shared.map_ops, 0);
  CHECK_EQ(rep_full.map_ops, 0);
  CHECK_EQ(rep_offset.map_ops, 0);
  CHECK_EQ(rep_ordered.map_ops, 4000);
  CHECK_EQ(rep_hashed.map_ops, 4000);

  // Dense local stores never touch a lock; the shared vector counted its
  // guard and its resize.
  CHECK_EQ(rep_full.lock_acquisitions, 0);
  CHECK_EQ(rep_offset.lock_acquisitions, 0);
  CHECK_EQ(rep_ordered.lock_acquisitions, 0);
  CHECK_EQ(rep_shared.lock_acquisitions, 2);
}

TEST_CASE("atomic add does not lose concurrent updates") {
  constexpr int kThreads = 4;
  constexpr int kAdds = 20000;
  SharedAdjointVector<true> store(true);
  store.ensure_size(4);

  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t)
    threads.emplace_back([&store] {
      auto g = store.evaluation_guard();
      for (int i = 0; i < kAdds; ++i) store.add(2, 1.0);
    });
  for (auto& t : threads) t.join();

  auto g = store.evaluation_guard();
  CHECK_EQ(store.get(2), double(kThreads * kAdds));
}

TEST_CASE("plain mode keeps racing adds well-defined but possibly lossy") {
  constexpr int kThreads = 4;
  constexpr int kAdds = 20000;
  SharedAdjointVector<true> store(false);
  store.ensure_size(4);

  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t)
    threads.emplace_back([&store] {
      auto g = store.evaluation_guard();
      for (int i = 0; i < kAdds; ++i) store.add(2, 1.0);
    });
  for (auto& t : threads) t.join();

  auto g = store.evaluation_guard();
  const double v = store.get(2);
  CHECK_GT(v, 0.0);  // no torn or garbage value, only lost increments
  CHECK_LE(v, double(kThreads * kAdds));
}

TEST_CASE("resizing is safe against concurrent guarded access") {
  SharedAdjointVector<true> store;
  store.ensure_size(63);

  std::thread grower([&store] {
    for (Identifier top = 64; top <= 63 + 4096; ++top) store.ensure_size(top);
  });
  std::thread writer([&store] {
    for (int round = 0; round < 2000; ++round) {
      auto g = store.evaluation_guard();
      store.add(7, 1.0);
      (void)store.get(7);
    }
  });
  grower.join();
  writer.join();

  CHECK_EQ(store.size(), 63 + 4096 + 1);
  auto g = store.evaluation_guard();
  CHECK_EQ(store.get(7), 2000.0);
}

TEST_CASE("report merging distinguishes sequential from concurrent lifetimes") {
  StoreMemoryReport a;
  a.live_slots = 10;
  a.peak_slots = 12;
  a.modeled_bytes = 96;
  a.allocation_events = 3;
  a.access_count = 100;
  a.map_ops = 7;
  a.lock_acquisitions = 1;
  StoreMemoryReport b = a;
  b.live_slots = 4;
  b.peak_slots = 30;
  b.modeled_bytes = 240;

  StoreMemoryReport seq = a;
  seq.merge_sequential(b);
  CHECK_EQ(seq.live_slots, 10);     // max
  CHECK_EQ(seq.peak_slots, 30);     // max
  CHECK_EQ(seq.modeled_bytes, 240); // max
  CHECK_EQ(seq.allocation_events, 6);
  CHECK_EQ(seq.access_count, 200);
  CHECK_EQ(seq.map_ops, 14);
  CHECK_EQ(seq.lock_acquisitions, 2);

  StoreMemoryReport con = a;
  con.merge_concurrent(b);
  CHECK_EQ(con.live_slots, 14);      // sum
  CHECK_EQ(con.peak_slots, 42);      // sum
  CHECK_EQ(con.modeled_bytes, 336);  // sum
  CHECK_EQ(con.allocation_events, 6);
}

TEST_CASE("instrumentation compiles out when Counting is false") {
  FullLocalVector<false> store;
  store.ensure_size(8);
  store.set(1, 2.0);
  store.add(1, 1.0);
  (void)store.take(1);
  const auto r = store.memory_report();
  CHECK_EQ(r.access_count, 0);
  CHECK_EQ(r.allocation_events, 0);
  CHECK_EQ(r.live_slots, 9);  // footprint stays observable
}
