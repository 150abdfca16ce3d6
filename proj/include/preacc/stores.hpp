#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <unordered_map>
#include <variant>
#include <vector>

#include "preacc/tape.hpp"

namespace preacc {

// Modeled per-slot byte costs used for memory accounting. Defaults: a dense
// slot is one double, an ordered-map entry is key + value + node links, a
// hash-map entry is key + value + bucket overhead.
struct MemoryCostModel {
  std::uint64_t dense_slot_bytes = 8;
  std::uint64_t ordered_map_entry_bytes = 48;
  std::uint64_t hash_map_entry_bytes = 24;
};

struct StoreMemoryReport {
  std::uint64_t live_slots = 0;
  std::uint64_t peak_slots = 0;
  std::uint64_t modeled_bytes = 0;
  std::uint64_t allocation_events = 0;
  std::uint64_t access_count = 0;
  std::uint64_t map_ops = 0;
  std::uint64_t lock_acquisitions = 0;

  // Merge a report of a store whose lifetime did not overlap this one (same
  // worker, one store after another): slot footprints take the max.
  void merge_sequential(const StoreMemoryReport& r) {
    live_slots = std::max(live_slots, r.live_slots);
    peak_slots = std::max(peak_slots, r.peak_slots);
    modeled_bytes = std::max(modeled_bytes, r.modeled_bytes);
    add_events(r);
  }

  // Merge a report of a store that was live at the same time (other workers):
  // slot footprints add up.
  void merge_concurrent(const StoreMemoryReport& r) {
    live_slots += r.live_slots;
    peak_slots += r.peak_slots;
    modeled_bytes += r.modeled_bytes;
    add_events(r);
  }

 private:
  void add_events(const StoreMemoryReport& r) {
    allocation_events += r.allocation_events;
    access_count += r.access_count;
    map_ops += r.map_ops;
    lock_acquisitions += r.lock_acquisitions;
  }
};

// Returned by local stores in place of a shared lock; acquiring it is free
// and is not counted.
struct NoGuard {};

namespace detail {

inline double atomic_load(const double& cell) {
  return std::atomic_ref<double>(const_cast<double&>(cell)).load(std::memory_order_relaxed);
}

inline void atomic_store(double& cell, double v) {
  std::atomic_ref<double>(cell).store(v, std::memory_order_relaxed);
}

inline double atomic_exchange(double& cell, double v) {
  return std::atomic_ref<double>(cell).exchange(v, std::memory_order_relaxed);
}

inline void atomic_cas_add(double& cell, double v) {
  std::atomic_ref<double> r(cell);
  double old = r.load(std::memory_order_relaxed);
  while (!r.compare_exchange_weak(old, old + v, std::memory_order_relaxed)) {
  }
}

}  // namespace detail

// Adjoint vector shared by all workers and indexed directly by identifier.
// A shared mutex separates evaluations (shared side, see evaluation_guard)
// from resizing (exclusive side, ensure_size). Cell reads and writes go
// through relaxed atomics; in plain mode add() is a non-atomic-read-modify-
// write pair, so concurrent updates can be lost, and concurrent
// preaccumulations over shared inputs contaminate each other's entries even
// in atomic mode. Local strategies exist to avoid exactly that.
//
// Counting=false compiles all instrumentation out for timing runs.
template <bool Counting = true>
class SharedAdjointVector {
 public:
  explicit SharedAdjointVector(bool atomic_add = false, MemoryCostModel model = {})
      : atomic_add_(atomic_add), model_(model) {
    count_alloc();
  }

  SharedAdjointVector(const SharedAdjointVector&) = delete;
  SharedAdjointVector& operator=(const SharedAdjointVector&) = delete;

  bool atomic_add() const { return atomic_add_; }

  // Grows the vector to hold identifiers up to max_id, zero-filling new
  // cells. Never shrinks. Takes the exclusive side of the resize guard.
  void ensure_size(Identifier max_id) {
    std::unique_lock lock(resize_guard_);
    count_lock();
    if (max_id + 1 > data_.size()) {
      data_.resize(max_id + 1, 0.0);
      count_alloc();
    }
  }

  // Shared-side guard; hold it for the duration of a sweep or any batch of
  // cell accesses so resizing cannot move the storage underneath.
  [[nodiscard]] std::shared_lock<std::shared_mutex> evaluation_guard() const {
    count_lock();
    return std::shared_lock(resize_guard_);
  }

  double get(Identifier id) const {
    count_access(1);
    return detail::atomic_load(cell(id));
  }

  double take(Identifier id) {
    count_access(1);
    if (atomic_add_) return detail::atomic_exchange(cell(id), 0.0);
    double& c = cell(id);
    const double v = detail::atomic_load(c);
    detail::atomic_store(c, 0.0);
    return v;
  }

  void set(Identifier id, double v) {
    count_access(1);
    detail::atomic_store(cell(id), v);
  }

  void add(Identifier id, double v) {
    count_access(2);
    double& c = cell(id);
    if (atomic_add_) {
      detail::atomic_cas_add(c, v);
    } else {
      detail::atomic_store(c, detail::atomic_load(c) + v);
    }
  }

  std::size_t size() const { return data_.size(); }

  StoreMemoryReport memory_report() const {
    StoreMemoryReport r;
    r.live_slots = data_.size();
    r.peak_slots = data_.size();  // never shrinks
    r.modeled_bytes = r.peak_slots * model_.dense_slot_bytes;
    if constexpr (Counting) {
      r.allocation_events = alloc_events_.load(std::memory_order_relaxed);
      r.access_count = accesses_.load(std::memory_order_relaxed);
      r.lock_acquisitions = lock_acquisitions_.load(std::memory_order_relaxed);
    }
    return r;
  }

 private:
  double& cell(Identifier id) const {
    if (id >= data_.size())
      throw std::out_of_range("shared adjoint vector: identifier beyond current size");
    return const_cast<double&>(data_[id]);
  }

  void count_access(std::uint64_t n) const {
    if constexpr (Counting) accesses_.fetch_add(n, std::memory_order_relaxed);
  }
  void count_lock() const {
    if constexpr (Counting) lock_acquisitions_.fetch_add(1, std::memory_order_relaxed);
  }
  void count_alloc() const {
    if constexpr (Counting) alloc_events_.fetch_add(1, std::memory_order_relaxed);
  }

  std::vector<double> data_;
  mutable std::shared_mutex resize_guard_;
  bool atomic_add_;
  MemoryCostModel model_;
  mutable std::atomic<std::uint64_t> accesses_{0};
  mutable std::atomic<std::uint64_t> lock_acquisitions_{0};
  mutable std::atomic<std::uint64_t> alloc_events_{0};
};

// Worker-private adjoint vector spanning all identifiers up to the counter
// maximum. No locks; persists across a worker's preaccumulations, so its cost
// is paid once but scales with the global identifier range.
template <bool Counting = true>
class FullLocalVector {
 public:
  explicit FullLocalVector(MemoryCostModel model = {}) : model_(model) { count_alloc(); }

  void ensure_size(Identifier max_id) {
    if (max_id + 1 > data_.size()) {
      data_.resize(max_id + 1, 0.0);
      count_alloc();
    }
  }

  NoGuard evaluation_guard() const { return {}; }

  double get(Identifier id) const {
    count_access(1);
    return at(id);
  }
  double take(Identifier id) {
    count_access(1);
    double& c = at(id);
    const double v = c;
    c = 0.0;
    return v;
  }
  void set(Identifier id, double v) {
    count_access(1);
    at(id) = v;
  }
  void add(Identifier id, double v) {
    count_access(2);
    at(id) += v;
  }

  std::size_t size() const { return data_.size(); }

  StoreMemoryReport memory_report() const {
    StoreMemoryReport r;
    r.live_slots = data_.size();
    r.peak_slots = data_.size();
    r.modeled_bytes = r.peak_slots * model_.dense_slot_bytes;
    if constexpr (Counting) {
      r.allocation_events = alloc_events_;
      r.access_count = accesses_;
    }
    return r;
  }

 private:
  double& at(Identifier id) const {
    if (id >= data_.size()) throw std::out_of_range("full local vector: identifier beyond size");
    return const_cast<double&>(data_[id]);
  }
  void count_access(std::uint64_t n) const {
    if constexpr (Counting) accesses_ += n;
  }
  void count_alloc() const {
    if constexpr (Counting) ++alloc_events_;
  }

  std::vector<double> data_;
  MemoryCostModel model_;
  mutable std::uint64_t accesses_ = 0;
  mutable std::uint64_t alloc_events_ = 0;
};

// Worker-private vector covering exactly the identifier window [min_id,
// max_id] of one region; cells are addressed relative to min_id. Access
// outside the window is a hard error rather than silent growth.
template <bool Counting = true>
class OffsetLocalVector {
 public:
  OffsetLocalVector(Identifier min_id, Identifier max_id, MemoryCostModel model = {})
      : min_(min_id), model_(model) {
    if (min_id > max_id) throw std::invalid_argument("offset local vector: min_id > max_id");
    data_.assign(static_cast<std::size_t>(max_id - min_id) + 1, 0.0);
    count_alloc();
  }

  NoGuard evaluation_guard() const { return {}; }

  Identifier min_id() const { return min_; }
  Identifier max_id() const { return min_ + data_.size() - 1; }

  double get(Identifier id) const {
    count_access(1);
    return at(id);
  }
  double take(Identifier id) {
    count_access(1);
    double& c = at(id);
    const double v = c;
    c = 0.0;
    return v;
  }
  void set(Identifier id, double v) {
    count_access(1);
    at(id) = v;
  }
  void add(Identifier id, double v) {
    count_access(2);
    at(id) += v;
  }

  std::size_t size() const { return data_.size(); }

  StoreMemoryReport memory_report() const {
    StoreMemoryReport r;
    r.live_slots = data_.size();
    r.peak_slots = data_.size();
    r.modeled_bytes = r.peak_slots * model_.dense_slot_bytes;
    if constexpr (Counting) {
      r.allocation_events = alloc_events_;
      r.access_count = accesses_;
    }
    return r;
  }

 private:
  double& at(Identifier id) const {
    if (id < min_ || id - min_ >= data_.size())
      throw std::out_of_range("offset local vector: identifier outside [min_id, max_id]");
    return const_cast<double&>(data_[id - min_]);
  }
  void count_access(std::uint64_t n) const {
    if constexpr (Counting) accesses_ += n;
  }
  void count_alloc() const {
    if constexpr (Counting) ++alloc_events_;
  }

  Identifier min_;
  std::vector<double> data_;
  MemoryCostModel model_;
  mutable std::uint64_t accesses_ = 0;
  mutable std::uint64_t alloc_events_ = 0;
};

namespace detail {

// Map-backed adjoint store. Absent identifiers read as zero without
// inserting; assigning an exact zero to an absent identifier is also a no-op,
// so only derivative-carrying cells occupy slots. take() zeroes the value but
// keeps the node live.
template <class Map, bool Counting>
class MapAdjointsBase {
 public:
  explicit MapAdjointsBase(std::uint64_t entry_bytes) : entry_bytes_(entry_bytes) {
    count_alloc();
  }

  NoGuard evaluation_guard() const { return {}; }

  double get(Identifier id) const {
    count(1, 1);
    auto it = map_.find(id);
    return it == map_.end() ? 0.0 : it->second;
  }

  double take(Identifier id) {
    count(1, 1);
    auto it = map_.find(id);
    if (it == map_.end()) return 0.0;
    const double v = it->second;
    it->second = 0.0;
    return v;
  }

  void set(Identifier id, double v) {
    count(1, 1);
    if (v == 0.0) {
      auto it = map_.find(id);
      if (it != map_.end()) it->second = 0.0;
      return;
    }
    auto [it, inserted] = map_.insert_or_assign(id, v);
    if (inserted) on_insert();
  }

  void add(Identifier id, double v) {
    count(2, 1);
    auto [it, inserted] = map_.try_emplace(id, 0.0);
    if (inserted) on_insert();
    it->second += v;
  }

  // Drops all entries but keeps the container for the next region
  // (clear-and-reuse mode). Not an allocation event.
  void clear_for_reuse() { map_.clear(); }

  std::size_t size() const { return map_.size(); }

  StoreMemoryReport memory_report() const {
    StoreMemoryReport r;
    r.live_slots = map_.size();
    r.peak_slots = std::max<std::uint64_t>(peak_, map_.size());
    r.modeled_bytes = r.peak_slots * entry_bytes_;
    if constexpr (Counting) {
      r.allocation_events = alloc_events_;
      r.access_count = accesses_;
      r.map_ops = map_ops_;
    }
    return r;
  }

 private:
  void on_insert() {
    count_alloc();
    peak_ = std::max<std::uint64_t>(peak_, map_.size());
  }
  void count(std::uint64_t accesses, std::uint64_t ops) const {
    if constexpr (Counting) {
      accesses_ += accesses;
      map_ops_ += ops;
    }
  }
  void count_alloc() {
    if constexpr (Counting) ++alloc_events_;
  }

  Map map_;
  std::uint64_t entry_bytes_;
  std::uint64_t peak_ = 0;
  mutable std::uint64_t accesses_ = 0;
  mutable std::uint64_t map_ops_ = 0;
  std::uint64_t alloc_events_ = 0;
};

}  // namespace detail

// Ordered-map store: O(log k) per access for k live entries, smallest
// constant memory proportional to the entries actually touched.
template <bool Counting = true>
class OrderedMapAdjoints : public detail::MapAdjointsBase<std::map<Identifier, double>, Counting> {
 public:
  explicit OrderedMapAdjoints(MemoryCostModel model = {})
      : detail::MapAdjointsBase<std::map<Identifier, double>, Counting>(
            model.ordered_map_entry_bytes) {}
};

// Hash-map store: O(1) average per access, entry overhead between the ordered
// map and the dense vectors.
template <bool Counting = true>
class HashMapAdjoints
    : public detail::MapAdjointsBase<std::unordered_map<Identifier, double>, Counting> {
 public:
  explicit HashMapAdjoints(MemoryCostModel model = {})
      : detail::MapAdjointsBase<std::unordered_map<Identifier, double>, Counting>(
            model.hash_map_entry_bytes) {}
};

enum class LocalStrategy { full_vector, offset_vector, ordered_map, hash_map };

// Identifier geometry of one region: the smallest and largest identifier it
// touches and the environment-wide counter maximum.
struct RegionIdInfo {
  Identifier min_id = 0;
  Identifier max_id = 0;
  Identifier i_max = 0;
};

using LocalStore = std::variant<FullLocalVector<true>, OffsetLocalVector<true>,
                                OrderedMapAdjoints<true>, HashMapAdjoints<true>>;

// Builds a worker-private store sized for the given region geometry.
// Throws std::invalid_argument when the geometry is inconsistent.
LocalStore make_local_store(LocalStrategy strategy, const RegionIdInfo& info,
                            MemoryCostModel model = {});

const char* to_string(LocalStrategy s);

}  // namespace preacc
