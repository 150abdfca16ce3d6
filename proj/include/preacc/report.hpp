#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "preacc/stores.hpp"

namespace preacc {

// One benchmark CSV row: workload shape, mean times of the uninstrumented
// repetitions, counters from the single instrumented pass.
struct BenchRow {
  std::string strategy;
  std::uint32_t workers = 0;
  std::uint32_t chain_length = 0;
  std::uint32_t n_inputs = 0;
  std::uint32_t m_outputs = 0;
  std::uint32_t shared_inputs = 0;
  std::uint64_t padding = 0;
  std::int64_t record_ns = 0;
  std::int64_t preacc_ns = 0;
  std::int64_t eval_ns = 0;
  StoreMemoryReport mem;
};

inline constexpr const char* kBenchCsvHeader =
    "strategy,T,L,n,m,s,padding,record_time_ns,preacc_time_ns,eval_time_ns,live_slots,"
    "peak_slots,modeled_bytes,allocation_events,map_ops,adjoint_accesses,lock_acquisitions";

void write_bench_csv(std::ostream& os, std::span<const BenchRow> rows);

inline constexpr const char* kStoreReportCsvHeader =
    "strategy,live_slots,peak_slots,modeled_bytes,allocation_events,access_count";

void write_store_report_csv(std::ostream& os,
                            std::span<const std::pair<std::string, StoreMemoryReport>> rows);

}  // namespace preacc
