#include "preacc/report.hpp"

#include <ostream>

namespace preacc {

void write_bench_csv(std::ostream& os, std::span<const BenchRow> rows) {
  os << kBenchCsvHeader << '\n';
  for (const BenchRow& r : rows) {
    os << r.strategy << ',' << r.workers << ',' << r.chain_length << ',' << r.n_inputs << ','
       << r.m_outputs << ',' << r.shared_inputs << ',' << r.padding << ',' << r.record_ns << ','
       << r.preacc_ns << ',' << r.eval_ns << ',' << r.mem.live_slots << ',' << r.mem.peak_slots
       << ',' << r.mem.modeled_bytes << ',' << r.mem.allocation_events << ',' << r.mem.map_ops
       << ',' << r.mem.access_count << ',' << r.mem.lock_acquisitions << '\n';
  }
}

void write_store_report_csv(std::ostream& os,
                            std::span<const std::pair<std::string, StoreMemoryReport>> rows) {
  os << kStoreReportCsvHeader << '\n';
  for (const auto& [name, mem] : rows) {
    os << name << ',' << mem.live_slots << ',' << mem.peak_slots << ',' << mem.modeled_bytes << ','
       << mem.allocation_events << ',' << mem.access_count << '\n';
  }
}

}  // namespace preacc
