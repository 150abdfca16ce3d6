#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "preacc/eval.hpp"
#include "preacc/json_io.hpp"
#include "preacc/race.hpp"
#include "preacc/report.hpp"
#include "preacc/verify.hpp"
#include "preacc/workload.hpp"

namespace {

int cmd_verify(const std::string& config_path) {
  preacc::SweepConfig config =
      config_path.empty() ? preacc::default_verify_config() : preacc::load_sweep_config(config_path);
  bool all = true;
  for (const preacc::CheckResult& r : preacc::run_verify(config)) {
    std::printf("[%s] %-19s %s\n", r.passed ? "PASS" : "FAIL", (r.name + ":").c_str(),
                r.detail.c_str());
    all = all && r.passed;
  }
  std::printf("%s\n", all ? "all checks passed" : "CHECKS FAILED");
  return all ? 0 : 1;
}

int cmd_bench(const std::string& config_path, const std::string& out_path) {
  preacc::SweepConfig config = preacc::load_sweep_config(config_path);
  std::vector<std::uint32_t> counts = config.worker_counts;
  std::sort(counts.begin(), counts.end());

  std::vector<preacc::BenchRow> rows;
  for (preacc::Strategy strategy : config.strategies) {
    for (std::uint32_t workers : counts) {
      preacc::WorkloadSpec spec = config.workload;
      spec.workers = workers;
      preacc::MeasureResult m = preacc::measure(spec, strategy, config.repetitions);
      preacc::BenchRow row;
      row.strategy = preacc::to_string(strategy);
      row.workers = spec.workers;
      row.chain_length = spec.chain_length;
      row.n_inputs = spec.n_inputs;
      row.m_outputs = spec.m_outputs;
      row.shared_inputs = spec.shared_inputs;
      row.padding = spec.padding_statements;
      row.record_ns = m.record.mean_ns;
      row.preacc_ns = m.preacc.mean_ns;
      row.eval_ns = m.eval.mean_ns;
      row.mem = m.counted.totals;
      rows.push_back(std::move(row));
      std::printf("bench %-21s T=%-3u preacc=%lldns peak_slots=%llu\n",
                  preacc::to_string(strategy), workers,
                  static_cast<long long>(m.preacc.mean_ns),
                  static_cast<unsigned long long>(m.counted.totals.peak_slots));
    }
  }

  std::ofstream out(out_path);
  if (!out) {
    std::fprintf(stderr, "error: cannot open '%s' for writing\n", out_path.c_str());
    return 1;
  }
  preacc::write_bench_csv(out, rows);
  std::printf("wrote %zu rows to %s\n", rows.size(), out_path.c_str());
  return 0;
}

std::string fmt_row(const std::vector<double>& row) {
  std::string s = "(";
  char buf[32];
  for (std::size_t i = 0; i < row.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.1f", i ? ", " : "", row[i]);
    s += buf;
  }
  return s + ")";
}

void print_trace(const char* title, const preacc::RaceTrace& trace) {
  std::printf("--- %s ---\n", title);
  for (const std::string& line : trace.step_log) std::printf("  %s\n", line.c_str());
  for (int t = 0; t < 2; ++t)
    std::printf("  region %d harvested %s, clean run gives %s\n", t,
                fmt_row(trace.outcome.harvested[t]).c_str(),
                fmt_row(trace.outcome.expected[t]).c_str());
  std::printf("  first harvest of the shared input saw %.1f -> %s\n",
              trace.outcome.shared_cell_at_first_harvest,
              trace.outcome.contaminated ? "contaminated" : "correct");
}

int cmd_race_demo(std::uint64_t seed, bool enumerate) {
  preacc::RaceDemoSetup demo = preacc::make_race_demo();
  preacc::RaceSimulator sim(demo.regions[0], demo.regions[1], demo.shared_input);

  std::printf("two workers preaccumulate w_t = c_t * u, t in {0,1}, against one shared input u\n");
  std::printf("c = (2.0, 5.0); each reverse sweep adds c_t to u's adjoint slot, each harvest\n");
  std::printf("reads it. With one shared adjoint vector the slot is the same for both.\n\n");

  const std::vector<int> schedule = sim.schedule_from_seed(seed);
  std::string order;
  for (int r : schedule) order += r == 0 ? " 0" : " 1";
  std::printf("schedule from seed %llu (region per step):%s\n",
              static_cast<unsigned long long>(seed), order.c_str());
  print_trace("one adjoint vector shared by both workers (shared_global)",
              sim.run(preacc::Strategy::shared_global, schedule));
  print_trace("one private map per worker (hash_map)",
              sim.run(preacc::Strategy::hash_map, schedule));

  if (enumerate) {
    const auto schedules = sim.all_interleavings();
    std::printf("\nenumerating all %zu interleavings of the %zu steps:\n", schedules.size(),
                sim.total_steps());
    for (preacc::Strategy s : preacc::kAllStrategies) {
      std::size_t bad = 0;
      for (const auto& sched : schedules)
        if (sim.run(s, sched).outcome.contaminated) ++bad;
      std::printf("  %-21s contaminated in %zu/%zu\n", preacc::to_string(s), bad,
                  schedules.size());
    }
  }

  const std::vector<int> overlapped = sim.canonical_overlapped_schedule();
  preacc::RaceTrace shared_trace = sim.run(preacc::Strategy::shared_global, overlapped);
  preacc::RaceTrace local_trace = sim.run(preacc::Strategy::hash_map, overlapped);
  std::printf("\nwith both sweeps scheduled before either harvest:\n");
  std::printf("shared: u_adj = %.1f (%s); local: (%.1f, %.1f) (%s)\n",
              shared_trace.outcome.shared_cell_at_first_harvest,
              shared_trace.outcome.contaminated ? "contaminated" : "correct",
              local_trace.outcome.harvested[0][0], local_trace.outcome.harvested[1][0],
              local_trace.outcome.contaminated ? "contaminated" : "correct");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* env = std::getenv("PREACC_TEST_DISABLE_LHS_RESET");
      env && *env && std::strcmp(env, "0") != 0)
    preacc::testhooks::disable_lhs_reset.store(true);

  CLI::App app{"Tape preaccumulation workbench: self-checks, adjoint-storage benchmarks, and a "
               "deterministic data-race demonstration."};
  app.require_subcommand(1);

  std::string verify_config;
  CLI::App* verify = app.add_subcommand("verify", "run the deterministic self-checks");
  verify->add_option("--config", verify_config, "sweep config JSON (defaults to built-in)");

  std::string bench_config, bench_out;
  CLI::App* bench = app.add_subcommand("bench", "sweep strategies x worker counts, write CSV");
  bench->add_option("--config", bench_config, "sweep config JSON")->required();
  bench->add_option("--out", bench_out, "output CSV path")->required();

  std::uint64_t seed = 1;
  bool enumerate = false;
  CLI::App* race = app.add_subcommand("race-demo", "replay the two-region interleaving demo");
  race->add_option("--seed", seed, "seed for the replayed interleaving");
  race->add_flag("--enumerate", enumerate, "also tally contamination over all interleavings");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(verify)) return cmd_verify(verify_config);
    if (app.got_subcommand(bench)) return cmd_bench(bench_config, bench_out);
    if (app.got_subcommand(race)) return cmd_race_demo(seed, enumerate);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
