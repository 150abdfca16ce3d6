#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "preacc/eval.hpp"
#include "preacc/jacobian.hpp"
#include "preacc/json_io.hpp"
#include "preacc/report.hpp"
#include "preacc/verify.hpp"

using namespace preacc;

namespace {

// Restores the evaluation hook no matter how the test exits.
struct HookGuard {
  ~HookGuard() { testhooks::disable_lhs_reset.store(false); }
};

template <typename F>
std::string thrown_message(F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("benchmark CSV rows serialize in header order") {
  BenchRow a;
  a.strategy = "hash_map";
  a.workers = 2;
  a.chain_length = 64;
  a.n_inputs = 4;
  a.m_outputs = 2;
  a.shared_inputs = 1;
  a.padding = 10;
  a.record_ns = 100;
  a.preacc_ns = 200;
  a.eval_ns = 300;
  a.mem = StoreMemoryReport{1, 2, 3, 4, 5, 6, 7};
  BenchRow b;
  b.strategy = "shared_global";
  b.workers = 8;

  std::ostringstream os;
  const BenchRow rows[] = {a, b};
  write_bench_csv(os, rows);
  CHECK_EQ(os.str(),
           "strategy,T,L,n,m,s,padding,record_time_ns,preacc_time_ns,eval_time_ns,"
           "live_slots,peak_slots,modeled_bytes,allocation_events,map_ops,"
           "adjoint_accesses,lock_acquisitions\n"
           "hash_map,2,64,4,2,1,10,100,200,300,1,2,3,4,6,5,7\n"
           "shared_global,8,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0\n");
}

TEST_CASE("store report CSV rows serialize in header order") {
  std::vector<std::pair<std::string, StoreMemoryReport>> rows;
  rows.emplace_back("offset_vector", StoreMemoryReport{10, 20, 160, 1, 99, 0, 0});
  std::ostringstream os;
  write_store_report_csv(os, rows);
  CHECK_EQ(os.str(),
           "strategy,live_slots,peak_slots,modeled_bytes,allocation_events,access_count\n"
           "offset_vector,10,20,160,1,99\n");
}

TEST_CASE("Jacobian blocks dump seventeen significant digits") {
  JacobianBlock block({3, 4}, {9});
  block.at(0, 0) = 0.5;
  block.at(0, 1) = 1.0 / 3.0;
  CHECK_EQ(block.dump_csv(),
           "output_id,input_id,entry\n"
           "9,3,0.5\n"
           "9,4,0.33333333333333331\n");
}

TEST_CASE("workload specs round-trip through JSON") {
  WorkloadSpec spec;
  spec.workers = 3;
  spec.regions_per_worker = 5;
  spec.chain_length = 77;
  spec.n_inputs = 4;
  spec.m_outputs = 3;
  spec.shared_inputs = 2;
  spec.seed = 424242;
  spec.padding_statements = 1000;
  spec.op_mix[OpKind::div] = 0.25;
  spec.op_mix[OpKind::copy] = 0.0;

  const WorkloadSpec back = workload_spec_from_json(to_json(spec));
  CHECK(back == spec);
}

TEST_CASE("absent JSON fields keep their defaults") {
  const WorkloadSpec spec = workload_spec_from_json(nlohmann::json::parse(R"({"T": 3})"));
  WorkloadSpec expected;
  expected.workers = 3;
  CHECK(spec == expected);

  const WorkloadSpec mixed = workload_spec_from_json(
      nlohmann::json::parse(R"({"op_mix": {"sin": 2.5}})"));
  CHECK_EQ(mixed.op_mix[OpKind::sin], 2.5);
  CHECK_EQ(mixed.op_mix[OpKind::add], 1.0);  // unlisted ops keep weight 1
}

TEST_CASE("malformed workload JSON is rejected with a field diagnostic") {
  auto parse = [](const char* text) {
    return workload_spec_from_json(nlohmann::json::parse(text));
  };
  CHECK_THROWS_AS(parse(R"({"bogus": 1})"), std::invalid_argument);
  CHECK(thrown_message([&] { parse(R"({"bogus": 1})"); }).find("bogus") != std::string::npos);
  CHECK_THROWS_AS(parse(R"({"T": "two"})"), std::invalid_argument);
  CHECK_THROWS_AS(parse(R"({"op_mix": {"tan": 1.0}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse(R"([1, 2, 3])"), std::invalid_argument);
}

TEST_CASE("sweep configs round-trip through JSON") {
  const char* text = R"({
    "workload": {"T": 2, "chain_length": 16},
    "strategies": ["hash_map", "remap_ordered"],
    "worker_counts": [1, 2],
    "repetitions": 2
  })";
  const SweepConfig cfg = sweep_config_from_json(nlohmann::json::parse(text));
  CHECK_EQ(cfg.workload.workers, 2);
  CHECK_EQ(cfg.workload.chain_length, 16);
  CHECK_EQ(cfg.strategies,
           std::vector<Strategy>{Strategy::hash_map, Strategy::remap_ordered});
  CHECK_EQ(cfg.worker_counts, std::vector<std::uint32_t>{1, 2});
  CHECK_EQ(cfg.repetitions, 2);

  const SweepConfig back = sweep_config_from_json(to_json(cfg));
  CHECK(back.workload == cfg.workload);
  CHECK_EQ(back.strategies, cfg.strategies);
  CHECK_EQ(back.worker_counts, cfg.worker_counts);
  CHECK_EQ(back.repetitions, cfg.repetitions);

  CHECK_THROWS_AS(
      sweep_config_from_json(nlohmann::json::parse(R"({"strategies": ["warp_drive"]})")),
      std::invalid_argument);
}

TEST_CASE("sweep config validation rejects empty or degenerate sweeps") {
  SweepConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  SweepConfig bad = cfg;
  bad.strategies.clear();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.worker_counts = {1, 0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.repetitions = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("spec files load from disk and report open failures") {
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "preacc_interfaces_spec.json";
  {
    std::ofstream out(path);
    out << R"({"T": 2, "seed": 7})";
  }
  const WorkloadSpec spec = load_workload_spec(path.string());
  CHECK_EQ(spec.workers, 2);
  CHECK_EQ(spec.seed, 7);
  std::filesystem::remove(path);

  CHECK(thrown_message([&] { (void)load_workload_spec("/nonexistent/nope.json"); })
            .find("cannot open") != std::string::npos);
}

TEST_CASE("the self-check battery passes on the default configuration") {
  const std::vector<CheckResult> results = run_verify(default_verify_config());
  REQUIRE_EQ(results.size(), 5);
  for (const CheckResult& r : results) {
    CAPTURE(r.name);
    CAPTURE(r.detail);
    CHECK(r.passed);
  }
}

TEST_CASE("disabling the lhs reset leaves stale adjoints behind") {
  IdentifierCounter ids;
  Tape tape(ids);
  ActiveValue x = tape.register_input(0.7);
  const TapePosition body = tape.size();  // sweeps start after the registration
  ActiveValue a = tape.sin(x);
  ActiveValue y = tape.exp(a);

  auto sweep = [&] {
    FullLocalVector<false> store;
    store.ensure_size(ids.max_assigned());
    store.set(y.id(), 1.0);
    evaluate_reverse(tape, body, tape.size(), store);
    return std::pair{store.get(x.id()), store.get(a.id())};
  };

  const auto [gx, leftover] = sweep();
  CHECK_EQ(gx, doctest::Approx(std::exp(std::sin(0.7)) * std::cos(0.7)));
  CHECK_EQ(leftover, 0.0);  // lhs adjoints are consumed by the sweep

  HookGuard guard;
  testhooks::disable_lhs_reset.store(true);
  const auto [gx2, stale] = sweep();
  CHECK_EQ(gx2, gx);  // a single sweep still reads each lhs exactly once
  CHECK_EQ(stale, doctest::Approx(std::exp(std::sin(0.7))));
}

TEST_CASE("the self-check battery catches a broken lhs reset") {
  HookGuard guard;
  testhooks::disable_lhs_reset.store(true);
  const std::vector<CheckResult> results = run_verify(default_verify_config());
  REQUIRE_EQ(results.size(), 5);
  std::map<std::string, bool> by_name;
  for (const CheckResult& r : results) by_name[r.name] = r.passed;
  CHECK_FALSE(by_name.at("gradient"));
  CHECK_FALSE(by_name.at("adjoint-reset"));
  // Per-row range resets keep these two sound even without the lhs reset.
  CHECK(by_name.at("strategy-agreement"));
  CHECK(by_name.at("determinism"));
  CHECK(by_name.at("race-simulator"));
}
