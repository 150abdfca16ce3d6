#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <vector>

#include "preacc/json_io.hpp"
#include "preacc/race.hpp"
#include "preacc/region.hpp"
#include "preacc/rng.hpp"
#include "preacc/verify.hpp"
#include "preacc/workload.hpp"

namespace py = pybind11;
using namespace preacc;

namespace {

// One-call preaccumulation: builds the per-call context (and, for the shared
// strategies, a throwaway shared vector) that long-lived C++ callers manage
// themselves.
JacobianBlock py_finish(PreaccRegion& region, Strategy strategy, SweepMode mode, bool validate,
                        bool reuse_map_stores) {
  PreaccOptions opts;
  opts.strategy = strategy;
  opts.mode = mode;
  opts.validate = validate;
  opts.reuse_map_stores = reuse_map_stores;
  PreaccContext<false> ctx(region.tape().ids());
  SharedAdjointVector<false> shared(strategy == Strategy::shared_global_atomic);
  if (!is_local(strategy)) ctx.attach_shared(&shared);
  return finish(region, opts, ctx);
}

// The simulator copies region snapshots, so it outlives the demo recording.
RaceSimulator make_demo_simulator(double c0, double c1) {
  RaceDemoSetup demo = make_race_demo(c0, c1);
  return RaceSimulator(demo.regions[0], demo.regions[1], demo.shared_input);
}

RegionBlueprint py_generate_blueprint(std::uint32_t n_inputs, std::uint32_t m_outputs,
                                      std::uint32_t length, const OpMix& mix,
                                      std::uint64_t seed) {
  SplitMix64 rng(seed);
  return RegionBlueprint::generate(n_inputs, m_outputs, length, mix, rng);
}

std::vector<std::vector<double>> block_entries(const JacobianBlock& b) {
  std::vector<std::vector<double>> rows(b.rows(), std::vector<double>(b.cols()));
  for (std::size_t j = 0; j < b.rows(); ++j)
    for (std::size_t i = 0; i < b.cols(); ++i) rows[j][i] = b.at(j, i);
  return rows;
}

}  // namespace

PYBIND11_MODULE(_preacc, m) {
  m.doc() = "Tape-based reverse-mode differentiation with parallel Jacobian preaccumulation";
  m.attr("__version__") = "0.1.0";
  m.attr("PASSIVE_ID") = kPassiveId;

  py::register_exception<RecordingError>(m, "RecordingError", PyExc_RuntimeError);

  py::enum_<Strategy>(m, "Strategy")
      .value("shared_global", Strategy::shared_global)
      .value("shared_global_atomic", Strategy::shared_global_atomic)
      .value("full_vector", Strategy::full_vector)
      .value("offset_vector", Strategy::offset_vector)
      .value("ordered_map", Strategy::ordered_map)
      .value("hash_map", Strategy::hash_map)
      .value("remap_ordered", Strategy::remap_ordered)
      .value("remap_hashed", Strategy::remap_hashed);
  m.def("is_local", &is_local, py::arg("strategy"),
        "Whether the strategy uses worker-private adjoint storage");
  m.def("all_strategies", [] {
    return std::vector<Strategy>(std::begin(kAllStrategies), std::end(kAllStrategies));
  });

  py::enum_<SweepMode>(m, "SweepMode")
      .value("automatic", SweepMode::automatic)
      .value("forward", SweepMode::forward)
      .value("reverse", SweepMode::reverse);

  py::enum_<OpKind>(m, "OpKind")
      .value("add", OpKind::add)
      .value("sub", OpKind::sub)
      .value("mul", OpKind::mul)
      .value("div", OpKind::div)
      .value("sin", OpKind::sin)
      .value("cos", OpKind::cos)
      .value("exp", OpKind::exp)
      .value("log", OpKind::log)
      .value("copy", OpKind::copy);

  py::class_<IdentifierCounter>(m, "IdentifierCounter",
                                "Monotone identifier source shared by the tapes of one "
                                "recording environment")
      .def(py::init<>())
      .def_property_readonly("max_assigned", &IdentifierCounter::max_assigned);

  py::class_<ActiveValue>(m, "ActiveValue")
      .def(py::init<double>(), py::arg("value"))
      .def_property_readonly("value", &ActiveValue::value)
      .def_property_readonly("id", &ActiveValue::id)
      .def_property_readonly("active", &ActiveValue::active)
      .def("__repr__",
           [](const ActiveValue& v) {
             return "ActiveValue(value=" + std::to_string(v.value()) +
                    ", id=" + std::to_string(v.id()) + ")";
           })
      .def(
          "__add__", [](const ActiveValue& a, const ActiveValue& b) { return a + b; },
          py::keep_alive<0, 1>(), py::keep_alive<0, 2>())
      .def(
          "__radd__", [](const ActiveValue& a, double b) { return ActiveValue(b) + a; },
          py::keep_alive<0, 1>())
      .def(
          "__sub__", [](const ActiveValue& a, const ActiveValue& b) { return a - b; },
          py::keep_alive<0, 1>(), py::keep_alive<0, 2>())
      .def(
          "__rsub__", [](const ActiveValue& a, double b) { return ActiveValue(b) - a; },
          py::keep_alive<0, 1>())
      .def(
          "__mul__", [](const ActiveValue& a, const ActiveValue& b) { return a * b; },
          py::keep_alive<0, 1>(), py::keep_alive<0, 2>())
      .def(
          "__rmul__", [](const ActiveValue& a, double b) { return ActiveValue(b) * a; },
          py::keep_alive<0, 1>())
      .def(
          "__truediv__", [](const ActiveValue& a, const ActiveValue& b) { return a / b; },
          py::keep_alive<0, 1>(), py::keep_alive<0, 2>())
      .def(
          "__rtruediv__", [](const ActiveValue& a, double b) { return ActiveValue(b) / a; },
          py::keep_alive<0, 1>());
  py::implicitly_convertible<double, ActiveValue>();

  m.def(
      "sin", [](const ActiveValue& u) { return sin(u); }, py::keep_alive<0, 1>());
  m.def(
      "cos", [](const ActiveValue& u) { return cos(u); }, py::keep_alive<0, 1>());
  m.def(
      "exp", [](const ActiveValue& u) { return exp(u); }, py::keep_alive<0, 1>());
  m.def(
      "log", [](const ActiveValue& u) { return log(u); }, py::keep_alive<0, 1>());
  m.def(
      "copy_of", [](const ActiveValue& u) { return copy_of(u); }, py::keep_alive<0, 1>());

  py::class_<Tape>(m, "Tape")
      .def(py::init<IdentifierCounter&, int>(), py::arg("ids"), py::arg("owner") = 0,
           py::keep_alive<1, 2>())
      .def_property_readonly("owner", &Tape::owner)
      .def_property_readonly("size", &Tape::size)
      .def_property_readonly("position", &Tape::position)
      .def_property_readonly("argument_count", &Tape::argument_count)
      .def_property_readonly("recording", &Tape::recording)
      .def("set_recording", &Tape::set_recording)
      .def("register_input", &Tape::register_input, py::arg("value"), py::keep_alive<0, 1>())
      .def("add", &Tape::add, py::keep_alive<0, 1>())
      .def("sub", &Tape::sub, py::keep_alive<0, 1>())
      .def("mul", &Tape::mul, py::keep_alive<0, 1>())
      .def("div", &Tape::div, py::keep_alive<0, 1>())
      .def("sin", &Tape::sin, py::keep_alive<0, 1>())
      .def("cos", &Tape::cos, py::keep_alive<0, 1>())
      .def("exp", &Tape::exp, py::keep_alive<0, 1>())
      .def("log", &Tape::log, py::keep_alive<0, 1>())
      .def("copy", &Tape::copy, py::keep_alive<0, 1>())
      .def("recorded_bytes", &Tape::recorded_bytes, py::arg("begin"), py::arg("end"))
      .def(
          "dump",
          [](const Tape& t, TapePosition begin, TapePosition end) { return t.dump(begin, end); },
          py::arg("begin"), py::arg("end"),
          "One statement per line: 'lhs <- (partial,rhs) ...'")
      .def("dump", [](const Tape& t) { return t.dump(0, t.size()); });

  py::class_<JacobianBlock>(m, "JacobianBlock")
      .def_property_readonly("rows", &JacobianBlock::rows)
      .def_property_readonly("cols", &JacobianBlock::cols)
      .def_property_readonly("mode", &JacobianBlock::mode)
      .def_property_readonly("input_ids",
                             [](const JacobianBlock& b) { return b.input_ids(); })
      .def_property_readonly("output_ids",
                             [](const JacobianBlock& b) { return b.output_ids(); })
      .def("at", [](const JacobianBlock& b, std::size_t j, std::size_t i) { return b.at(j, i); })
      .def("entries", &block_entries, "Row-major entries as nested lists")
      .def("same_bits", &JacobianBlock::same_bits)
      .def("max_rel_diff", &JacobianBlock::max_rel_diff)
      .def("dump_csv", [](const JacobianBlock& b) { return b.dump_csv(); });

  py::class_<PreaccRegion>(m, "PreaccRegion")
      .def_static("begin", &PreaccRegion::begin, py::arg("tape"), py::keep_alive<0, 1>())
      .def("add_input", py::overload_cast<const ActiveValue&>(&PreaccRegion::add_input))
      .def("add_output", py::overload_cast<const ActiveValue&>(&PreaccRegion::add_output))
      .def("close", &PreaccRegion::close)
      .def_property_readonly("closed", &PreaccRegion::closed)
      .def_property_readonly("finished", &PreaccRegion::finished)
      .def_property_readonly("start", &PreaccRegion::start)
      .def_property_readonly("end", &PreaccRegion::end)
      .def_property_readonly("statement_count", &PreaccRegion::statement_count)
      .def_property_readonly("inputs", &PreaccRegion::inputs)
      .def_property_readonly("outputs", &PreaccRegion::outputs);

  m.def("finish", &py_finish, py::arg("region"), py::arg("strategy") = Strategy::hash_map,
        py::arg("mode") = SweepMode::automatic, py::arg("validate") = false,
        py::arg("reuse_map_stores") = false,
        "Preaccumulate a closed region: compute its Jacobian with the given "
        "strategy and splice the recording down to one statement per output");

  m.def(
      "sweep_jacobian",
      [](const Tape& tape, TapePosition begin, TapePosition end,
         const std::vector<Identifier>& input_ids, const std::vector<Identifier>& output_ids,
         Identifier i_max) {
        return sweep_jacobian(tape, begin, end, input_ids, output_ids, i_max);
      },
      py::arg("tape"), py::arg("begin"), py::arg("end"), py::arg("input_ids"),
      py::arg("output_ids"), py::arg("i_max"),
      "Row-major Jacobian over [begin, end) by one reverse sweep per output");

  py::class_<OpMix>(m, "OpMix")
      .def(py::init<>())
      .def("__getitem__", [](const OpMix& mix, OpKind k) { return mix[k]; })
      .def("__setitem__", [](OpMix& mix, OpKind k, double w) { mix[k] = w; });

  py::class_<RegionBlueprint>(m, "RegionBlueprint")
      .def_readonly("n_inputs", &RegionBlueprint::n_inputs)
      .def_readonly("m_outputs", &RegionBlueprint::m_outputs)
      .def_readonly("output_slots", &RegionBlueprint::output_slots)
      .def_property_readonly("length",
                             [](const RegionBlueprint& b) { return b.steps.size(); })
      .def("eval_primal", [](const RegionBlueprint& b, const std::vector<double>& x) {
        return b.eval_primal(x);
      });
  m.def("generate_blueprint", &py_generate_blueprint, py::arg("n_inputs"), py::arg("m_outputs"),
        py::arg("length"), py::arg("mix") = OpMix{}, py::arg("seed") = 0);

  py::class_<WorkloadSpec>(m, "WorkloadSpec")
      .def(py::init<>())
      .def_readwrite("workers", &WorkloadSpec::workers)
      .def_readwrite("regions_per_worker", &WorkloadSpec::regions_per_worker)
      .def_readwrite("chain_length", &WorkloadSpec::chain_length)
      .def_readwrite("n_inputs", &WorkloadSpec::n_inputs)
      .def_readwrite("m_outputs", &WorkloadSpec::m_outputs)
      .def_readwrite("shared_inputs", &WorkloadSpec::shared_inputs)
      .def_readwrite("op_mix", &WorkloadSpec::op_mix)
      .def_readwrite("seed", &WorkloadSpec::seed)
      .def_readwrite("padding_statements", &WorkloadSpec::padding_statements)
      .def("validate", &WorkloadSpec::validate)
      .def("__eq__", [](const WorkloadSpec& a, const WorkloadSpec& b) { return a == b; });

  py::class_<StoreMemoryReport>(m, "StoreMemoryReport")
      .def_readonly("live_slots", &StoreMemoryReport::live_slots)
      .def_readonly("peak_slots", &StoreMemoryReport::peak_slots)
      .def_readonly("modeled_bytes", &StoreMemoryReport::modeled_bytes)
      .def_readonly("allocation_events", &StoreMemoryReport::allocation_events)
      .def_readonly("access_count", &StoreMemoryReport::access_count)
      .def_readonly("map_ops", &StoreMemoryReport::map_ops)
      .def_readonly("lock_acquisitions", &StoreMemoryReport::lock_acquisitions);

  py::class_<Workload>(m, "Workload")
      .def_readonly("spec", &Workload::spec)
      .def_readonly("shared_input_ids", &Workload::shared_input_ids)
      .def_readonly("region_input_ids", &Workload::region_input_ids)
      .def_readonly("region_input_values", &Workload::region_input_values)
      .def_property_readonly("consumed", &Workload::consumed)
      .def("all_input_ids", &Workload::all_input_ids);
  m.def("generate_workload", &generate_workload, py::arg("spec"));

  py::class_<RunOptions>(m, "RunOptions")
      .def(py::init<>())
      .def_readwrite("strategy", &RunOptions::strategy)
      .def_readwrite("mode", &RunOptions::mode)
      .def_readwrite("parallel", &RunOptions::parallel)
      .def_readwrite("counting", &RunOptions::counting)
      .def_readwrite("compare_reference", &RunOptions::compare_reference)
      .def_readwrite("validate_regions", &RunOptions::validate_regions)
      .def_readwrite("reuse_map_stores", &RunOptions::reuse_map_stores);

  py::class_<HarnessResult>(m, "HarnessResult")
      .def_readonly("strategy", &HarnessResult::strategy)
      .def_readonly("jacobians", &HarnessResult::jacobians)
      .def_readonly("worker_reports", &HarnessResult::worker_reports)
      .def_readonly("shared_report", &HarnessResult::shared_report)
      .def_readonly("totals", &HarnessResult::totals)
      .def_readonly("input_adjoints", &HarnessResult::input_adjoints)
      .def_readonly("record_ns", &HarnessResult::record_ns)
      .def_readonly("preacc_ns", &HarnessResult::preacc_ns)
      .def_readonly("eval_ns", &HarnessResult::eval_ns)
      .def_readonly("compared_reference", &HarnessResult::compared_reference)
      .def_readonly("matches_serial_reference", &HarnessResult::matches_serial_reference)
      .def_readonly("mismatches", &HarnessResult::mismatches);

  m.def("run_simultaneous", &run_simultaneous, py::arg("workload"),
        py::arg("options") = RunOptions{},
        "Finish every region (one thread per worker when parallel) and run the "
        "global reverse sweep; consumes the workload");
  m.def(
      "run_spec",
      [](const WorkloadSpec& spec, const RunOptions& opts) {
        Workload w = generate_workload(spec);
        return run_simultaneous(w, opts);
      },
      py::arg("spec"), py::arg("options") = RunOptions{},
      "Generate a workload from the spec and run it once");

  py::class_<TimingStat>(m, "TimingStat")
      .def_readonly("mean_ns", &TimingStat::mean_ns)
      .def_readonly("min_ns", &TimingStat::min_ns)
      .def_readonly("max_ns", &TimingStat::max_ns);

  py::class_<MeasureResult>(m, "MeasureResult")
      .def_readonly("spec", &MeasureResult::spec)
      .def_readonly("strategy", &MeasureResult::strategy)
      .def_readonly("repetitions", &MeasureResult::repetitions)
      .def_readonly("record", &MeasureResult::record)
      .def_readonly("preacc", &MeasureResult::preacc)
      .def_readonly("eval", &MeasureResult::eval)
      .def_readonly("counted", &MeasureResult::counted);
  m.def("measure", &measure, py::arg("spec"), py::arg("strategy"), py::arg("repetitions"),
        py::arg("base") = RunOptions{},
        "One discarded warm-up, timed repetitions without instrumentation, then "
        "one instrumented pass");

  py::enum_<RaceStepKind>(m, "RaceStepKind")
      .value("seed", RaceStepKind::seed)
      .value("sweep_statement", RaceStepKind::sweep_statement)
      .value("harvest", RaceStepKind::harvest)
      .value("reset", RaceStepKind::reset);

  py::class_<RaceStep>(m, "RaceStep")
      .def_readonly("region", &RaceStep::region)
      .def_readonly("kind", &RaceStep::kind)
      .def_readonly("index", &RaceStep::index);

  py::class_<RaceOutcome>(m, "RaceOutcome")
      .def_property_readonly("harvested",
                             [](const RaceOutcome& o) {
                               return std::vector<std::vector<double>>{o.harvested[0],
                                                                       o.harvested[1]};
                             })
      .def_property_readonly("expected",
                             [](const RaceOutcome& o) {
                               return std::vector<std::vector<double>>{o.expected[0],
                                                                       o.expected[1]};
                             })
      .def_readonly("shared_cell_at_first_harvest", &RaceOutcome::shared_cell_at_first_harvest)
      .def_readonly("contaminated", &RaceOutcome::contaminated);

  py::class_<RaceTrace>(m, "RaceTrace")
      .def_readonly("schedule", &RaceTrace::schedule)
      .def_readonly("steps", &RaceTrace::steps)
      .def_readonly("step_log", &RaceTrace::step_log)
      .def_readonly("outcome", &RaceTrace::outcome);

  py::class_<RaceSimulator>(m, "RaceSimulator")
      .def("steps_of", &RaceSimulator::steps_of, py::arg("region"))
      .def_property_readonly("total_steps", &RaceSimulator::total_steps)
      .def("run", &RaceSimulator::run, py::arg("strategy"), py::arg("schedule"))
      .def("schedule_from_seed", &RaceSimulator::schedule_from_seed, py::arg("seed"))
      .def("all_interleavings", &RaceSimulator::all_interleavings)
      .def("canonical_overlapped_schedule", &RaceSimulator::canonical_overlapped_schedule)
      .def_property_readonly("shared_input", &RaceSimulator::shared_input)
      .def("expected_row", &RaceSimulator::expected_row, py::arg("region"));
  m.def("race_demo_simulator", &make_demo_simulator, py::arg("c0") = 2.0, py::arg("c1") = 5.0,
        "Two single-statement regions w_t = c_t * u over one shared input u = 1");

  py::class_<CheckResult>(m, "CheckResult")
      .def_readonly("name", &CheckResult::name)
      .def_readonly("passed", &CheckResult::passed)
      .def_readonly("detail", &CheckResult::detail)
      .def("__repr__", [](const CheckResult& r) {
        return "CheckResult(name='" + r.name + "', passed=" + (r.passed ? "True" : "False") +
               ")";
      });

  py::class_<SweepConfig>(m, "SweepConfig")
      .def(py::init<>())
      .def_readwrite("workload", &SweepConfig::workload)
      .def_readwrite("strategies", &SweepConfig::strategies)
      .def_readwrite("worker_counts", &SweepConfig::worker_counts)
      .def_readwrite("repetitions", &SweepConfig::repetitions)
      .def("validate", &SweepConfig::validate);

  m.def("default_verify_config", &default_verify_config);
  m.def(
      "run_verify", [](const SweepConfig& config) { return run_verify(config); },
      py::arg("config"));
  m.def("run_verify", [] { return run_verify(default_verify_config()); });

  m.def("spec_to_json", [](const WorkloadSpec& spec) { return to_json(spec).dump(); });
  m.def("spec_from_json", [](const std::string& text) {
    return workload_spec_from_json(nlohmann::json::parse(text));
  });
  m.def("sweep_config_to_json", [](const SweepConfig& c) { return to_json(c).dump(); });
  m.def("sweep_config_from_json", [](const std::string& text) {
    return sweep_config_from_json(nlohmann::json::parse(text));
  });
  m.def("load_workload_spec", &load_workload_spec, py::arg("path"));
  m.def("load_sweep_config", &load_sweep_config, py::arg("path"));
}
