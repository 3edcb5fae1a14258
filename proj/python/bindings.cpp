#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "hgemm/bench.hpp"
#include "hgemm/fast_mm.hpp"
#include "hgemm/scheduler.hpp"

namespace py = pybind11;
using namespace hgemm;

namespace {

using InArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

ConstViewF view_of(const InArray& x) {
  if (x.ndim() != 2) throw DimensionError("expected a 2-d array");
  const auto rows = static_cast<std::size_t>(x.shape(0));
  const auto cols = static_cast<std::size_t>(x.shape(1));
  return ConstViewF(x.data(), rows, cols, cols, 0, 0, rows, cols);
}

py::array_t<float> new_output(const InArray& a, const InArray& b) {
  if (a.ndim() != 2 || b.ndim() != 2) throw DimensionError("expected 2-d arrays");
  return py::array_t<float>({a.shape(0), b.shape(1)});
}

ViewF view_of(py::array_t<float>& x) {
  const auto rows = static_cast<std::size_t>(x.shape(0));
  const auto cols = static_cast<std::size_t>(x.shape(1));
  return ViewF(x.mutable_data(), rows, cols, cols, 0, 0, rows, cols);
}

EngineRegistry engines_for(const std::optional<std::string>& config, const std::string& preset) {
  const EngineRegistry base = config ? load_engine_config(*config) : default_engines();
  return apply_preset(base, find_preset(preset));
}

py::dict record_dict(const BenchRecord& r) {
  py::dict d;
  d["label"] = r.label;
  d["algo"] = std::string(to_string(r.algo));
  d["n"] = r.n;
  d["reported_n"] = r.reported_n;
  d["wall_sec"] = r.wall_sec;
  d["gflops"] = r.gflops;
  return d;
}

template <class Fn>
py::array_t<float> product(const InArray& a, const InArray& b, Fn&& fn) {
  auto c = new_output(a, b);
  const ViewF cv = view_of(c);
  const ConstViewF av = view_of(a), bv = view_of(b);
  {
    py::gil_scoped_release release;
    fn(cv, av, bv);
  }
  return c;
}

}  // namespace

PYBIND11_MODULE(_hgemm, m) {
  m.doc() = "Hybrid multi-engine matrix multiplication";

  m.def(
      "naive_mm",
      [](const InArray& a, const InArray& b) {
        return product(a, b, [](ViewF c, ConstViewF x, ConstViewF y) { naive_mm(c, x, y, false); });
      },
      py::arg("a"), py::arg("b"), "Reference triple-loop product.");
  m.def(
      "blocked_mm",
      [](const InArray& a, const InArray& b) {
        return product(a, b,
                       [](ViewF c, ConstViewF x, ConstViewF y) { blocked_mm(c, x, y, false); });
      },
      py::arg("a"), py::arg("b"), "Tiled host product.");
  m.def(
      "winograd_mm",
      [](const InArray& a, const InArray& b, std::size_t cutoff, std::size_t max_depth) {
        const FastMMConfig cfg{.cutoff = cutoff, .max_depth = max_depth};
        cfg.validate();
        return product(a, b, [&](ViewF c, ConstViewF x, ConstViewF y) { winograd_mm(c, x, y, cfg); });
      },
      py::arg("a"), py::arg("b"), py::arg("cutoff") = FastMMConfig{}.cutoff,
      py::arg("max_depth") = FastMMConfig{}.max_depth, "Strassen-Winograd product.");
  m.def(
      "rmul",
      [](const InArray& a, const InArray& b, std::optional<std::size_t> k0,
         std::optional<std::size_t> k1, std::optional<std::size_t> recursion_point,
         std::optional<std::string> engines, std::string preset) {
        const EngineRegistry registry = engines_for(engines, preset);
        DispatchPolicy policy;
        if (k0) policy.k0 = *k0;
        if (k1) policy.k1 = *k1;
        if (recursion_point) policy = DispatchPolicy::fixed(policy.k0, policy.k1, *recursion_point);
        policy = policy.resolve(registry);
        Platform platform(registry);
        DispatchTrace trace;
        auto c = product(a, b, [&](ViewF cv, ConstViewF x, ConstViewF y) {
          rmul(cv, x, y, policy, platform, trace);
        });
        py::list events;
        for (const auto& e : trace.events()) {
          py::dict d;
          d["kind"] = std::string(to_string(e.kind));
          d["m"] = e.m;
          d["n"] = e.n;
          d["k"] = e.k;
          d["accumulate"] = e.accumulate;
          d["engine_ids"] = e.engine_ids;
          d["seconds"] = e.seconds;
          events.append(d);
        }
        return py::make_tuple(c, events);
      },
      py::arg("a"), py::arg("b"), py::arg("k0") = py::none(), py::arg("k1") = py::none(),
      py::arg("recursion_point") = py::none(), py::arg("engines") = py::none(),
      py::arg("preset") = "Default",
      "Recursive multi-engine product. Returns (C, dispatch events).");
  m.def(
      "rel_error",
      [](const InArray& x, const InArray& y) { return rel_error(view_of(x), view_of(y)); },
      py::arg("x"), py::arg("y"), "||x - y||_F / ||y||_F.");

  m.def(
      "capacity_of",
      [](std::size_t buffer_bytes, std::size_t elem_bytes) {
        EngineDescriptor e;
        e.buffer_bytes = buffer_bytes;
        e.elem_bytes = elem_bytes;
        return capacity_of(e);
      },
      py::arg("buffer_bytes"), py::arg("elem_bytes") = 4,
      "Largest n such that three n x n operands fit the buffer.");
  m.def(
      "capacities",
      [](std::optional<std::string> engines) {
        py::dict d;
        for (const auto& e : engines_for(engines, "Default").accelerators())
          d[py::int_(e.id)] = capacity_of(e);
        return d;
      },
      py::arg("engines") = py::none(), "Accelerator id -> capacity.");
  m.def(
      "auto_recursion_point",
      [](std::optional<std::string> engines) {
        return auto_recursion_point(engines_for(engines, "Default"));
      },
      py::arg("engines") = py::none());
  m.def(
      "flop_count_fast",
      [](std::uint64_t n, std::size_t cutoff, std::size_t max_depth) {
        return flop_count_fast(n, {.cutoff = cutoff, .max_depth = max_depth});
      },
      py::arg("n"), py::arg("cutoff") = FastMMConfig{}.cutoff,
      py::arg("max_depth") = FastMMConfig{}.max_depth);

  m.def(
      "gflops",
      [](const std::string& algo, std::size_t n, double wall_sec) {
        return gflops_for(parse_algo(algo), n, wall_sec);
      },
      py::arg("algo"), py::arg("n"), py::arg("wall_sec"));
  m.def(
      "reported_size",
      [](const std::string& algo, std::size_t n) { return reported_size(parse_algo(algo), n); },
      py::arg("algo"), py::arg("n"));
  m.def(
      "simulated_rmul_seconds",
      [](std::size_t n, std::optional<std::string> engines, std::string preset) {
        const EngineRegistry registry = engines_for(engines, preset);
        return simulated_rmul_seconds(n, registry, DispatchPolicy{}.resolve(registry));
      },
      py::arg("n"), py::arg("engines") = py::none(), py::arg("preset") = "Default");
  m.def(
      "dual_independent_bench",
      [](std::size_t n, std::optional<std::string> engines, std::string preset) {
        return record_dict(dual_independent_bench(n, engines_for(engines, preset), preset));
      },
      py::arg("n"), py::arg("engines") = py::none(), py::arg("preset") = "Default");
  m.def(
      "run_sweep",
      [](std::vector<std::size_t> sizes, std::vector<std::string> algos, std::string preset,
         std::size_t repetitions, std::uint64_t seed) {
        SweepSpec spec;
        spec.sizes = std::move(sizes);
        for (const auto& a : algos) spec.algos.push_back(parse_algo(a));
        spec.config_preset = std::move(preset);
        spec.repetitions = repetitions;
        spec.seed = seed;
        std::vector<BenchRecord> records;
        {
          py::gil_scoped_release release;
          records = run_sweep(spec);
        }
        py::list out;
        for (const auto& r : records) out.append(record_dict(r));
        return out;
      },
      py::arg("sizes"), py::arg("algos"), py::arg("preset") = "Default",
      py::arg("repetitions") = 1, py::arg("seed") = 1);

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_RuntimeError);
  py::register_exception<CapacityError>(m, "CapacityError", PyExc_RuntimeError);
}
