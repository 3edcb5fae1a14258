#include "hgemm/bench.hpp"

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "hgemm/fast_mm.hpp"

namespace hgemm {

std::string_view to_string(Algo algo) {
  switch (algo) {
    case Algo::naive: return "naive";
    case Algo::blocked: return "blocked";
    case Algo::winograd: return "winograd";
    case Algo::rmul: return "rmul";
    case Algo::dual_independent: return "dual_independent";
  }
  return "?";
}

Algo parse_algo(std::string_view text) {
  for (Algo a : {Algo::naive, Algo::blocked, Algo::winograd, Algo::rmul, Algo::dual_independent})
    if (to_string(a) == text) return a;
  throw ConfigError("unknown algorithm '" + std::string(text) + "'");
}

double operation_count(Algo algo, std::size_t n) {
  const double dn = static_cast<double>(n);
  const double single = 2.0 * dn * dn * dn;
  return algo == Algo::dual_independent ? 2.0 * single : single;
}

double gflops_for(Algo algo, std::size_t n, double wall_sec) {
  return operation_count(algo, n) / wall_sec / 1e9;
}

double reported_size(Algo algo, std::size_t n) {
  const double dn = static_cast<double>(n);
  return algo == Algo::dual_independent ? std::cbrt(2.0) * dn : dn;
}

BenchRecord make_record(std::string label, Algo algo, std::size_t n, double wall_sec) {
  return {std::move(label), algo, n, reported_size(algo, n), wall_sec,
          gflops_for(algo, n, wall_sec)};
}

void SweepSpec::validate() const {
  if (sizes.empty()) throw ConfigError("sweep: no sizes given");
  if (sizes.front() == 0) throw ConfigError("sweep: sizes must be positive");
  for (std::size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1]) throw ConfigError("sweep: sizes must be strictly increasing");
  if (algos.empty()) throw ConfigError("sweep: no algorithms given");
  if (repetitions < 1) throw ConfigError("sweep: repetitions must be at least 1");
  find_preset(config_preset);
}

EngineRegistry sweep_engines(const SweepSpec& spec) {
  const EngineRegistry base = spec.engine_config ? load_engine_config(*spec.engine_config)
                                                 : default_engines();
  return apply_preset(base, find_preset(spec.config_preset));
}

DispatchPolicy sweep_policy(const SweepSpec& spec) {
  return spec.policy ? load_policy_config(*spec.policy) : DispatchPolicy{};
}

double simulated_rmul_seconds(std::size_t n, const EngineRegistry& registry,
                              const DispatchPolicy& policy) {
  Platform platform(registry, {.numerics = false});
  DispatchTrace trace;
  rmul(ViewF::shape_only(n, n), ConstViewF::shape_only(n, n), ConstViewF::shape_only(n, n),
       policy, platform, trace);
  return trace.makespan();
}

namespace {

// Splits into quadrants in rmul order on a single queue until every piece fits.
void enqueue_confined(MMQueue& q, ViewF c, ConstViewF a, ConstViewF b, bool accumulate,
                      std::vector<CompletionHandle>& handles) {
  if (std::max({c.rows(), c.cols(), a.cols()}) <= q.capacity()) {
    handles.push_back(q.enqueue_mm(c, a, b, accumulate));
    return;
  }
  const auto cq = split_quadrants(c);
  const auto aq = split_quadrants(a);
  const auto bq = split_quadrants(b);
  enqueue_confined(q, cq.q0, aq.q0, bq.q0, accumulate, handles);
  enqueue_confined(q, cq.q1, aq.q0, bq.q1, accumulate, handles);
  enqueue_confined(q, cq.q2, aq.q2, bq.q0, accumulate, handles);
  enqueue_confined(q, cq.q3, aq.q2, bq.q1, accumulate, handles);
  enqueue_confined(q, cq.q0, aq.q1, bq.q2, true, handles);
  enqueue_confined(q, cq.q1, aq.q1, bq.q3, true, handles);
  enqueue_confined(q, cq.q2, aq.q3, bq.q2, true, handles);
  enqueue_confined(q, cq.q3, aq.q3, bq.q3, true, handles);
}

double time_host(const std::function<void()>& run) {
  const auto t0 = std::chrono::steady_clock::now();
  run();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

BenchRecord dual_independent_bench(std::size_t n, const EngineRegistry& registry,
                                   std::string label) {
  if (registry.accelerators().size() < 2)
    throw ConfigError("dual_independent needs two accelerators");
  Platform platform(registry, {.numerics = false});
  std::vector<CompletionHandle> handles;
  for (std::size_t i = 0; i < 2; ++i) {
    MMQueue& q = platform.accelerator(i);
    if (q.capacity() == 0) throw ConfigError("engine " + std::to_string(q.engine().id) +
                                             " cannot hold a 1x1 problem");
    enqueue_confined(q, ViewF::shape_only(n, n), ConstViewF::shape_only(n, n),
                     ConstViewF::shape_only(n, n), false, handles);
  }
  for (const auto& h : handles) {
    const Status s = h.wait();
    if (!s.ok()) throw std::runtime_error(s.message);
  }
  const double makespan = std::max(platform.accelerator(0).clock(), platform.accelerator(1).clock());
  return make_record(std::move(label), Algo::dual_independent, n, makespan);
}

std::vector<BenchRecord> run_sweep(const SweepSpec& spec) {
  spec.validate();
  const EngineRegistry registry = sweep_engines(spec);
  const bool needs_engines = std::any_of(spec.algos.begin(), spec.algos.end(), [](Algo a) {
    return a == Algo::rmul || a == Algo::dual_independent;
  });
  DispatchPolicy policy = sweep_policy(spec);
  if (needs_engines) policy = policy.resolve(registry);
  if (std::find(spec.algos.begin(), spec.algos.end(), Algo::dual_independent) != spec.algos.end() &&
      registry.accelerators().size() < 2)
    throw ConfigError("dual_independent needs two accelerators");

  const std::string label(find_preset(spec.config_preset).label);
  std::vector<BenchRecord> records;
  for (const std::size_t n : spec.sizes) {
    std::mt19937_64 rng(spec.seed ^ (0x9E3779B97F4A7C15ULL * n));
    std::optional<MatrixF> a, b, c;
    for (const Algo algo : spec.algos) {
      std::function<void()> host_run;
      if (algo == Algo::naive || algo == Algo::blocked || algo == Algo::winograd) {
        if (!a) {
          a = random_matrix<float>(n, n, rng);
          b = random_matrix<float>(n, n, rng);
          c.emplace(n, n);
        }
        switch (algo) {
          case Algo::naive:
            host_run = [&] { naive_mm(c->view(), a->cview(), b->cview(), false); };
            break;
          case Algo::blocked:
            host_run = [&] { blocked_mm(c->view(), a->cview(), b->cview(), false); };
            break;
          default:
            host_run = [&] { winograd_mm(c->view(), a->cview(), b->cview()); };
            break;
        }
        host_run();  // warm-up
      }
      for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
        double wall = 0.0;
        if (host_run) {
          wall = time_host(host_run);
        } else if (algo == Algo::rmul) {
          wall = simulated_rmul_seconds(n, registry, policy);
        } else {
          wall = dual_independent_bench(n, registry, label).wall_sec;
        }
        records.push_back(make_record(label, algo, n, wall));
      }
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

template <class T>
void put_number(std::ostream& out, T value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  out.write(buf.data(), ptr - buf.data());
}

template <class T>
T get_number(std::string_view field, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw std::invalid_argument("csv line " + std::to_string(line) + ": bad number '" +
                                std::string(field) + "'");
  return value;
}

}  // namespace

void emit_csv(std::span<const BenchRecord> records, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    if (r.label.find_first_of(",\n\r\"") != std::string::npos)
      throw std::invalid_argument("csv label must not contain separators: " + r.label);
    out << r.label << ',' << to_string(r.algo) << ',';
    put_number(out, r.n);
    out << ',';
    put_number(out, r.reported_n);
    out << ',';
    put_number(out, r.wall_sec);
    out << ',';
    put_number(out, r.gflops);
    out << '\n';
  }
}

void emit_csv(std::span<const BenchRecord> records, const std::filesystem::path& path) {
  std::ostringstream buffer;
  emit_csv(records, buffer);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << buffer.str();
  if (!out.flush()) throw std::runtime_error("write failed: " + path.string());
}

std::vector<BenchRecord> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw std::invalid_argument("csv: missing or unexpected header");
  std::vector<BenchRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 6)
      throw std::invalid_argument("csv line " + std::to_string(lineno) + ": expected 6 fields");
    BenchRecord r;
    r.label = std::string(fields[0]);
    r.algo = parse_algo(fields[1]);
    r.n = get_number<std::size_t>(fields[2], lineno);
    r.reported_n = get_number<double>(fields[3], lineno);
    r.wall_sec = get_number<double>(fields[4], lineno);
    r.gflops = get_number<double>(fields[5], lineno);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace hgemm
