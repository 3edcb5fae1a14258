#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgemm/engine.hpp"
#include "hgemm/scheduler.hpp"

namespace hgemm {

enum class Algo { naive, blocked, winograd, rmul, dual_independent };

std::string_view to_string(Algo algo);
Algo parse_algo(std::string_view text);

struct BenchRecord {
  std::string label;
  Algo algo = Algo::naive;
  std::size_t n = 0;
  // 2^(1/3) n for dual_independent, n otherwise
  double reported_n = 0.0;
  double wall_sec = 0.0;
  double gflops = 0.0;
};

// Operations credited to one run: 2n^3, or 2 * 2n^3 for two independent
// n x n products.
double operation_count(Algo algo, std::size_t n);
double gflops_for(Algo algo, std::size_t n, double wall_sec);
double reported_size(Algo algo, std::size_t n);
BenchRecord make_record(std::string label, Algo algo, std::size_t n, double wall_sec);

struct SweepSpec {
  std::vector<std::size_t> sizes;
  std::vector<Algo> algos;
  std::string config_preset = "Default";
  std::size_t repetitions = 1;
  std::optional<std::filesystem::path> engine_config;  // default engines when unset
  std::optional<std::filesystem::path> policy;         // default policy when unset
  std::uint64_t seed = 1;

  void validate() const;
};

// Loads the engine configuration named by the spec (or the defaults) with
// the clock preset applied.
EngineRegistry sweep_engines(const SweepSpec& spec);
DispatchPolicy sweep_policy(const SweepSpec& spec);

// One record per (size, algo, repetition), in that nesting order.
//
// naive, blocked and winograd run on the host and are timed with a monotonic
// clock after one untimed warm-up run. rmul and dual_independent run on the
// simulated engines without touching data; their wall time is the modeled
// makespan. Configuration is validated before anything runs.
std::vector<BenchRecord> run_sweep(const SweepSpec& spec);

// Modeled time of rmul on an n x n problem.
double simulated_rmul_seconds(std::size_t n, const EngineRegistry& registry,
                              const DispatchPolicy& policy);

// Two independent n x n products, one on each of the two highest-priority
// accelerators, run concurrently. wall_sec is the makespan. A product larger
// than an engine's capacity is split into quadrants on that engine until the
// pieces fit.
BenchRecord dual_independent_bench(std::size_t n, const EngineRegistry& registry,
                                   std::string label = "Default");

// Header "label,algo,n,reported_n,wall_sec,gflops", one row per record.
void emit_csv(std::span<const BenchRecord> records, std::ostream& out);
void emit_csv(std::span<const BenchRecord> records, const std::filesystem::path& path);
std::vector<BenchRecord> parse_csv(std::istream& in);

inline constexpr std::string_view kCsvHeader = "label,algo,n,reported_n,wall_sec,gflops";

}  // namespace hgemm
