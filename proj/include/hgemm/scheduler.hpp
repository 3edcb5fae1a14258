#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "hgemm/engine.hpp"
#include "hgemm/matrix.hpp"

namespace hgemm {

// Size thresholds driving the recursion and the leaf choice. The size of a
// problem is max(m, n, k).
//
//   size >= recursion_point   split into quadrants (eight sub-products)
//   size >= k1                both accelerators (dual leaf)
//   k0 <= size < k1           rank-0 accelerator alone
//   otherwise                 host CPU
struct DispatchPolicy {
  std::size_t k0 = 400;
  std::size_t k1 = 3000;
  std::size_t recursion_point = 6016;
  // When set, recursion_point is derived from the registry (see resolve).
  bool auto_recursion_point = true;

  // Returns a copy with recursion_point fixed: 2 * smallest accelerator
  // capacity when auto_recursion_point is set. Validates the result.
  DispatchPolicy resolve(const EngineRegistry& registry) const;
  void validate() const;

  static DispatchPolicy fixed(std::size_t k0, std::size_t k1, std::size_t recursion_point) {
    return {k0, k1, recursion_point, false};
  }
};

// {"k0": ..., "k1": ..., "recursion_point": <count> | "auto"}
DispatchPolicy parse_policy_config(std::string_view json_text);
DispatchPolicy load_policy_config(const std::filesystem::path& path);

// 2 * min capacity over the registered accelerators. Throws ConfigError when
// there are none; the caller must then set recursion_point explicitly.
std::size_t auto_recursion_point(const EngineRegistry& registry);

enum class EventKind { recurse, leaf_cpu, leaf_single, leaf_dual };

std::string_view to_string(EventKind kind);

struct DispatchEvent {
  EventKind kind = EventKind::leaf_cpu;
  std::size_t m = 0, n = 0, k = 0;
  bool accumulate = false;
  std::vector<int> engine_ids;
  // Duration of a leaf: modeled time for accelerators (max over the two
  // engines of a dual leaf), modeled host time when the registry has a
  // host-cpu engine, measured time otherwise. Zero for recurse events.
  double seconds = 0.0;
};

// Ordered record of every recursion step and leaf. Appends are thread-safe.
class DispatchTrace {
 public:
  void append(DispatchEvent e);
  std::vector<DispatchEvent> events() const;
  std::size_t count(EventKind kind) const;
  // Sum of leaf durations: the makespan of a run, since leaves execute one
  // after another.
  double makespan() const;
  void clear();

 private:
  mutable std::mutex mutex_;
  std::vector<DispatchEvent> events_;
};

// C = A * B by recursive quadrant decomposition. The policy must be resolved
// (recursion_point fixed). In a platform built with numerics disabled the
// views may be shape-only and only the trace and queue clocks are produced.
void rmul(ViewF c, ConstViewF a, ConstViewF b, const DispatchPolicy& policy, Platform& platform,
          DispatchTrace& trace);
// C += A * B.
void rmul_add(ViewF c, ConstViewF a, ConstViewF b, const DispatchPolicy& policy,
              Platform& platform, DispatchTrace& trace);

// Non-recursive solver selected by size against k0 and k1.
void leaf_dispatch(ViewF c, ConstViewF a, ConstViewF b, bool accumulate,
                   const DispatchPolicy& policy, Platform& platform, DispatchTrace& trace);

// Splits C, A, B into quadrants; the rank-0 accelerator computes the left
// output column (C0, C2) and the rank-1 accelerator the right one (C1, C3),
// concurrently. Falls back to the rank-0 engine alone with fewer than two
// accelerators.
void dual_engine_leaf(ViewF c, ConstViewF a, ConstViewF b, bool accumulate, Platform& platform,
                      DispatchTrace& trace);

}  // namespace hgemm
