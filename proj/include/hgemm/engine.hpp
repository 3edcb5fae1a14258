#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "hgemm/matrix.hpp"

namespace hgemm {

enum class EngineKind { host_cpu, accelerator };

std::string_view to_string(EngineKind kind);
EngineKind parse_engine_kind(std::string_view text);

// Linear cost model of an engine. Rates are per second.
struct PerfModel {
  double compute_flops_per_sec = 1e9;
  double transfer_bytes_per_sec = 1e9;
  double transfer_latency_sec = 0.0;
  double kernel_launch_sec = 0.0;

  void validate() const;
  // Rates multiplied by the given factors; latencies unchanged.
  PerfModel scaled(double compute_factor, double transfer_factor) const;
};

struct EngineDescriptor {
  int id = 0;
  EngineKind kind = EngineKind::accelerator;
  std::uint64_t buffer_bytes = 0;
  std::uint32_t elem_bytes = 4;
  PerfModel perf;
  int priority_rank = 0;

  void validate() const;
};

// Largest N such that three N x N matrices fit in the staging memory:
// floor(sqrt(buffer_bytes / (3 * elem_bytes))).
std::size_t capacity_of(const EngineDescriptor& e);

struct TimeBreakdown {
  double transfer_in = 0.0;
  double compute = 0.0;
  double transfer_out = 0.0;

  double total() const noexcept { return transfer_in + compute + transfer_out; }
};

// Modeled duration of the three phases of an m x k by k x n command.
TimeBreakdown sim_execute_time(const EngineDescriptor& e, std::size_t m, std::size_t n,
                               std::size_t k);

// Engines known to the scheduler, kept in priority order (rank 0 first).
// Set up once, then treated as immutable.
class EngineRegistry {
 public:
  void register_engine(const EngineDescriptor& e);

  const std::vector<EngineDescriptor>& engines() const noexcept { return engines_; }
  std::vector<EngineDescriptor> accelerators() const;
  // First host-cpu engine in priority order, if any.
  const EngineDescriptor* host() const;
  const EngineDescriptor* find(int id) const;
  bool empty() const noexcept { return engines_.empty(); }

 private:
  std::vector<EngineDescriptor> engines_;
};

// Engine configuration file: {"engines": [{id, kind, buffer_bytes,
// elem_bytes, perf: {...}, priority_rank}, ...]} or the bare list.
EngineRegistry parse_engine_config(std::string_view json_text);
EngineRegistry load_engine_config(const std::filesystem::path& path);
std::string engine_config_json(const EngineRegistry& registry);

// Host CPU plus an external accelerator (capacity 4305, rank 0) and an
// internal one (capacity 3008, rank 1). Memory sizes are inverted from those
// capacities; the rates are configuration, not measurements.
EngineRegistry default_engines();

// Base clock configurations of the reference APU system.
struct ClockPreset {
  std::string_view label;
  double apu_mhz;
  double memory_mhz;
};

std::span<const ClockPreset> clock_presets();
const ClockPreset& find_preset(std::string_view label);
// Scales compute rates by the APU clock ratio and transfer rates by the
// memory clock ratio, both relative to the "Default" preset.
EngineRegistry apply_preset(const EngineRegistry& registry, const ClockPreset& preset);

// ---------------------------------------------------------------------------
// MM queues

enum class StatusCode { ok, capacity_exceeded, shape_mismatch, failed };

struct Status {
  StatusCode code = StatusCode::ok;
  std::string message;

  bool ok() const noexcept { return code == StatusCode::ok; }
};

// Geometry of a view, recorded in the command history.
struct Region {
  const void* origin = nullptr;
  std::size_t row_off = 0;
  std::size_t col_off = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  template <class T>
  static Region of(const MatrixView<T>& v) {
    return {static_cast<const void*>(v.origin()), v.row_offset(), v.col_offset(), v.rows(),
            v.cols()};
  }
  friend bool operator==(const Region&, const Region&) = default;
};

struct CommandRecord {
  std::uint64_t sequence = 0;
  bool accumulate = false;
  Region c, a, b;
  TimeBreakdown timing;
};

namespace detail {
struct CommandState;
}

// Token for one enqueued command. Copies share the same command.
class CompletionHandle {
 public:
  CompletionHandle() = default;
  explicit CompletionHandle(std::shared_ptr<detail::CommandState> state)
      : state_(std::move(state)) {}

  // Blocks until the command (and everything queued before it) finished.
  Status wait() const;
  bool ready() const;
  // Valid once ready.
  TimeBreakdown timing() const;
  std::uint64_t sequence() const;
  bool valid() const noexcept { return state_ != nullptr; }

 private:
  std::shared_ptr<detail::CommandState> state_;
};

inline Status wait(const CompletionHandle& h) { return h.wait(); }

struct QueueOptions {
  // When false the queue only advances its clock from the performance model
  // and never reads or writes matrix data; views may be shape-only.
  bool numerics = true;
};

// Per-engine command queue with three staging buffers (A, B, C). Every
// command runs the same protocol: copy A and B into the input buffers, run
// the kernel into the output buffer, copy the output back and add it into C
// on the host side when accumulating.
//
// Accelerators are simulated: the kernel is the naive oracle and the timing
// comes from the engine's PerfModel. Host-cpu queues run blocked_mm and
// measure each phase with a monotonic clock.
//
// Commands run serially, in enqueue order, on a worker thread owned by the
// queue. enqueue_mm may be called from any thread.
class MMQueue {
 public:
  explicit MMQueue(EngineDescriptor engine, QueueOptions options = {});
  ~MMQueue();
  MMQueue(const MMQueue&) = delete;
  MMQueue& operator=(const MMQueue&) = delete;

  // Shape and capacity are checked before anything is transferred; a
  // rejected command yields an already-failed handle.
  CompletionHandle enqueue_mm(ViewF c, ConstViewF a, ConstViewF b, bool accumulate);

  const EngineDescriptor& engine() const noexcept { return engine_; }
  std::size_t capacity() const noexcept { return capacity_; }
  bool numerics() const noexcept { return options_.numerics; }

  // Blocks until every queued command completed.
  void finish();
  // Accumulated busy time of the completed commands.
  double clock() const;
  std::vector<CommandRecord> history() const;
  // Clears clock and history; call only while the queue is idle.
  void reset_stats();

 private:
  void worker_loop();
  TimeBreakdown execute(detail::CommandState& cmd);

  EngineDescriptor engine_;
  QueueOptions options_;
  std::size_t capacity_;

  // Staging buffers, grown on first use up to capacity^2 elements each.
  std::vector<float> buf_a_, buf_b_, buf_c_;

  mutable std::mutex mutex_;
  std::condition_variable work_cv_;
  std::condition_variable idle_cv_;
  std::deque<std::shared_ptr<detail::CommandState>> fifo_;
  bool busy_ = false;
  bool stopping_ = false;
  std::uint64_t next_sequence_ = 0;
  double clock_ = 0.0;
  std::vector<CommandRecord> history_;
  std::thread worker_;
};

// Registry plus one queue per accelerator, in priority order.
class Platform {
 public:
  explicit Platform(EngineRegistry registry, QueueOptions options = {});

  const EngineRegistry& registry() const noexcept { return registry_; }
  std::size_t accelerator_count() const noexcept { return queues_.size(); }
  // i-th accelerator queue in priority order.
  MMQueue& accelerator(std::size_t i) { return *queues_.at(i); }
  const EngineDescriptor* host() const { return registry_.host(); }
  bool numerics() const noexcept { return options_.numerics; }
  void finish();
  void reset_stats();

 private:
  EngineRegistry registry_;
  QueueOptions options_;
  std::vector<std::unique_ptr<MMQueue>> queues_;
};

}  // namespace hgemm
