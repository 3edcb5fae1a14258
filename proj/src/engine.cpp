#include "hgemm/engine.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hgemm {

using json = nlohmann::json;

std::string_view to_string(EngineKind kind) {
  return kind == EngineKind::host_cpu ? "host-cpu" : "accelerator";
}

EngineKind parse_engine_kind(std::string_view text) {
  if (text == "host-cpu") return EngineKind::host_cpu;
  if (text == "accelerator") return EngineKind::accelerator;
  throw ConfigError("unknown engine kind '" + std::string(text) + "'");
}

void PerfModel::validate() const {
  if (!(compute_flops_per_sec > 0) || !(transfer_bytes_per_sec > 0))
    throw ConfigError("perf model rates must be positive");
  if (!(transfer_latency_sec >= 0) || !(kernel_launch_sec >= 0))
    throw ConfigError("perf model latencies must be non-negative");
}

PerfModel PerfModel::scaled(double compute_factor, double transfer_factor) const {
  PerfModel p = *this;
  p.compute_flops_per_sec *= compute_factor;
  p.transfer_bytes_per_sec *= transfer_factor;
  return p;
}

void EngineDescriptor::validate() const {
  if (buffer_bytes == 0) throw ConfigError("engine " + std::to_string(id) + ": buffer_bytes is 0");
  if (elem_bytes == 0) throw ConfigError("engine " + std::to_string(id) + ": elem_bytes is 0");
  perf.validate();
}

std::size_t capacity_of(const EngineDescriptor& e) {
  if (e.elem_bytes == 0) return 0;
  const std::uint64_t elems = e.buffer_bytes / (3ULL * e.elem_bytes);
  auto n = static_cast<std::uint64_t>(std::sqrt(static_cast<long double>(elems)));
  while (n * n > elems) --n;
  while ((n + 1) * (n + 1) <= elems) ++n;
  return static_cast<std::size_t>(n);
}

TimeBreakdown sim_execute_time(const EngineDescriptor& e, std::size_t m, std::size_t n,
                               std::size_t k) {
  const PerfModel& p = e.perf;
  const double bytes = static_cast<double>(e.elem_bytes);
  const double dm = static_cast<double>(m), dn = static_cast<double>(n),
               dk = static_cast<double>(k);
  TimeBreakdown t;
  t.transfer_in = p.transfer_latency_sec + (dm * dk + dk * dn) * bytes / p.transfer_bytes_per_sec;
  t.compute = p.kernel_launch_sec + 2.0 * dm * dn * dk / p.compute_flops_per_sec;
  t.transfer_out = p.transfer_latency_sec + dm * dn * bytes / p.transfer_bytes_per_sec;
  return t;
}

// ---------------------------------------------------------------------------
// Registry

void EngineRegistry::register_engine(const EngineDescriptor& e) {
  e.validate();
  for (const auto& other : engines_) {
    if (other.id == e.id) throw ConfigError("duplicate engine id " + std::to_string(e.id));
    if (other.priority_rank == e.priority_rank)
      throw ConfigError("duplicate priority_rank " + std::to_string(e.priority_rank));
  }
  auto pos = std::upper_bound(
      engines_.begin(), engines_.end(), e,
      [](const auto& x, const auto& y) { return x.priority_rank < y.priority_rank; });
  engines_.insert(pos, e);
}

std::vector<EngineDescriptor> EngineRegistry::accelerators() const {
  std::vector<EngineDescriptor> out;
  std::copy_if(engines_.begin(), engines_.end(), std::back_inserter(out),
               [](const auto& e) { return e.kind == EngineKind::accelerator; });
  return out;
}

const EngineDescriptor* EngineRegistry::host() const {
  auto it = std::find_if(engines_.begin(), engines_.end(),
                         [](const auto& e) { return e.kind == EngineKind::host_cpu; });
  return it == engines_.end() ? nullptr : &*it;
}

const EngineDescriptor* EngineRegistry::find(int id) const {
  auto it = std::find_if(engines_.begin(), engines_.end(), [id](const auto& e) { return e.id == id; });
  return it == engines_.end() ? nullptr : &*it;
}

namespace {

template <class T>
T required(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& ex) {
    throw ConfigError(where + ": field '" + key + "': " + ex.what());
  }
}

EngineDescriptor engine_from_json(const json& j, std::size_t index) {
  const std::string where = "engines[" + std::to_string(index) + "]";
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  EngineDescriptor e;
  e.id = required<int>(j, "id", where);
  e.kind = parse_engine_kind(required<std::string>(j, "kind", where));
  e.buffer_bytes = required<std::uint64_t>(j, "buffer_bytes", where);
  e.elem_bytes = required<std::uint32_t>(j, "elem_bytes", where);
  e.priority_rank = required<int>(j, "priority_rank", where);
  if (!j.contains("perf") || !j["perf"].is_object())
    throw ConfigError(where + ": missing object 'perf'");
  const json& p = j["perf"];
  const std::string pwhere = where + ".perf";
  e.perf.compute_flops_per_sec = required<double>(p, "compute_flops_per_sec", pwhere);
  e.perf.transfer_bytes_per_sec = required<double>(p, "transfer_bytes_per_sec", pwhere);
  e.perf.transfer_latency_sec = required<double>(p, "transfer_latency_sec", pwhere);
  e.perf.kernel_launch_sec = required<double>(p, "kernel_launch_sec", pwhere);
  return e;
}

}  // namespace

EngineRegistry parse_engine_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& ex) {
    throw ConfigError(std::string("engine config: ") + ex.what());
  }
  const json* list = &doc;
  if (doc.is_object()) {
    if (!doc.contains("engines")) throw ConfigError("engine config: missing 'engines'");
    list = &doc["engines"];
  }
  if (!list->is_array()) throw ConfigError("engine config: 'engines' must be a list");
  EngineRegistry registry;
  for (std::size_t i = 0; i < list->size(); ++i)
    registry.register_engine(engine_from_json((*list)[i], i));
  return registry;
}

EngineRegistry load_engine_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open engine config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_engine_config(ss.str());
}

std::string engine_config_json(const EngineRegistry& registry) {
  json list = json::array();
  for (const auto& e : registry.engines()) {
    list.push_back({{"id", e.id},
                    {"kind", std::string(to_string(e.kind))},
                    {"buffer_bytes", e.buffer_bytes},
                    {"elem_bytes", e.elem_bytes},
                    {"perf",
                     {{"compute_flops_per_sec", e.perf.compute_flops_per_sec},
                      {"transfer_bytes_per_sec", e.perf.transfer_bytes_per_sec},
                      {"transfer_latency_sec", e.perf.transfer_latency_sec},
                      {"kernel_launch_sec", e.perf.kernel_launch_sec}}},
                    {"priority_rank", e.priority_rank}});
  }
  return json{{"engines", list}}.dump(2);
}

EngineRegistry default_engines() {
  EngineRegistry r;
  // external accelerator: 3 * 4305^2 * 4 bytes
  r.register_engine({.id = 1,
                     .kind = EngineKind::accelerator,
                     .buffer_bytes = 222'396'300,
                     .elem_bytes = 4,
                     .perf = {120e9, 6e9, 1e-5, 5e-5},
                     .priority_rank = 0});
  // internal accelerator: 3 * 3008^2 * 4 bytes
  r.register_engine({.id = 2,
                     .kind = EngineKind::accelerator,
                     .buffer_bytes = 108'576'768,
                     .elem_bytes = 4,
                     .perf = {110e9, 8e9, 1e-5, 5e-5},
                     .priority_rank = 1});
  r.register_engine({.id = 0,
                     .kind = EngineKind::host_cpu,
                     .buffer_bytes = 16ULL << 30,
                     .elem_bytes = 4,
                     .perf = {90e9, 20e9, 0.0, 0.0},
                     .priority_rank = 2});
  return r;
}

namespace {
constexpr std::array<ClockPreset, 6> kPresets{{
    {"Default", 2900, 1333},
    {"90", 2610, 1440},
    {"100", 2900, 1600},
    {"112", 3248, 1792},
    {"114", 3306, 1824},
    {"115", 3335, 1840},
}};
}  // namespace

std::span<const ClockPreset> clock_presets() { return kPresets; }

const ClockPreset& find_preset(std::string_view label) {
  for (const auto& p : kPresets)
    if (p.label == label) return p;
  throw ConfigError("unknown preset '" + std::string(label) + "'");
}

EngineRegistry apply_preset(const EngineRegistry& registry, const ClockPreset& preset) {
  const ClockPreset& base = kPresets.front();
  const double compute = preset.apu_mhz / base.apu_mhz;
  const double transfer = preset.memory_mhz / base.memory_mhz;
  EngineRegistry out;
  for (auto e : registry.engines()) {
    e.perf = e.perf.scaled(compute, transfer);
    out.register_engine(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Queues

namespace detail {

struct CommandState {
  ViewF c;
  ConstViewF a, b;
  bool accumulate = false;
  std::uint64_t sequence = 0;

  mutable std::mutex mutex;
  std::condition_variable cv;
  bool done = false;
  Status status;
  TimeBreakdown timing;

  void complete(Status s, TimeBreakdown t) {
    {
      std::lock_guard lock(mutex);
      status = std::move(s);
      timing = t;
      done = true;
    }
    cv.notify_all();
  }
};

}  // namespace detail

Status CompletionHandle::wait() const {
  if (!state_) return {StatusCode::failed, "invalid completion handle"};
  std::unique_lock lock(state_->mutex);
  state_->cv.wait(lock, [&] { return state_->done; });
  return state_->status;
}

bool CompletionHandle::ready() const {
  if (!state_) return false;
  std::lock_guard lock(state_->mutex);
  return state_->done;
}

TimeBreakdown CompletionHandle::timing() const {
  if (!state_) return {};
  std::lock_guard lock(state_->mutex);
  return state_->timing;
}

std::uint64_t CompletionHandle::sequence() const { return state_ ? state_->sequence : 0; }

MMQueue::MMQueue(EngineDescriptor engine, QueueOptions options)
    : engine_(std::move(engine)), options_(options), capacity_(capacity_of(engine_)) {
  engine_.validate();
  if (engine_.elem_bytes != sizeof(float))
    throw ConfigError("engine " + std::to_string(engine_.id) +
                      ": queues stage single precision data, elem_bytes must be 4");
  worker_ = std::thread([this] { worker_loop(); });
}

MMQueue::~MMQueue() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  work_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

CompletionHandle MMQueue::enqueue_mm(ViewF c, ConstViewF a, ConstViewF b, bool accumulate) {
  auto cmd = std::make_shared<detail::CommandState>();
  cmd->c = c;
  cmd->a = a;
  cmd->b = b;
  cmd->accumulate = accumulate;
  try {
    check_mm_operands(c, a, b);
  } catch (const std::exception& ex) {
    cmd->complete({StatusCode::shape_mismatch, ex.what()}, {});
    return CompletionHandle(cmd);
  }
  const std::size_t size = std::max({c.rows(), c.cols(), a.cols()});
  if (size > capacity_) {
    cmd->complete({StatusCode::capacity_exceeded,
                   "problem size " + std::to_string(size) + " exceeds capacity " +
                       std::to_string(capacity_) + " of engine " + std::to_string(engine_.id)},
                  {});
    return CompletionHandle(cmd);
  }
  if (options_.numerics && !c.empty() && (!c.has_storage() || !a.has_storage() || !b.has_storage())) {
    cmd->complete({StatusCode::failed, "numeric queue given a view without storage"}, {});
    return CompletionHandle(cmd);
  }
  {
    std::lock_guard lock(mutex_);
    cmd->sequence = next_sequence_++;
    fifo_.push_back(cmd);
  }
  work_cv_.notify_one();
  return CompletionHandle(cmd);
}

void MMQueue::worker_loop() {
  for (;;) {
    std::shared_ptr<detail::CommandState> cmd;
    {
      std::unique_lock lock(mutex_);
      work_cv_.wait(lock, [&] { return stopping_ || !fifo_.empty(); });
      if (fifo_.empty()) return;
      cmd = std::move(fifo_.front());
      fifo_.pop_front();
      busy_ = true;
    }
    Status status;
    TimeBreakdown timing;
    try {
      timing = execute(*cmd);
    } catch (const std::exception& ex) {
      status = {StatusCode::failed, ex.what()};
    }
    {
      std::lock_guard lock(mutex_);
      if (status.ok()) {
        clock_ += timing.total();
        history_.push_back({cmd->sequence, cmd->accumulate, Region::of(cmd->c), Region::of(cmd->a),
                            Region::of(cmd->b), timing});
      }
    }
    cmd->complete(std::move(status), timing);
    {
      std::lock_guard lock(mutex_);
      busy_ = false;
    }
    idle_cv_.notify_all();
  }
}

namespace {

void stage_in(std::vector<float>& buf, const ConstViewF& src) {
  const std::size_t need = src.rows() * src.cols();
  if (buf.size() < need) buf.resize(need);
  for (std::size_t i = 0; i < src.rows(); ++i)
    std::copy_n(src.row(i), src.cols(), buf.data() + i * src.cols());
}

ViewF staged(std::vector<float>& buf, std::size_t rows, std::size_t cols) {
  if (buf.size() < rows * cols) buf.resize(rows * cols);
  return ViewF(buf.data(), rows, cols, cols, 0, 0, rows, cols);
}

void stage_out(const ViewF& dst, const std::vector<float>& buf, bool accumulate) {
  for (std::size_t i = 0; i < dst.rows(); ++i) {
    float* out = dst.row(i);
    const float* src = buf.data() + i * dst.cols();
    if (accumulate) {
      for (std::size_t j = 0; j < dst.cols(); ++j) out[j] += src[j];
    } else {
      std::copy_n(src, dst.cols(), out);
    }
  }
}

}  // namespace

TimeBreakdown MMQueue::execute(detail::CommandState& cmd) {
  const std::size_t m = cmd.c.rows(), n = cmd.c.cols(), k = cmd.a.cols();
  if (!options_.numerics) return sim_execute_time(engine_, m, n, k);

  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  // 1. operands into the input buffers
  stage_in(buf_a_, cmd.a);
  stage_in(buf_b_, cmd.b);
  const auto t1 = clock::now();
  // 2. C = A * B on the staged copies
  auto out = staged(buf_c_, m, n);
  const ConstViewF sa(buf_a_.data(), m, k, k, 0, 0, m, k);
  const ConstViewF sb(buf_b_.data(), k, n, n, 0, 0, k, n);
  if (engine_.kind == EngineKind::host_cpu) {
    blocked_mm(out, sa, sb, false);
  } else {
    naive_mm(out, sa, sb, false);
  }
  const auto t2 = clock::now();
  // 3. output back to host memory, added into C when accumulating
  if (!cmd.c.empty()) stage_out(cmd.c, buf_c_, cmd.accumulate);
  const auto t3 = clock::now();

  if (engine_.kind == EngineKind::accelerator) return sim_execute_time(engine_, m, n, k);
  using secs = std::chrono::duration<double>;
  return {secs(t1 - t0).count(), secs(t2 - t1).count(), secs(t3 - t2).count()};
}

void MMQueue::finish() {
  std::unique_lock lock(mutex_);
  idle_cv_.wait(lock, [&] { return fifo_.empty() && !busy_; });
}

double MMQueue::clock() const {
  std::lock_guard lock(mutex_);
  return clock_;
}

std::vector<CommandRecord> MMQueue::history() const {
  std::lock_guard lock(mutex_);
  return history_;
}

void MMQueue::reset_stats() {
  std::lock_guard lock(mutex_);
  clock_ = 0.0;
  history_.clear();
}

Platform::Platform(EngineRegistry registry, QueueOptions options)
    : registry_(std::move(registry)), options_(options) {
  for (const auto& e : registry_.accelerators())
    queues_.push_back(std::make_unique<MMQueue>(e, options_));
}

void Platform::finish() {
  for (auto& q : queues_) q->finish();
}

void Platform::reset_stats() {
  for (auto& q : queues_) q->reset_stats();
}

}  // namespace hgemm
