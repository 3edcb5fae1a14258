#include "hgemm/scheduler.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace hgemm {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Policy

void DispatchPolicy::validate() const {
  if (k0 == 0) throw ConfigError("policy: k0 must be positive");
  if (k0 > k1) throw ConfigError("policy: k0 must not exceed k1");
  if (!auto_recursion_point) {
    if (k1 > recursion_point) throw ConfigError("policy: k1 must not exceed recursion_point");
    if (recursion_point < 2) throw ConfigError("policy: recursion_point must be at least 2");
  }
}

DispatchPolicy DispatchPolicy::resolve(const EngineRegistry& registry) const {
  DispatchPolicy p = *this;
  if (p.auto_recursion_point) {
    p.recursion_point = hgemm::auto_recursion_point(registry);
    p.auto_recursion_point = false;
  }
  p.validate();
  return p;
}

std::size_t auto_recursion_point(const EngineRegistry& registry) {
  const auto accels = registry.accelerators();
  if (accels.empty())
    throw ConfigError("automatic recursion point needs at least one accelerator");
  std::size_t cap = capacity_of(accels.front());
  for (const auto& e : accels) cap = std::min(cap, capacity_of(e));
  return 2 * cap;
}

DispatchPolicy parse_policy_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& ex) {
    throw ConfigError(std::string("policy config: ") + ex.what());
  }
  if (!doc.is_object()) throw ConfigError("policy config: expected an object");
  DispatchPolicy p;
  try {
    if (doc.contains("k0")) p.k0 = doc["k0"].get<std::size_t>();
    if (doc.contains("k1")) p.k1 = doc["k1"].get<std::size_t>();
    if (doc.contains("recursion_point")) {
      const json& rp = doc["recursion_point"];
      if (rp.is_string()) {
        if (rp.get<std::string>() != "auto")
          throw ConfigError("policy config: recursion_point must be a count or \"auto\"");
        p.auto_recursion_point = true;
      } else {
        p.recursion_point = rp.get<std::size_t>();
        p.auto_recursion_point = false;
      }
    }
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("policy config: ") + ex.what());
  }
  p.validate();
  return p;
}

DispatchPolicy load_policy_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open policy config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_policy_config(ss.str());
}

// ---------------------------------------------------------------------------
// Trace

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::recurse: return "recurse";
    case EventKind::leaf_cpu: return "leaf_cpu";
    case EventKind::leaf_single: return "leaf_single";
    case EventKind::leaf_dual: return "leaf_dual";
  }
  return "?";
}

void DispatchTrace::append(DispatchEvent e) {
  std::lock_guard lock(mutex_);
  events_.push_back(std::move(e));
}

std::vector<DispatchEvent> DispatchTrace::events() const {
  std::lock_guard lock(mutex_);
  return events_;
}

std::size_t DispatchTrace::count(EventKind kind) const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count_if(
      events_.begin(), events_.end(), [kind](const auto& e) { return e.kind == kind; }));
}

double DispatchTrace::makespan() const {
  std::lock_guard lock(mutex_);
  double t = 0.0;
  for (const auto& e : events_) t += e.seconds;
  return t;
}

void DispatchTrace::clear() {
  std::lock_guard lock(mutex_);
  events_.clear();
}

// ---------------------------------------------------------------------------
// Leaves

namespace {

std::size_t problem_size(const ViewF& c, const ConstViewF& a) {
  return std::max({c.rows(), c.cols(), a.cols()});
}

void check_operands(const ViewF& c, const ConstViewF& a, const ConstViewF& b,
                    const Platform& platform) {
  check_mm_operands(c, a, b);
  if (platform.numerics()) detail::require_storage(c, a, b);
}

void raise(const Status& s) {
  switch (s.code) {
    case StatusCode::ok: return;
    case StatusCode::capacity_exceeded: throw CapacityError(s.message);
    case StatusCode::shape_mismatch: throw DimensionError(s.message);
    case StatusCode::failed: throw std::runtime_error(s.message);
  }
}

struct Command {
  ViewF c;
  ConstViewF a, b;
  bool accumulate;
};

bool fits(const Command& cmd, std::size_t capacity) {
  return std::max({cmd.c.rows(), cmd.c.cols(), cmd.a.cols()}) <= capacity;
}

void leaf_cpu(ViewF c, ConstViewF a, ConstViewF b, bool accumulate, Platform& platform,
              DispatchTrace& trace) {
  const std::size_t m = c.rows(), n = c.cols(), k = a.cols();
  const auto t0 = std::chrono::steady_clock::now();
  if (platform.numerics()) blocked_mm(c, a, b, accumulate);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - t0;
  DispatchEvent e{EventKind::leaf_cpu, m, n, k, accumulate, {}, elapsed.count()};
  if (const auto* host = platform.host()) e.seconds = sim_execute_time(*host, m, n, k).compute;
  trace.append(std::move(e));
}

void leaf_single(ViewF c, ConstViewF a, ConstViewF b, bool accumulate, Platform& platform,
                 DispatchTrace& trace) {
  MMQueue& q = platform.accelerator(0);
  const std::size_t size = problem_size(c, a);
  if (size > q.capacity())
    throw ConfigError("single-engine leaf of size " + std::to_string(size) +
                      " exceeds capacity " + std::to_string(q.capacity()) + " of engine " +
                      std::to_string(q.engine().id));
  const auto h = q.enqueue_mm(c, a, b, accumulate);
  raise(h.wait());
  trace.append({EventKind::leaf_single, c.rows(), c.cols(), a.cols(), accumulate,
                {q.engine().id}, h.timing().total()});
}

void recurse(ViewF c, ConstViewF a, ConstViewF b, bool accumulate, const DispatchPolicy& policy,
             Platform& platform, DispatchTrace& trace) {
  if (problem_size(c, a) < policy.recursion_point) {
    leaf_dispatch(c, a, b, accumulate, policy, platform, trace);
    return;
  }
  trace.append({EventKind::recurse, c.rows(), c.cols(), a.cols(), accumulate, {}, 0.0});
  const auto cq = split_quadrants(c);
  const auto aq = split_quadrants(a);
  const auto bq = split_quadrants(b);
  // First pass assigns (or accumulates), second pass always accumulates.
  recurse(cq.q0, aq.q0, bq.q0, accumulate, policy, platform, trace);
  recurse(cq.q1, aq.q0, bq.q1, accumulate, policy, platform, trace);
  recurse(cq.q2, aq.q2, bq.q0, accumulate, policy, platform, trace);
  recurse(cq.q3, aq.q2, bq.q1, accumulate, policy, platform, trace);
  recurse(cq.q0, aq.q1, bq.q2, true, policy, platform, trace);
  recurse(cq.q1, aq.q1, bq.q3, true, policy, platform, trace);
  recurse(cq.q2, aq.q3, bq.q2, true, policy, platform, trace);
  recurse(cq.q3, aq.q3, bq.q3, true, policy, platform, trace);
}

void rmul_entry(ViewF c, ConstViewF a, ConstViewF b, bool accumulate,
                const DispatchPolicy& policy, Platform& platform, DispatchTrace& trace) {
  check_operands(c, a, b, platform);
  const DispatchPolicy resolved = policy.resolve(platform.registry());
  recurse(c, a, b, accumulate, resolved, platform, trace);
}

}  // namespace

void leaf_dispatch(ViewF c, ConstViewF a, ConstViewF b, bool accumulate,
                   const DispatchPolicy& policy, Platform& platform, DispatchTrace& trace) {
  check_operands(c, a, b, platform);
  const DispatchPolicy p = policy.resolve(platform.registry());
  const std::size_t size = problem_size(c, a);
  if (size >= p.recursion_point)
    throw std::invalid_argument("leaf_dispatch: size " + std::to_string(size) +
                                " is not below the recursion point");
  if (size < p.k0 || platform.accelerator_count() == 0) {
    leaf_cpu(c, a, b, accumulate, platform, trace);
  } else if (size < p.k1) {
    leaf_single(c, a, b, accumulate, platform, trace);
  } else {
    dual_engine_leaf(c, a, b, accumulate, platform, trace);
  }
}

void dual_engine_leaf(ViewF c, ConstViewF a, ConstViewF b, bool accumulate, Platform& platform,
                      DispatchTrace& trace) {
  check_operands(c, a, b, platform);
  if (platform.accelerator_count() == 0)
    throw ConfigError("dual-engine leaf needs at least one accelerator");
  if (platform.accelerator_count() == 1) {
    leaf_single(c, a, b, accumulate, platform, trace);
    return;
  }

  const auto cq = split_quadrants(c);
  const auto aq = split_quadrants(a);
  const auto bq = split_quadrants(b);
  const std::array<Command, 4> left{{{cq.q0, aq.q0, bq.q0, accumulate},
                                     {cq.q0, aq.q1, bq.q2, true},
                                     {cq.q2, aq.q2, bq.q0, accumulate},
                                     {cq.q2, aq.q3, bq.q2, true}}};
  const std::array<Command, 4> right{{{cq.q1, aq.q0, bq.q1, accumulate},
                                      {cq.q1, aq.q1, bq.q3, true},
                                      {cq.q3, aq.q2, bq.q1, accumulate},
                                      {cq.q3, aq.q3, bq.q3, true}}};
  MMQueue& q0 = platform.accelerator(0);
  MMQueue& q1 = platform.accelerator(1);
  for (const auto& [queue, cmds] : {std::pair{&q0, &left}, std::pair{&q1, &right}}) {
    for (const auto& cmd : *cmds) {
      if (!fits(cmd, queue->capacity()))
        throw ConfigError("dual-engine leaf of size " + std::to_string(problem_size(c, a)) +
                          ": quadrant product exceeds capacity " +
                          std::to_string(queue->capacity()) + " of engine " +
                          std::to_string(queue->engine().id));
    }
  }

  std::vector<CompletionHandle> h0, h1;
  for (const auto& cmd : left) h0.push_back(q0.enqueue_mm(cmd.c, cmd.a, cmd.b, cmd.accumulate));
  for (const auto& cmd : right) h1.push_back(q1.enqueue_mm(cmd.c, cmd.a, cmd.b, cmd.accumulate));

  Status first_error;
  double t0 = 0.0, t1 = 0.0;
  for (const auto& h : h0) {
    const Status s = h.wait();
    if (!s.ok() && first_error.ok()) first_error = s;
    t0 += h.timing().total();
  }
  for (const auto& h : h1) {
    const Status s = h.wait();
    if (!s.ok() && first_error.ok()) first_error = s;
    t1 += h.timing().total();
  }
  raise(first_error);
  trace.append({EventKind::leaf_dual, c.rows(), c.cols(), a.cols(), accumulate,
                {q0.engine().id, q1.engine().id}, std::max(t0, t1)});
}

void rmul(ViewF c, ConstViewF a, ConstViewF b, const DispatchPolicy& policy, Platform& platform,
          DispatchTrace& trace) {
  rmul_entry(c, a, b, false, policy, platform, trace);
}

void rmul_add(ViewF c, ConstViewF a, ConstViewF b, const DispatchPolicy& policy,
              Platform& platform, DispatchTrace& trace) {
  rmul_entry(c, a, b, true, policy, platform, trace);
}

}  // namespace hgemm
