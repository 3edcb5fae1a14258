#include <doctest.h>

#include <atomic>
#include <random>
#include <thread>

#include "hgemm/engine.hpp"
#include "test_util.hpp"

using namespace hgemm;

namespace {

EngineDescriptor accel(int id, int rank, std::size_t capacity, PerfModel perf = {1e11, 8e9, 0, 0}) {
  return {.id = id,
          .kind = EngineKind::accelerator,
          .buffer_bytes = 3ULL * capacity * capacity * 4,
          .elem_bytes = 4,
          .perf = perf,
          .priority_rank = rank};
}

}  // namespace

TEST_CASE("capacity_of") {
  EngineDescriptor e = accel(0, 0, 1);
  e.buffer_bytes = 108'576'768;
  CHECK(capacity_of(e) == 3008);
  e.buffer_bytes = 222'396'300;
  CHECK(capacity_of(e) == 4305);
  e.buffer_bytes = 12;
  CHECK(capacity_of(e) == 1);
  e.buffer_bytes = 11;
  CHECK(capacity_of(e) == 0);
}

TEST_CASE("capacity_of is the unique N with 3N^2 b <= bytes < 3(N+1)^2 b") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> bytes(1, 1ULL << 40);
  for (int i = 0; i < 2000; ++i) {
    EngineDescriptor e = accel(0, 0, 1);
    e.buffer_bytes = bytes(rng);
    e.elem_bytes = (i % 2) ? 4 : 8;
    const std::uint64_t n = capacity_of(e);
    REQUIRE(3 * n * n * e.elem_bytes <= e.buffer_bytes);
    REQUIRE(e.buffer_bytes < 3 * (n + 1) * (n + 1) * e.elem_bytes);
  }
}

TEST_CASE("sim_execute_time") {
  const EngineDescriptor e = accel(0, 0, 1000, {1e11, 8e9, 0, 0});
  const TimeBreakdown t = sim_execute_time(e, 1000, 1000, 1000);
  CHECK(t.transfer_in == doctest::Approx(2.0 * 4 * 1e6 / 8e9).epsilon(1e-15));
  CHECK(t.compute == doctest::Approx(2e9 / 1e11).epsilon(1e-15));
  CHECK(t.transfer_out == doctest::Approx(4 * 1e6 / 8e9).epsilon(1e-15));

  const EngineDescriptor lat = accel(0, 0, 10, {1e9, 1e9, 0.25, 0.5});
  const TimeBreakdown z = sim_execute_time(lat, 0, 0, 0);
  CHECK(z.transfer_in == 0.25);
  CHECK(z.compute == 0.5);
  CHECK(z.transfer_out == 0.25);

  EngineDescriptor fast = e;
  fast.perf.compute_flops_per_sec *= 2;
  CHECK(sim_execute_time(fast, 300, 200, 100).compute ==
        sim_execute_time(e, 300, 200, 100).compute / 2);
}

TEST_CASE("registry ordering and validation") {
  EngineRegistry r;
  r.register_engine(accel(5, 1, 100));
  r.register_engine(accel(9, 0, 50));
  REQUIRE(r.engines().size() == 2);
  CHECK(r.engines()[0].id == 9);
  CHECK(r.accelerators()[1].id == 5);
  CHECK(r.host() == nullptr);
  CHECK(r.find(5)->priority_rank == 1);
  CHECK(r.find(4) == nullptr);
  CHECK_THROWS_AS(r.register_engine(accel(7, 1, 10)), ConfigError);
  CHECK_THROWS_AS(r.register_engine(accel(9, 3, 10)), ConfigError);
  EngineDescriptor bad = accel(11, 4, 10);
  bad.buffer_bytes = 0;
  CHECK_THROWS_AS(r.register_engine(bad), ConfigError);
  bad = accel(11, 4, 10, {0, 1, 0, 0});
  CHECK_THROWS_AS(r.register_engine(bad), ConfigError);
  bad = accel(11, 4, 10, {1, 1, -1, 0});
  CHECK_THROWS_AS(r.register_engine(bad), ConfigError);
}

TEST_CASE("engine configuration file") {
  const auto defaults = default_engines();
  const auto parsed = parse_engine_config(engine_config_json(defaults));
  REQUIRE(parsed.engines().size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(parsed.engines()[i].id == defaults.engines()[i].id);
    CHECK(parsed.engines()[i].buffer_bytes == defaults.engines()[i].buffer_bytes);
    CHECK(parsed.engines()[i].perf.compute_flops_per_sec ==
          defaults.engines()[i].perf.compute_flops_per_sec);
  }
  const auto from_file = load_engine_config(HGEMM_CONFIG_DIR "/engines_default.json");
  CHECK(capacity_of(from_file.engines()[0]) == 4305);
  CHECK(capacity_of(from_file.engines()[1]) == 3008);
  CHECK(from_file.host()->id == 0);

  const char* bare = R"([{"id": 3, "kind": "accelerator", "buffer_bytes": 12, "elem_bytes": 4,
      "perf": {"compute_flops_per_sec": 1, "transfer_bytes_per_sec": 1,
               "transfer_latency_sec": 0, "kernel_launch_sec": 0}, "priority_rank": 0}])";
  CHECK(capacity_of(parse_engine_config(bare).engines()[0]) == 1);

  CHECK_THROWS_AS(parse_engine_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_engine_config(R"({"engines": [{"id": 1}]})"), ConfigError);
  CHECK_THROWS_AS(parse_engine_config(R"({"engines": [{"id": 1, "kind": "gpu", "buffer_bytes": 1,
      "elem_bytes": 4, "perf": {}, "priority_rank": 0}]})"),
                  ConfigError);
  CHECK_THROWS_AS(load_engine_config("/nonexistent/engines.json"), ConfigError);
}

TEST_CASE("clock presets") {
  CHECK(clock_presets().size() == 6);
  CHECK(find_preset("115").apu_mhz == 3335);
  CHECK(find_preset("90").memory_mhz == 1440);
  CHECK_THROWS_AS(find_preset("99"), ConfigError);
  const auto base = default_engines();
  const auto same = apply_preset(base, find_preset("Default"));
  CHECK(same.engines()[0].perf.compute_flops_per_sec == base.engines()[0].perf.compute_flops_per_sec);
  const auto fast = apply_preset(base, find_preset("115"));
  for (std::size_t i = 0; i < base.engines().size(); ++i) {
    CHECK(fast.engines()[i].perf.compute_flops_per_sec >
          base.engines()[i].perf.compute_flops_per_sec);
    CHECK(fast.engines()[i].perf.transfer_bytes_per_sec ==
          doctest::Approx(base.engines()[i].perf.transfer_bytes_per_sec * 1840.0 / 1333.0));
  }
}

TEST_CASE("simulated queue computes through the oracle") {
  MMQueue q(accel(1, 0, 16));
  MatrixF a = from_rows<float>({{1, 2}, {3, 4}});
  MatrixF b = from_rows<float>({{5, 6}, {7, 8}});
  MatrixF c(2, 2);
  auto h = q.enqueue_mm(c.view(), a.cview(), b.cview(), false);
  CHECK(h.wait().ok());
  CHECK(c(1, 1) == 50.0f);

  std::mt19937_64 rng(2);
  MatrixF x = random_matrix<float>(13, 9, rng);
  MatrixF y = random_matrix<float>(9, 16, rng);
  MatrixF pre = random_matrix<float>(13, 16, rng);
  MatrixF got = pre, ref = pre;
  naive_mm(ref.view(), x.cview(), y.cview(), true);
  CHECK(q.enqueue_mm(got.view(), x.cview(), y.cview(), true).wait().ok());
  CHECK(rel_error(got.cview(), ref.cview()) == 0.0);
}

TEST_CASE("host queue matches the oracle") {
  EngineDescriptor host = accel(0, 0, 200);
  host.kind = EngineKind::host_cpu;
  MMQueue q(host);
  std::mt19937_64 rng(3);
  MatrixF a = random_matrix<float>(150, 120, rng);
  MatrixF b = random_matrix<float>(120, 170, rng);
  MatrixF c(150, 170);
  auto h = q.enqueue_mm(c.view(), a.cview(), b.cview(), false);
  REQUIRE(h.wait().ok());
  CHECK(rel_error(c.cview(), oracle_product(a, b).cview()) <= kTolerance);
  CHECK(h.timing().total() >= 0.0);
  CHECK(q.clock() == doctest::Approx(h.timing().total()));
}

TEST_CASE("capacity boundary") {
  MMQueue q(accel(1, 0, 20), {.numerics = false});
  auto ok = q.enqueue_mm(ViewF::shape_only(20, 20), ConstViewF::shape_only(20, 20),
                         ConstViewF::shape_only(20, 20), false);
  CHECK(ok.wait().ok());
  auto over = q.enqueue_mm(ViewF::shape_only(20, 20), ConstViewF::shape_only(20, 21),
                           ConstViewF::shape_only(21, 20), false);
  CHECK(over.ready());
  const Status s = over.wait();
  CHECK(s.code == StatusCode::capacity_exceeded);
  CHECK(wait(over).code == StatusCode::capacity_exceeded);
  // rejected before any transfer: clock and history only hold the first command
  q.finish();
  CHECK(q.history().size() == 1);

  auto bad = q.enqueue_mm(ViewF::shape_only(3, 3), ConstViewF::shape_only(3, 4),
                          ConstViewF::shape_only(3, 3), false);
  CHECK(bad.wait().code == StatusCode::shape_mismatch);
}

TEST_CASE("numeric queue rejects views without storage") {
  MMQueue q(accel(1, 0, 8));
  auto h = q.enqueue_mm(ViewF::shape_only(2, 2), ConstViewF::shape_only(2, 2),
                        ConstViewF::shape_only(2, 2), false);
  CHECK(h.wait().code == StatusCode::failed);
}

TEST_CASE("simulated timing of a 1000 x 1000 command") {
  MMQueue q(accel(1, 0, 1000, {1e11, 8e9, 0, 0}), {.numerics = false});
  auto h = q.enqueue_mm(ViewF::shape_only(1000, 1000), ConstViewF::shape_only(1000, 1000),
                        ConstViewF::shape_only(1000, 1000), false);
  REQUIRE(h.wait().ok());
  const auto t = h.timing();
  CHECK(t.transfer_in == doctest::Approx(8e6 / 8e9).epsilon(1e-15));
  CHECK(t.compute == doctest::Approx(2e9 / 1e11).epsilon(1e-15));
  CHECK(t.transfer_out == doctest::Approx(4e6 / 8e9).epsilon(1e-15));
}

TEST_CASE("wait is idempotent and FIFO") {
  MMQueue q(accel(1, 0, 64));
  std::mt19937_64 rng(4);
  MatrixF a = random_matrix<float>(64, 64, rng);
  MatrixF b = random_matrix<float>(64, 64, rng);
  MatrixF c1(64, 64), c2(64, 64);
  auto h1 = q.enqueue_mm(c1.view(), a.cview(), b.cview(), false);
  auto h2 = q.enqueue_mm(c2.view(), a.cview(), b.cview(), false);
  CHECK(h2.wait().ok());
  CHECK(h1.ready());
  CHECK(h2.wait().ok());
  CHECK(h1.sequence() < h2.sequence());
  CHECK(CompletionHandle{}.wait().code == StatusCode::failed);
}

TEST_CASE("completion order equals enqueue order under concurrent enqueuers") {
  MMQueue q(accel(1, 0, 64, {1e9, 1e9, 1e-6, 1e-6}), {.numerics = false});
  constexpr int kThreads = 4, kPerThread = 200;
  std::vector<std::thread> threads;
  std::vector<std::vector<CompletionHandle>> handles(kThreads);
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < kPerThread; ++i) {
        const std::size_t n = 1 + static_cast<std::size_t>((t * 7 + i) % 60);
        handles[t].push_back(q.enqueue_mm(ViewF::shape_only(n, n), ConstViewF::shape_only(n, n),
                                          ConstViewF::shape_only(n, n), false));
      }
    });
  }
  for (auto& th : threads) th.join();
  q.finish();
  const auto history = q.history();
  REQUIRE(history.size() == kThreads * kPerThread);
  for (std::size_t i = 0; i < history.size(); ++i) REQUIRE(history[i].sequence == i);
  // per thread, sequence numbers grow in the order of its own enqueues
  for (const auto& hs : handles)
    for (std::size_t i = 1; i < hs.size(); ++i) REQUIRE(hs[i - 1].sequence() < hs[i].sequence());

  double sum = 0.0;
  for (const auto& rec : history) sum += rec.timing.total();
  CHECK(q.clock() == sum);
}

TEST_CASE("clock additivity and reset") {
  MMQueue q(accel(1, 0, 500, {3e10, 7e9, 2e-6, 3e-5}), {.numerics = false});
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> dim(0, 500);
  double expected = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t m = dim(rng), n = dim(rng), k = dim(rng);
    auto h = q.enqueue_mm(ViewF::shape_only(m, n), ConstViewF::shape_only(m, k),
                          ConstViewF::shape_only(k, n), i % 2 == 0);
    REQUIRE(h.wait().ok());
    expected += h.timing().total();
    CHECK(h.timing().total() == sim_execute_time(q.engine(), m, n, k).total());
  }
  CHECK(q.clock() == expected);
  q.reset_stats();
  CHECK(q.clock() == 0.0);
  CHECK(q.history().empty());
}

TEST_CASE("two queues run concurrently on disjoint views") {
  MMQueue q0(accel(1, 0, 128));
  MMQueue q1(accel(2, 1, 128));
  std::mt19937_64 rng(6);
  MatrixF a = random_matrix<float>(100, 80, rng);
  MatrixF b = random_matrix<float>(80, 120, rng);
  MatrixF c(100, 120);
  auto left = c.view().sub(0, 0, 100, 60);
  auto right = c.view().sub(0, 60, 100, 60);
  auto h0 = q0.enqueue_mm(left, a.cview(), b.view().sub(0, 0, 80, 60), false);
  auto h1 = q1.enqueue_mm(right, a.cview(), b.view().sub(0, 60, 80, 60), false);
  CHECK(h0.wait().ok());
  CHECK(h1.wait().ok());
  CHECK(rel_error(c.cview(), oracle_product(a, b).cview()) == 0.0);
}

TEST_CASE("platform builds one queue per accelerator in priority order") {
  Platform p(default_engines(), {.numerics = false});
  REQUIRE(p.accelerator_count() == 2);
  CHECK(p.accelerator(0).capacity() == 4305);
  CHECK(p.accelerator(1).capacity() == 3008);
  CHECK(p.host()->kind == EngineKind::host_cpu);
  Platform empty(EngineRegistry{});
  CHECK(empty.accelerator_count() == 0);
}
