import numpy as np
import pytest

import hgemm


@pytest.fixture
def operands():
    rng = np.random.default_rng(3)
    a = rng.uniform(-1, 1, (70, 45)).astype(np.float32)
    b = rng.uniform(-1, 1, (45, 83)).astype(np.float32)
    return a, b, hgemm.naive_mm(a, b)


def test_naive_matches_numpy(operands):
    a, b, ref = operands
    expected = a.astype(np.float64) @ b.astype(np.float64)
    assert hgemm.rel_error(ref, expected.astype(np.float32)) <= 1e-5


@pytest.mark.parametrize("algo", ["blocked", "winograd", "rmul"])
def test_products_match_oracle(operands, algo):
    a, b, ref = operands
    if algo == "blocked":
        c = hgemm.blocked_mm(a, b)
    elif algo == "winograd":
        c = hgemm.winograd_mm(a, b, cutoff=8)
    else:
        c, events = hgemm.rmul(a, b, k0=8, k1=16, recursion_point=32)
        assert events[0]["kind"] == "recurse"
    assert c.shape == (70, 83)
    assert hgemm.rel_error(c, ref) <= 1e-4


def test_rmul_default_policy_uses_cpu_leaf(operands):
    a, b, ref = operands
    c, events = hgemm.rmul(a, b)
    assert [e["kind"] for e in events] == ["leaf_cpu"]
    assert hgemm.rel_error(c, ref) <= 1e-4


def test_shape_errors():
    with pytest.raises(ValueError):
        hgemm.blocked_mm(np.zeros((3, 4), np.float32), np.zeros((5, 2), np.float32))
    with pytest.raises(ValueError):
        hgemm.winograd_mm(np.zeros((4, 4), np.float32), np.zeros((4, 4), np.float32), cutoff=1)


def test_capacities():
    assert hgemm.capacity_of(108_576_768) == 3008
    assert hgemm.capacity_of(222_396_300) == 4305
    assert sorted(hgemm.capacities().values()) == [3008, 4305]
    assert hgemm.auto_recursion_point() == 6016


def test_fast_work_bound():
    for n in (256, 512, 1024):
        assert hgemm.flop_count_fast(n, cutoff=64) < 2 * n**3


def test_bench_helpers():
    assert hgemm.gflops("blocked", 1000, 0.02) == pytest.approx(100.0)
    assert hgemm.reported_size("dual_independent", 4000) == pytest.approx(5039.684, rel=1e-6)
    rec = hgemm.dual_independent_bench(4000)
    assert rec["algo"] == "dual_independent"
    assert rec["gflops"] == pytest.approx(4 * 4000**3 / rec["wall_sec"] / 1e9)
    fast = hgemm.simulated_rmul_seconds(6016, preset="115")
    assert fast < hgemm.simulated_rmul_seconds(6016)
    with pytest.raises(hgemm.ConfigError):
        hgemm.dual_independent_bench(100, preset="120")


def test_run_sweep():
    rows = hgemm.run_sweep([16, 48], ["naive", "winograd", "dual_independent"], repetitions=2)
    assert len(rows) == 12
    assert {r["algo"] for r in rows} == {"naive", "winograd", "dual_independent"}
    assert all(r["wall_sec"] > 0 for r in rows)
