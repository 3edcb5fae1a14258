"""Hybrid multi-engine matrix multiplication."""

from ._hgemm import (
    CapacityError,
    ConfigError,
    auto_recursion_point,
    blocked_mm,
    capacities,
    capacity_of,
    dual_independent_bench,
    flop_count_fast,
    gflops,
    naive_mm,
    rel_error,
    reported_size,
    rmul,
    run_sweep,
    simulated_rmul_seconds,
    winograd_mm,
)

__all__ = [
    "CapacityError",
    "ConfigError",
    "auto_recursion_point",
    "blocked_mm",
    "capacities",
    "capacity_of",
    "dual_independent_bench",
    "flop_count_fast",
    "gflops",
    "naive_mm",
    "rel_error",
    "reported_size",
    "rmul",
    "run_sweep",
    "simulated_rmul_seconds",
    "winograd_mm",
]
