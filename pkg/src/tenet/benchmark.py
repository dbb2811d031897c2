"""Controller latency microbenchmark.

Times repeated single-state forward passes of a generated controller on one
reused input, single-threaded, so the number isolates compute rather than
memory traffic or environment cost.  The reported parameter count covers the
deployed controller only; the networks that generated it are not part of the
deployment footprint.
"""

from __future__ import annotations

import json
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError
from .nets import CompiledPolicy, ParamVec

MIN_ITERATIONS = 10_000


def machine_info() -> dict:
    return {
        "machine": platform.machine(),
        "processor": platform.processor(),
        "system": platform.system(),
        "python": sys.version.split()[0],
        "numpy": np.__version__,
    }


@dataclass
class BenchReport:
    param_count: int
    precision: str
    iterations: int
    median_latency_s: float
    p99_latency_s: float
    hz: float
    machine: dict = field(default_factory=machine_info)
    instantiation_latency_s: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "param_count": self.param_count,
            "precision": self.precision,
            "iterations": self.iterations,
            "median_latency_s": self.median_latency_s,
            "p99_latency_s": self.p99_latency_s,
            "hz": self.hz,
            "machine": self.machine,
            "instantiation_latency_s": self.instantiation_latency_s,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), sort_keys=True, indent=2), encoding="utf-8"
        )


def bench_controller(params: ParamVec, iterations: int = 100_000,
                     precision: str = "f64", warmup: int = 1_000,
                     state: np.ndarray | None = None) -> BenchReport:
    """Measure forward-pass latency of one controller.

    ``iterations`` must be at least 10,000 so the median and p99 are stable.
    """
    if iterations < MIN_ITERATIONS:
        raise InputError(f"iterations must be >= {MIN_ITERATIONS}")
    compiled = CompiledPolicy(params, precision)
    x = np.zeros(compiled.manifest.in_dim) if state is None else np.asarray(state)
    x = x.astype(np.float64 if precision == "f64" else np.float32)
    for _ in range(warmup):
        compiled(x)
    latencies = np.empty(iterations, dtype=np.float64)
    clock = time.perf_counter_ns
    for i in range(iterations):
        t0 = clock()
        compiled(x)
        latencies[i] = clock() - t0
    latencies *= 1e-9
    median = float(np.median(latencies))
    return BenchReport(
        param_count=compiled.param_count,
        precision=precision,
        iterations=iterations,
        median_latency_s=median,
        p99_latency_s=float(np.percentile(latencies, 99)),
        hz=1.0 / median,
    )


def bench_instantiation(model, text: str, iterations: int = 100) -> float:
    """Median seconds for one text -> controller instantiation."""
    model.instantiate(text)  # warm
    times = []
    for _ in range(iterations):
        t0 = time.perf_counter()
        model.instantiate(text)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))
