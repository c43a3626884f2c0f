"""Benchmark harness: contiguous paged arrays vs a naive nested baseline.

The baseline stores each page as a Python list of row lists and multiplies
with explicit triple loops, mirroring a nested vector-of-vectors 3D
container.  It exists only for benchmarking and tests; it is not part of
the library API.  Both implementations produce bit-identical results on
integer-valued inputs, which the harness asserts before timing.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .matarr import ComplexMatrixArray

__all__ = ["NaiveMatrixList", "BenchRow", "run_benchmark", "benchmark_csv", "BENCH_HEADER"]


class NaiveMatrixList:
    """Nested-list-of-matrices baseline (bench/test use only)."""

    def __init__(self, pages: list[list[list[complex]]]):
        self.pages = pages

    @classmethod
    def from_array(cls, a: ComplexMatrixArray) -> "NaiveMatrixList":
        return cls([[list(row) for row in a.page(p)] for p in range(a.pages)])

    def multiply(self, other: "NaiveMatrixList") -> "NaiveMatrixList":
        out = []
        for pa, pb in zip(self.pages, other.pages):
            rows = len(pa)
            inner = len(pb)
            cols = len(pb[0])
            page = []
            for r in range(rows):
                row = []
                ar = pa[r]
                for c in range(cols):
                    acc = 0j
                    for k in range(inner):
                        acc += ar[k] * pb[k][c]
                    row.append(acc)
                page.append(row)
            out.append(page)
        return NaiveMatrixList(out)

    def to_array(self) -> ComplexMatrixArray:
        return ComplexMatrixArray.from_paged(np.array(self.pages, dtype=np.complex128))


@dataclass
class BenchRow:
    depth: int
    calls: int
    contiguous_ms: float
    naive_ms: float

    @property
    def speedup(self) -> float:
        return self.naive_ms / self.contiguous_ms if self.contiguous_ms > 0 else float("inf")


def _integer_array(rng: np.random.Generator, depth: int) -> ComplexMatrixArray:
    vals = rng.integers(-9, 10, (depth, 2, 2)) + 1j * rng.integers(-9, 10, (depth, 2, 2))
    return ComplexMatrixArray.from_paged(vals.astype(np.complex128))


def run_benchmark(depths, repetitions: int = 2000, seed: int = 0) -> list[BenchRow]:
    """Time `repetitions` whole-array page multiplications per depth.

    2x2 pages with integer values; verifies both implementations agree
    bit-for-bit before timing.
    """
    rows = []
    for depth in depths:
        rng = np.random.default_rng((seed, depth))
        a = _integer_array(rng, depth)
        b = _integer_array(rng, depth)
        na = NaiveMatrixList.from_array(a)
        nb = NaiveMatrixList.from_array(b)

        if not np.array_equal(a.page_multiply(b).data, na.multiply(nb).to_array().data):
            raise AssertionError(f"implementations disagree at depth {depth}")

        t0 = time.perf_counter()
        for _ in range(repetitions):
            a.page_multiply(b)
        t_contig = time.perf_counter() - t0

        t0 = time.perf_counter()
        for _ in range(repetitions):
            na.multiply(nb)
        t_naive = time.perf_counter() - t0

        rows.append(
            BenchRow(
                depth=depth,
                calls=repetitions,
                contiguous_ms=t_contig * 1e3,
                naive_ms=t_naive * 1e3,
            )
        )
    return rows


BENCH_HEADER = "depth,calls,contiguousMs,naiveMs,speedup"


def benchmark_csv(rows: list[BenchRow]) -> str:
    lines = [BENCH_HEADER]
    for r in rows:
        lines.append(f"{r.depth},{r.calls},{r.contiguous_ms:.3f},{r.naive_ms:.3f},{r.speedup:.3f}")
    return "\n".join(lines) + "\n"
