"""Throughput comparison of the two activity-parsing backends.

Generates a synthetic activity CSV in memory, feeds the identical buffer to
the compiled kernel and to the pure Python fallback, and reports lines per
second plus the speedup. Also cross-checks that both backends produce the
same arrays, so the benchmark doubles as a parity smoke test.

Usage:
    python benchmarks/bench_parse.py [--lines N] [--repeat K]
"""

import argparse
import datetime
import time

import numpy as np

from ipactivity._kernels import _fallback

try:
    from ipactivity._kernels import _native
except ImportError:
    _native = None


def make_buffer(lines: int, seed: int = 11) -> bytes:
    rng = np.random.default_rng(seed)
    first = datetime.date(2015, 1, 5)
    days = [(first + datetime.timedelta(days=int(d))).isoformat() for d in range(28)]
    out = []
    day_pick = rng.integers(0, len(days), lines)
    octets = rng.integers(0, 256, (lines, 2))
    hits = rng.integers(1, 1000, lines)
    for i in range(lines):
        out.append(f"{days[day_pick[i]]},10.{octets[i, 0]}.{octets[i, 1]}.{i % 256},{hits[i]}\n")
    return "".join(out).encode()


def bench(impl, buf: bytes, repeat: int):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = impl.parse_activity(buf, 1)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lines", type=int, default=1_000_000, help="lines to parse")
    ap.add_argument("--repeat", type=int, default=3, help="timed repetitions, best wins")
    args = ap.parse_args()

    buf = make_buffer(args.lines)
    mb = len(buf) / 1e6
    print(f"buffer: {args.lines:,} lines, {mb:.1f} MB")

    py_time, py_out = bench(_fallback, buf, args.repeat)
    print(f"python  backend: {py_time:8.3f}s  {args.lines / py_time / 1e6:6.2f} Mlines/s  {mb / py_time:7.1f} MB/s")

    if _native is None:
        print("native backend not built; set up the package with its extension first")
        return

    nat_time, nat_out = bench(_native, buf, args.repeat)
    print(f"native  backend: {nat_time:8.3f}s  {args.lines / nat_time / 1e6:6.2f} Mlines/s  {mb / nat_time:7.1f} MB/s")
    print(f"speedup: {py_time / nat_time:.1f}x")

    for a, b, name in zip(py_out, nat_out, ("days", "ips", "hits", "bad", "n_lines")):
        same = np.array_equal(a, b) if isinstance(a, np.ndarray) else a == b
        if not same:
            raise SystemExit(f"backend outputs disagree on {name}")
    print("parity: backends agree on all outputs")


if __name__ == "__main__":
    main()
