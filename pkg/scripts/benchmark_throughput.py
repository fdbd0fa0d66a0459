#!/usr/bin/env python3
"""Measure extraction throughput on a large synthetic dex.

    python scripts/benchmark_throughput.py --size-mb 5 --runs 5
"""

import argparse
import time

from apksift.dex import count_invoke_targets, extract_invokes, parse_dex
from apksift.features import features_from_dex_blobs
from apksift.reference import Granularity
from apksift.synth import EXPERIMENT_VOCAB, benchmark_dex, reference_from_vocab


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size-mb", type=float, default=5.0)
    parser.add_argument("--runs", type=int, default=5)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    t0 = time.perf_counter()
    blob = benchmark_dex(seed=args.seed, target_bytes=int(args.size_mb * 1024 * 1024))
    print(f"built {len(blob) / 1024 / 1024:.2f} MiB dex in {time.perf_counter() - t0:.1f}s")

    ref = reference_from_vocab(EXPERIMENT_VOCAB, Granularity.Method)
    for label, fn in (
        ("parse only", lambda: parse_dex(blob)),
        ("parse + count invokes", lambda: count_invoke_targets(parse_dex(blob))),
        ("parse + feature vector", lambda: features_from_dex_blobs([blob], ref)),
        ("parse + full invoke list", lambda: extract_invokes(parse_dex(blob))),
    ):
        times = []
        for _ in range(args.runs):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        print(f"{label:26s} min {min(times):.3f}s  mean {sum(times) / len(times):.3f}s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
