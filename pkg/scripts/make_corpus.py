#!/usr/bin/env python3
"""Generate a synthetic labeled corpus on disk.

Writes invoke-list sample files plus a manifest.csv that the apksift CLI
consumes, and the matching reference lists at all three granularities.

    python scripts/make_corpus.py --out corpus/ --per-class 300 --seed 7
    python scripts/make_corpus.py --out tcorpus/ --kind temporal --seed 7
"""

import argparse
from pathlib import Path

from apksift.reference import REFERENCE_FILENAMES, Granularity, save_reference
from apksift.synth import (
    EXPERIMENT_VOCAB,
    generate_corpus,
    generate_temporal_corpus,
    reference_from_vocab,
    temporal_vocab,
    write_corpus,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--kind", choices=["experiment", "temporal"], default="experiment")
    parser.add_argument("--per-class", type=int, default=300)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    if args.kind == "experiment":
        samples = generate_corpus(n_per_class=args.per_class, seed=args.seed)
        vocab = EXPERIMENT_VOCAB
    else:
        samples = generate_temporal_corpus(seed=args.seed)
        vocab = temporal_vocab()

    manifest = write_corpus(out, samples)
    for g in (Granularity.Package, Granularity.Class, Granularity.Method):
        ref = reference_from_vocab(vocab, g)
        save_reference(ref, out / REFERENCE_FILENAMES[g])
    counts = {}
    for s in samples:
        counts[s.label.value] = counts.get(s.label.value, 0) + 1
    print(f"wrote {len(samples)} samples to {out} ({counts})")
    print(f"manifest: {manifest}")
    names = ", ".join(REFERENCE_FILENAMES[g] for g in REFERENCE_FILENAMES)
    print(f"reference lists: {names}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
