"""Experiment protocols: repeated random splits with ROC analysis, temporal
evaluation at a fixed false-positive operating point, and obfuscation
robustness.

Protocol invariants enforced here rather than assumed: train/test id sets
are disjoint in every protocol, stratified splits preserve per-class
proportions within one sample, and each ROC curve is monotone with rates in
[0, 1]. Averaged ROC curves across repeats use vertical averaging (mean TPR
on a fixed FPR grid); per-repeat curves are always reported alongside, and
the choice is recorded in the report notes.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field, replace
from datetime import date
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .errors import (
    ConfigError,
    EmptyBin,
    IoFailure,
    MissingClass,
    TooFewSamples,
    UsageError,
)
from .apk import open_apk
from .dex import extract_invokes, parse_dex
from .features import extract_features, extract_from_sample
from .forest import (
    CLASS_ORDER,
    Hyperparams,
    Label,
    LabeledDataset,
    LabeledSample,
    RandomForestModel,
    _derive_seed,
    predict,
    predict_proba,
    select_n_trees,
    train_forest,
)
from .invokes import InvokeSite
from .reference import ApiReferenceList

logger = logging.getLogger(__name__)

_CLASS_INDEX = {label: i for i, label in enumerate(CLASS_ORDER)}

RANSOMWARE_CURVE = "ransomware_vs_benign"
MALWARE_CURVE = "malware_vs_benign"


# ---------------------------------------------------------------------------
# samples carried at the invoke-list level (needed by obfuscation protocols)


@dataclass(frozen=True)
class InvokeSample:
    """A labeled sample still in invoke-list form."""

    sample_id: str
    label: Label
    first_seen: date | None
    invokes: tuple[InvokeSite, ...]


def dataset_from_invoke_samples(
    samples: Iterable[InvokeSample], ref: ApiReferenceList
) -> LabeledDataset:
    return LabeledDataset(
        LabeledSample(s.sample_id, extract_features(s.invokes, ref), s.label, s.first_seen)
        for s in samples
    )


# ---------------------------------------------------------------------------
# ROC machinery


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    fpr: float
    tpr: float


@dataclass(frozen=True)
class RocCurve:
    """Threshold sweep, sorted by descending threshold; fpr/tpr non-decreasing."""

    points: tuple[RocPoint, ...]

    def validate(self) -> None:
        if not self.points:
            raise ValueError("empty ROC curve")
        prev_t, prev_f, prev_d = float("inf"), -1.0, -1.0
        for p in self.points:
            if not (0.0 <= p.fpr <= 1.0 and 0.0 <= p.tpr <= 1.0):
                raise ValueError(f"rate out of range at threshold {p.threshold}")
            if p.threshold >= prev_t or p.fpr < prev_f or p.tpr < prev_d:
                raise ValueError(f"non-monotone curve at threshold {p.threshold}")
            prev_t, prev_f, prev_d = p.threshold, p.fpr, p.tpr
        last = self.points[-1]
        if last.fpr != 1.0 or last.tpr != 1.0:
            raise ValueError("curve does not end at (1, 1)")

    def tpr_at_fpr(self, target_fpr: float) -> float:
        """Max TPR among points with fpr <= target (0.0 if none qualify)."""
        best = 0.0
        for p in self.points:
            if p.fpr <= target_fpr and p.tpr > best:
                best = p.tpr
        return best

    def auc(self) -> float:
        xs = [0.0] + [p.fpr for p in self.points]
        ys = [0.0] + [p.tpr for p in self.points]
        area = 0.0
        for i in range(1, len(xs)):
            area += (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]) / 2.0
        return area


def roc_from_scores(scores: Sequence[float], positive: Sequence[bool]) -> RocCurve:
    """Sweep every distinct score as a threshold (classify as positive when
    score >= threshold), prefixed by a sentinel above the maximum score so
    the curve starts at (0, 0)."""
    n_pos = sum(1 for p in positive if p)
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MissingClass(f"need both positives and negatives ({n_pos} pos, {n_neg} neg)")
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    points = [RocPoint(float(max(scores) + 1.0), 0.0, 0.0)]
    tp = fp = 0
    i = 0
    n = len(order)
    while i < n:
        t = scores[order[i]]
        while i < n and scores[order[i]] == t:
            if positive[order[i]]:
                tp += 1
            else:
                fp += 1
            i += 1
        points.append(RocPoint(float(t), fp / n_neg, tp / n_pos))
    curve = RocCurve(tuple(points))
    curve.validate()
    return curve


def roc_one_vs_benign(
    model: RandomForestModel, test: LabeledDataset, positive_class: Label
) -> RocCurve:
    """ROC over {positive_class} union {Trusted}; the third class is excluded."""
    if positive_class not in (Label.Ransomware, Label.GenericMalware):
        raise ValueError(f"positive class must be a malicious class, got {positive_class}")
    pos_idx = _CLASS_INDEX[positive_class]
    scores: list[float] = []
    positive: list[bool] = []
    for s in test:
        if s.label is positive_class or s.label is Label.Trusted:
            scores.append(predict_proba(model, s.features)[pos_idx])
            positive.append(s.label is positive_class)
    return roc_from_scores(scores, positive)


def operating_point(curve: RocCurve, target_fpr: float = 0.01) -> float:
    """Deployment threshold at a false-positive budget.

    The smallest threshold whose fpr still fits the budget (detection is
    non-increasing in the threshold, so this maximizes TPR); if no point
    meets the budget, fall back to the highest threshold on the curve.
    """
    candidates = [p.threshold for p in curve.points if p.fpr <= target_fpr]
    if not candidates:
        return curve.points[0].threshold
    return min(candidates)


# ---------------------------------------------------------------------------
# stratified splitting


def stratified_split_indices(
    labels: Sequence[Label], fraction: float, rng: np.random.Generator
) -> tuple[list[int], list[int]]:
    """Per-class split preserving proportions within one sample."""
    train: list[int] = []
    test: list[int] = []
    for label in CLASS_ORDER:
        idxs = [i for i, l in enumerate(labels) if l is label]
        if not idxs:
            continue
        perm = rng.permutation(len(idxs))
        n_train = round(len(idxs) * fraction)
        n_train = min(max(n_train, 1), len(idxs) - 1) if len(idxs) >= 2 else n_train
        for j, p in enumerate(perm.tolist()):
            (train if j < n_train else test).append(idxs[p])
    return sorted(train), sorted(test)


def _split_dataset(
    data: LabeledDataset, fraction: float, rng: np.random.Generator
) -> tuple[LabeledDataset, LabeledDataset]:
    labels = [s.label for s in data]
    train_idx, test_idx = stratified_split_indices(labels, fraction, rng)
    train, test = data.subset(train_idx), data.subset(test_idx)
    if train.ids() & test.ids():
        raise ConfigError("train/test id overlap after split")
    return train, test


# ---------------------------------------------------------------------------
# reports

FPR_GRID = tuple(i / 100 for i in range(101))

_AVERAGING_NOTE = (
    "averaged curves use vertical averaging: mean TPR across repeats at a "
    "fixed FPR grid; per-repeat curves are reported verbatim"
)


@dataclass(frozen=True)
class RepeatResult:
    repeat: int
    n_trees: int
    metrics: dict[str, float]
    curves: dict[str, RocCurve]


@dataclass(frozen=True)
class RandomSplitReport:
    protocol: str
    tool_version: str
    seed: int
    reference_fingerprint: str
    params: dict
    repeats: tuple[RepeatResult, ...]
    mean: dict[str, float]
    std: dict[str, float]  # empty when repeats == 1
    averaged_curves: dict[str, tuple[tuple[float, float], ...]]
    notes: tuple[str, ...]
    runtime_seconds: float = field(compare=False)


@dataclass(frozen=True)
class BinResult:
    label: str
    start: date
    end: date
    n_samples: int
    n_detected: int
    detection_rate: float | None  # None for an empty bin
    empty: bool


@dataclass(frozen=True)
class TemporalReport:
    protocol: str
    tool_version: str
    seed: int
    reference_fingerprint: str
    params: dict
    threshold: float
    n_trees: int
    bins: tuple[BinResult, ...]
    overall_detection_rate: float | None
    notes: tuple[str, ...]
    runtime_seconds: float = field(compare=False)


@dataclass(frozen=True)
class ObfuscationReport:
    protocol: str
    tool_version: str
    seed: int
    reference_fingerprint: str
    params: dict
    transform_kind: str
    plus_one: bool
    injected_id: str | None
    n_transformed: int
    n_detected: int
    detection_rate: float
    notes: tuple[str, ...]
    runtime_seconds: float = field(compare=False)


# ---------------------------------------------------------------------------
# protocol 1: repeated random splits


def random_split_eval(
    data: LabeledDataset,
    fraction: float = 0.5,
    repeats: int = 5,
    seed: int = 0,
    grid: Sequence[int] = (10, 25, 50),
    target_fpr: float = 0.01,
    hp_base: Hyperparams | None = None,
    cv_folds: int = 10,
) -> RandomSplitReport:
    """Stratified split, per-split n_trees selection, two ROC curves per repeat."""
    t0 = time.perf_counter()
    counts = data.class_counts()
    if any(c < 2 for c in counts):
        raise TooFewSamples(f"every class needs >= 2 samples, got {counts}")
    repeat_results: list[RepeatResult] = []
    for r in range(repeats):
        rng = np.random.default_rng((seed, r, 7))
        train, test = _split_dataset(data, fraction, rng)
        n_trees = select_n_trees(
            train, grid, seed=_derive_seed(seed, r, 11), n_folds=cv_folds, hp_base=hp_base
        )
        hp = replace(hp_base or Hyperparams(), n_trees=n_trees, seed=_derive_seed(seed, r, 13))
        model = train_forest(train, hp)
        curves = {
            RANSOMWARE_CURVE: roc_one_vs_benign(model, test, Label.Ransomware),
            MALWARE_CURVE: roc_one_vs_benign(model, test, Label.GenericMalware),
        }
        metrics: dict[str, float] = {}
        for name, curve in curves.items():
            metrics[f"{name}:tpr_at_{target_fpr:g}_fpr"] = curve.tpr_at_fpr(target_fpr)
            metrics[f"{name}:auc"] = curve.auc()
        repeat_results.append(RepeatResult(r, n_trees, metrics, curves))

    metric_names = sorted(repeat_results[0].metrics)
    mean = {
        name: sum(rr.metrics[name] for rr in repeat_results) / len(repeat_results)
        for name in metric_names
    }
    std: dict[str, float] = {}
    if repeats > 1:
        for name in metric_names:
            values = [rr.metrics[name] for rr in repeat_results]
            std[name] = float(np.std(values, ddof=1))
    averaged = {}
    for name in (RANSOMWARE_CURVE, MALWARE_CURVE):
        averaged[name] = tuple(
            (
                f,
                sum(rr.curves[name].tpr_at_fpr(f) for rr in repeat_results)
                / len(repeat_results),
            )
            for f in FPR_GRID
        )
    return RandomSplitReport(
        protocol="random-split",
        tool_version=__version__,
        seed=seed,
        reference_fingerprint=data.reference_fingerprint,
        params={
            "fraction": fraction,
            "repeats": repeats,
            "grid": list(sorted(set(int(g) for g in grid))),
            "target_fpr": target_fpr,
            "cv_folds": cv_folds,
        },
        repeats=tuple(repeat_results),
        mean=mean,
        std=std,
        averaged_curves=averaged,
        notes=(_AVERAGING_NOTE,),
        runtime_seconds=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# protocol 2: temporal evaluation


@dataclass(frozen=True)
class TemporalSplitSpec:
    """Training cutoff plus post-cutoff test bins (every bin after d_tr)."""

    d_tr: date
    bins: tuple[tuple[str, date, date], ...]

    def __post_init__(self):
        for label, start, end in self.bins:
            if start <= self.d_tr:
                raise ConfigError(f"bin {label!r} starts {start}, not after {self.d_tr}")
            if end < start:
                raise ConfigError(f"bin {label!r} ends {end} before it starts {start}")


def temporal_eval(
    data: LabeledDataset,
    spec: TemporalSplitSpec,
    target_fpr: float = 0.01,
    holdout_fraction: float = 0.2,
    seed: int = 0,
    n_trees: int = 50,
    hp_base: Hyperparams | None = None,
) -> TemporalReport:
    """Train once on the pre-cutoff partition; report per-bin detection.

    Training keeps every trusted and generic-malware sample plus ransomware
    first seen on or before d_tr. The ransomware decision threshold is the
    operating point at target_fpr fitted on a stratified holdout carved out
    of the training partition (the model never sees the holdout); each bin
    then reports the fraction of its ransomware scored at or above it.
    """
    t0 = time.perf_counter()
    train_samples: list[LabeledSample] = []
    for s in data:
        if s.label is not Label.Ransomware:
            train_samples.append(s)
        else:
            if s.first_seen is None:
                raise ConfigError(f"ransomware sample {s.sample_id} lacks first_seen")
            if s.first_seen <= spec.d_tr:
                train_samples.append(s)
    if not train_samples:
        raise TooFewSamples("empty training partition")
    train_ids = {s.sample_id for s in train_samples}

    bin_members: list[list[LabeledSample]] = []
    for label, start, end in spec.bins:
        members = [
            s
            for s in data
            if s.label is Label.Ransomware
            and s.first_seen is not None
            and start <= s.first_seen <= end
        ]
        overlap = {s.sample_id for s in members} & train_ids
        if overlap:
            raise ConfigError(f"bin {label!r} overlaps training ids: {sorted(overlap)[:5]}")
        bin_members.append(members)

    partition = LabeledDataset(train_samples)
    rng = np.random.default_rng((seed, 17))
    fit_part, holdout = _split_dataset(partition, 1.0 - holdout_fraction, rng)
    hp = replace(hp_base or Hyperparams(), n_trees=n_trees, seed=_derive_seed(seed, 19))
    model = train_forest(fit_part, hp)
    curve = roc_one_vs_benign(model, holdout, Label.Ransomware)
    threshold = operating_point(curve, target_fpr)

    pos_idx = _CLASS_INDEX[Label.Ransomware]
    results: list[BinResult] = []
    total = detected_total = 0
    for (label, start, end), members in zip(spec.bins, bin_members):
        if not members:
            logger.warning("temporal bin %r is empty", label)
            results.append(BinResult(label, start, end, 0, 0, None, True))
            continue
        detected = sum(
            1 for s in members if predict_proba(model, s.features)[pos_idx] >= threshold
        )
        results.append(
            BinResult(label, start, end, len(members), detected, detected / len(members), False)
        )
        total += len(members)
        detected_total += detected
    return TemporalReport(
        protocol="temporal",
        tool_version=__version__,
        seed=seed,
        reference_fingerprint=data.reference_fingerprint,
        params={
            "d_tr": spec.d_tr.isoformat(),
            "target_fpr": target_fpr,
            "holdout_fraction": holdout_fraction,
            "n_trees": n_trees,
        },
        threshold=threshold,
        n_trees=n_trees,
        bins=tuple(results),
        overall_detection_rate=(detected_total / total) if total else None,
        notes=(
            "threshold fitted on a stratified holdout of the training partition; "
            "the model is trained once on the remainder and reused across bins",
        ),
        runtime_seconds=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# protocol 3: obfuscation robustness


def obfuscation_eval(
    samples: Sequence[InvokeSample],
    ref: ApiReferenceList,
    transform: Callable[[Sequence[InvokeSite]], list[InvokeSite]],
    plus_one: bool,
    transform_kind: str = "custom",
    seed: int = 0,
    n_trees: int = 50,
    hp_base: Hyperparams | None = None,
) -> ObfuscationReport:
    """Train on originals, classify every transformed ransomware sample.

    With plus_one, exactly one transformed sample (seeded choice) joins the
    training set labeled Ransomware, mirroring a single-sample injection.
    """
    t0 = time.perf_counter()
    ransomware = [s for s in samples if s.label is Label.Ransomware]
    if not ransomware:
        raise EmptyBin("ransomware")
    transformed = {s.sample_id: extract_features(transform(s.invokes), ref) for s in ransomware}

    train_rows = [
        LabeledSample(s.sample_id, extract_features(s.invokes, ref), s.label, s.first_seen)
        for s in samples
    ]
    injected_id = None
    if plus_one:
        rng = np.random.default_rng((seed, 23))
        pick = ransomware[int(rng.integers(len(ransomware)))]
        injected_id = pick.sample_id
        train_rows.append(
            LabeledSample(f"{pick.sample_id}+obf", transformed[pick.sample_id], Label.Ransomware)
        )
    train = LabeledDataset(train_rows)
    hp = replace(hp_base or Hyperparams(), n_trees=n_trees, seed=_derive_seed(seed, 29))
    model = train_forest(train, hp)
    detected = sum(1 for fv in transformed.values() if predict(model, fv) is Label.Ransomware)
    return ObfuscationReport(
        protocol="obfuscation",
        tool_version=__version__,
        seed=seed,
        reference_fingerprint=ref.fingerprint,
        params={"n_trees": n_trees, "plus_one": plus_one},
        transform_kind=transform_kind,
        plus_one=plus_one,
        injected_id=injected_id,
        n_transformed=len(transformed),
        n_detected=detected,
        detection_rate=detected / len(transformed),
        notes=(),
        runtime_seconds=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# report serialization


def _curve_to_list(curve: RocCurve) -> list[list[float]]:
    return [[p.threshold, p.fpr, p.tpr] for p in curve.points]


def _curve_from_list(rows: list) -> RocCurve:
    return RocCurve(tuple(RocPoint(float(t), float(f), float(d)) for t, f, d in rows))


def report_to_dict(report) -> dict:
    if isinstance(report, RandomSplitReport):
        return {
            "protocol": report.protocol,
            "tool_version": report.tool_version,
            "seed": report.seed,
            "reference_fingerprint": report.reference_fingerprint,
            "params": report.params,
            "repeats": [
                {
                    "repeat": rr.repeat,
                    "n_trees": rr.n_trees,
                    "metrics": rr.metrics,
                    "curves": {k: _curve_to_list(c) for k, c in rr.curves.items()},
                }
                for rr in report.repeats
            ],
            "mean": report.mean,
            "std": report.std,
            "averaged_curves": {
                k: [[f, t] for f, t in v] for k, v in report.averaged_curves.items()
            },
            "notes": list(report.notes),
            "runtime_seconds": report.runtime_seconds,
        }
    if isinstance(report, TemporalReport):
        return {
            "protocol": report.protocol,
            "tool_version": report.tool_version,
            "seed": report.seed,
            "reference_fingerprint": report.reference_fingerprint,
            "params": report.params,
            "threshold": report.threshold,
            "n_trees": report.n_trees,
            "bins": [
                {
                    "label": b.label,
                    "start": b.start.isoformat(),
                    "end": b.end.isoformat(),
                    "n_samples": b.n_samples,
                    "n_detected": b.n_detected,
                    "detection_rate": b.detection_rate,
                    "empty": b.empty,
                }
                for b in report.bins
            ],
            "overall_detection_rate": report.overall_detection_rate,
            "notes": list(report.notes),
            "runtime_seconds": report.runtime_seconds,
        }
    if isinstance(report, ObfuscationReport):
        return {
            "protocol": report.protocol,
            "tool_version": report.tool_version,
            "seed": report.seed,
            "reference_fingerprint": report.reference_fingerprint,
            "params": report.params,
            "transform_kind": report.transform_kind,
            "plus_one": report.plus_one,
            "injected_id": report.injected_id,
            "n_transformed": report.n_transformed,
            "n_detected": report.n_detected,
            "detection_rate": report.detection_rate,
            "notes": list(report.notes),
            "runtime_seconds": report.runtime_seconds,
        }
    raise UsageError(f"unknown report type {type(report).__name__}")


def report_from_dict(doc: dict):
    protocol = doc.get("protocol")
    if protocol == "random-split":
        return RandomSplitReport(
            protocol=protocol,
            tool_version=doc["tool_version"],
            seed=doc["seed"],
            reference_fingerprint=doc["reference_fingerprint"],
            params=doc["params"],
            repeats=tuple(
                RepeatResult(
                    rr["repeat"],
                    rr["n_trees"],
                    rr["metrics"],
                    {k: _curve_from_list(c) for k, c in rr["curves"].items()},
                )
                for rr in doc["repeats"]
            ),
            mean=doc["mean"],
            std=doc["std"],
            averaged_curves={
                k: tuple((float(f), float(t)) for f, t in v)
                for k, v in doc["averaged_curves"].items()
            },
            notes=tuple(doc["notes"]),
            runtime_seconds=doc["runtime_seconds"],
        )
    if protocol == "temporal":
        return TemporalReport(
            protocol=protocol,
            tool_version=doc["tool_version"],
            seed=doc["seed"],
            reference_fingerprint=doc["reference_fingerprint"],
            params=doc["params"],
            threshold=doc["threshold"],
            n_trees=doc["n_trees"],
            bins=tuple(
                BinResult(
                    b["label"],
                    date.fromisoformat(b["start"]),
                    date.fromisoformat(b["end"]),
                    b["n_samples"],
                    b["n_detected"],
                    b["detection_rate"],
                    b["empty"],
                )
                for b in doc["bins"]
            ),
            overall_detection_rate=doc["overall_detection_rate"],
            notes=tuple(doc["notes"]),
            runtime_seconds=doc["runtime_seconds"],
        )
    if protocol == "obfuscation":
        return ObfuscationReport(
            protocol=protocol,
            tool_version=doc["tool_version"],
            seed=doc["seed"],
            reference_fingerprint=doc["reference_fingerprint"],
            params=doc["params"],
            transform_kind=doc["transform_kind"],
            plus_one=doc["plus_one"],
            injected_id=doc["injected_id"],
            n_transformed=doc["n_transformed"],
            n_detected=doc["n_detected"],
            detection_rate=doc["detection_rate"],
            notes=tuple(doc["notes"]),
            runtime_seconds=doc["runtime_seconds"],
        )
    raise UsageError(f"unknown report protocol {protocol!r}")


def _csv_rows(report) -> tuple[list[str], list[list]]:
    if isinstance(report, RandomSplitReport):
        header = ["repeat", "curve", "threshold", "fpr", "tpr"]
        rows = []
        for rr in report.repeats:
            for name in sorted(rr.curves):
                for p in rr.curves[name].points:
                    rows.append([rr.repeat, name, repr(p.threshold), repr(p.fpr), repr(p.tpr)])
        return header, rows
    if isinstance(report, TemporalReport):
        header = ["bin", "start", "end", "n_samples", "n_detected", "detection_rate"]
        rows = [
            [
                b.label,
                b.start.isoformat(),
                b.end.isoformat(),
                b.n_samples,
                b.n_detected,
                "" if b.detection_rate is None else repr(b.detection_rate),
            ]
            for b in report.bins
        ]
        return header, rows
    if isinstance(report, ObfuscationReport):
        header = ["transform", "plus_one", "n_transformed", "n_detected", "detection_rate"]
        rows = [
            [
                report.transform_kind,
                report.plus_one,
                report.n_transformed,
                report.n_detected,
                repr(report.detection_rate),
            ]
        ]
        return header, rows
    raise UsageError(f"unknown report type {type(report).__name__}")


def emit_report(report, fmt: str, path) -> None:
    """Write a report file; fmt is 'csv' or 'text' (JSON structured text)."""
    if fmt == "text":
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        return
    if fmt == "csv":
        header, rows = _csv_rows(report)
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(header)
                writer.writerows(rows)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        return
    raise UsageError(f"unknown report format {fmt!r}")


def load_report(path):
    with open(path, "r", encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# dataset manifests


@dataclass(frozen=True)
class ManifestRow:
    path: str
    label: Label
    first_seen: date | None
    family: str


def load_labeled_dataset(
    manifest_path,
    ref: ApiReferenceList,
    strict: bool = False,
    skip_errors: bool = False,
) -> tuple[LabeledDataset, int]:
    """Extract features for every manifest row; returns (dataset, n_skipped).

    Rows may point at apks or invoke-list fixtures (sniffed by magic),
    relative to the manifest's directory. With skip_errors, unanalyzable
    rows are logged and dropped instead of aborting.
    """
    from pathlib import Path

    from .errors import ApksiftError

    base = Path(manifest_path).parent
    samples = []
    skipped = 0
    for row in load_manifest(manifest_path):
        full = base / row.path
        try:
            fv = extract_from_sample(full, ref, strict=strict)
        except ApksiftError as exc:
            if not skip_errors:
                raise
            logger.warning("skipping %s: %s", row.path, exc)
            skipped += 1
            continue
        samples.append(LabeledSample(row.path, fv, row.label, row.first_seen))
    if not samples:
        raise TooFewSamples(f"{manifest_path}: no analyzable rows")
    return LabeledDataset(samples), skipped


def _invokes_from_file(path, strict: bool = False) -> tuple[InvokeSite, ...]:
    from .features import is_invoke_list_path
    from .invokes import load_invoke_list_text

    if is_invoke_list_path(path):
        return tuple(load_invoke_list_text(path))
    package = open_apk(path)
    sites: list[InvokeSite] = []
    for blob in package.dex_blobs:
        sites.extend(extract_invokes(parse_dex(blob, strict=strict)))
    return tuple(sites)


def load_invoke_samples(manifest_path, strict: bool = False) -> list[InvokeSample]:
    """Manifest rows as invoke-level samples (needed by obfuscation protocols)."""
    from pathlib import Path

    base = Path(manifest_path).parent
    out = []
    for row in load_manifest(manifest_path):
        out.append(
            InvokeSample(
                row.path, row.label, row.first_seen, _invokes_from_file(base / row.path, strict)
            )
        )
    return out


def load_manifest(path) -> list[ManifestRow]:
    """Parse a `path,label,first_seen,family` CSV; paths stay as written."""
    rows: list[ManifestRow] = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"path", "label"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise ConfigError(f"{path}: manifest needs columns path,label[,first_seen,family]")
            for lineno, row in enumerate(reader, start=2):
                try:
                    label = Label(row["label"].strip().lower())
                except ValueError:
                    raise ConfigError(
                        f"{path}:{lineno}: unknown label {row['label']!r}"
                    ) from None
                raw_date = (row.get("first_seen") or "").strip()
                first_seen = date.fromisoformat(raw_date) if raw_date else None
                rows.append(
                    ManifestRow(row["path"].strip(), label, first_seen, (row.get("family") or "").strip())
                )
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return rows
