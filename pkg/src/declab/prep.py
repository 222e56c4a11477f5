"""Preprocessing plans and data-distribution drift statistics.

A PreprocessPlan is fitted once on a dataset snapshot and then applied to
feature vectors to produce fixed-dimension dense inputs: numeric columns are
clipped to the fitted [p0.5, p99.5] band and z-scored (missing values take
the fitted median), categorical columns are one-hot encoded with an
out-of-vocabulary bucket. Drift is measured with the population stability
index over 10 reference-quantile bins.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import errors
from .core import MISSING, FeatureSchema, FeatureVector
from .eventlog import DatasetSnapshot, JoinedExample

PSI_BINS = 10
PSI_EPS = 1e-6
PSI_ALERT_THRESHOLD = 0.2


@dataclass(frozen=True)
class NumericRecipe:
    mean: float
    std: float
    median: float
    clip_lo: float
    clip_hi: float


@dataclass(frozen=True)
class CategoricalRecipe:
    vocabulary: tuple[str, ...]  # OOV bucket appended at encode time


@dataclass(frozen=True)
class PreprocessPlan:
    schema_version: int
    numeric: dict[str, NumericRecipe]
    categorical: dict[str, CategoricalRecipe]
    column_order: tuple[str, ...]
    fitted_on: str  # snapshot content_hash

    @property
    def output_dim(self) -> int:
        dim = 0
        for name in self.column_order:
            if name in self.numeric:
                dim += 1
            else:
                dim += len(self.categorical[name].vocabulary) + 1
        return dim

    def output_names(self) -> list[str]:
        names = []
        for name in self.column_order:
            if name in self.numeric:
                names.append(name)
            else:
                vocab = self.categorical[name].vocabulary
                names.extend(f"{name}={tok}" for tok in vocab)
                names.append(f"{name}=<oov>")
        return names


@dataclass(frozen=True)
class DriftReport:
    per_column_psi: dict[str, float]
    overall_max_psi: float
    alert: bool


def fit_plan(snapshot: DatasetSnapshot, schema: FeatureSchema) -> PreprocessPlan:
    """Fit per-column statistics on a snapshot.

    Raises AllMissingColumn when a numeric column has no observed values.
    """
    rows = snapshot.rows
    if len(rows) < 2:
        raise errors.InsufficientData("need at least 2 rows to fit a plan")
    numeric: dict[str, NumericRecipe] = {}
    categorical: dict[str, CategoricalRecipe] = {}
    for col in schema.columns:
        observed = [r.features.get(col.name) for r in rows]
        present = [v for v in observed if v is not MISSING]
        if col.type == "numeric":
            if not present:
                raise errors.AllMissingColumn(col.name)
            arr = np.asarray(present, dtype=float)
            lo, hi = np.percentile(arr, [0.5, 99.5])
            clipped = np.clip(arr, lo, hi)
            numeric[col.name] = NumericRecipe(
                mean=float(clipped.mean()),
                std=float(clipped.std()),
                median=float(np.median(arr)),
                clip_lo=float(lo),
                clip_hi=float(hi),
            )
        else:
            vocab = tuple(sorted({str(v) for v in present}))
            categorical[col.name] = CategoricalRecipe(vocabulary=vocab)
    return PreprocessPlan(
        schema_version=schema.version,
        numeric=numeric,
        categorical=categorical,
        column_order=schema.names,
        fitted_on=snapshot.content_hash,
    )


def apply_plan(plan: PreprocessPlan, fv: FeatureVector,
               schema_version: Optional[int] = None) -> np.ndarray:
    """Encode one feature vector into the plan's dense space."""
    if schema_version is not None and schema_version != plan.schema_version:
        raise errors.SchemaVersionMismatch(
            f"plan fitted on v{plan.schema_version}, got v{schema_version}")
    out = np.zeros(plan.output_dim)
    i = 0
    for name in plan.column_order:
        if name in plan.numeric:
            rec = plan.numeric[name]
            v = fv.get(name)
            x = rec.median if v is MISSING else float(v)
            x = min(max(x, rec.clip_lo), rec.clip_hi)
            out[i] = (x - rec.mean) / rec.std if rec.std > 0 else 0.0
            i += 1
        else:
            vocab = plan.categorical[name].vocabulary
            v = fv.get(name)
            if v is not MISSING and v in vocab:
                out[i + vocab.index(v)] = 1.0
            else:
                out[i + len(vocab)] = 1.0  # OOV / missing bucket
            i += len(vocab) + 1
    return out


def encode_rows(plan: PreprocessPlan,
                rows: Sequence[JoinedExample]) -> np.ndarray:
    return np.stack([apply_plan(plan, r.features) for r in rows])


def split(snapshot: DatasetSnapshot, ratios: tuple[float, float, float],
          seed: int) -> tuple[list[JoinedExample], list[JoinedExample],
                              list[JoinedExample]]:
    """Unit-disjoint train/validation/test split, deterministic under seed."""
    if abs(sum(ratios) - 1.0) > 1e-9 or any(r < 0 for r in ratios):
        raise errors.BadRatios(str(ratios))
    units = sorted({r.unit_id for r in snapshot.rows})
    rng = np.random.RandomState(seed)
    rng.shuffle(units)
    n = len(units)
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    fold_of = {}
    for idx, unit in enumerate(units):
        if idx < n_train:
            fold_of[unit] = 0
        elif idx < n_train + n_val:
            fold_of[unit] = 1
        else:
            fold_of[unit] = 2
    folds: tuple[list, list, list] = ([], [], [])
    for row in snapshot.rows:
        folds[fold_of[row.unit_id]].append(row)
    return folds


def compute_psi(reference: Iterable[float], current: Iterable[float],
                bins: int = PSI_BINS, eps: float = PSI_EPS) -> float:
    """Population stability index over reference-quantile bins.

    PSI = sum_b (p_b - q_b) * ln(p_b / q_b) with p from the reference and
    q from the current sample; counts are eps-smoothed so empty bins stay
    finite. Falls back to fewer bins when the reference has few distinct
    quantile edges.
    """
    ref = np.asarray(list(reference), dtype=float)
    cur = np.asarray(list(current), dtype=float)
    if ref.size == 0 or cur.size == 0:
        raise errors.EmptySample("reference and current must be nonempty")
    edges = np.unique(np.percentile(ref, np.linspace(0, 100, bins + 1)[1:-1]))
    full_edges = np.concatenate(([-np.inf], edges, [np.inf]))
    p = np.histogram(ref, bins=full_edges)[0].astype(float)
    q = np.histogram(cur, bins=full_edges)[0].astype(float)
    p = p / p.sum() + eps
    q = q / q.sum() + eps
    return float(np.sum((p - q) * np.log(p / q)))


def drift_report(reference: dict[str, np.ndarray],
                 current: dict[str, np.ndarray],
                 threshold: float = PSI_ALERT_THRESHOLD) -> DriftReport:
    """Per-column PSI of current vs reference, with an alert flag."""
    per_column = {name: compute_psi(reference[name], current[name])
                  for name in reference if name in current}
    overall = max(per_column.values()) if per_column else 0.0
    return DriftReport(per_column_psi=per_column, overall_max_psi=overall,
                       alert=overall > threshold)


def resample_balanced(labels: Sequence[int], mode: str, seed: int) -> np.ndarray:
    """Indices for class-balanced resampling.

    mode="down": every class downsampled to the minority count;
    mode="up": minority classes upsampled by duplication to the majority.
    """
    labels = np.asarray(labels)
    rng = np.random.RandomState(seed)
    classes, counts = np.unique(labels, return_counts=True)
    target = counts.min() if mode == "down" else counts.max()
    chosen = []
    for cls in classes:
        idx = np.flatnonzero(labels == cls)
        take = rng.choice(idx, size=target, replace=len(idx) < target)
        chosen.append(take)
    out = np.concatenate(chosen)
    rng.shuffle(out)
    return out
