"""Utility metrics: confidence-interval overlap, APO, and KL divergence.

The confidence-interval overlap of an original and a synthetic interval is

    max(0, 0.5 * (I / width_original + I / width_synthetic))

with I the length of the intersection, clamped to at most 1. Each term
divides by that interval's own width, so identical intervals score exactly 1
and disjoint ones 0. ``printed_denominators=True`` switches to the variant
that divides by (U_o - L_s) and (U_s - L_o) instead, kept only for
comparison with the other convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dataset import ColumnKind
from .errors import MetricError
from .estimands import ConfidenceInterval

KL_DIRECTIONS = ("pq", "qp", "sym")


@dataclass(frozen=True)
class Overlap:
    estimand_id: str
    value: float


def cio(
    original: ConfidenceInterval,
    synthetic: ConfidenceInterval,
    *,
    printed_denominators: bool = False,
    estimand_id: str = "",
) -> Overlap:
    lo_o, up_o = original.lower, original.upper
    lo_s, up_s = synthetic.lower, synthetic.upper
    w_o = up_o - lo_o
    w_s = up_s - lo_s
    if w_o == 0.0 or w_s == 0.0:
        value = 1.0 if (w_o == 0.0 and w_s == 0.0 and lo_o == lo_s) else 0.0
        return Overlap(estimand_id, value)
    inter = min(up_o, up_s) - max(lo_o, lo_s)
    if printed_denominators:
        d1 = up_o - lo_s
        d2 = up_s - lo_o
        t1 = inter / d1 if d1 != 0.0 else 0.0
        t2 = inter / d2 if d2 != 0.0 else 0.0
    else:
        t1 = inter / w_o
        t2 = inter / w_s
    value = max(0.5 * (t1 + t2), 0.0)
    return Overlap(estimand_id, min(value, 1.0))


def apo(
    overlaps: Sequence[Overlap | float],
    threshold: float = 0.9,
    *,
    inclusive: bool = False,
) -> float:
    """Share of overlaps above the threshold (strictly above by default)."""
    if not overlaps:
        raise MetricError("apo needs at least one overlap")
    if not (0.0 <= threshold <= 1.0):
        raise MetricError(f"threshold must lie in [0, 1], got {threshold}")
    values = [o.value if isinstance(o, Overlap) else float(o) for o in overlaps]
    if inclusive:
        hits = sum(1 for v in values if v >= threshold)
    else:
        hits = sum(1 for v in values if v > threshold)
    return hits / len(values)


@dataclass(frozen=True)
class KlScore:
    variable: str
    raw: float
    direction: str
    normalized: float | None = None


def _distribution(counts: np.ndarray, smoothing: float) -> np.ndarray:
    total = counts.sum() + smoothing * counts.shape[0]
    return (counts + smoothing) / total


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    s = 0.0
    for pi, qi in zip(p, q):
        if pi == 0.0:
            continue
        if qi == 0.0:
            return math.inf
        s += pi * math.log(pi / qi)
    # Gibbs: the divergence is non-negative; clear accumulated roundoff.
    return max(s, 0.0)


def kl_divergence(
    original: np.ndarray,
    synthetic: np.ndarray,
    kind: ColumnKind,
    *,
    bins: int = 20,
    smoothing: float = 0.5,
    direction: str = "pq",
    variable: str = "",
) -> KlScore:
    """KL divergence between a column's original and synthetic distribution.

    Categorical columns compare level frequencies over the declared level
    set. Numeric columns are discretised into ``bins`` equal-width bins
    spanning the pooled min..max of both samples. Each cell gets a Laplace
    pseudo-count of ``smoothing`` (0 disables smoothing, in which case a cell
    observed only in the original makes the divergence infinite).

    ``direction='pq'`` treats the original as P and the synthetic as Q;
    ``'qp'`` swaps them; ``'sym'`` averages both directions.
    """
    if direction not in KL_DIRECTIONS:
        raise MetricError(f"unknown direction {direction!r}")
    if smoothing < 0:
        raise MetricError("smoothing must be non-negative")
    original = np.asarray(original)
    synthetic = np.asarray(synthetic)
    if original.size == 0 or synthetic.size == 0:
        raise MetricError("both columns must be non-empty")

    if kind.is_categorical:
        k = kind.n_levels
        c_o = np.bincount(original.astype(np.int64), minlength=k).astype(np.float64)
        c_s = np.bincount(synthetic.astype(np.int64), minlength=k).astype(np.float64)
    else:
        if bins < 2:
            raise MetricError(f"need at least 2 bins, got {bins}")
        lo = float(min(original.min(), synthetic.min()))
        hi = float(max(original.max(), synthetic.max()))
        if lo == hi:
            c_o = np.asarray([float(original.size)])
            c_s = np.asarray([float(synthetic.size)])
        else:
            edges = np.linspace(lo, hi, bins + 1)
            c_o = np.histogram(original, bins=edges)[0].astype(np.float64)
            c_s = np.histogram(synthetic, bins=edges)[0].astype(np.float64)

    p = _distribution(c_o, smoothing)
    q = _distribution(c_s, smoothing)
    if direction == "pq":
        raw = _kl(p, q)
    elif direction == "qp":
        raw = _kl(q, p)
    else:
        raw = 0.5 * (_kl(p, q) + _kl(q, p))
    return KlScore(variable=variable, raw=raw, direction=direction)


def normalize_kl(
    scores: Sequence[KlScore], baseline: Sequence[KlScore]
) -> tuple[tuple[KlScore, ...], float]:
    """Divide each variable's raw score by the baseline synthesizer's raw
    score for the same variable, then average across variables."""
    base_by_var = {b.variable: b for b in baseline}
    out = []
    for s in scores:
        b = base_by_var.get(s.variable)
        if b is None:
            raise MetricError(f"baseline has no score for variable {s.variable!r}")
        if not (b.raw > 0.0) or math.isinf(b.raw):
            raise MetricError(
                f"baseline score for {s.variable!r} must be positive and finite"
            )
        out.append(
            KlScore(
                variable=s.variable,
                raw=s.raw,
                direction=s.direction,
                normalized=s.raw / b.raw,
            )
        )
    avg = math.fsum(s.normalized for s in out) / len(out) if out else math.nan
    if not out:
        raise MetricError("no scores to normalize")
    return tuple(out), avg


@dataclass(frozen=True)
class AggregateResult:
    """Cell-level rollup of per-coefficient overlaps.

    Per repetition: each fit's average overlap, their mean across fits, and
    the APO over all pooled coefficients. The final cell values average the
    per-repetition numbers.
    """

    per_fit_avg: dict[int, dict[str, float]]
    per_k_avg: dict[int, float]
    per_k_apo: dict[int, float]
    avg_cio: float
    apo: float


def aggregate(
    overlaps_by_k: Mapping[int, Mapping[str, Sequence[Overlap]]],
    *,
    threshold: float = 0.9,
    inclusive: bool = False,
) -> AggregateResult:
    if not overlaps_by_k:
        raise MetricError("no repetitions to aggregate")
    per_fit_avg: dict[int, dict[str, float]] = {}
    per_k_avg: dict[int, float] = {}
    per_k_apo: dict[int, float] = {}
    for k in sorted(overlaps_by_k):
        fits = overlaps_by_k[k]
        if not fits:
            raise MetricError(f"repetition {k} has no fits")
        fit_avg: dict[str, float] = {}
        pooled: list[Overlap] = []
        for fit_id in sorted(fits):
            ovs = list(fits[fit_id])
            if not ovs:
                raise MetricError(f"fit {fit_id!r} has no overlaps")
            fit_avg[fit_id] = math.fsum(o.value for o in ovs) / len(ovs)
            pooled.extend(ovs)
        per_fit_avg[k] = fit_avg
        per_k_avg[k] = math.fsum(fit_avg.values()) / len(fit_avg)
        per_k_apo[k] = apo(pooled, threshold, inclusive=inclusive)
    reps = len(per_k_avg)
    return AggregateResult(
        per_fit_avg=per_fit_avg,
        per_k_avg=per_k_avg,
        per_k_apo=per_k_apo,
        avg_cio=math.fsum(per_k_avg.values()) / reps,
        apo=math.fsum(per_k_apo.values()) / reps,
    )


@dataclass(frozen=True)
class ReportRow:
    label: str
    mode: str
    m: int
    k: int
    metric: str
    scope: str
    value: float

    def key(self) -> tuple:
        return (self.label, self.mode, self.m, self.k, self.metric, self.scope)


@dataclass(frozen=True)
class ReportError:
    label: str
    mode: str
    m: int
    k: int
    stage: str
    message: str

    def key(self) -> tuple:
        return (self.label, self.mode, self.m, self.k, self.stage, self.message)


@dataclass
class UtilityReport:
    """Long-format metric rows keyed by (label, mode, m, k, metric, scope),
    plus error rows for grid cells that failed."""

    rows: list[ReportRow] = field(default_factory=list)
    errors: list[ReportError] = field(default_factory=list)

    def add(self, label: str, mode: str, m: int, k: int, metric: str, scope: str, value: float) -> None:
        self.rows.append(ReportRow(label, mode, m, k, metric, scope, float(value)))

    def add_error(self, label: str, mode: str, m: int, k: int, stage: str, message: str) -> None:
        self.errors.append(ReportError(label, mode, m, k, stage, message))

    def sorted_rows(self) -> list[ReportRow]:
        return sorted(self.rows, key=lambda r: r.key())

    def values(self, metric: str, **match) -> dict[tuple, float]:
        out = {}
        for r in self.rows:
            if r.metric != metric:
                continue
            if any(getattr(r, f) != v for f, v in match.items()):
                continue
            out[(r.label, r.mode, r.m, r.k, r.scope)] = r.value
        return out

    def summary(self) -> list[ReportRow]:
        """Average each (label, mode, m, metric, scope) over its repetitions.
        The k field of a summary row is -1."""
        groups: dict[tuple, list[float]] = {}
        for r in self.rows:
            groups.setdefault((r.label, r.mode, r.m, r.metric, r.scope), []).append(r.value)
        out = []
        for (label, mode, m, metric, scope), vals in sorted(groups.items()):
            out.append(ReportRow(label, mode, m, -1, metric, scope, math.fsum(vals) / len(vals)))
        return out
