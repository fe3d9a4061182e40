"""Analysis-level comparisons: classification, ad-hoc predicates, correlation.

``classify_compare`` mirrors how an analyst would use a released dataset:
train a classifier on each synthetic dataset, train the same classifier on
the original, and evaluate everything on the original records. Besides
accuracies it reports record-level agreement: the share of records on which
the synthetic-trained and original-trained models are either both correct or
both wrong, averaged over the synthetic models.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import Dataset
from .errors import AnalysisError
from .models.cart import fit_cart
from .models.design import Predictors
from .synthesis import SyntheticSet

ADHOC_OPS = ("eq", "le", "ge", "lt", "gt")


@dataclass(frozen=True)
class ClassificationResult:
    label: str
    target: str
    baseline_accuracy: float
    accuracies: tuple[float, ...]
    mean_accuracy: float
    agreement: float

    @property
    def accuracy_deviation(self) -> float:
        return abs(self.baseline_accuracy - self.mean_accuracy)


def _fit_predict(
    train: Dataset, evaluate: Dataset, target: str, min_leaf: int | None, seed: int | None
) -> np.ndarray:
    names = [n for n in train.schema.names if n != target]
    X = Predictors.from_dataset(train, names)
    if min_leaf is None:
        # Stability floor. A deeply overfit tree trained on label-independent
        # data scores systematically below the majority rate (greedy noise
        # splits concentrate minority rows), so the comparison would punish a
        # synthesizer beyond the information it destroyed. sqrt(n) leaves keep
        # noise-trained trees close to a majority vote while leaving real
        # structure easy to pick up.
        min_leaf = max(5, math.isqrt(train.n_rows))
    tree = fit_cart(X, train.column(target), train.schema.kind(target), min_leaf=min_leaf, seed=seed)
    cols = [evaluate.column(n) for n in names]
    return tree.predict_class(cols, train.column(target))


def classify_compare(
    original: Dataset,
    synthetic: SyntheticSet,
    target: str,
    *,
    min_leaf: int | None = None,
    seed: int | None = None,
    test_fraction: float | None = None,
) -> ClassificationResult:
    """Train a donor-tree classifier per synthetic dataset and on the
    original; evaluate all of them on the original records.

    ``min_leaf=None`` applies a sqrt(n) stability floor per training set so
    that a classifier trained on label-independent data degrades to roughly
    majority-vote accuracy instead of below it.

    ``test_fraction`` switches on a holdout split (off by default): models
    train as before but are scored only on the held-out original rows, and
    the original-trained model sees only the training rows.
    """
    if not original.schema.kind(target).is_categorical:
        raise AnalysisError(f"target {target!r} is not categorical")
    if len(original.schema) < 2:
        raise AnalysisError("classification needs at least one predictor column")
    if synthetic.m < 1:
        raise AnalysisError("no synthetic datasets to evaluate")

    if test_fraction is None:
        train_orig = original
        eval_ds = original
    else:
        if not (0.0 < test_fraction < 1.0):
            raise AnalysisError("test_fraction must lie in (0, 1)")
        rng = np.random.default_rng(seed if seed is not None else 0)
        n = original.n_rows
        perm = rng.permutation(n)
        n_test = max(1, int(round(test_fraction * n)))
        test_rows = np.sort(perm[:n_test])
        train_rows = np.sort(perm[n_test:])
        if train_rows.size == 0:
            raise AnalysisError("test_fraction leaves no training rows")
        train_orig = original.take(train_rows)
        eval_ds = original.take(test_rows)

    y_true = eval_ds.column(target)
    pred_orig = _fit_predict(train_orig, eval_ds, target, min_leaf, seed)
    correct_orig = pred_orig == y_true
    baseline = float(correct_orig.mean())

    accuracies = []
    agreements = []
    for ds in synthetic.datasets:
        pred = _fit_predict(ds, eval_ds, target, min_leaf, seed)
        correct = pred == y_true
        accuracies.append(float(correct.mean()))
        agreements.append(float((correct == correct_orig).mean()))

    return ClassificationResult(
        label=synthetic.label,
        target=target,
        baseline_accuracy=baseline,
        accuracies=tuple(accuracies),
        mean_accuracy=math.fsum(accuracies) / len(accuracies),
        agreement=math.fsum(agreements) / len(agreements),
    )


@dataclass(frozen=True)
class Condition:
    column: str
    op: str
    value: float | str

    def __post_init__(self) -> None:
        if self.op not in ADHOC_OPS:
            raise AnalysisError(f"unknown operator {self.op!r}")


@dataclass(frozen=True)
class AdhocPredicate:
    id: str
    conditions: tuple[Condition, ...]


def load_adhoc(path: str | Path) -> tuple[AdhocPredicate, ...]:
    """Read ad-hoc predicates from a JSON document (see README grammar)."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise AnalysisError(f"adhoc file is not valid JSON: {err}") from err
    if not isinstance(doc, dict) or "analyses" not in doc:
        raise AnalysisError("adhoc document must be an object with an 'analyses' list")
    out = []
    for entry in doc["analyses"]:
        try:
            conds = tuple(
                Condition(c["column"], c["op"], c["value"]) for c in entry["conditions"]
            )
            out.append(AdhocPredicate(entry["id"], conds))
        except (KeyError, TypeError) as err:
            raise AnalysisError(f"bad adhoc entry {entry!r}: {err}") from err
    ids = [a.id for a in out]
    if len(set(ids)) != len(ids):
        raise AnalysisError("duplicate adhoc ids")
    return tuple(out)


def adhoc_proportion(ds: Dataset, predicate: AdhocPredicate) -> float:
    """Fraction of rows satisfying the conjunction of the conditions."""
    keep = np.ones(ds.n_rows, dtype=bool)
    for cond in predicate.conditions:
        kind = ds.schema.kind(cond.column)
        col = ds.column(cond.column)
        if kind.is_categorical:
            if cond.op != "eq":
                raise AnalysisError(
                    f"operator {cond.op!r} is not valid for categorical {cond.column!r}"
                )
            levels = kind.levels
            assert levels is not None
            if cond.value not in levels:
                raise AnalysisError(
                    f"{cond.value!r} is not a level of column {cond.column!r}"
                )
            keep &= col == levels.index(cond.value)
        else:
            try:
                v = float(cond.value)  # type: ignore[arg-type]
            except (TypeError, ValueError):
                raise AnalysisError(
                    f"condition on numeric column {cond.column!r} needs a number"
                ) from None
            if cond.op == "eq":
                keep &= col == v
            elif cond.op == "le":
                keep &= col <= v
            elif cond.op == "ge":
                keep &= col >= v
            elif cond.op == "lt":
                keep &= col < v
            else:
                keep &= col > v
    return float(keep.mean())


@dataclass(frozen=True)
class CorrelationResult:
    series_x: str
    series_y: str
    r: float
    n: int


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation; needs n >= 3 and non-constant series."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape:
        raise AnalysisError("series differ in length")
    if x.shape[0] < 3:
        raise AnalysisError("correlation needs at least three points")
    if x.max() == x.min() or y.max() == y.min():
        raise AnalysisError("correlation is undefined for a constant series")
    dx = x - x.mean()
    dy = y - y.mean()
    return float((dx @ dy) / math.sqrt((dx @ dx) * (dy @ dy)))


def correlation_battery(
    series: Mapping[str, Mapping[tuple, float]],
    pairs: Sequence[tuple[str, str]],
) -> tuple[tuple[CorrelationResult, ...], tuple[tuple[str, str, str], ...]]:
    """Correlate metric series across synthesizer combinations.

    ``series`` maps a metric name to {combination key: value}. For each
    requested pair the values are aligned on the shared keys. Pairs whose
    aligned series are constant are skipped with a reason instead of failing;
    fewer than three aligned combinations is an error.
    """
    results = []
    skipped = []
    for name_x, name_y in pairs:
        if name_x not in series or name_y not in series:
            missing = name_x if name_x not in series else name_y
            skipped.append((name_x, name_y, f"no series {missing!r}"))
            continue
        sx, sy = series[name_x], series[name_y]
        keys = sorted(set(sx) & set(sy))
        if len(keys) < 3:
            raise AnalysisError(
                f"pair ({name_x!r}, {name_y!r}) has only {len(keys)} aligned combinations"
            )
        xs = [sx[k] for k in keys]
        ys = [sy[k] for k in keys]
        if max(xs) == min(xs) or max(ys) == min(ys):
            which = name_x if max(xs) == min(xs) else name_y
            skipped.append((name_x, name_y, f"series {which!r} is constant"))
            continue
        results.append(CorrelationResult(name_x, name_y, pearson(xs, ys), len(keys)))
    return tuple(results), tuple(skipped)
