import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthbench.dataset import ColumnKind
from synthbench.errors import MetricError
from synthbench.estimands import ConfidenceInterval
from synthbench.metrics import (
    Overlap,
    UtilityReport,
    aggregate,
    apo,
    cio,
    kl_divergence,
    normalize_kl,
)

CAT2 = ColumnKind.categorical(("a", "b"))
NUM = ColumnKind.numeric()


def interval(lo, hi):
    return ConfidenceInterval(lo, hi, 0.95)


def test_cio_worked_examples():
    assert abs(cio(interval(0, 2), interval(0, 2)).value - 1.0) < 1e-12
    assert abs(cio(interval(0, 1), interval(2, 3)).value - 0.0) < 1e-12
    assert abs(cio(interval(0, 2), interval(1, 3)).value - 0.5) < 1e-12


def test_cio_printed_denominators_variant():
    # overlap length 1 divided by (U_o - L_s) = 1 and (U_s - L_o) = 3
    got = cio(interval(0, 2), interval(1, 3), printed_denominators=True).value
    assert got == pytest.approx(0.5 * (1.0 / 1.0 + 1.0 / 3.0), abs=1e-12)
    # identical intervals still score 1 under the printed convention
    assert cio(interval(0, 2), interval(0, 2), printed_denominators=True).value == 1.0


def test_cio_degenerate_intervals():
    assert cio(interval(1, 1), interval(1, 1)).value == 1.0
    assert cio(interval(1, 1), interval(2, 2)).value == 0.0
    assert cio(interval(1, 1), interval(0, 2)).value == 0.0


def test_cio_nested_intervals():
    # synthetic twice as wide, centered: 0.5 * (1 + 1/2)
    got = cio(interval(-1, 1), interval(-2, 2)).value
    assert got == pytest.approx(0.75, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(
    lo1=st.floats(-100, 100),
    w1=st.floats(0.001, 50),
    lo2=st.floats(-100, 100),
    w2=st.floats(0.001, 50),
    shift=st.floats(-10, 10),
    scale=st.floats(0.01, 10),
)
def test_cio_symmetry_range_and_affine_invariance(lo1, w1, lo2, w2, shift, scale):
    a = interval(lo1, lo1 + w1)
    b = interval(lo2, lo2 + w2)
    v1 = cio(a, b).value
    v2 = cio(b, a).value
    assert v1 == pytest.approx(v2, abs=1e-12)
    assert 0.0 <= v1 <= 1.0
    at = interval(scale * lo1 + shift, scale * (lo1 + w1) + shift)
    bt = interval(scale * lo2 + shift, scale * (lo2 + w2) + shift)
    assert cio(at, bt).value == pytest.approx(v1, abs=1e-9)


def test_apo_threshold_strict_and_inclusive():
    vals = [Overlap("a", 0.95), Overlap("b", 0.9), Overlap("c", 0.2)]
    assert apo(vals) == pytest.approx(1.0 / 3.0)
    assert apo(vals, inclusive=True) == pytest.approx(2.0 / 3.0)
    assert apo([0.91, 0.89]) == 0.5
    with pytest.raises(MetricError):
        apo([])
    with pytest.raises(MetricError):
        apo(vals, threshold=1.5)


def test_kl_hand_value_without_smoothing():
    orig = np.asarray([0, 1, 0, 1])       # (0.5, 0.5)
    synth = np.asarray([0, 1, 1, 1])      # (0.25, 0.75)
    score = kl_divergence(orig, synth, CAT2, smoothing=0.0)
    expect = 0.5 * math.log(2.0) + 0.5 * math.log(2.0 / 3.0)
    assert score.raw == pytest.approx(expect, abs=1e-9)


def test_kl_zero_synthetic_cell_is_infinite_without_smoothing():
    orig = np.asarray([0, 1, 0, 1])
    synth = np.asarray([1, 1, 1, 1])
    assert math.isinf(kl_divergence(orig, synth, CAT2, smoothing=0.0).raw)
    assert math.isfinite(kl_divergence(orig, synth, CAT2, smoothing=0.5).raw)


def test_kl_smoothed_hand_value():
    orig = np.asarray([0, 0, 0, 1])   # counts (3,1), smoothed (3.5, 1.5)/5
    synth = np.asarray([0, 0, 0, 0])  # counts (4,0), smoothed (4.5, 0.5)/5
    p = (3.5 / 5.0, 1.5 / 5.0)
    q = (4.5 / 5.0, 0.5 / 5.0)
    expect = sum(pi * math.log(pi / qi) for pi, qi in zip(p, q))
    got = kl_divergence(orig, synth, CAT2, smoothing=0.5).raw
    assert got == pytest.approx(expect, abs=1e-12)


def test_kl_directions():
    orig = np.asarray([0, 0, 0, 1])
    synth = np.asarray([0, 1, 1, 1])
    pq = kl_divergence(orig, synth, CAT2, direction="pq").raw
    qp = kl_divergence(orig, synth, CAT2, direction="qp").raw
    sym = kl_divergence(orig, synth, CAT2, direction="sym").raw
    assert sym == pytest.approx(0.5 * (pq + qp), abs=1e-12)
    with pytest.raises(MetricError):
        kl_divergence(orig, synth, CAT2, direction="bad")


def test_kl_numeric_binning_hand_value():
    # pooled range [0, 4) with 2 bins: [0,2) and [2,4]
    orig = np.asarray([0.0, 1.0, 3.0, 4.0])   # counts (2, 2)
    synth = np.asarray([0.5, 0.5, 0.5, 3.5])  # counts (3, 1)
    got = kl_divergence(orig, synth, NUM, bins=2, smoothing=0.0).raw
    expect = 0.5 * math.log(0.5 / 0.75) + 0.5 * math.log(0.5 / 0.25)
    assert got == pytest.approx(expect, abs=1e-12)


def test_kl_constant_columns_share_single_cell():
    orig = np.full(10, 2.5)
    synth = np.full(8, 2.5)
    assert kl_divergence(orig, synth, NUM).raw == 0.0


@settings(max_examples=50, deadline=None)
@given(
    c_o=st.lists(st.integers(0, 3), min_size=1, max_size=60),
    c_s=st.lists(st.integers(0, 3), min_size=1, max_size=60),
)
def test_kl_nonnegative(c_o, c_s):
    kind = ColumnKind.categorical(("w", "x", "y", "z"))
    raw = kl_divergence(np.asarray(c_o), np.asarray(c_s), kind).raw
    assert raw >= 0.0


def test_normalize_kl_by_baseline():
    from synthbench.metrics import KlScore

    scores = (KlScore("x", 0.4, "pq"), KlScore("y", 0.9, "pq"))
    baseline = (KlScore("x", 0.2, "pq"), KlScore("y", 0.3, "pq"))
    out, avg = normalize_kl(scores, baseline)
    assert out[0].normalized == pytest.approx(2.0)
    assert out[1].normalized == pytest.approx(3.0)
    assert avg == pytest.approx(2.5)
    with pytest.raises(MetricError):
        normalize_kl(scores, (KlScore("x", 0.0, "pq"), KlScore("y", 0.3, "pq")))


def test_aggregate_rollup():
    ov = lambda v: Overlap("", v)
    by_k = {
        0: {"f1": [ov(1.0), ov(0.8)], "f2": [ov(0.95)]},
        1: {"f1": [ov(0.5), ov(0.5)], "f2": [ov(1.0)]},
    }
    agg = aggregate(by_k)
    assert agg.per_fit_avg[0]["f1"] == pytest.approx(0.9)
    assert agg.per_k_avg[0] == pytest.approx((0.9 + 0.95) / 2)
    assert agg.per_k_apo[0] == pytest.approx(2.0 / 3.0)
    assert agg.per_k_apo[1] == pytest.approx(1.0 / 3.0)
    assert agg.apo == pytest.approx(0.5)


def test_report_summary_and_values():
    rep = UtilityReport()
    rep.add("D", "simple", 3, 0, "rf_apo", "", 0.5)
    rep.add("D", "simple", 3, 1, "rf_apo", "", 1.0)
    rep.add("S", "simple", 3, 0, "rf_apo", "", 0.0)
    summary = {(r.label, r.metric): r.value for r in rep.summary()}
    assert summary[("D", "rf_apo")] == pytest.approx(0.75)
    assert summary[("S", "rf_apo")] == 0.0
    got = rep.values("rf_apo", label="D")
    assert got == {("D", "simple", 3, 0, ""): 0.5, ("D", "simple", 3, 1, ""): 1.0}
    assert all(r.k == -1 for r in rep.summary())
