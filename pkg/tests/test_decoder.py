import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualrail.decoder import (CLASSES, FitError, MalformedRecord, Tally, classify_round, decode_rounds,
                              decode_shot, dephasing_from_contrast, fit_linear, fit_oscillation, fit_rb,
                              fit_ramsey_contrast, fit_sinusoid, metrics_from_counts, read_shot_csv, tally,
                              write_decoded_csv, write_shot_csv)

STRINGS = ("00", "01", "10", "11")


def _record(rounds, prep_check=("G", "G"), pre=("G", "G"), post=None):
    """Build a record from per-round "b a" strings; outcome pairs are (B, A)."""
    to = {"0": "G", "1": "E"}
    rec = [("prep_check", "B", prep_check[0]), ("prep_check", "A", prep_check[1]),
           ("pre_check", "B", pre[0]), ("pre_check", "A", pre[1])]
    for k, s in enumerate(rounds, 1):
        rec += [(f"round_{k}", "B", to[s[0]]), (f"round_{k}", "A", to[s[1]])]
        if post and k in post:
            rec += [(f"post_check_{k}", "B", post[k][0]), (f"post_check_{k}", "A", post[k][1])]
    return rec


# -- classification -------------------------------------------------------------------------

@pytest.mark.parametrize("b,a,out", [("G", "E", "01"), ("E", "E", "11"), ("G", "G", "00"), ("E", "G", "10")])
def test_classify_round(b, a, out):
    assert classify_round(b, a) == out


def test_classify_rejects_garbage():
    with pytest.raises(MalformedRecord):
        classify_round("X", "G")


def test_prep_check_failure_wins():
    rec = _record(["01", "10"], prep_check=("E", "G"), pre=("E", "E"))
    assert decode_shot(rec, 2).cls == "FPC"


def test_measurement_check_beats_rounds():
    assert decode_shot(_record(["01"], pre=("G", "E")), 1).cls == "FMC"
    rec = _record(["01", "01"], post={1: ("E", "G")})
    assert decode_shot(rec, 2).cls == "FMC"


def test_two_agreeing_rounds_give_logical_zero():
    d = decode_shot(_record(["01", "01"]), 2)
    assert (d.cls, d.logical) == ("01", "0L")


def test_disagreeing_rounds_are_erasures():
    d = decode_shot(_record(["01", "00"]), 2)
    assert (d.cls, d.logical) == ("FA", "erasure")


def test_majority_and_ties():
    assert decode_rounds(["01", "10", "01"]) == "01"
    assert decode_rounds(["01", "10", "00"]) == "FA"
    assert decode_rounds(["01", "01", "10", "10"]) == "FA"
    assert decode_rounds(["10", "01"], strategy="first") == "10"


def test_cavity_check_needs_prep_and_flags_mismatch():
    rec = _record(["01"]) + [("cavity_check_1", "B", "G"), ("cavity_check_1", "A", "E")]
    with pytest.raises(MalformedRecord):
        decode_shot(rec, 1)
    assert decode_shot(rec, 1, prep="01").cls == "01"
    assert decode_shot(rec, 1, prep="10").cls == "FPC"


def test_incomplete_round_is_malformed():
    rec = _record(["01"])[:-1]
    with pytest.raises(MalformedRecord):
        decode_shot(rec, 1)


round_lists = st.lists(st.sampled_from(STRINGS), min_size=1, max_size=7)


@given(rounds=round_lists, seed=st.integers(0, 100))
@settings(max_examples=80, deadline=None)
def test_majority_is_order_independent(rounds, seed):
    if len(rounds) == 2:
        return  # agreement rule is symmetric as well, covered below
    perm = list(np.random.default_rng(seed).permutation(rounds))
    assert decode_rounds(rounds) == decode_rounds(perm)


@given(s=st.sampled_from(STRINGS))
def test_single_round_equals_agreeing_pair(s):
    assert decode_shot(_record([s]), 1).cls == decode_shot(_record([s, s]), 2).cls


@given(rounds=st.lists(st.lists(st.sampled_from(STRINGS), min_size=2, max_size=2), min_size=1, max_size=40))
@settings(max_examples=40, deadline=None)
def test_buckets_are_exclusive_and_exhaustive(rounds):
    decoded = [decode_shot(_record(r), 2) for r in rounds]
    t = Tally()
    for d in decoded:
        t.add(d.cls)
    assert t.n_all == len(rounds)
    assert all(d.cls in CLASSES for d in decoded)
    # shuffling shots never changes the metrics
    assert tally(decoded, "01") == tally(decoded[::-1], "01")


# -- metrics --------------------------------------------------------------------------------

def test_all_correct_shots_give_zero_errors():
    m = metrics_from_counts({"01": 1000}, "01")
    assert m.misassignment.value == 0 and m.erasure.value == 0


def test_hand_computed_metrics():
    counts = {"FPC": 120, "FMC": 30, "FA": 0, "00": 500, "01": 9300, "10": 2, "11": 48}
    m = metrics_from_counts(counts, "01")
    n_t = 10000 - 120 + 120 - 120  # everything except FPC
    n_t = sum(counts.values()) - 120
    assert m.n_t == n_t
    assert m.erasure.value == (30 + 500 + 48) / n_t
    assert m.misassignment.value == 2 / 9302
    assert m.misassignment.sigma == pytest.approx(math.sqrt(2 / 9302 * (1 - 2 / 9302) / 9302))


def test_leakage_detection_error_from_counts():
    m = metrics_from_counts({"00": 10000 - 77, "01": 77}, "00")
    assert m.leakage_total.value == pytest.approx(7.7e-3)
    assert m.leakage_01.value == pytest.approx(7.7e-3)
    assert m.leakage_10.value == 0


@given(counts=st.dictionaries(st.sampled_from(CLASSES), st.integers(0, 10_000), min_size=1))
@settings(max_examples=60, deadline=None)
def test_metric_identities(counts, ):
    c = {k: counts.get(k, 0) for k in CLASSES}
    m = metrics_from_counts(c, "10")
    if m.n_t > 0:
        assert m.erasure.value == pytest.approx((c["FMC"] + c["FA"] + c["00"] + c["11"]) / m.n_t)
        assert 0 <= m.erasure.value <= 1
    if c["01"] + c["10"] > 0:
        assert m.misassignment.value + c["10"] / (c["01"] + c["10"]) == pytest.approx(1.0)


def test_exact_probabilities_with_infinite_shots_have_zero_sigma():
    m = metrics_from_counts({"01": 0.99, "10": 0.01}, "01", math.inf)
    assert m.misassignment.sigma == 0


# -- fits -----------------------------------------------------------------------------------

def test_exact_line():
    f = fit_linear([0, 1, 2, 3], [1, 3, 5, 7])
    assert (f.slope, f.intercept) == pytest.approx((2, 1))
    assert f.slope_err == pytest.approx(0, abs=1e-12)


def test_noisy_slope_within_two_sigma():
    rng = np.random.default_rng(3)
    x = np.linspace(0, 20, 21)
    y = 1.5e-5 * x + rng.normal(0, 1e-6, x.size)
    f = fit_linear(x, y, np.full(x.size, 1e-6))
    assert abs(f.slope - 1.5e-5) < 2 * f.slope_err


def test_constant_data_has_zero_slope():
    rng = np.random.default_rng(0)
    y = 0.3 + rng.normal(0, 1e-3, 11)
    f = fit_linear(np.arange(11), y)
    assert abs(f.slope) < 3 * f.slope_err


def test_linear_fit_needs_two_points():
    with pytest.raises(FitError):
        fit_linear([1.0], [2.0])


def test_sinusoid_contrast():
    ph = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    amp, _, _ = fit_sinusoid(ph, 0.7 * np.cos(ph + 0.4) + 0.05)
    assert amp == pytest.approx(0.7, abs=1e-9)
    c = fit_ramsey_contrast(ph, np.array([0.7 * np.cos(ph), 0.5 * np.cos(ph)]))
    assert c == pytest.approx([0.7, 0.5], abs=1e-9)


def test_dephasing_rate_from_linear_contrast():
    g = 1 / 2200
    t = np.linspace(0, 20, 6)
    fit = dephasing_from_contrast(t, 1 - g * t)
    assert fit.gamma_phi == pytest.approx(g, rel=0.05)


def test_echo_phase_flip_probability():
    g = 1 / 2700
    t = np.linspace(0, 20, 6)
    fit = dephasing_from_contrast(t, 0.98 * (1 - g * t))
    assert fit.p_phi_per_us * 100 == pytest.approx(0.019, rel=0.05)


def test_oscillation_period():
    t = np.linspace(0, 400, 81)
    z = 0.9 * np.exp(-t / 2000) * np.cos(2 * np.pi * t / 200)
    assert fit_oscillation(t, z, 190.0)["period"] == pytest.approx(200.0, rel=1e-6)


def test_rb_fit_recovers_decay():
    m = np.array([0, 50, 100, 200, 400, 800, 1500])
    y = 0.5 * 0.998 ** m + 0.5
    f = fit_rb(m, y)
    assert f.p == pytest.approx(0.998, rel=1e-6)
    assert f.epc == pytest.approx(1e-3, rel=1e-3)


def test_rb_fit_perfect_survival():
    assert fit_rb([0, 10, 100], [1.0, 1.0, 1.0]).epc == 0


# -- files ----------------------------------------------------------------------------------

def test_shot_csv_round_trip(tmp_path):
    recs = [_record(["01", "01"]), _record(["10", "00"])]
    f = tmp_path / "shots.csv"
    write_shot_csv(f, recs)
    assert read_shot_csv(f) == [list(r) for r in recs]
    out = tmp_path / "decoded.csv"
    write_decoded_csv(out, [decode_shot(r, 2) for r in recs])
    text = out.read_text()
    assert text.startswith("#") and "0L" in text and "erasure" in text
