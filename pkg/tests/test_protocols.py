import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualrail.protocols import experiments as ex
from dualrail.protocols import schedule
from dualrail.protocols.experiments import ExperimentPlan, apparent_flip
from dualrail.protocols.schedule import CHECK_ONLY, CHECK_PLUS_CAVITY, Fault, Runner, merge_active
from dualrail.channels import Device


def _ideal(params):
    """Decoherence-free hardware with perfect readout, perfect OCP and no pulse errors."""
    inf = math.inf
    p = params.replace_both(cav_T1=inf, cav_T2R=inf, cav_T2E=inf, cav_nth=0.0, tr_T1=inf, tr_T2R=inf,
                            tr_T2E=inf, tr_nth=0.0, T1_RO=inf, nth_RO=0.0, p_gE=0.0, p_eG=0.0, eps_ocp=0.0,
                            p_us=0.0, p_s=0.0)
    return p.replace(gamma_phi_ramsey=0.0, gamma_phi_echo=0.0)


@pytest.fixture(scope="module")
def paper_spam(paper):
    return ex.run_spam(paper, 1)


# -- plan validation ----------------------------------------------------------------------

@pytest.mark.parametrize("kw", [{"kind": "bogus"}, {"kind": "spam", "rounds": 0},
                                {"kind": "bitflip", "delays": (-1.0,)}, {"kind": "spam", "shots": 0}])
def test_plan_rejects_bad_values(kw):
    with pytest.raises(ValueError):
        ExperimentPlan(**kw)


# -- preparation and measurement ----------------------------------------------------------

def test_ideal_prepare_is_a_single_clean_branch(zero):
    bs = merge_active(Runner(Device(zero)).prepare("01"))
    active = [b for b in bs.branches if b.flag is None and b.weight > 0]
    assert len(active) == 1 and active[0].weight == pytest.approx(1.0)
    flagged = sum(b.weight for b in bs.branches if b.flag == "FPC")
    assert flagged == 0


def test_ideal_measurement_reads_ge_with_certainty(zero):
    d = ex.run_spam(zero, 1, preps=("01",))["01"]
    assert d.probs["01"] == pytest.approx(1.0, abs=1e-12)
    rec = max(d.leaves, key=lambda leaf: leaf[2])[0]
    last = {o.subsystem: o.value for o in rec if o.step == "round_1"}
    assert last == {"B": "G", "A": "E"}


def test_zero_params_give_identity_spam(zero):
    for prep, d in ex.run_spam(zero, 2).items():
        assert d.probs[prep] == pytest.approx(1.0, abs=1e-12)


def test_distributions_are_normalised(paper_spam):
    for d in paper_spam.values():
        assert all(v >= 0 for v in d.probs.values())
        assert d.total() == pytest.approx(1.0, abs=1e-9)


def test_misassignment_is_small(paper_spam):
    mis = ex.spam_summary(paper_spam)["misassignment"]
    assert 1e-5 < mis < 1e-3


def test_residual_prep_error_tracks_budget(paper):
    """Cavity |0> population left after the Alice check-only preparation."""
    from dualrail import budget
    runner = Runner(Device(paper))
    bs = merge_active(runner.prepare("01", CHECK_ONLY))
    L = runner.device.layout
    kept = sum(b.weight for b in bs.branches if b.flag is None)
    rho = sum(b.weight * b.rho for b in bs.branches if b.flag is None) / kept
    pops = np.real(np.diag(rho)).reshape(L.dims)
    eps_A = pops[:, :, 0, :].sum()
    assert eps_A == pytest.approx(budget.prep_error_estimates(paper).eps1_check["A"], rel=0.2)


def test_injected_transmon_decay_between_rounds_is_an_erasure(zero):
    fault = Fault("round_1:after_reset", "heat", "B")
    d = ex.measure_point(Device(zero), "01", 2, faults=(fault,))
    assert d.probs["FMC"] + d.probs["FA"] == pytest.approx(1.0)


def test_transmon_decay_during_readout_makes_rounds_disagree(zero):
    fault = Fault("round_1:mid_readout", "decay", "A")
    d = ex.measure_point(Device(zero), "01", 2, faults=(fault,))
    assert d.probs["FA"] == pytest.approx(1.0)


def test_single_faults_never_give_a_wrong_logical_outcome(zero):
    outcomes = ex.single_fault_scan(zero, rounds=2)
    assert len(outcomes) == 2 * len(schedule.all_single_faults(2))
    assert max(o.wrong for o in outcomes) < 1e-12
    # the scan is not vacuous: some faults do cause erasures
    assert max(o.erasure for o in outcomes) > 0.5


def test_single_fault_erasure_with_paper_noise(paper):
    base = ex.run_spam(paper, 2, preps=("01",))["01"].probs["10"]
    for o in ex.single_fault_scan(paper, rounds=2, preps=("01",)):
        assert o.wrong < base + 1e-3


def test_subsystem_order_does_not_matter(paper, monkeypatch):
    ref = ex.run_spam(paper, 2, preps=("01", "00"))
    monkeypatch.setattr(schedule, "SUBS", ("A", "B"))
    swapped = ex.run_spam(paper, 2, preps=("01", "00"))
    for p in ref:
        for c, v in ref[p].probs.items():
            assert swapped[p].probs[c] == pytest.approx(v, abs=1e-12)


# -- delay sweeps ---------------------------------------------------------------------------

def test_zero_delay_reproduces_spam(paper):
    spam = ex.run_spam(paper, 1, prep_method=CHECK_PLUS_CAVITY, preps=("01",))["01"]
    flip = ex.run_bitflip(paper, "01", [0.0])[0]
    assert flip.probs == pytest.approx(spam.probs, abs=1e-15)


def test_nth_zero_delay_equals_two_round_spam(paper):
    spam = ex.run_spam(paper, 2, preps=("00",))["00"]
    assert ex.run_nth(paper, [0.0])[0].probs == pytest.approx(spam.probs, abs=1e-15)


def test_nth_flat_without_cavity_heating(paper):
    cold = paper.replace_both(cav_nth=0.0)
    pts = ex.run_nth(cold, [0.0, 500.0, 2000.0])
    for cls in ("01", "10"):
        vals = [d.probs[cls] / (1 - d.probs["FPC"]) for d in pts]
        assert max(vals) - min(vals) < 0.2 * max(vals) + 1e-9


def test_nth_saturation_below_bound(paper):
    m = ex.run_nth(paper, [5000.0, 20000.0])
    late = [d.metrics("00") for d in m]
    for x in late:
        assert x.leakage_01.value < 4e-4 and x.leakage_10.value < 4e-4
    # saturated: no further growth between 5 ms and 20 ms
    assert late[1].leakage_01.value == pytest.approx(late[0].leakage_01.value, rel=1e-3)


def test_bitflip_grows_with_delay(paper):
    pts = ex.run_bitflip(paper, "01", [0.0, 20.0])
    assert apparent_flip(pts[1]) > apparent_flip(pts[0])


def test_parallel_sweep_matches_serial(paper):
    a = ex.run_bitflip(paper, "10", [0.0, 5.0], workers=1)
    b = ex.run_bitflip(paper, "10", [0.0, 5.0], workers=2)
    assert [d.probs for d in a] == [d.probs for d in b]


# -- Ramsey and echo ----------------------------------------------------------------------

def test_ramsey_detuning_gives_period_and_unit_contrast(paper):
    ideal = _ideal(paper)
    r = ex.run_ramsey(ideal, np.linspace(0, 400, 41), detuning_khz=5.0, gamma_phi=0.0)
    z = r.z[:, 0]
    assert np.max(np.abs(z)) == pytest.approx(1.0, abs=1e-9)
    assert ex.ramsey_period(r)["period"] == pytest.approx(200.0, rel=1e-6)


def test_ramsey_contrast_follows_dephasing_rate(paper):
    ideal = _ideal(paper)
    g = 1 / 2200
    phases = np.linspace(0, 2 * math.pi, 8, endpoint=False)
    r = ex.run_ramsey(ideal, [0.0, 10.0, 20.0], phases, gamma_phi=g)
    assert r.contrast() == pytest.approx(np.exp(-g * r.delays), rel=1e-9)


@given(det=st.floats(-50, 50))
@settings(max_examples=10, deadline=None)
def test_echo_is_insensitive_to_static_detuning(paper, det):
    ideal = _ideal(paper)
    phases = np.linspace(0, 2 * math.pi, 6, endpoint=False)
    ref = ex.run_ramsey(ideal, [0.0, 20.0], phases, echo=True, gamma_phi=0.0).contrast()
    moved = ex.run_ramsey(ideal, [0.0, 20.0], phases, detuning_khz=det, echo=True, gamma_phi=0.0).contrast()
    assert np.max(np.abs(moved - ref)) < 1e-6


def test_leakage_biases_long_time_z(paper):
    r = ex.run_ramsey(paper, [5000.0])
    assert r.z[0, 0] != pytest.approx(0.0, abs=1e-3)
