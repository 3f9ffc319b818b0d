import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualrail import budget
from dualrail.protocols import experiments as ex

T_MAX = 1e4  # 10 ms in us


# -- preparation errors -------------------------------------------------------------------

def test_eps00(paper):
    assert budget.prep_error_estimates(paper).eps00 == pytest.approx(2.8e-6, rel=0.3)


def test_check_only_prep_errors(paper):
    pe = budget.prep_error_estimates(paper)
    assert pe.eps1_check["B"] == pytest.approx(1.80e-2, rel=0.2)
    assert pe.eps1_check["A"] == pytest.approx(2.53e-2, rel=0.2)
    assert pe.eps1_cm["A"] == pytest.approx(0.33e-2, rel=0.3)


def test_prep_ratio_ordering(paper):
    pe = budget.prep_error_estimates(paper)
    assert pe.ratio1["A"] > pe.ratio1["B"]


def test_prep_errors_vanish_without_noise(zero):
    pe = budget.prep_error_estimates(zero)
    for table in (pe.eps_reset, pe.eps0_check, pe.eps1_check, pe.eps0_cm, pe.eps1_cm):
        assert all(v == 0 for v in table.values())
    assert pe.eps00 == 0


def test_eps1_check_formula(paper):
    """Independent recomputation of eps_1 for the check-only protocol."""
    sp = paper.A
    d = sp.t_M / sp.cav_T1
    expect = sp.eps_ocp * (1 - sp.cav_nth * d) + (1 - sp.eps_ocp) * d
    assert budget.prep_error_estimates(paper).eps1_check["A"] == pytest.approx(expect, rel=1e-12)


# -- budget tables ------------------------------------------------------------------------

def test_alice_transmon_t1_row_follows_its_formula(paper):
    t = budget.single_mode_budget(paper, "A", "p0_given_1", include_prep=True)
    row = next(r for r in t.rows if r.key == "transmon_t1_ro")
    assert row.value == pytest.approx(paper.A.t_M / (2 * paper.A.T1_RO))
    assert row.value == pytest.approx(1.25e-2, rel=1e-3)


@pytest.mark.xfail(strict=True, reason="formula t_M/(2 T1_RO) = 1.25e-2 is 2.2x below the tabulated 2.77e-2, "
                                       "so the row is not top-ranked; see decisions ledger")
def test_alice_transmon_t1_row_matches_tabulated_value_and_rank(paper):
    t = budget.single_mode_budget(paper, "A", "p0_given_1", include_prep=True)
    top = t.ranked()[0]
    assert top.key == "transmon_t1_ro"
    assert 2.77e-2 / 2 <= top.value <= 2.77e-2 * 2


def test_alice_p1_given_0_is_classification_dominated(paper):
    t = budget.single_mode_budget(paper, "A", "p1_given_0", include_prep=True)
    assert t.ranked()[0].key == "classification"
    assert t.relative()["classification"] > 50


def test_zero_error_tables_are_empty(zero):
    for s in ("A", "B"):
        for target in budget.TARGETS:
            assert budget.single_mode_budget(zero, s, target, include_prep=True).total == 0


@pytest.mark.parametrize("s", ["A", "B"])
@pytest.mark.parametrize("target", budget.TARGETS)
def test_relative_contributions_sum_to_100(paper, s, target):
    t = budget.single_mode_budget(paper, s, target, include_prep=True)
    assert sum(t.relative().values()) == pytest.approx(100.0, abs=0.1)


@pytest.mark.parametrize("s", ["A", "B"])
@pytest.mark.parametrize("target", budget.TARGETS)
@pytest.mark.parametrize("field,factor", [("t_M", 1.01), ("T1_RO", 0.99), ("cav_T1", 1.01), ("p_gE", 1.01),
                                          ("p_eG", 0.99), ("eps_ocp", 1.01)])
def test_top_two_rank_stable_under_small_perturbation(paper, s, target, field, factor):
    base = [r.key for r in budget.single_mode_budget(paper, s, target, True).ranked()[:2]]
    sp = paper.sub(s)
    pert = paper.replace(**{s: sp.replace(**{field: getattr(sp, field) * factor})})
    assert [r.key for r in budget.single_mode_budget(pert, s, target, True).ranked()[:2]] == base


def test_exponential_mode_is_below_linear(paper):
    lin = budget.single_mode_budget(paper, "B", "p0_given_1").total
    exp = budget.single_mode_budget(paper, "B", "p0_given_1", exponential=True).total
    assert exp < lin


# -- SPAM matrix ----------------------------------------------------------------------------

def test_zero_error_matrix_is_identity(zero):
    assert np.array_equal(budget.spam_matrix(zero).matrix, np.eye(4))


def test_logical_misassignment_order(paper):
    M = budget.spam_matrix(paper)
    assert 1e-5 < M.p("10", "01") < 1e-3


def test_erasure_element_composition(paper):
    M = budget.spam_matrix(paper)
    p1_0_B = budget.single_mode_budget(paper, "B", "p1_given_0", True).total
    p0_1_A = budget.single_mode_budget(paper, "A", "p0_given_1", True).total
    assert M.p("00", "01") == pytest.approx((1 - p1_0_B) * p0_1_A, rel=1e-12)


def test_columns_are_stochastic(paper):
    assert budget.spam_matrix(paper).column_residual() < 1e-12


def test_pair_budget_ranks_products(paper):
    combos = budget.pair_budget(paper, "10", "01", top=3)
    assert combos[0][2] >= combos[1][2] >= combos[2][2]
    with pytest.raises(ValueError):
        budget.pair_budget(paper, "01", "01")


def _spam_disagreement(params):
    M = budget.spam_matrix(params)
    sim = ex.run_spam(params, 1)
    worst_big, worst_small = 0.0, 1.0
    for prep, d in sim.items():
        kept = d.probs["00"] + d.probs["01"] + d.probs["10"] + d.probs["11"]
        for out in budget.STATES:
            a, s = M.p(out, prep), d.probs[out] / kept
            if a >= 1e-4:
                worst_big = max(worst_big, abs(s - a) / a)
            elif a >= 1e-6 and s > 0:
                worst_small = max(worst_small, max(s / a, a / s))
    return worst_big, worst_small


@pytest.mark.xfail(strict=True, reason="simulator carries readout heating from the previous check into the "
                                       "mapping round (about +1.9e-3 on Bob); the analytic budget omits it")
def test_analytic_matrix_against_simulation(paper):
    """Elementwise agreement: 30% on elements >= 1e-4, a factor of 3 on smaller ones above 1e-6."""
    worst_big, worst_small = _spam_disagreement(paper)
    assert worst_big < 0.3
    assert worst_small < 3


def test_analytic_matrix_against_simulation_without_readout_heating(paper):
    worst_big, worst_small = _spam_disagreement(paper.replace_both(nth_RO=0.0))
    assert worst_big < 0.3
    assert worst_small < 3


def test_simulated_heating_excess_is_one_extra_readout_half(paper):
    M = budget.spam_matrix(paper)
    d = ex.run_spam(paper, 1, preps=("00",))["00"]
    kept = sum(d.probs[k] for k in budget.STATES)
    excess = d.probs["10"] / kept - M.p("10", "00")
    one_half = paper.B.nth_RO * paper.B.t_M / (2 * paper.B.T1_RO)
    assert excess == pytest.approx(one_half, rel=0.1)


# -- population ODE -------------------------------------------------------------------------

def test_ode_initial_conditions(paper):
    eps = {"A": (1e-6, 2e-2), "B": (3e-6, 1e-2)}
    P = budget.ode_populations(0.0, paper, "01", eps=eps).P
    assert P["01"] == pytest.approx((1 - 3e-6) * (1 - 2e-2))
    assert P["10"] == pytest.approx(3e-6 * 2e-2)


def test_ode_thermal_limit(paper):
    sp = paper.A
    P0, P1 = budget.cavity_populations(1e9, sp.cav_T1, sp.cav_nth, 1, 0.0)
    up, down = sp.cav_nth / sp.cav_T1, 1 / sp.cav_T1
    assert P1 == pytest.approx(up / (up + down), rel=1e-9)


@pytest.mark.parametrize("s", ["A", "B"])
@pytest.mark.parametrize("level,eps", [(0, 1e-6), (1, 1e-2)])
def test_ode_closed_form_matches_rk4(paper, s, level, eps):
    num = budget.rk4_populations(T_MAX, paper, s, level, eps)
    grid = np.linspace(0, T_MAX, num.shape[0])
    P0, P1 = budget.cavity_populations(grid, paper.sub(s).cav_T1, paper.sub(s).cav_nth, level, eps)
    assert np.max(np.abs(num[:, 1] - P1)) < 1e-9
    assert np.max(np.abs(num[:, 0] - P0)) < 1e-9


@given(t=st.floats(0, 1e5), prep=st.sampled_from(budget.STATES))
@settings(max_examples=40, deadline=None)
def test_ode_conserves_probability(paper, t, prep):
    assert float(budget.ode_populations(t, paper, prep).total()) == pytest.approx(1.0, abs=1e-12)


# -- apparent bit flips ----------------------------------------------------------------------

def test_intrinsic_flip_is_quadratic_at_short_times(paper):
    t = 1.0
    p = budget.apparent_bitflip(t, paper, "0L", "intrinsic_only", prep_method="cm")
    # subtract the t = 0 floor from preparation errors, then compare with n_th kA kB t^2 scaling
    p0 = budget.apparent_bitflip(0.0, paper, "0L", "intrinsic_only", prep_method="cm")
    p2 = budget.apparent_bitflip(2 * t, paper, "0L", "intrinsic_only", prep_method="cm")
    growth1, growth2 = p - p0, p2 - p0
    assert growth1 > 0
    # linear pieces (prep-error decay) plus a quadratic piece: the quadratic part is bounded by the estimate
    nth = paper.B.cav_nth
    kA, kB = 1 / paper.A.cav_T1, 1 / paper.B.cav_T1
    assert growth2 / growth1 == pytest.approx(2.0, rel=0.05) or growth2 / growth1 > 2.0
    assert nth * kA * kB * t ** 2 < growth1


def test_saturation_at_ten_ms(paper):
    s = budget.saturation_estimate(paper)
    flip0 = float(budget.apparent_bitflip(T_MAX, paper, "0L"))
    flip1 = float(budget.apparent_bitflip(T_MAX, paper, "1L"))
    assert flip0 == pytest.approx(0.75, abs=0.07)
    assert flip1 == pytest.approx(0.25, abs=0.07)
    assert s["0L"] + s["1L"] == pytest.approx(1.0)


def test_saturation_from_reference_assignment_ratio():
    # P("10"|00) = 4.26e-3 and P("01"|00) = 1.42e-3 set the plateau directly
    assert 4.26e-3 / (4.26e-3 + 1.42e-3) == pytest.approx(0.75, abs=0.01)


def test_measurement_only_at_zero_equals_spam_misassignment(paper):
    M = budget.assignment_given_state(paper.replace_both(cav_nth=0.0))
    flip = budget.apparent_bitflip(0.0, paper, "0L", "measurement_only")
    pops = budget.ode_populations(0.0, paper.replace_both(cav_nth=0.0), "01", prep_method="cm").P
    m01 = sum(pops[k] * M.p("01", k) for k in budget.STATES)
    m10 = sum(pops[k] * M.p("10", k) for k in budget.STATES)
    assert flip == pytest.approx(m10 / (m01 + m10), rel=1e-12)


@pytest.mark.parametrize("prep", ["0L", "1L"])
@pytest.mark.parametrize("t", [1.0, 1e3, 1e4])
def test_channel_decomposition_is_a_partition(paper, prep, t):
    parts = budget.bitflip_channel_decomposition(t, paper, prep)
    assert sum(parts.values()) == pytest.approx(float(budget.apparent_bitflip(t, paper, prep)), rel=1e-12)


def test_leakage_channel_dominates_by_one_ms(paper):
    early = budget.bitflip_channel_decomposition(1.0, paper, "0L")
    late = budget.bitflip_channel_decomposition(1e3, paper, "0L")
    share = lambda d: d["00"] / sum(d.values())
    assert share(late) > share(early)
    assert share(late) > 0.8


def test_intrinsic_fraction_at_one_ms(paper):
    for prep in ("0L", "1L"):
        f = float(budget.intrinsic_fraction(1e3, paper, prep, cav_nth=1e-4))
        assert 0.01 < f < 0.08


@given(t=st.floats(0, 2e3), prep=st.sampled_from(["0L", "1L"]))
@settings(max_examples=30, deadline=None)
def test_intrinsic_flips_never_reduce_the_apparent_rate_before_saturation(paper, t, prep):
    both = float(budget.apparent_bitflip(t, paper, prep, "both"))
    meas = float(budget.apparent_bitflip(t, paper, prep, "measurement_only"))
    assert both >= meas - 1e-15


def test_thermal_imbalance_lowers_zero_l_plateau(paper):
    # Alice n_th is twice Bob's, so the thermal mixture favours "01" and pulls |0_L> below 0.75
    both = float(budget.apparent_bitflip(T_MAX, paper, "0L", "both"))
    meas = float(budget.apparent_bitflip(T_MAX, paper, "0L", "measurement_only"))
    assert both < meas
    assert float(budget.apparent_bitflip(T_MAX, paper, "1L", "both")) > \
        float(budget.apparent_bitflip(T_MAX, paper, "1L", "measurement_only"))


# -- intrinsic lifetimes -----------------------------------------------------------------

def test_leakage_seepage_lifetimes(paper):
    res = budget.intrinsic_lifetimes(paper)
    assert res["0L"]["T_leakage_seepage_s"] == pytest.approx(6.74, rel=1.0)
    assert res["1L"]["T_leakage_seepage_s"] == pytest.approx(9.06, rel=1.0)
    assert 6.74 / 2 < res["0L"]["T_leakage_seepage_s"] < 6.74 * 2


def test_equal_decay_rates_freeze_no_jump_term():
    t = np.linspace(0, 1e4, 5)
    z = budget.nojump_z_printed(t, 0.01, 0.99, 1e-3, 1e-3)
    assert np.allclose(z, z[0])


def test_lifetime_text_lists_every_channel(paper):
    text = budget.lifetimes_text(budget.intrinsic_lifetimes(paper))
    for word in ("leakage-seepage", "no-jump", "total"):
        assert word in text
