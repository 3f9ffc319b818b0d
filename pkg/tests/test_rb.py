import math

import numpy as np
import pytest

from dualrail.channels import Device
from dualrail.protocols.rb import RBEngine, clifford_group, logical_depolarizing_kraus, run_rb

SHORT = (0, 20, 50, 100, 200, 300, 400, 600, 800, 1000)


def _coherent(params):
    inf = math.inf
    p = params.replace_both(cav_T1=inf, cav_T2R=inf, cav_T2E=inf, cav_nth=0.0, tr_T1=inf, tr_T2R=inf,
                            tr_T2E=inf, tr_nth=0.0, T1_RO=inf, nth_RO=0.0, p_gE=0.0, p_eG=0.0, eps_ocp=0.0,
                            p_us=0.0, p_s=0.0)
    return p.replace(gamma_phi_ramsey=0.0, gamma_phi_echo=0.0)


def test_clifford_group_has_24_distinct_elements():
    group = clifford_group()
    assert len(group) == 24
    for _, U in group:
        assert np.allclose(U.conj().T @ U, np.eye(2))


def test_sequences_invert_to_identity(zero):
    eng = RBEngine(Device(zero))
    rng = np.random.default_rng(1)
    for depth in (1, 5, 40):
        seq = eng.sequence(rng, depth)
        U = np.eye(2)
        for i in seq:
            U = eng.cliffords[i][1] @ U
        assert abs(abs(np.trace(U)) - 2) < 1e-9


def test_depolarizing_kraus_is_trace_preserving(zero):
    ops = logical_depolarizing_kraus(Device(zero), 0.01)
    total = sum(K.conj().T @ K for K in ops)
    assert np.allclose(total, np.eye(total.shape[0]))


def test_zero_noise_gives_unit_survival(paper):
    res = run_rb(_coherent(paper), depths=(0, 10, 100), seeds=2)
    assert np.allclose(res.survival, 1.0, atol=1e-10)
    assert res.epc == 0


def test_injected_depolarizing_is_recovered(paper):
    r = 1e-3
    res = run_rb(_coherent(paper), depths=SHORT, seeds=5, depolarizing=2 * r)
    # lambda depolarizing shrinks the Bloch vector by 1 - lambda, so p = 1 - lambda and EPC = lambda / 2
    assert res.epc == pytest.approx(r, rel=0.1)


def test_paper_noise_epc_order(paper):
    res = run_rb(paper, depths=SHORT, seeds=2)
    assert 1e-4 < res.epc < 5e-3
