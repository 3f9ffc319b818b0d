"""Acceptance scorecard: every quantitative and property criterion with its tolerance.

Each ``criterion_N`` function returns a :class:`Criterion`; ``run_all``
evaluates them in order.  The CLI ``validate`` command and
``tests/test_acceptance.py`` both print one line per criterion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import budget, hilbert
from .channels import Device, gad_kraus, superop_from_kraus
from .decoder import fit_linear
from .params import HardwareParams, paper_params, zero_error_params
from .protocols import experiments as ex
from .protocols.rb import run_rb
from .protocols.rocalib import run_ro_calib
from .protocols.sampling import sample_shots
from .protocols.schedule import CHECK_PLUS_CAVITY


@dataclass
class Criterion:
    number: int
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def line(self) -> str:
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number:>2} {self.title}: {vals}"

    def to_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "measured": {k: _plain(v) for k, v in self.measured.items()}, "notes": list(self.notes)}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.4g}"
    return str(v)


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _within_factor(x: float, target: float, factor: float) -> bool:
    return target / factor <= x <= target * factor


def _within_rel(x: float, target: float, rel: float) -> bool:
    return abs(x - target) <= rel * abs(target)


# -- 1, 2: SPAM ----------------------------------------------------------------------------

def criterion_1(params: HardwareParams | None = None) -> Criterion:
    params = params or paper_params()
    s = ex.spam_summary(ex.run_spam(params, 1))
    checks = {
        "misassignment_ok": 0.6e-4 <= s["misassignment"] <= 3.6e-4,
        "erasure_ok": _within_rel(s["erasure_fraction"], 6.03e-2, 0.25),
        "leakage_ok": _within_rel(s["leakage_detection_00"], 7.7e-3, 0.40),
    }
    return Criterion(1, "SPAM 1 round", all(checks.values()),
                     {"misassignment": s["misassignment"], "erasure": s["erasure_fraction"],
                      "leakage_00": s["leakage_detection_00"], **checks})


def criterion_2(params: HardwareParams | None = None) -> Criterion:
    params = params or paper_params()
    one = ex.spam_summary(ex.run_spam(params, 1))
    two = ex.spam_summary(ex.run_spam(params, 2))
    checks = {
        "misassignment_ok": two["misassignment"] <= 1.5e-4 and two["misassignment"] * 3 <= one["misassignment"],
        "leakage_ok": _within_factor(two["leakage_detection_00"], 1.2e-3, 2.0),
        "erasure_ok": _within_rel(two["erasure_fraction"], 0.17, 0.25),
    }
    c = Criterion(2, "SPAM 2 rounds", all(checks.values()),
                  {"misassignment": two["misassignment"], "misassignment_1round": one["misassignment"],
                   "leakage_00": two["leakage_detection_00"], "erasure": two["erasure_fraction"], **checks})
    if not checks["leakage_ok"]:
        c.notes.append("2-round leakage detection needs both rounds to agree on a false excitation; carried readout "
                       "heating, classification and cavity heating each supply ~1e-5 of that here, and no modelled "
                       "mechanism reaches 1e-3")
    return c


# -- 3: single faults ------------------------------------------------------------------------

def criterion_3() -> Criterion:
    scan = ex.single_fault_scan(zero_error_params(), rounds=2)
    wrong = max(f.wrong for f in scan)
    baseline = ex.spam_summary(ex.run_spam(paper_params(), 2, preps=("01", "10")))["misassignment"]
    paper_scan = ex.single_fault_scan(paper_params(), rounds=2)
    return Criterion(3, "single-fault erasure property", wrong < 1e-12,
                     {"faults_x_preps": len(scan), "max_wrong_ideal": wrong,
                      "max_wrong_paper_params": max(f.wrong for f in paper_scan),
                      "paper_2round_misassignment": baseline})


# -- 4: budget tables ----------------------------------------------------------------------

PAPER_BUDGETS = {
    ("A", "p0_given_1"): {"transmon_t1_ro": 2.77e-2, "transmon_t2": 1.24e-2, "prep": 9.26e-3, "cavity": 4.6e-3,
                          "classification": 4.03e-3},
    ("B", "p0_given_1"): {"prep": 2.84e-2, "transmon_t1_ro": 2.18e-2, "cavity": 1.21e-2, "transmon_t2": 6.82e-3,
                          "classification": 1.18e-3},
    ("A", "p1_given_0"): {"classification": 3.14e-3, "transmon_heating_ro": 2.771e-4, "prep": 5.48e-5,
                          "transmon_heating_map": 4.60e-5, "cavity_heating": 4.60e-6, "unselectivity": 3.75e-6},
    ("B", "p1_given_0"): {"classification": 3.22e-3, "transmon_heating_ro": 2.12e-3, "prep": 6.39e-3,
                          "transmon_heating_map": 3.54e-5, "unselectivity": 1.75e-5, "cavity_heating": 1.21e-5},
}

# rows whose printed value disagrees with its own printed formula at the printed parameters
EXEMPT_ROWS = {
    ("A", "p0_given_1"): {"transmon_t1_ro": "printed 2.77e-2 vs t_M/(2 T1_RO) = 1.25e-2",
                          "prep": "printed 9.26e-3 vs eps1 table value 2.53e-2"},
    ("B", "p0_given_1"): {"prep": "printed 2.84e-2 vs eps1 table value 1.80e-2"},
    ("A", "p1_given_0"): {"classification": "printed 3.14e-3 vs p_gE = 1.00e-3",
                          "prep": "printed 5.48e-5 vs eps0 table value 3.24e-6",
                          "cavity_heating": "printed 4.6e-6 matches n_th = 1e-3, not the tabulated n_th",
                          "unselectivity": "printed value matches the other subsystem's pulse"},
    ("B", "p1_given_0"): {"prep": "printed 6.39e-3 vs eps0 table value 4.07e-6",
                          "unselectivity": "printed value matches the other subsystem's pulse",
                          "cavity_heating": "printed 1.21e-5 not reproducible from the tabulated n_th"},
}


def budget_comparison(params: HardwareParams | None = None) -> list:
    """Per-table comparison rows: (subsystem, target, key, ours, reference, ratio, exempt reason)."""
    params = params or paper_params()
    rows = []
    for (s, target), printed in PAPER_BUDGETS.items():
        table = budget.single_mode_budget(params, s, target, include_prep=True)
        for key, val in printed.items():
            ours = table.value(key)
            rows.append((s, target, key, ours, val, ours / val if val else math.inf,
                         EXEMPT_ROWS[(s, target)].get(key)))
    return rows


def criterion_4(params: HardwareParams | None = None) -> Criterion:
    params = params or paper_params()
    measured, notes, ok = {}, [], True
    literal_ok = True
    for (s, target), printed in PAPER_BUDGETS.items():
        table = budget.single_mode_budget(params, s, target, include_prep=True)
        exempt = EXEMPT_ROWS[(s, target)]
        rel_sum = sum(table.relative().values())
        ours_ranked = [r.key for r in table.ranked() if r.key not in exempt]
        paper_ranked = [k for k, _ in sorted(printed.items(), key=lambda kv: -kv[1]) if k not in exempt]
        top_ok = ours_ranked[0] == paper_ranked[0]
        literal_top = table.ranked()[0].key == max(printed, key=printed.get)
        values_ok = all(_within_factor(table.value(k), v, 2.5) for k, v in printed.items() if k not in exempt)
        literal_vals = all(_within_factor(table.value(k), v, 2.5) for k, v in printed.items())
        name = f"{s}_{target}"
        measured[f"{name}_top"] = ours_ranked[0]
        measured[f"{name}_literal_top_match"] = literal_top
        ok &= top_ok and values_ok and abs(rel_sum - 100) <= 0.1
        literal_ok &= literal_top and literal_vals
        for k, reason in exempt.items():
            notes.append(f"{name} {k}: ours {table.value(k):.3g}, printed {printed[k]:.3g} ({reason})")
    measured["literal_match_without_exemptions"] = literal_ok
    return Criterion(4, "budget tables", ok, measured, notes)


# -- 5: preparation errors -----------------------------------------------------------------

PAPER_PREP = {"eps0_check": {"A": 3.24e-6, "B": 4.07e-6}, "eps0_cm": {"A": 1.02e-6, "B": 1.49e-6},
              "eps1_check": {"A": 2.53e-2, "B": 1.80e-2}, "eps1_cm": {"A": 0.33e-2, "B": 0.97e-2}}


def criterion_5(params: HardwareParams | None = None) -> Criterion:
    params = params or paper_params()
    pe = budget.prep_error_estimates(params)
    d = pe.to_dict()
    measured = {"eps00": pe.eps00}
    ok = _within_rel(pe.eps00, 2.8e-6, 0.30)
    for key, ref in PAPER_PREP.items():
        for s, v in ref.items():
            measured[f"{key}_{s}"] = d[key][s]
            ok &= _within_rel(d[key][s], v, 0.30)
    order = d["ratio1"]["A"] > d["ratio1"]["B"]
    measured.update(ratio1_A=d["ratio1"]["A"], ratio1_B=d["ratio1"]["B"], ratio_order_ok=order)
    return Criterion(5, "preparation errors", bool(ok and order), measured)


# -- 6: bit flips --------------------------------------------------------------------------

def criterion_6(params: HardwareParams | None = None) -> Criterion:
    params = params or paper_params()
    delays = np.linspace(0, 20, 6)
    slopes = {}
    for name, prep in (("0L", "01"), ("1L", "10")):
        flips = [ex.apparent_flip(d) for d in ex.run_bitflip(params, prep, delays)]
        slopes[name] = fit_linear(delays, flips).slope
    sat = {name: ex.apparent_flip(ex.run_bitflip(params, prep, [1e4])[0]) for name, prep in (("0L", "01"),
                                                                                                ("1L", "10"))}
    frac = {name: budget.intrinsic_fraction(1e3, params, name, cav_nth=1e-4) for name in ("0L", "1L")}
    checks = {
        "slope0_ok": _within_factor(slopes["0L"], 1.5e-5, 2),
        "slope1_ok": _within_factor(slopes["1L"], 3e-6, 3),
        "saturation_ok": abs(sat["0L"] - 0.75) <= 0.07 and abs(sat["1L"] - 0.25) <= 0.07,
        "intrinsic_ok": all(0.01 <= f <= 0.08 for f in frac.values()),
    }
    analytic = {n: budget.apparent_bitflip(20.0, params, n) - budget.apparent_bitflip(0.0, params, n)
                for n in ("0L", "1L")}
    return Criterion(6, "bit flip", all(checks.values()),
                     {"slope_0L_per_us": slopes["0L"], "slope_1L_per_us": slopes["1L"],
                      "analytic_slope_0L": analytic["0L"] / 20, "analytic_slope_1L": analytic["1L"] / 20,
                      "sat_0L": sat["0L"], "sat_1L": sat["1L"], "intrinsic_frac_0L": frac["0L"],
                      "intrinsic_frac_1L": frac["1L"], **checks})


# -- 7: intrinsic lifetimes ----------------------------------------------------------------

def criterion_7(params: HardwareParams | None = None) -> Criterion:
    params = params or paper_params()
    res = budget.intrinsic_lifetimes(params)
    swapped = budget.intrinsic_lifetimes(params, swap=True)
    seep = (res["0L"]["T_leakage_seepage_s"], res["1L"]["T_leakage_seepage_s"])
    total = (res["0L"]["T_total_normalized_s"], res["1L"]["T_total_normalized_s"])
    ok_seep = _within_factor(seep[0], 6.74, 2) and _within_factor(seep[1], 9.06, 2)
    ok_total = _within_factor(total[0], 2.21, 3) and _within_factor(total[1], 2.98, 3)
    notes = [
        f"no-jump (printed <Z>): {res['0L']['T_nojump_printed_s']:.3g} s / {res['1L']['T_nojump_printed_s']:.3g} s; "
        "printed form gives <Z(0)> = 0 and a sign that makes the 0L term vanish",
        f"no-jump (normalized): {res['0L']['T_nojump_normalized_s']:.3g} s / "
        f"{res['1L']['T_nojump_normalized_s']:.3g} s vs printed 3.28 s / 4.43 s",
        f"swapped cavity roles: leakage-seepage {swapped['0L']['T_leakage_seepage_s']:.3g} s / "
        f"{swapped['1L']['T_leakage_seepage_s']:.3g} s",
    ]
    return Criterion(7, "intrinsic lifetimes", ok_seep and ok_total,
                     {"seepage_0L_s": seep[0], "seepage_1L_s": seep[1], "total_0L_s": total[0],
                      "total_1L_s": total[1], "nojump_norm_0L_s": res["0L"]["T_nojump_normalized_s"],
                      "nojump_norm_1L_s": res["1L"]["T_nojump_normalized_s"]}, notes)


# -- 8: dephasing --------------------------------------------------------------------------

def criterion_8(params: HardwareParams | None = None) -> Criterion:
    params = params or paper_params()
    phases = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    delays = np.linspace(0, 20, 6)
    ram = ex.ramsey_dephasing(ex.run_ramsey(params, delays, phases, gamma_phi=1 / 2200))
    echo = ex.ramsey_dephasing(ex.run_ramsey(params, delays, phases, echo=True, gamma_phi=1 / 2700))
    period = ex.ramsey_period(ex.run_ramsey(params, np.linspace(0, 400, 41), detuning_khz=5.0))["period"]
    checks = {
        "ramsey_ok": _within_rel(ram.p_phi_per_us, 2.3e-4, 0.10),
        "echo_ok": _within_rel(echo.p_phi_per_us, 1.9e-4, 0.10),
        "period_ok": abs(period - 200) <= 2,
    }
    return Criterion(8, "dephasing", all(checks.values()),
                     {"p_phi_ramsey_per_us": ram.p_phi_per_us, "p_phi_echo_per_us": echo.p_phi_per_us,
                      "period_us": period, **checks})


# -- 9: n_th bound -------------------------------------------------------------------------

def criterion_9(params: HardwareParams | None = None) -> Criterion:
    params = params or paper_params()
    ds = ex.run_nth(params, [0.0, 1e3, 5e3, 2e4])
    p01, p10 = ds[-1].probs["01"], ds[-1].probs["10"]
    return Criterion(9, "n_th bound", p01 < 4e-4 and p10 < 4e-4,
                     {"P01_longest": p01, "P10_longest": p10, "delay_us": 2e4})


# -- 10: RB --------------------------------------------------------------------------------

def criterion_10(params: HardwareParams | None = None) -> Criterion:
    params = params or paper_params()
    r = 1e-3
    dep = run_rb(params, depolarizing=2 * r, physical_noise=False)
    phys = run_rb(params)
    checks = {"injected_ok": _within_rel(dep.epc, r, 0.10), "paper_like_ok": _within_factor(phys.epc, 8.4e-4, 3)}
    return Criterion(10, "randomized benchmarking", all(checks.values()),
                     {"injected_r": r, "epc_injected": dep.epc, "epc_paper_like": phys.epc, **checks})


# -- 11: properties --------------------------------------------------------------------------

def criterion_11() -> Criterion:
    m = {}
    # completeness and trace preservation
    worst = 0.0
    for t in (0.0, 1.0, 50.0, 500.0):
        for nth in (0.0, 0.01, 0.3):
            k = gad_kraus(t, 100.0, nth)
            worst = max(worst, float(np.max(np.abs(k.completeness() - np.eye(2)))))
    m["kraus_completeness"] = worst
    dev = Device(paper_params())
    rng = np.random.default_rng(1)
    X = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    rho = X @ X.conj().T
    rho /= np.trace(rho)
    tr = 0.0
    for S in (dev.idle(10.0, 1e-3, 5.0), dev.map_halves("A")[1], dev.reset_superop("B", True),
              dev.readout_halves("B")[1]):
        out = (S @ rho.reshape(-1)).reshape(16, 16)
        tr = max(tr, abs(np.trace(out) - 1), float(np.max(np.abs(out - out.conj().T))))
    m["trace_hermiticity"] = tr
    # leaf weights
    leaf = 0.0
    for rounds in (1, 2):
        for d in ex.run_spam(paper_params(), rounds, CHECK_PLUS_CAVITY).values():
            leaf = max(leaf, abs(d.total() - 1))
    m["leaf_normalization"] = leaf
    # ODE closed form vs RK4
    p = paper_params()
    t_end = 1e4
    ode = 0.0
    for s in ("A", "B"):
        for level, eps in ((0, 1e-6), (1, 1e-2)):
            num = budget.rk4_populations(t_end, p, s, level, eps)
            grid = np.linspace(0, t_end, num.shape[0])
            P0, P1 = budget.cavity_populations(grid, p.sub(s).cav_T1, p.sub(s).cav_nth, level, eps)
            ode = max(ode, float(np.max(np.abs(num[:, 1] - P1))))
    m["ode_vs_rk4"] = ode
    # GAD vs Lindblad
    gl = 0.0
    T1, nth = 1.0, 0.2
    a = hilbert.single_mode_operator(2, "annihilation")
    c_ops = [math.sqrt((1 - nth) / T1) * a, math.sqrt(nth / T1) * a.conj().T]
    rho1 = np.diag([0.0, 1.0]).astype(complex)
    for t in (0.1, 1.0, 10.0):
        lind = hilbert.evolve_lindblad(rho1, np.zeros((2, 2)), c_ops, t)
        kr = sum(K @ rho1 @ K.conj().T for K in gad_kraus(t, T1, nth).ops)
        gl = max(gl, float(np.max(np.abs(lind - kr))))
    m["gad_vs_lindblad"] = gl
    # step halving and four-mode cross-oracle on a readout-length idle
    L = dev.layout
    pp = dev.params
    cops = []
    for s in ("B", "A"):
        sp = pp.sub(s)
        for mode, T1m, n in ((L.cavity(s), sp.cav_T1, sp.cav_nth), (L.transmon(s), sp.tr_T1, sp.tr_nth)):
            am = hilbert.mode_operator(L, mode, "annihilation")
            cops += [math.sqrt((1 - n) / T1m) * am, math.sqrt(n / T1m) * am.conj().T]
    t = 4.0
    h1 = hilbert.evolve_lindblad(rho, np.zeros((16, 16)), cops, t, step=0.02)
    h2 = hilbert.evolve_lindblad(rho, np.zeros((16, 16)), cops, t, step=0.01)
    m["step_halving"] = float(np.max(np.abs(h1 - h2)))
    S_gad = superop_from_kraus([np.eye(16)])
    for s in ("B", "A"):
        sp = pp.sub(s)
        S_gad = dev.mode_superop(L.cavity(s), gad_kraus(t, sp.cav_T1, sp.cav_nth)) @ S_gad
        S_gad = dev.mode_superop(L.transmon(s), gad_kraus(t, sp.tr_T1, sp.tr_nth)) @ S_gad
    m["four_mode_gad_vs_lindblad"] = float(np.max(np.abs((S_gad @ rho.reshape(-1)).reshape(16, 16) - h2)))
    ok = (m["kraus_completeness"] < 1e-10 and m["trace_hermiticity"] < 1e-10 and m["leaf_normalization"] < 1e-9
          and m["ode_vs_rk4"] < 1e-9 and m["gad_vs_lindblad"] < 1e-7 and m["step_halving"] < 1e-6
          and m["four_mode_gad_vs_lindblad"] < 1e-7)
    return Criterion(11, "channel and integrator properties", ok, m)


# -- 12: sampling --------------------------------------------------------------------------

def criterion_12(params: HardwareParams | None = None, n: int = 1_000_000) -> Criterion:
    params = params or paper_params()
    worst = 0.0
    for i, (prep, d) in enumerate(ex.run_spam(params, 1).items()):
        counts = sample_shots(d, n, seed=i)
        for cls, p in d.probs.items():
            sigma = math.sqrt(max(p * (1 - p), 1e-300) / n)
            if p > 0:
                worst = max(worst, abs(counts[cls] / n - p) / sigma)
            elif counts[cls]:
                worst = math.inf
    return Criterion(12, "exact vs sampled", worst <= 5, {"max_sigma_deviation": worst, "shots_per_prep": n})


# -- 13: zero-error limit -------------------------------------------------------------------

def trivial_limit_checks(params: HardwareParams | None = None) -> tuple[bool, dict]:
    """Identity SPAM matrix (simulated and analytic), zero metrics, zero EPC and zero readout errors.

    Meant for an error-free parameter set; any other set fails by design.
    """
    z = params or zero_error_params()
    dists = ex.run_spam(z, 1)
    ident = max(abs(d.probs[prep] - 1) for prep, d in dists.items())
    s = ex.spam_summary(dists)
    metrics_zero = max(s["misassignment"], s["erasure_fraction"], s["leakage_detection_00"])
    analytic = budget.spam_matrix(z)
    ident_analytic = float(np.max(np.abs(analytic.matrix - np.eye(4))))
    epc = run_rb(z, seeds=2).epc
    ro_zero = run_ro_calib(z, "A")
    m = {"spam_identity_dev": ident, "analytic_identity_dev": ident_analytic, "metrics_max": metrics_zero,
         "epc": epc, "rocalib_zero_pgE": ro_zero.p_gE, "rocalib_zero_peG": ro_zero.p_eG}
    ok = ident < 1e-12 and ident_analytic < 1e-12 and metrics_zero < 1e-12 and abs(epc) < 1e-9 \
        and ro_zero.p_gE == 0 and ro_zero.p_eG == 0
    return bool(ok), m


def criterion_13() -> Criterion:
    ok, m = trivial_limit_checks()
    p = paper_params()
    for s_ in ("A", "B"):
        r = run_ro_calib(p, s_, 100_000, seed=7)
        sp = p.sub(s_)
        dg = abs(r.p_gE - sp.p_gE) / r.p_gE_err
        de = abs(r.p_eG - sp.p_eG) / r.p_eG_err
        m[f"rocalib_{s_}_pgE_sigma"] = dg
        m[f"rocalib_{s_}_peG_sigma"] = de
        ok &= dg <= 3 and de <= 3
    return Criterion(13, "zero-error limit and readout calibration", bool(ok), m)


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9, criterion_10, criterion_11, criterion_12, criterion_13)


def run_all(verbose: bool = True) -> list:
    results = []
    for fn in CRITERIA:
        c = fn()
        results.append(c)
        if verbose:
            print(c.line(), flush=True)
            for note in c.notes:
                print(f"      note: {note}", flush=True)
    return results
