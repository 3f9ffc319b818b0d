"""Closed-form error model: preparation errors, first-order SPAM budgets,
two-level population ODEs, apparent bit-flip decomposition and intrinsic
lifetime estimates.

Everything here is a pure function of HardwareParams and serves as an
independent oracle for the branch simulator.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .hilbert import effective_pulse_errors
from .params import HardwareParams, SUBSYSTEMS

STATES = ("00", "01", "10", "11")  # digits "b a": Bob first, Alice second
TARGETS = ("p0_given_1", "p1_given_0")
LOGICAL_PREPS = {"0L": "01", "1L": "10", "01": "01", "10": "10"}


def _lin(x: float, T: float, exponential: bool) -> float:
    """x/T, or 1 - exp(-x/T) in exponential mode; zero for infinite T."""
    if math.isinf(T):
        return 0.0
    return -math.expm1(-x / T) if exponential else x / T


# -- budget tables -----------------------------------------------------------------

@dataclass(frozen=True)
class BudgetRow:
    key: str
    mechanism: str
    value: float


@dataclass(frozen=True)
class BudgetTable:
    label: str
    subsystem: str
    target: str
    rows: tuple

    @property
    def total(self) -> float:
        return sum(r.value for r in self.rows)

    def relative(self) -> dict:
        tot = self.total
        return {r.key: (100.0 * r.value / tot if tot > 0 else 0.0) for r in self.rows}

    def ranked(self) -> list:
        return sorted(self.rows, key=lambda r: -r.value)

    def value(self, key: str) -> float:
        return next(r.value for r in self.rows if r.key == key)

    def to_dict(self) -> dict:
        rel = self.relative()
        return {"label": self.label, "subsystem": self.subsystem, "target": self.target, "total": self.total,
                "rows": [{"key": r.key, "mechanism": r.mechanism, "value": r.value, "relative_pct": rel[r.key]}
                         for r in self.ranked()]}

    def to_text(self) -> str:
        rel = self.relative()
        width = max([len(r.mechanism) for r in self.rows] + [len("mechanism")])
        lines = [self.label, f"{'mechanism':<{width}}  {'raw':>10}  {'relative':>9}"]
        for r in self.ranked():
            lines.append(f"{r.mechanism:<{width}}  {r.value:>10.3e}  {rel[r.key]:>8.2f}%")
        lines.append(f"{'total':<{width}}  {self.total:>10.3e}  {100.0 if self.total > 0 else 0.0:>8.2f}%")
        return "\n".join(lines)


def single_mode_budget(params: HardwareParams, subsystem: str, target: str, include_prep: bool = False,
                       prep_method: str = "check", exponential: bool = False) -> BudgetTable:
    """First-order budget for p("0" | ~|1>) or p("1" | ~|0>) of one subsystem.

    Args:
        params: hardware numbers.
        subsystem: "A" or "B".
        target: "p0_given_1" or "p1_given_0".
        include_prep: add the preparation-failure row (eps_1 or eps_0).
        prep_method: "check" or "cm", selects which preparation error is used.
        exponential: use 1 - exp(-t/T) instead of t/T.

    Returns:
        BudgetTable with one row per mechanism.
    """
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}")
    sp = params.sub(subsystem)
    p_us = effective_pulse_errors(params, subsystem)[0]
    e = exponential
    t_cm = 2 * sp.t_M + sp.t_map
    if target == "p0_given_1":
        rows = [
            BudgetRow("cavity", "Cavity T1 during check or mapping", _lin(t_cm, 2 * sp.cav_T1, e)),
            BudgetRow("transmon_t2", "Transmon T2 during mapping", _lin(sp.t_map, sp.tr_T2R, e)),
            BudgetRow("transmon_t1_ro", "Transmon T1 during readout", _lin(sp.t_M, 2 * sp.T1_RO, e)),
            BudgetRow("classification", "Readout classification error", sp.p_eG),
        ]
        prep_name = "State |1> preparation failure"
    else:
        rows = [
            BudgetRow("cavity_heating", "Cavity heating during check or mapping",
                      sp.cav_nth * _lin(t_cm, 2 * sp.cav_T1, e)),
            BudgetRow("transmon_heating_map", "Transmon heating during mapping",
                      sp.tr_nth * _lin(sp.t_map, 2 * sp.tr_T1, e)),
            BudgetRow("transmon_heating_ro", "Transmon heating during readout",
                      sp.nth_RO * _lin(sp.t_M, 2 * sp.T1_RO, e)),
            BudgetRow("unselectivity", "Unselectivity of selective mapping pulse", p_us),
            BudgetRow("classification", "Readout classification error", sp.p_gE),
        ]
        prep_name = "State |0> preparation failure"
    if include_prep:
        pe = prep_error_estimates(params, exponential=exponential)
        eps = pe.eps(subsystem, 1 if target == "p0_given_1" else 0, prep_method)
        rows.insert(0, BudgetRow("prep", prep_name, eps))
    who = "Alice" if subsystem == "A" else "Bob"
    sym = 'p("0"|~1)' if target == "p0_given_1" else 'p("1"|~0)'
    return BudgetTable(f"{sym} {who}", subsystem, target, tuple(rows))


def measurement_errors(params: HardwareParams, subsystem: str, exponential: bool = False) -> tuple[float, float]:
    """(P("0"||1>), P("1"||0>)) with ideal preparation."""
    return (single_mode_budget(params, subsystem, "p0_given_1", exponential=exponential).total,
            single_mode_budget(params, subsystem, "p1_given_0", exponential=exponential).total)


# -- preparation errors ------------------------------------------------------------

@dataclass(frozen=True)
class PrepErrors:
    eps_reset: dict
    eps0_check: dict
    eps1_check: dict
    eps0_cm: dict
    eps1_cm: dict
    ratio0: dict
    ratio1: dict
    eps00: float

    def eps(self, subsystem: str, level: int, method: str = "check") -> float:
        if method not in ("check", "cm"):
            raise ValueError("prep method must be 'check' or 'cm'")
        table = {(0, "check"): self.eps0_check, (1, "check"): self.eps1_check,
                 (0, "cm"): self.eps0_cm, (1, "cm"): self.eps1_cm}[(level, method)]
        return table[subsystem]

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("eps_reset", "eps0_check", "eps1_check", "eps0_cm", "eps1_cm",
                                               "ratio0", "ratio1", "eps00")}


def prep_error_estimates(params: HardwareParams, n_reset: int = 6, n_checks: int = 5,
                         exponential: bool = False) -> PrepErrors:
    """Residual preparation errors of the reset, check-only and cavity-check protocols.

    The measurement-only assignment errors are evaluated first, which breaks
    the apparent circularity between budgets and preparation errors.
    """
    out = {k: {} for k in ("eps_reset", "eps0_check", "eps1_check", "eps0_cm", "eps1_cm", "ratio0", "ratio1")}
    for s in SUBSYSTEMS:
        sp = params.sub(s)
        p01, p10 = measurement_errors(params, s, exponential)  # P("0"|1), P("1"|0)
        n, T1 = sp.cav_nth, sp.cav_T1
        decay_M = _lin(sp.t_M, T1, exponential)
        decay_check = _lin(params.tau_ocp + sp.t_M, T1, exponential)
        reset = n * p01**n_reset + (1 - n) * (1 - p10)**n_reset * n * decay_M
        e0c = (1 - reset) * n * decay_check + reset * (1 - decay_check)
        e1c = sp.eps_ocp * (1 - n * decay_M) + (1 - sp.eps_ocp) * decay_M
        e0cm = e0c * p01**n_checks + (1 - e0c) * (1 - p10)**n_checks * n * decay_M
        e1cm = e1c * p10**n_checks + (1 - e1c) * (1 - p01)**n_checks * decay_M
        out["eps_reset"][s] = reset
        out["eps0_check"][s] = e0c
        out["eps1_check"][s] = e1c
        out["eps0_cm"][s] = e0cm
        out["eps1_cm"][s] = e1cm
        out["ratio0"][s] = e0c / (n * decay_M) if n * decay_M > 0 else math.nan
        out["ratio1"][s] = e1c / decay_M if decay_M > 0 else math.nan
    ra, rb = out["eps_reset"]["A"], out["eps_reset"]["B"]
    return PrepErrors(eps00=ra + rb + ra * rb, **out)


# -- SPAM matrix ------------------------------------------------------------------

@dataclass(frozen=True)
class SpamMatrixAnalytic:
    """M[out, prep] over STATES; columns are prepared states."""

    matrix: np.ndarray
    labels: tuple = STATES

    def p(self, out: str, prep: str) -> float:
        return float(self.matrix[self.labels.index(out), self.labels.index(prep)])

    def column_residual(self) -> float:
        return float(np.max(np.abs(self.matrix.sum(axis=0) - 1.0)))

    def to_dict(self) -> dict:
        return {"labels": list(self.labels),
                "matrix": {prep: {out: self.p(out, prep) for out in self.labels} for prep in self.labels},
                "column_residual": self.column_residual()}

    def to_text(self) -> str:
        head = "out \\ prep " + "".join(f"{'|' + s + '>':>12}" for s in self.labels)
        lines = [head]
        for out in self.labels:
            lines.append(f'"{out}"'.ljust(11) + "".join(f"{self.p(out, prep):>12.4e}" for prep in self.labels))
        return "\n".join(lines)


def single_assignment(params: HardwareParams, subsystem: str, include_prep: bool = True,
                      prep_method: str = "check", ideal: bool = False) -> np.ndarray:
    """2x2 q[out, state] for one subsystem from the budget totals."""
    if ideal:
        return np.eye(2)
    p01 = single_mode_budget(params, subsystem, "p0_given_1", include_prep, prep_method).total
    p10 = single_mode_budget(params, subsystem, "p1_given_0", include_prep, prep_method).total
    return np.array([[1 - p10, p01], [p10, 1 - p01]])


def spam_matrix(params: HardwareParams, include_prep: bool = True, prep_method: str = "check",
                ideal: bool = False) -> SpamMatrixAnalytic:
    """p("b a" | ~|b' a'>) = q_B(b|b') q_A(a|a'), assuming uncorrelated errors.

    Each diagonal factor is written as the complement of its error budget, so
    every column sums to one.
    """
    qB = single_assignment(params, "B", include_prep, prep_method, ideal)
    qA = single_assignment(params, "A", include_prep, prep_method, ideal)
    return SpamMatrixAnalytic(np.kron(qB, qA))


def pair_budget(params: HardwareParams, outcome: str, prep: str, top: int | None = None,
                prep_method: str = "check") -> list:
    """Ranked products of per-subsystem error rows for a two-error SPAM element.

    Only outcomes where both digits are wrong (e.g. "10" given 01) are
    second order; each returned entry is (mechanism B, mechanism A, value).
    """
    rows = {}
    for s, o, p in (("B", outcome[0], prep[0]), ("A", outcome[1], prep[1])):
        if o == p:
            raise ValueError("pair_budget needs both digits to be in error")
        target = "p0_given_1" if p == "1" else "p1_given_0"
        rows[s] = single_mode_budget(params, s, target, True, prep_method).rows
    combos = [(rb.mechanism, ra.mechanism, rb.value * ra.value) for rb, ra in itertools.product(rows["B"], rows["A"])]
    combos.sort(key=lambda c: -c[2])
    return combos[:top] if top else combos


# -- population ODE -------------------------------------------------------------------

@dataclass(frozen=True)
class PopulationCurves:
    t: np.ndarray
    P: dict  # state label -> array

    def total(self) -> np.ndarray:
        return sum(self.P.values())


def cavity_populations(t, T1: float, n_th: float, level: int, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """(P0, P1) of one two-level cavity with up rate n_th/T1 and down rate 1/T1."""
    t = np.asarray(t, float)
    if math.isinf(T1):
        p1 = np.full_like(t, eps if level == 0 else 1 - eps)
        return 1 - p1, p1
    up, down = n_th / T1, 1.0 / T1
    g = up + down
    decay = np.exp(-g * t)
    if level == 0:
        p1 = up / g * (1 - decay) + eps * decay
    else:
        p1 = up / g - decay * (eps - down / g)
    return 1 - p1, p1


def ode_populations(t, params: HardwareParams, prep: str, eps: dict | None = None,
                    prep_method: str = "check") -> PopulationCurves:
    """Joint populations P_k(t) for a prepared basis state "b a".

    Args:
        t: times in us.
        params: hardware numbers (cavity T1 and n_th are used).
        prep: "00", "01", "10", "11" (or "0L"/"1L").
        eps: optional {subsystem: (eps0, eps1)}; defaults to the preparation estimates.
        prep_method: which estimates to use when ``eps`` is None.
    """
    prep = LOGICAL_PREPS.get(prep, prep)
    if eps is None:
        pe = prep_error_estimates(params)
        eps = {s: (pe.eps(s, 0, prep_method), pe.eps(s, 1, prep_method)) for s in SUBSYSTEMS}
    per = {}
    for s, level in (("B", int(prep[0])), ("A", int(prep[1]))):
        sp = params.sub(s)
        per[s] = cavity_populations(t, sp.cav_T1, sp.cav_nth, level, eps[s][level])
    P = {k: per["B"][int(k[0])] * per["A"][int(k[1])] for k in STATES}
    return PopulationCurves(np.asarray(t, float), P)


def rk4_populations(t_end: float, params: HardwareParams, subsystem: str, level: int, eps: float,
                    nsteps: int = 20000) -> np.ndarray:
    """Numerical RK4 solution of the single-cavity rate equations (an oracle)."""
    sp = params.sub(subsystem)
    up, down = sp.cav_nth / sp.cav_T1, 1.0 / sp.cav_T1
    A = np.array([[-up, down], [up, -down]])
    y = np.array([1 - eps, eps]) if level == 0 else np.array([eps, 1 - eps])
    h = t_end / nsteps
    out = [y]
    for _ in range(nsteps):
        k1 = A @ y
        k2 = A @ (y + 0.5 * h * k1)
        k3 = A @ (y + 0.5 * h * k2)
        k4 = A @ (y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(y)
    return np.array(out)


# -- apparent bit flips -----------------------------------------------------------------

MODES = ("intrinsic_only", "measurement_only", "both")


def _mode_params(params: HardwareParams, mode: str) -> HardwareParams:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    return params.replace_both(cav_nth=0.0) if mode == "measurement_only" else params


def assignment_given_state(params: HardwareParams, ideal: bool = False) -> SpamMatrixAnalytic:
    """P(O | |k>) without preparation errors."""
    return spam_matrix(params, include_prep=False, ideal=ideal)


def raw_assignments(t, params: HardwareParams, prep: str, mode: str = "both",
                    prep_method: str = "cm") -> tuple[dict, dict]:
    """Per-state channels P_k(t) P(O|k) for O in {"01", "10"}."""
    p = _mode_params(params, mode)
    pops = ode_populations(t, p, prep, prep_method=prep_method)
    M = assignment_given_state(p, ideal=(mode == "intrinsic_only"))
    ch = {O: {k: pops.P[k] * M.p(O, k) for k in STATES} for O in ("01", "10")}
    return ch, pops.P


def apparent_bitflip(t, params: HardwareParams, prep: str, mode: str = "both", prep_method: str = "cm"):
    """Logical bit-flip probability P_1L(t) (prep 0L) or P_0L(t) (prep 1L).

    m_O(t) = sum_k P_k(t) P(O | k); the flip is m_flip / (m_01 + m_10).
    """
    prep = LOGICAL_PREPS[prep]
    ch, _ = raw_assignments(t, params, prep, mode, prep_method)
    m01, m10 = sum(ch["01"].values()), sum(ch["10"].values())
    flip = m10 if prep == "01" else m01
    return flip / (m01 + m10)


def bitflip_channel_decomposition(t, params: HardwareParams, prep: str, prep_method: str = "cm") -> dict:
    """Contribution of each true state k to the apparent flip; sums to ``apparent_bitflip``."""
    prep = LOGICAL_PREPS[prep]
    ch, _ = raw_assignments(t, params, prep, "both", prep_method)
    norm = sum(ch["01"].values()) + sum(ch["10"].values())
    flip = "10" if prep == "01" else "01"
    return {k: ch[flip][k] / norm for k in STATES}


def intrinsic_fraction(t, params: HardwareParams, prep: str, cav_nth: float | None = None,
                       prep_method: str = "cm"):
    """Share of the apparent flip probability explained by real double transitions."""
    p = params if cav_nth is None else params.replace_both(cav_nth=cav_nth)
    return apparent_bitflip(t, p, prep, "intrinsic_only", prep_method) / apparent_bitflip(t, p, prep, "both",
                                                                                         prep_method)


def saturation_estimate(params: HardwareParams) -> dict:
    """Long-time flip probabilities from the leakage-state assignment ratio."""
    M = assignment_given_state(params)
    a, b = M.p("10", "00"), M.p("01", "00")
    return {"0L": a / (a + b), "1L": b / (a + b), 'P("10"|00)': a, 'P("01"|00)': b}


# -- intrinsic lifetimes --------------------------------------------------------------

def nojump_z_printed(t, p10n: float, p01n: float, kappa_a: float, kappa_b: float):
    """<Z(t)> in the printed closed form (gives <Z(0)> = 0)."""
    x = np.exp(-(kappa_a - kappa_b) * np.asarray(t, float))
    return (p10n - p10n * x) / (1 - p01n * (1 - x))


def nojump_p10_normalized(t, p10n: float, p01n: float, kappa_a: float, kappa_b: float):
    """Normalised |10> weight under no-jump evolution: P10 / (P10 + P01 e^{-(kA-kB)t})."""
    x = np.exp(-(kappa_a - kappa_b) * np.asarray(t, float))
    return p10n / (1 - p01n * (1 - x))


def intrinsic_lifetimes(params: HardwareParams, t: float = 1.0, prep_method: str = "check",
                        swap: bool = False) -> dict:
    """Leakage-seepage, no-jump and total intrinsic flip times (seconds) per logical prep.

    Args:
        params: hardware numbers.
        t: evaluation time in us (the nominal gate duration).
        prep_method: which preparation errors set the initial conditions.
        swap: exchange the roles of the two cavities (digit-assignment check).

    Returns:
        Nested dict keyed by "0L" and "1L".  "nojump_printed" follows the
        printed <Z(t)> with p = max(0, +-<Z>); "nojump_normalized" uses the
        normalised no-jump weight of the opposite logical state.
    """
    if swap:
        params = params.replace(A=params.B, B=params.A)
    pe = prep_error_estimates(params)
    eps = {s: (pe.eps(s, 0, prep_method), pe.eps(s, 1, prep_method)) for s in SUBSYSTEMS}
    kA, kB = 1 / params.A.cav_T1, 1 / params.B.cav_T1
    out = {}
    for name, prep, flip in (("0L", "01", "10"), ("1L", "10", "01")):
        pops = ode_populations(t, params, prep, eps=eps)
        p_seep = float(pops.P[flip])
        # logical populations right after preparation
        e0B, e1B = eps["B"]
        e0A, e1A = eps["A"]
        if prep == "01":
            P01, P10 = (1 - e0B) * (1 - e1A), e0B * e1A
        else:
            P01, P10 = e1B * e0A, (1 - e1B) * (1 - e0A)
        p10n, p01n = P10 / (P01 + P10), P01 / (P01 + P10)
        z = float(nojump_z_printed(t, p10n, p01n, kA, kB))
        p_printed = max(0.0, z) if prep == "01" else max(0.0, -z)
        w10 = float(nojump_p10_normalized(t, p10n, p01n, kA, kB))
        p_norm = w10 if prep == "01" else 1 - w10
        to_s = lambda p: (t / p) * 1e-6 if p > 0 else math.inf
        out[name] = {
            "p_leakage_seepage": p_seep, "T_leakage_seepage_s": to_s(p_seep),
            "z_printed": z, "p_nojump_printed": p_printed, "T_nojump_printed_s": to_s(p_printed),
            "p_nojump_normalized": p_norm, "T_nojump_normalized_s": to_s(p_norm),
            "T_total_printed_s": to_s(p_seep + p_printed),
            "T_total_normalized_s": to_s(p_seep + p_norm),
        }
    return out


def lifetimes_text(res: dict) -> str:
    keys = [("T_leakage_seepage_s", "leakage-seepage"), ("T_nojump_printed_s", "no-jump (printed <Z>)"),
            ("T_nojump_normalized_s", "no-jump (normalized)"), ("T_total_printed_s", "total (printed)"),
            ("T_total_normalized_s", "total (normalized)")]
    lines = [f"{'channel':<24}{'prep 0L [s]':>14}{'prep 1L [s]':>14}"]
    for k, name in keys:
        lines.append(f"{name:<24}{res['0L'][k]:>14.4g}{res['1L'][k]:>14.4g}")
    return "\n".join(lines)
