"""Kraus channels, imperfect readout POVMs and the branching measurement engine.

Superoperators act on row-major vectorised density matrices:
vec(K rho K^dag) = (K kron conj(K)) vec(rho).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.linalg import expm

from . import hilbert
from .hilbert import SpaceLayout, embed, single_mode_operator
from .params import HardwareParams, pure_dephasing_rate

PRUNE_THRESHOLD = 1e-12


# -- Kraus sets ----------------------------------------------------------------------

@dataclass(frozen=True)
class KrausSet:
    ops: tuple
    label: str = "composite"

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]

    def completeness(self) -> np.ndarray:
        return sum(K.conj().T @ K for K in self.ops)

    def is_trace_preserving(self, atol: float = 1e-10) -> bool:
        return bool(np.allclose(self.completeness(), np.eye(self.dim), atol=atol))

    def superop(self) -> np.ndarray:
        return superop_from_kraus(self.ops)


def gad_kraus(duration: float, T1: float, n_th: float) -> KrausSet:
    """Generalized amplitude damping on a two-level mode.

    K2 uses sqrt(1 - p_down) on |0><0| so that the set is trace preserving;
    its fixed point is diag(1 - n_th, n_th).

    Args:
        duration: idle time (us).
        T1: energy relaxation time (us); ``inf`` means no damping.
        n_th: thermal excited population.
    """
    if duration < 0:
        raise ValueError("duration must be >= 0")
    p = 0.0 if math.isinf(T1) else -math.expm1(-duration / T1)
    s = math.sqrt(1.0 - p)
    K0 = math.sqrt(1 - n_th) * np.array([[1, 0], [0, s]], complex)
    K1 = math.sqrt(p * (1 - n_th)) * np.array([[0, 1], [0, 0]], complex)
    K2 = math.sqrt(n_th) * np.array([[s, 0], [0, 1]], complex)
    K3 = math.sqrt(p * n_th) * np.array([[0, 0], [1, 0]], complex)
    return KrausSet((K0, K1, K2, K3), "GAD")


def dephasing_kraus(duration: float, T_phi: float) -> KrausSet:
    """Phase flip with q = (1 - exp(-t/T_phi))/2, so coherences decay as exp(-t/T_phi).

    This matches the collapse operator sqrt(2/T_phi) * n used by the integrator.
    """
    q = 0.0 if math.isinf(T_phi) else -0.5 * math.expm1(-duration / T_phi)
    return KrausSet((math.sqrt(1 - q) * np.eye(2, dtype=complex),
                     math.sqrt(q) * np.diag([1.0, -1.0]).astype(complex)), "dephasing")


def superop_from_kraus(ops: Iterable[np.ndarray]) -> np.ndarray:
    return sum(np.kron(K, K.conj()) for K in ops)


def kraus_from_superop(S: np.ndarray, tol: float = 1e-14) -> KrausSet:
    """Kraus decomposition via the Choi matrix (row-major convention)."""
    d = int(round(math.sqrt(S.shape[0])))
    choi = S.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    vals, vecs = np.linalg.eigh(0.5 * (choi + choi.conj().T))
    ops = tuple(math.sqrt(v) * vecs[:, i].reshape(d, d) for i, v in enumerate(vals) if v > tol)
    return KrausSet(ops, "choi")


def apply_superop(S: np.ndarray, rho: np.ndarray) -> np.ndarray:
    d = rho.shape[0]
    return (S @ rho.reshape(-1)).reshape(d, d)


def apply_channel(rho: np.ndarray, layout: SpaceLayout, kraus: KrausSet, mode: str) -> np.ndarray:
    """rho -> sum_i K_i rho K_i^dag with each K_i embedded at ``mode``.

    ``mode`` is the first of the consecutive modes the Kraus operators span.
    """
    out = np.zeros_like(rho, dtype=complex)
    for K in kraus.ops:
        Kf = embed(layout, K, mode)
        out += Kf @ rho @ Kf.conj().T
    return out


def mode_idle_kraus(dim: int, duration: float, T1: float, n_th: float, T_phi: float = math.inf) -> KrausSet:
    """Thermal damping plus pure dephasing on one mode of arbitrary dimension.

    Two-level modes use the closed-form GAD and dephasing sets; larger
    dimensions exponentiate the single-mode Liouvillian.
    """
    if dim == 2:
        gad = gad_kraus(duration, T1, n_th)
        if math.isinf(T_phi) or duration == 0:
            return gad
        deph = dephasing_kraus(duration, T_phi)
        return KrausSet(tuple(D @ K for D in deph.ops for K in gad.ops), "GAD+dephasing")
    a = single_mode_operator(dim, "annihilation")
    n = single_mode_operator(dim, "number")
    c_ops = []
    if not math.isinf(T1):
        c_ops += [math.sqrt((1 - n_th) / T1) * a, math.sqrt(n_th / T1) * a.conj().T]
    if not math.isinf(T_phi):
        c_ops.append(math.sqrt(2 / T_phi) * n)
    L = hilbert.liouvillian(np.zeros((dim, dim)), c_ops)
    return kraus_from_superop(expm(L * duration))


# -- readout POVM ------------------------------------------------------------------------

def assignment_matrix(p_gE: float, p_eG: float) -> np.ndarray:
    """Column-stochastic M[m, i] = P(outcome m | state i), rows (G, E), columns (g, e)."""
    return np.array([[1.0 - p_gE, p_eG], [p_gE, 1.0 - p_eG]])


@dataclass(frozen=True)
class Povm:
    G: np.ndarray
    E: np.ndarray

    def element(self, outcome: str) -> np.ndarray:
        return self.G if outcome == "G" else self.E


def povm_from_assignment(p_gE: float, p_eG: float) -> Povm:
    """Diagonal measurement operators Pi_m = sum_i sqrt(M[m, i]) |i><i|."""
    M = assignment_matrix(p_gE, p_eG)
    return Povm(np.diag(np.sqrt(M[0])).astype(complex), np.diag(np.sqrt(M[1])).astype(complex))


# -- branches ----------------------------------------------------------------------------

class Outcome(NamedTuple):
    step: str
    subsystem: str
    value: str  # "G" or "E"


@dataclass(frozen=True)
class Branch:
    """A conditional state, its probability and the raw outcomes that led to it.

    ``flag`` is "FPC" or "FMC" once a check has failed; flagged branches are
    no longer evolved since their decoded class is already fixed.
    """

    weight: float
    rho: np.ndarray
    record: tuple = ()
    flag: str | None = None


@dataclass
class BranchSet:
    branches: list
    pruned: float = 0.0

    def total(self) -> float:
        return sum(b.weight for b in self.branches)

    def active(self):
        return [b for b in self.branches if b.flag is None]

    def map_active(self, fn) -> "BranchSet":
        out = []
        for b in self.branches:
            if b.flag is None:
                out.extend(fn(b))
            else:
                out.append(b)
        return prune(BranchSet(out, self.pruned))


def prune(bs: BranchSet, threshold: float = PRUNE_THRESHOLD) -> BranchSet:
    keep, lost = [], 0.0
    for b in bs.branches:
        if b.weight < threshold:
            lost += b.weight
        else:
            keep.append(b)
    return BranchSet(keep, bs.pruned + lost)


def evolve_branch(b: Branch, S: np.ndarray) -> Branch:
    return replace(b, rho=apply_superop(S, b.rho))


# -- device: cached superoperators built from hardware parameters ----------------------

FAULT_KINDS = ("decay", "heat", "flip")


class Device:
    """Superoperator factory for one (params, layout) pair.

    All operators are cached; the instance holds no other mutable state, so
    it can be shared by every branch of an experiment.

    Args:
        params: hardware numbers.
        layout: mode dimensions; defaults to all-two-level.
        pulse_mode: "analytic" folds p_us/p_s into ideal conditional flips,
            "dynamical" uses the propagated Gaussian pulse unitaries.
    """

    def __init__(self, params: HardwareParams, layout: SpaceLayout | None = None, pulse_mode: str = "analytic"):
        if pulse_mode not in ("analytic", "dynamical"):
            raise ValueError(f"unknown pulse mode {pulse_mode!r}")
        self.params = params
        self.layout = layout or hilbert.build_space()
        self.pulse_mode = pulse_mode
        self._cache: dict = {}
        self.pulse_errors = {s: hilbert.effective_pulse_errors(params, s) for s in ("A", "B")}

    # timing -------------------------------------------------------------
    @property
    def readout_window(self) -> float:
        return max(sp.t_M + sp.t_d for sp in (self.params.A, self.params.B))

    @property
    def map_window(self) -> float:
        return max(self.params.A.t_map, self.params.B.t_map)

    @property
    def reset_window(self) -> float:
        return max(self.params.A.t_reset, self.params.B.t_reset)

    def _cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    # embedding helpers ------------------------------------------------------
    def pair_superop(self, s: str, pair_ops: Sequence[np.ndarray]) -> np.ndarray:
        L = self.layout
        return superop_from_kraus(embed(L, K, L.cavity(s)) for K in pair_ops)

    def mode_superop(self, mode: str, kraus: KrausSet) -> np.ndarray:
        return superop_from_kraus(embed(self.layout, K, mode) for K in kraus.ops)

    def identity(self) -> np.ndarray:
        return np.eye(self.layout.total ** 2, dtype=complex)

    # idles ------------------------------------------------------------------
    def transmon_idle(self, s: str, t: float, readout: bool = False) -> np.ndarray:
        sp = self.params.sub(s)
        def build():
            if readout:
                k = gad_kraus(t, sp.T1_RO, sp.nth_RO)
            else:
                k = mode_idle_kraus(2, t, sp.tr_T1, sp.tr_nth, _tphi(sp.tr_T1, sp.tr_T2R))
            return self.mode_superop(self.layout.transmon(s), k)
        return self._cached(("tr_idle", s, t, readout), build)

    def cavity_idle(self, s: str, t: float, dephasing: bool = False) -> np.ndarray:
        sp = self.params.sub(s)
        mode = self.layout.cavity(s)
        def build():
            tphi = _tphi(sp.cav_T1, sp.cav_T2R) if dephasing else math.inf
            return self.mode_superop(mode, mode_idle_kraus(self.layout.dim(mode), t, sp.cav_T1, sp.cav_nth, tphi))
        return self._cached(("cav_idle", s, t, dephasing), build)

    def subsystem_idle(self, s: str, t: float) -> np.ndarray:
        return self._cached(("sub_idle", s, t), lambda: self.cavity_idle(s, t) @ self.transmon_idle(s, t))

    def pair_phase(self, t: float, gamma_phi: float = 0.0, detuning_khz: float = 0.0) -> np.ndarray:
        """Dual-rail dephasing sqrt(gamma_phi/2) (n_B - n_A) and detuning pi*delta*(n_B - n_A).

        Both are diagonal in the Fock basis, so the channel is an exact
        elementwise factor on rho.
        """
        def build():
            L = self.layout
            d = np.real(np.diag(hilbert.mode_operator(L, "cav_B", "number")
                                - hilbert.mode_operator(L, "cav_A", "number")))
            diff = d[:, None] - d[None, :]
            delta = detuning_khz * 1e-3  # MHz
            factor = np.exp(-0.25 * gamma_phi * t * diff**2 - 1j * np.pi * delta * t * diff)
            return np.diag(factor.reshape(-1))
        return self._cached(("pair_phase", t, gamma_phi, detuning_khz), build)

    def idle(self, t: float, gamma_phi: float = 0.0, detuning_khz: float = 0.0) -> np.ndarray:
        """Ambient idle of all four modes plus the dual-rail dephasing/detuning."""
        def build():
            S = self.subsystem_idle("B", t) @ self.subsystem_idle("A", t)
            if gamma_phi or detuning_khz:
                S = self.pair_phase(t, gamma_phi, detuning_khz) @ S
            return S
        return self._cached(("idle", t, gamma_phi, detuning_khz), build)

    # pulses -----------------------------------------------------------------
    def _cond_rx(self, s: str, angle: float) -> np.ndarray:
        dc = self.layout.dim(self.layout.cavity(s))
        P1 = single_mode_operator(dc, "projector", 1)
        rx = np.array([[math.cos(angle / 2), -1j * math.sin(angle / 2)],
                       [-1j * math.sin(angle / 2), math.cos(angle / 2)]])
        return np.kron(P1, rx) + np.kron(np.eye(dc) - P1, np.eye(2))

    def map_halves(self, s: str) -> tuple[np.ndarray, np.ndarray]:
        """Mapping pulse for subsystem ``s`` split at its midpoint (cavity |1> -> transmon |e>).

        Analytic: conditional Rx(pi/2), half the idle, half the idle, conditional
        Rx(pi/2), then the unselective flip with probability p_us for Fock != 1.
        Both halves are padded so every subsystem takes ``map_window``.
        """
        def build():
            sp = self.params.sub(s)
            half = 0.5 * sp.t_map
            pad = 0.5 * (self.map_window - sp.t_map)
            idle = self.subsystem_idle(s, half)
            pad_idle = self.subsystem_idle(s, pad) if pad > 0 else self.identity()
            if self.pulse_mode == "dynamical":
                U = hilbert.gaussian_pulse_propagate(self.layout, s, sp.sigma_s, detuning=abs(sp.chi_cm),
                                                     chi=abs(sp.chi_cm))
                SU = self.pair_superop(s, [U])
                return idle @ pad_idle, pad_idle @ idle @ SU
            R = self.pair_superop(s, [self._cond_rx(s, math.pi / 2)])
            p_us = self.pulse_errors[s][0]
            dc = self.layout.dim(self.layout.cavity(s))
            P1 = single_mode_operator(dc, "projector", 1)
            rest = np.eye(dc) - P1
            X = np.array([[0, 1], [1, 0]], complex)
            K0 = np.kron(P1, np.eye(2)) + math.sqrt(1 - p_us) * np.kron(rest, np.eye(2))
            K1 = math.sqrt(p_us) * np.kron(rest, X)
            Kus = self.pair_superop(s, [K0, K1])
            return idle @ R @ pad_idle, pad_idle @ Kus @ R @ idle
        return self._cached(("map", s), build)

    def reset_superop(self, s: str, fire: bool) -> np.ndarray:
        """Conditional reset arm: pi pulse resonant with Fock 1 when ``fire``, else idle.

        The pulse fails with probability p_s when the cavity is not in |1>.
        Both arms last ``reset_window``.
        """
        def build():
            idle = self.subsystem_idle(s, self.reset_window)
            if not fire:
                return idle
            sp = self.params.sub(s)
            if self.pulse_mode == "dynamical":
                U = hilbert.gaussian_pulse_propagate(self.layout, s, sp.sigma_us, detuning=abs(sp.chi_cm),
                                                     chi=abs(sp.chi_cm))
                return idle @ self.pair_superop(s, [U])
            p_s = self.pulse_errors[s][1]
            dc = self.layout.dim(self.layout.cavity(s))
            P1 = single_mode_operator(dc, "projector", 1)
            rest = np.eye(dc) - P1
            X = np.array([[0, 1], [1, 0]], complex)
            K0 = np.kron(P1, X) + math.sqrt(1 - p_s) * np.kron(rest, X)
            K1 = math.sqrt(p_s) * np.kron(rest, np.eye(2))
            return idle @ self.pair_superop(s, [K0, K1])
        return self._cached(("reset", s, fire), build)

    # readout ------------------------------------------------------------------
    def readout_halves(self, s: str) -> tuple[np.ndarray, np.ndarray]:
        """Decoherence before and after the POVM for subsystem ``s``.

        Transmon: readout T1/n_th for t_M/2 on each side.  Cavity: ambient.
        After the second half the pair idles at ambient parameters for the
        processing time and any padding up to ``readout_window``.
        """
        def build():
            sp = self.params.sub(s)
            h = 0.5 * sp.t_M
            half = self.cavity_idle(s, h) @ self.transmon_idle(s, h, readout=True)
            tail = self.readout_window - sp.t_M
            post = self.subsystem_idle(s, tail) @ half if tail > 0 else half
            return half, post
        return self._cached(("readout", s), build)

    def povm_masks(self, s: str) -> dict:
        """Elementwise factors implementing Pi_m rho Pi_m for the diagonal POVM."""
        def build():
            sp = self.params.sub(s)
            povm = povm_from_assignment(sp.p_gE, sp.p_eG)
            out = {}
            for m in ("G", "E"):
                diag = np.real(np.diag(embed(self.layout, povm.element(m), self.layout.transmon(s))))
                out[m] = np.outer(diag, diag)
            return out
        return self._cached(("povm", s), build)

    def fault_superop(self, s: str, kind: str) -> np.ndarray:
        """Deterministic transmon fault: full decay (|e> -> |g>) or full heating."""
        if kind == "decay":
            ops = [np.array([[0, 1], [0, 0]], complex), np.diag([1.0, 0.0]).astype(complex)]
        elif kind == "heat":
            ops = [np.array([[0, 0], [1, 0]], complex), np.diag([0.0, 1.0]).astype(complex)]
        else:
            raise ValueError(f"not a state fault: {kind!r}")
        return self._cached(("fault", s, kind),
                            lambda: self.mode_superop(self.layout.transmon(s), KrausSet(tuple(ops))))


def _tphi(T1: float, T2: float) -> float:
    rate = pure_dephasing_rate(T1, T2)
    return math.inf if rate <= 0 else 1.0 / rate


# -- measurement and reset on branches ------------------------------------------------

def measure_transmon(branch: Branch, device: Device, s: str, step: str, *,
                     flip: bool = False, mid_fault: np.ndarray | None = None,
                     fail_flag: str | None = None, fail_on: str = "E") -> list:
    """Sandwich readout of transmon ``s``: decohere, POVM, decohere.

    Args:
        branch: parent branch.
        device: superoperator factory.
        s: "A" or "B".
        step: label stored in the outcome record.
        flip: swap the reported outcome (classification fault injection).
        mid_fault: optional superoperator applied just before the POVM.
        fail_flag: flag assigned to the child reporting ``fail_on`` (for checks).
        fail_on: the reported outcome that fails the check.

    Returns:
        Two children (G first) whose weights sum to the parent weight.
    """
    pre, post = device.readout_halves(s)
    rho = apply_superop(pre, branch.rho)
    if mid_fault is not None:
        rho = apply_superop(mid_fault, rho)
    children = []
    for m, mask in device.povm_masks(s).items():
        sub = rho * mask
        p = float(np.real(np.trace(sub)))
        reported = {"G": "E", "E": "G"}[m] if flip else m
        if p <= 0:
            children.append(Branch(0.0, sub, branch.record + (Outcome(step, s, reported),)))
            continue
        child = apply_superop(post, sub / p)
        flag = fail_flag if (fail_flag and reported == fail_on) else None
        children.append(Branch(branch.weight * p, child, branch.record + (Outcome(step, s, reported),), flag))
    children.sort(key=lambda b: b.record[-1].value != "G")
    return children


def conditional_reset(branch: Branch, device: Device, s: str, outcome: str | None = None) -> Branch:
    """Apply the reset pulse if the latest outcome of ``s`` was E, otherwise idle."""
    if outcome is None:
        outcome = next(o.value for o in reversed(branch.record) if o.subsystem == s)
    return evolve_branch(branch, device.reset_superop(s, outcome == "E"))
