"""Single-qubit randomized benchmarking in the dual-rail subspace."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..channels import BranchSet, Device, superop_from_kraus
from ..decoder import RBFit, fit_rb
from ..hilbert import beamsplitter_unitary, mode_operator
from ..params import HardwareParams
from .experiments import distribution_from_leaves
from .schedule import CHECK_ONLY, PrepMethod, Runner, merge_active

# native gates: (name, theta, phi); duration scales with |theta|
NATIVE = (("X90", math.pi / 2, 0.0), ("Xm90", -math.pi / 2, 0.0), ("Y90", math.pi / 2, math.pi / 2),
          ("Ym90", -math.pi / 2, math.pi / 2), ("X180", math.pi, 0.0), ("Y180", math.pi, math.pi / 2))
DEFAULT_T_HALF_PI = 1.0  # us per pi/2 rotation
DEFAULT_DEPTHS = (0, 50, 100, 200, 400, 600, 800, 1000, 1250, 1500)


def _qubit_rotation(theta: float, phi: float) -> np.ndarray:
    n = np.array([math.cos(phi), math.sin(phi)])
    X = np.array([[0, 1], [1, 0]], complex)
    Y = np.array([[0, -1j], [1j, 0]])
    return math.cos(theta / 2) * np.eye(2) - 1j * math.sin(theta / 2) * (n[0] * X + n[1] * Y)


def _key(U: np.ndarray) -> tuple:
    """Canonical form of a 2x2 unitary up to global phase."""
    k = np.flatnonzero(np.abs(U.reshape(-1)) > 1e-9)[0]
    V = U * abs(U.reshape(-1)[k]) / U.reshape(-1)[k]
    return tuple(np.round(V.reshape(-1), 8))


def clifford_group() -> list:
    """The 24 single-qubit Cliffords as shortest native-gate sequences (breadth-first)."""
    elems = {_key(np.eye(2)): ((), np.eye(2, dtype=complex))}
    frontier = [((), np.eye(2, dtype=complex))]
    while frontier:
        nxt = []
        for seq, U in frontier:
            for g, theta, phi in NATIVE:
                V = _qubit_rotation(theta, phi) @ U
                k = _key(V)
                if k not in elems:
                    elems[k] = (seq + (g,), V)
                    nxt.append((seq + (g,), V))
        frontier = nxt
    out = sorted(elems.values(), key=lambda e: (len(e[0]), e[0]))
    assert len(out) == 24
    return out


def logical_depolarizing_kraus(device: Device, lam: float) -> list:
    """Depolarizing on span{|01>,|10>}; the Paulis act as identity outside the code space."""
    L = device.layout
    aB, aA = mode_operator(L, "cav_B", "annihilation"), mode_operator(L, "cav_A", "annihilation")
    nB, nA = aB.conj().T @ aB, aA.conj().T @ aA
    I = np.eye(L.total)
    P_code = nB @ (I - nA) + nA @ (I - nB)
    P_out = I - P_code
    sx = aB.conj().T @ aA + aA.conj().T @ aB
    sy = -1j * aB.conj().T @ aA + 1j * aA.conj().T @ aB
    sz = (nB - nA) @ P_code
    ops = [math.sqrt(1 - 3 * lam / 4) * I]
    ops += [math.sqrt(lam / 4) * (s + P_out) for s in (sx, sy, sz)]
    return ops


@dataclass
class RBResult:
    depths: np.ndarray
    survival: np.ndarray  # shape (seeds, depths)
    fit: RBFit

    @property
    def epc(self) -> float:
        return self.fit.epc

    def to_dict(self) -> dict:
        return {"depths": self.depths.tolist(), "survival": self.survival.tolist(),
                "mean_survival": self.survival.mean(axis=0).tolist(), "p": self.fit.p, "p_err": self.fit.p_err,
                "A": self.fit.A, "B": self.fit.B, "epc": self.epc}


class RBEngine:
    """Noisy Clifford superoperators on one device.

    Args:
        device: superoperator factory.
        depolarizing: if given, per-Clifford logical depolarizing parameter
            (replaces the physical idle noise).
        gamma_phi: dual-rail dephasing rate during gates; defaults to the
            Ramsey value of the device parameters.
        t_half_pi: gate time of a pi/2 rotation in us.
        physical_noise: apply ambient idle noise during gates.
    """

    def __init__(self, device: Device, depolarizing: float | None = None, gamma_phi: float | None = None,
                 t_half_pi: float = DEFAULT_T_HALF_PI, physical_noise: bool = True):
        self.device = device
        self.cliffords = clifford_group()
        gp = device.params.gamma_phi_ramsey if gamma_phi is None else gamma_phi
        native = {}
        for g, theta, phi in NATIVE:
            S = superop_from_kraus([beamsplitter_unitary(device.layout, theta, phi)])
            if physical_noise and depolarizing is None:
                S = S @ device.idle(abs(theta) / (math.pi / 2) * t_half_pi, gp)
            native[g] = S
        dep = None
        if depolarizing is not None:
            dep = superop_from_kraus(logical_depolarizing_kraus(device, depolarizing))
        self.superops = []
        for seq, _ in self.cliffords:
            S = device.identity()
            for g in seq:
                S = native[g] @ S
            if dep is not None:
                S = dep @ S
            self.superops.append(S)
        self._inverse = {}
        for i, (_, U) in enumerate(self.cliffords):
            for j, (_, V) in enumerate(self.cliffords):
                if _key(V @ U) == _key(np.eye(2)):
                    self._inverse[i] = j

    def compose(self, indices) -> int:
        U = np.eye(2, dtype=complex)
        for i in indices:
            U = self.cliffords[i][1] @ U
        k = _key(U)
        return next(j for j, (_, V) in enumerate(self.cliffords) if _key(V) == k)

    def apply(self, bs: BranchSet, seq) -> BranchSet:
        """Run a Clifford sequence on every active branch (vectorised density matrices)."""
        def fn(b):
            v = b.rho.reshape(-1)
            for i in seq:
                v = self.superops[i] @ v
            return [replace(b, rho=v.reshape(b.rho.shape))]
        return bs.map_active(fn)

    def sequence(self, rng: np.random.Generator, depth: int) -> list:
        seq = list(rng.integers(0, 24, size=depth))
        seq.append(self._inverse[self.compose(seq)])
        return seq


def run_rb(params: HardwareParams, depths=DEFAULT_DEPTHS, seeds: int = 5,
           seed: int = 0, depolarizing: float | None = None, gamma_phi: float | None = None,
           t_half_pi: float = DEFAULT_T_HALF_PI, physical_noise: bool = True,
           prep_method: PrepMethod = CHECK_ONLY) -> RBResult:
    """Exact RB survival on |0_L> with erasures post-selected out, fitted to A p^m + B."""
    device = Device(params)
    eng = RBEngine(device, depolarizing, gamma_phi, t_half_pi, physical_noise)
    rng = np.random.default_rng(seed)
    runner = Runner(device)
    prepared = merge_active(runner.prepare("01", prep_method))
    depths = np.asarray(depths, int)
    surv = np.zeros((seeds, depths.size))
    for s in range(seeds):
        for j, m in enumerate(depths):
            bs = eng.apply(prepared, eng.sequence(rng, int(m)))
            bs = runner.logical_measurement(bs, 1)
            d = distribution_from_leaves(bs, 1, "01")
            surv[s, j] = d.probs["01"] / (d.probs["01"] + d.probs["10"])
    fit = fit_rb(depths, surv.mean(axis=0))
    return RBResult(depths, surv, fit)
