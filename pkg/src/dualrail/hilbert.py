"""Operator algebra on the four-mode space (cavity B, transmon B, cavity A, transmon A).

States are dense density matrices.  Times are in microseconds and frequencies
in MHz (linear); factors of 2*pi enter only where Hamiltonians are built.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .params import ConfigError, HardwareParams

MODES = ("cav_B", "tr_B", "cav_A", "tr_A")
PAIR_MODES = {"B": ("cav_B", "tr_B"), "A": ("cav_A", "tr_A")}

DEFAULT_PULSE_STEP = 1e-4  # us, i.e. 0.1 ns
DEFAULT_CHOP = 4.0


class IntegrationError(RuntimeError):
    """The master-equation integrator produced non-finite values."""


@dataclass(frozen=True)
class SpaceLayout:
    """Mode dimensions in the fixed order cav_B, tr_B, cav_A, tr_A."""

    dims: tuple[int, int, int, int] = (2, 2, 2, 2)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    def index(self, mode: str) -> int:
        try:
            return MODES.index(mode)
        except ValueError:
            raise KeyError(f"unknown mode {mode!r}; expected one of {MODES}") from None

    def dim(self, mode: str) -> int:
        return self.dims[self.index(mode)]

    def cavity(self, subsystem: str) -> str:
        return PAIR_MODES[subsystem][0]

    def transmon(self, subsystem: str) -> str:
        return PAIR_MODES[subsystem][1]


def build_space(dims=(2, 2, 2, 2)) -> SpaceLayout:
    """Create a layout, rejecting modes of dimension below 2.

    Args:
        dims: four mode dimensions in canonical order (cav_B, tr_B, cav_A, tr_A).

    Returns:
        The validated SpaceLayout.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 4:
        raise ConfigError(f"layout needs 4 mode dimensions, got {len(dims)}")
    for mode, d in zip(MODES, dims):
        if d < 2:
            raise ConfigError(f"mode {mode}: dimension must be >= 2 (got {d})")
    if dims[1] != 2 or dims[3] != 2:
        raise ConfigError("transmons are modeled as two-level systems")
    return SpaceLayout(dims)


def single_mode_operator(dim: int, kind: str, n: int | None = None) -> np.ndarray:
    if kind == "annihilation":
        return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
    if kind == "creation":
        return np.diag(np.sqrt(np.arange(1, dim)), -1).astype(complex)
    if kind == "number":
        return np.diag(np.arange(dim)).astype(complex)
    if kind == "projector":
        if n is None or not 0 <= n < dim:
            raise ValueError(f"projector index {n} out of range for dimension {dim}")
        op = np.zeros((dim, dim), complex)
        op[n, n] = 1.0
        return op
    if kind == "pauli_x":
        # acts on the {|0>, |1>} subspace, identity elsewhere
        op = np.eye(dim, dtype=complex)
        op[:2, :2] = [[0, 1], [1, 0]]
        return op
    if kind == "pauli_z":
        op = np.eye(dim, dtype=complex)
        op[:2, :2] = [[1, 0], [0, -1]]
        return op
    if kind == "identity":
        return np.eye(dim, dtype=complex)
    raise ValueError(f"unknown operator kind {kind!r}")


def embed(layout: SpaceLayout, op: np.ndarray, first_mode: str) -> np.ndarray:
    """Tensor ``op`` into the full space starting at ``first_mode``.

    ``op`` may span one mode or several consecutive modes (e.g. a cavity and
    its transmon).
    """
    i = layout.index(first_mode)
    left = int(np.prod(layout.dims[:i]))
    span = op.shape[0]
    right = layout.total // (left * span)
    if left * span * right != layout.total:
        raise ValueError("operator does not fit the layout at that position")
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def mode_operator(layout: SpaceLayout, mode: str, kind: str, n: int | None = None) -> np.ndarray:
    """Single-mode operator embedded with identities on the other modes.

    Args:
        layout: the space.
        mode: one of ``MODES``.
        kind: annihilation, creation, number, projector, pauli_x, pauli_z or identity.
        n: Fock index for ``projector``.
    """
    return embed(layout, single_mode_operator(layout.dim(mode), kind, n), mode)


def pair_operator(layout: SpaceLayout, subsystem: str, op: np.ndarray) -> np.ndarray:
    """Embed an operator on (cavity_i, transmon_i) into the full space."""
    return embed(layout, op, layout.cavity(subsystem))


def basis_state(layout: SpaceLayout, levels) -> np.ndarray:
    """Pure-state density matrix for Fock/transmon levels in canonical mode order."""
    psi = np.zeros(layout.total, complex)
    psi[np.ravel_multi_index(tuple(levels), layout.dims)] = 1.0
    return np.outer(psi, psi.conj())


def product_state(*rhos: np.ndarray) -> np.ndarray:
    return functools.reduce(np.kron, rhos)


# -- Lindblad integration --------------------------------------------------------------

def lindblad_rhs(rho: np.ndarray, H: np.ndarray, c_ops) -> np.ndarray:
    out = -1j * (H @ rho - rho @ H)
    for c in c_ops:
        cd = c.conj().T
        cdc = cd @ c
        out += c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc)
    return out


def evolve_lindblad(rho, H, c_ops, duration: float, step: float | None = None) -> np.ndarray:
    """Fixed-step RK4 integration of the Lindblad equation.

    Args:
        rho: initial density matrix.
        H: Hamiltonian in angular units (rad/us).
        c_ops: collapse operators, rates folded in (sqrt(1/us)).
        duration: evolution time in us.
        step: RK4 step; defaults to min(0.01, duration/100).  A step longer
            than ``duration`` is clamped to a single step.

    Returns:
        The evolved density matrix.
    """
    if duration < 0:
        raise ValueError("duration must be >= 0")
    rho = np.array(rho, dtype=complex)
    if duration == 0:
        return rho
    if step is None:
        step = min(0.01, duration / 100)
    if step <= 0:
        raise ValueError("step must be > 0")
    nsteps = max(1, math.ceil(duration / step - 1e-9))
    h = duration / nsteps
    H = np.asarray(H, complex)
    c_ops = [np.asarray(c, complex) for c in c_ops]
    for _ in range(nsteps):
        k1 = lindblad_rhs(rho, H, c_ops)
        k2 = lindblad_rhs(rho + 0.5 * h * k1, H, c_ops)
        k3 = lindblad_rhs(rho + 0.5 * h * k2, H, c_ops)
        k4 = lindblad_rhs(rho + h * k3, H, c_ops)
        rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(rho)):
        raise IntegrationError("non-finite density matrix after RK4 integration")
    return rho


def liouvillian(H, c_ops) -> np.ndarray:
    """Row-major superoperator L with d vec(rho)/dt = L vec(rho)."""
    H = np.asarray(H, complex)
    d = H.shape[0]
    eye = np.eye(d)
    L = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for c in c_ops:
        c = np.asarray(c, complex)
        cdc = c.conj().T @ c
        L += np.kron(c, c.conj()) - 0.5 * (np.kron(cdc, eye) + np.kron(eye, cdc.T))
    return L


# -- beamsplitter ----------------------------------------------------------------------

def beamsplitter_unitary(layout: SpaceLayout, theta: float, phi: float = 0.0) -> np.ndarray:
    """exp(-i theta/2 (e^{i phi} a_B^dag a_A + h.c.)) on the full space.

    On span{|01>, |10>} (digits b a) this is a rotation by ``theta`` about the
    axis (cos phi, sin phi, 0) with |0_L> = |01> and |1_L> = |10>.
    """
    aB = mode_operator(layout, "cav_B", "annihilation")
    aA = mode_operator(layout, "cav_A", "annihilation")
    G = np.exp(1j * phi) * aB.conj().T @ aA
    G = G + G.conj().T
    return expm(-0.5j * theta * G)


def beamsplitter_rotation(rho: np.ndarray, layout: SpaceLayout, theta: float, phi: float = 0.0) -> np.ndarray:
    U = beamsplitter_unitary(layout, theta, phi)
    return U @ rho @ U.conj().T


# -- Gaussian transmon pulses ------------------------------------------------------------

def gaussian_envelope(t, sigma: float, chop: float = DEFAULT_CHOP, lifted: bool = True):
    """Truncated Gaussian centred on zero, optionally shifted so the edges are 0."""
    t = np.asarray(t, float)
    g = np.exp(-0.5 * (t / sigma) ** 2)
    if lifted:
        g = g - math.exp(-0.125 * chop**2)
    return np.where(np.abs(t) <= 0.5 * chop * sigma, g, 0.0)


def _two_level_step_unitaries(delta: np.ndarray, omega: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i dt H) for H = delta |e><e| + omega/2 sigma_x, vectorised over steps.

    Basis (|g>, |e>).  Writing |e><e| = (I - sigma_z)/2 gives a closed form.
    """
    a = -0.5 * delta
    b = 0.5 * omega
    w = np.sqrt(a * a + b * b)
    c = np.cos(w * dt)
    s = np.where(w > 0, np.sin(w * dt) / np.where(w > 0, w, 1.0), dt)
    phase = np.exp(-0.5j * delta * dt)
    U = np.empty(delta.shape + (2, 2), complex)
    U[..., 0, 0] = phase * (c - 1j * s * a)
    U[..., 1, 1] = phase * (c + 1j * s * a)
    U[..., 0, 1] = phase * (-1j * s * b)
    U[..., 1, 0] = phase * (-1j * s * b)
    return U


def _ordered_product(U: np.ndarray) -> np.ndarray:
    """U[-1] @ ... @ U[0] by pairwise reduction (later steps act on the left)."""
    while U.shape[0] > 1:
        if U.shape[0] % 2:
            U = np.concatenate([U, np.eye(2, dtype=complex)[None]], axis=0)
        U = U[1::2] @ U[0::2]
    return U[0]


def pulse_block(n: int, sigma: float, chi: float, detuning: float, amplitude: float = 1.0,
                chop: float = DEFAULT_CHOP, step: float = DEFAULT_PULSE_STEP,
                lifted: bool = True) -> np.ndarray:
    """Transmon 2x2 unitary of a Gaussian pulse given cavity Fock number ``n``.

    Drive frame Hamiltonian 2 pi (detuning - n chi) |e><e| + Omega(t)/2 sigma_x,
    with Omega scaled so that the resonant rotation angle is pi * amplitude.
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    duration = chop * sigma
    nsteps = max(1, math.ceil(duration / step))
    dt = duration / nsteps
    t_mid = -0.5 * duration + (np.arange(nsteps) + 0.5) * dt
    env = gaussian_envelope(t_mid, sigma, chop, lifted)
    area = env.sum() * dt
    omega = np.pi * amplitude * env / area if area > 0 else np.zeros_like(env)
    delta = np.full(nsteps, 2 * np.pi * (detuning - n * chi))
    return _ordered_product(_two_level_step_unitaries(delta, omega, dt))


def gaussian_pulse_propagate(layout: SpaceLayout, subsystem: str, sigma: float, chop: float = DEFAULT_CHOP,
                             detuning: float = 0.0, chi: float = 0.0, amplitude: float = 1.0,
                             step: float = DEFAULT_PULSE_STEP, lifted: bool = True) -> np.ndarray:
    """Unitary of a truncated-Gaussian transmon pulse on the (cavity, transmon) pair.

    Args:
        layout: space layout; sets the cavity truncation.
        subsystem: "A" or "B".
        sigma: Gaussian width in us.
        chop: total pulse length in units of sigma.
        detuning: drive detuning in MHz; ``detuning == chi`` makes Fock 1 resonant.
        chi: dispersive shift per photon in MHz.
        amplitude: 1 gives a pi rotation on resonance, 0 gives the identity.

    Returns:
        Block-diagonal unitary of size (cavity dim * 2), ordered (cavity, transmon).
    """
    dc = layout.dim(layout.cavity(subsystem))
    U = np.zeros((2 * dc, 2 * dc), complex)
    for n in range(dc):
        U[2 * n:2 * n + 2, 2 * n:2 * n + 2] = pulse_block(n, sigma, chi, detuning, amplitude, chop, step, lifted)
    return U


@functools.lru_cache(maxsize=64)
def _selectivity(sigma_s: float, sigma_us: float, chi: float, step: float, lifted: bool):
    sel = pulse_block(1, sigma_s, chi, 0.0, step=step, lifted=lifted)
    unsel = pulse_block(1, sigma_us, chi, 0.0, step=step, lifted=lifted)
    p_us = 1.0 - abs(sel[0, 0]) ** 2
    p_s = 1.0 - abs(unsel[1, 0]) ** 2
    return float(p_us), float(p_s)


def pulse_selectivity_errors(params: HardwareParams, subsystem: str, step: float = DEFAULT_PULSE_STEP,
                             lifted: bool = True) -> tuple[float, float]:
    """Unselectivity of the mapping pulse and selectivity error of the reset pulse.

    Both pulses are resonant with Fock 0 and evaluated at Fock 1:
    p_us = 1 - |<1,g|X_s|1,g>|^2 and p_s = 1 - |<1,e|X_us|1,g>|^2.

    Returns:
        (p_us, p_s) from pure unitary propagation.
    """
    sp = params.sub(subsystem)
    return _selectivity(sp.sigma_s, sp.sigma_us, abs(sp.chi_cm), step, lifted)


def effective_pulse_errors(params: HardwareParams, subsystem: str) -> tuple[float, float]:
    """(p_us, p_s) honouring fixed overrides in the parameter file."""
    sp = params.sub(subsystem)
    if sp.p_us is not None and sp.p_s is not None:
        return sp.p_us, sp.p_s
    p_us, p_s = pulse_selectivity_errors(params, subsystem)
    return (sp.p_us if sp.p_us is not None else p_us,
            sp.p_s if sp.p_s is not None else p_s)
