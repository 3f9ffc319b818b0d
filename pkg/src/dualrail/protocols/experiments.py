"""Experiment drivers producing exact outcome distributions.

Every driver enumerates the branch tree exactly; ``sampling.sample_shots``
turns a distribution into Monte-Carlo counts when shot noise is wanted.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np

from .. import hilbert
from ..channels import BranchSet, Device, superop_from_kraus
from ..decoder import CLASSES, Metrics, decode_shot, dephasing_from_contrast, fit_oscillation, fit_ramsey_contrast, \
    metrics_from_counts
from ..params import HardwareParams
from .schedule import BASIS_LABELS, CHECK_ONLY, CHECK_PLUS_CAVITY, Fault, PrepMethod, Runner, all_single_faults, \
    merge_active

KINDS = ("spam", "bitflip", "nth", "ramsey", "echo", "rb", "rocalib")


@dataclass(frozen=True)
class ExperimentPlan:
    """What to run; the CLI builds one of these from its flags."""

    kind: str
    preps: tuple = BASIS_LABELS
    delays: tuple = (0.0,)
    rounds: int = 1
    detuning_khz: float = 0.0
    phases: tuple = ()
    rb_depths: tuple = (0, 50, 100, 200, 400, 600, 800, 1000, 1250, 1500)
    rb_seeds: int = 5
    shots: int | None = None
    seed: int = 0
    strategy: str = "majority"
    prep_method: PrepMethod = CHECK_ONLY

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if any(d < 0 for d in self.delays):
            raise ValueError("delays must be >= 0")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1")


@dataclass
class OutcomeDistribution:
    """Exact decoded-class probabilities for one experiment point.

    ``leaves`` keeps (record, class, weight) so shots can be sampled and
    written as raw records.
    """

    probs: dict
    pruned: float = 0.0
    meta: dict = field(default_factory=dict)
    leaves: list = field(default_factory=list)

    def total(self) -> float:
        return sum(self.probs.values()) + self.pruned

    def metrics(self, prep: str | None = None, n_shots: float | None = None) -> Metrics:
        return metrics_from_counts(self.probs, prep or self.meta.get("prep"), n_shots)

    def z_logical(self) -> float:
        """<Z_L> = (P("10") - P("01")) / (P("10") + P("01")), Z_L = +1 for |10>."""
        p1, p0 = self.probs["10"], self.probs["01"]
        return (p1 - p0) / (p1 + p0) if p1 + p0 > 0 else math.nan

    def to_dict(self) -> dict:
        return {"probs": dict(self.probs), "pruned": self.pruned, "meta": dict(self.meta)}


def distribution_from_leaves(bs: BranchSet, rounds: int, prep: str | None, strategy: str = "majority",
                             meta: dict | None = None) -> OutcomeDistribution:
    probs = {c: 0.0 for c in CLASSES}
    leaves = []
    for b in bs.branches:
        cls = decode_shot(b.record, rounds, strategy, prep=prep).cls
        probs[cls] += b.weight
        leaves.append((b.record, cls, b.weight))
    return OutcomeDistribution(probs, bs.pruned, dict(meta or {}, prep=prep, rounds=rounds), leaves)


def _map(fn, items: Sequence, workers: int = 1) -> list:
    """Order-preserving map, optionally over a process pool."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- SPAM, bit flip, n_th -----------------------------------------------------------------

def measure_point(device: Device, prep: str, rounds: int, delay: float = 0.0,
                  prep_method: PrepMethod = CHECK_ONLY, strategy: str = "majority",
                  faults: Sequence[Fault] = (), prepared: BranchSet | None = None) -> OutcomeDistribution:
    """Prepare ``prep``, idle for ``delay`` and run the N-round logical measurement."""
    runner = Runner(device, faults)
    bs = prepared if prepared is not None else merge_active(runner.prepare(prep, prep_method))
    bs = runner.idle(bs, delay)
    bs = runner.logical_measurement(bs, rounds)
    return distribution_from_leaves(bs, rounds, prep, strategy, {"delay_us": delay})


def run_spam(params: HardwareParams, rounds: int = 1, prep_method: PrepMethod = CHECK_ONLY,
             strategy: str = "majority", preps: Sequence[str] = BASIS_LABELS, device: Device | None = None) -> dict:
    """SPAM distributions for each prepared basis state."""
    device = device or Device(params)
    return {p: measure_point(device, p, rounds, 0.0, prep_method, strategy) for p in preps}


def spam_summary(dists: dict) -> dict:
    """The three headline metrics averaged over the relevant preparations."""
    logical = [dists[p].metrics() for p in ("01", "10") if p in dists]
    out = {}
    if logical:
        out["misassignment"] = float(np.mean([m.misassignment.value for m in logical]))
        out["erasure_fraction"] = float(np.mean([m.erasure.value for m in logical]))
    if "00" in dists:
        m = dists["00"].metrics()
        out["leakage_detection_00"] = m.leakage_total.value
        out["leakage_01_given_00"] = m.leakage_01.value
        out["leakage_10_given_00"] = m.leakage_10.value
    return out


def _delay_point(delay, params, prep, rounds, prep_method, strategy):
    return measure_point(Device(params), prep, rounds, delay, prep_method, strategy)


def run_delay_sweep(params: HardwareParams, prep: str, delays: Sequence[float], rounds: int = 1,
                    prep_method: PrepMethod = CHECK_PLUS_CAVITY, strategy: str = "majority",
                    workers: int = 1) -> list:
    """Prepare, idle (ambient GAD on all modes) for each delay, measure."""
    if workers > 1:
        fn = partial(_delay_point, params=params, prep=prep, rounds=rounds, prep_method=prep_method,
                     strategy=strategy)
        return _map(fn, list(delays), workers)
    device = Device(params)
    prepared = merge_active(Runner(device).prepare(prep, prep_method))
    return [measure_point(device, prep, rounds, d, prep_method, strategy, prepared=prepared) for d in delays]


def run_bitflip(params: HardwareParams, prep: str, delays: Sequence[float], rounds: int = 1,
                prep_method: PrepMethod = CHECK_PLUS_CAVITY, strategy: str = "majority", workers: int = 1) -> list:
    """Bit-flip experiment: prep a logical state, idle, measure."""
    return run_delay_sweep(params, prep, delays, rounds, prep_method, strategy, workers)


def apparent_flip(dist: OutcomeDistribution) -> float:
    """Probability of the opposite logical outcome among logical outcomes."""
    prep = dist.meta["prep"]
    flip = {"01": "10", "10": "01"}[prep]
    return dist.probs[flip] / (dist.probs["01"] + dist.probs["10"])


def run_nth(params: HardwareParams, delays: Sequence[float], rounds: int = 2,
            prep_method: PrepMethod = CHECK_ONLY, workers: int = 1) -> list:
    """Heating bound experiment: prep |00>, idle, 2-round measurement requiring agreement."""
    return run_delay_sweep(params, "00", delays, rounds, prep_method, "majority", workers)


# -- Ramsey and echo ----------------------------------------------------------------------

def gate_superop(device: Device, theta: float, phi: float = 0.0) -> np.ndarray:
    """Ideal beamsplitter rotation on the cavity pair as a superoperator."""
    U = hilbert.beamsplitter_unitary(device.layout, theta, phi)
    return superop_from_kraus([U])


@dataclass
class RamseyResult:
    delays: np.ndarray
    phases: np.ndarray
    z: np.ndarray  # shape (len(delays), len(phases))
    erasure: np.ndarray
    echo: bool
    gamma_phi: float
    detuning_khz: float

    def contrast(self) -> np.ndarray:
        return fit_ramsey_contrast(self.phases, self.z)

    def to_dict(self) -> dict:
        return {"delays_us": self.delays.tolist(), "phases_rad": self.phases.tolist(), "z": self.z.tolist(),
                "erasure": self.erasure.tolist(), "echo": self.echo, "gamma_phi": self.gamma_phi,
                "detuning_khz": self.detuning_khz}


def ramsey_point(device: Device, prepared: BranchSet, delay: float, phase: float, gamma_phi: float,
                 detuning_khz: float, echo: bool = False, rounds: int = 1) -> OutcomeDistribution:
    """pi/2, idle (optionally split by a pi pulse), pi/2 with ``phase``, logical measurement."""
    runner = Runner(device)
    bs = runner.evolve(prepared, gate_superop(device, math.pi / 2, 0.0))
    if echo:
        bs = runner.idle(bs, delay / 2, gamma_phi, detuning_khz)
        bs = runner.evolve(bs, gate_superop(device, math.pi, 0.0))
        bs = runner.idle(bs, delay / 2, gamma_phi, detuning_khz)
    else:
        bs = runner.idle(bs, delay, gamma_phi, detuning_khz)
    bs = runner.evolve(bs, gate_superop(device, math.pi / 2, phase))
    bs = runner.logical_measurement(bs, rounds)
    return distribution_from_leaves(bs, rounds, "01", meta={"delay_us": delay, "phase_rad": phase})


def run_ramsey(params: HardwareParams, delays: Sequence[float], phases: Sequence[float] = (0.0,),
               detuning_khz: float = 0.0, echo: bool = False, gamma_phi: float | None = None,
               rounds: int = 1, prep_method: PrepMethod = CHECK_PLUS_CAVITY) -> RamseyResult:
    """Ramsey (or echo) on the dual-rail qubit starting from |01>.

    Args:
        params: hardware numbers; the dual-rail dephasing rate defaults to the
            Ramsey or echo value stored there.
        delays: idle times in us.
        phases: phases of the second pi/2 pulse in rad.
        detuning_khz: beamsplitter detuning.
        echo: insert a pi pulse halfway through the idle.
        gamma_phi: override for the dual-rail dephasing rate in 1/us.

    Returns:
        RamseyResult with <Z_L> and the erasure fraction per (delay, phase).
    """
    if gamma_phi is None:
        gamma_phi = params.gamma_phi_echo if echo else params.gamma_phi_ramsey
    device = Device(params)
    prepared = merge_active(Runner(device).prepare("01", prep_method))
    z = np.zeros((len(delays), len(phases)))
    er = np.zeros_like(z)
    for i, t in enumerate(delays):
        for j, ph in enumerate(phases):
            d = ramsey_point(device, prepared, t, ph, gamma_phi, detuning_khz, echo, rounds)
            z[i, j] = d.z_logical()
            er[i, j] = d.metrics("01").erasure.value
    return RamseyResult(np.asarray(delays, float), np.asarray(phases, float), z, er, echo, gamma_phi, detuning_khz)


def ramsey_dephasing(result: RamseyResult):
    """Phase-sweep contrast per delay, then the linear fit giving Gamma_phi and p_phi."""
    return dephasing_from_contrast(result.delays, result.contrast())


def ramsey_period(result: RamseyResult) -> dict:
    """Fit the single-phase <Z_L>(t) trace with a damped cosine."""
    z = result.z[:, 0]
    guess = 1e3 / result.detuning_khz if result.detuning_khz else float(np.ptp(result.delays))
    return fit_oscillation(result.delays, z, guess)


# -- single-fault analysis ----------------------------------------------------------------

@dataclass(frozen=True)
class FaultOutcome:
    fault: Fault
    prep: str
    wrong: float
    correct: float
    erasure: float


def single_fault_scan(params: HardwareParams, rounds: int = 2, preps: Sequence[str] = ("01", "10"),
                      prep_method: PrepMethod = CHECK_ONLY) -> list:
    """Inject each single ancilla fault and record the wrong-logical probability."""
    device = Device(params)
    out = []
    for prep in preps:
        prepared = merge_active(Runner(device).prepare(prep, prep_method))
        wrong_cls = {"01": "10", "10": "01"}[prep]
        for f in all_single_faults(rounds):
            d = measure_point(device, prep, rounds, 0.0, prep_method, faults=(f,), prepared=prepared)
            erasure = sum(d.probs[c] for c in ("FMC", "FA", "00", "11"))
            out.append(FaultOutcome(f, prep, d.probs[wrong_cls], d.probs[prep], erasure))
    return out
