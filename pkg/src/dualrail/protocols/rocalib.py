"""Readout calibration by repeated transmon measurements.

A transmon is prepared in |g> or |e> and read out ten times in a row.
Persistent changes are real transitions; an isolated outcome whose two
neighbours agree with each other is counted as a misassignment.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..params import HardwareParams

N_READS = 10


def _gad_pops(v: np.ndarray, t: float, T1: float, nth: float) -> np.ndarray:
    """Populations (g, e) after a GAD idle; coherences play no role for diagonal readout."""
    if t <= 0 or math.isinf(T1):
        return v
    pd = 1 - math.exp(-t / T1)
    up = pd * nth
    down = pd * (1 - nth)
    g, e = v
    return np.array([g * (1 - up) + e * down, e * (1 - down) + g * up])


def record_distribution(params: HardwareParams, subsystem: str, initial: str, n_reads: int = N_READS,
                        classification: bool = True) -> dict:
    """Exact probability of every G/E string of ``n_reads`` consecutive readouts.

    Each readout is the sandwich model on the transmon alone: half of t_M
    at the readout T1/n_th, the POVM, the other half, then t_d at ambient
    transmon parameters.  ``classification=False`` switches off the
    misassignment so only real transitions shape the records.
    """
    sp = params.sub(subsystem)
    p_gE, p_eG = (sp.p_gE, sp.p_eG) if classification else (0.0, 0.0)
    povm = {"G": np.array([1 - p_gE, p_eG]), "E": np.array([p_gE, 1 - p_eG])}
    start = np.array([1.0, 0.0]) if initial == "g" else np.array([0.0, 1.0])
    h = 0.5 * sp.t_M
    layer = {"": (1.0, start)}
    for _ in range(n_reads):
        nxt = {}
        for rec, (w, v) in layer.items():
            v = _gad_pops(v, h, sp.T1_RO, sp.nth_RO)
            for m, f in povm.items():
                u = v * f
                p = u.sum()
                if p <= 0:
                    continue
                u = _gad_pops(_gad_pops(u / p, h, sp.T1_RO, sp.nth_RO), sp.t_d, sp.tr_T1, sp.tr_nth)
                nxt[rec + m] = (w * p, u)
        layer = nxt
    return {rec: w for rec, (w, _) in layer.items()}


def sample_records(dist: dict, n: int, rng: np.random.Generator) -> dict:
    keys = sorted(dist)
    w = np.array([dist[k] for k in keys])
    counts = rng.multinomial(n, w / w.sum())
    return {k: int(c) for k, c in zip(keys, counts) if c}


def isolated_flip_rate(counts: dict, base: str) -> tuple[float, float, int]:
    """Fraction of interior positions whose neighbours both read ``base`` and which read the other outcome.

    Returns:
        (rate, binomial sigma, number of eligible positions).
    """
    other = "E" if base == "G" else "G"
    flips = eligible = 0
    for rec, c in counts.items():
        for i in range(1, len(rec) - 1):
            if rec[i - 1] == base and rec[i + 1] == base:
                eligible += c
                if rec[i] == other:
                    flips += c
    if eligible == 0:
        return 0.0, 0.0, 0
    p = flips / eligible
    return p, math.sqrt(max(p * (1 - p), 1.0 / eligible) / eligible), eligible


def persistent_decay_probability(counts: dict) -> float:
    """Per-readout probability that an |e> record switches to G for good (first step E -> G, then G's)."""
    stay = switch = 0
    for rec, c in counts.items():
        if rec[0] != "E":
            continue
        for i in range(1, len(rec) - 1):
            if rec[i - 1] == "E" and rec[i] == "E":
                stay += c
            elif rec[i - 1] == "E" and rec[i] == "G" and rec[i + 1] == "G":
                switch += c
                break
            elif rec[i - 1] == "E" and rec[i] == "G":
                break
    return switch / (stay + switch) if stay + switch else 0.0


@dataclass(frozen=True)
class ROCalibResult:
    subsystem: str
    n_records: int
    p_gE: float
    p_gE_err: float
    p_eG: float
    p_eG_err: float
    T1_RO_implied: float
    T1_RO_input: float
    p_gE_raw: float
    p_eG_raw: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _model_rates(params: HardwareParams, subsystem: str, p_gE: float, p_eG: float) -> tuple[float, float]:
    p = params.replace(**{subsystem: params.sub(subsystem).replace(p_gE=p_gE, p_eG=p_eG)})
    return (isolated_flip_rate(record_distribution(p, subsystem, "g"), "G")[0],
            isolated_flip_rate(record_distribution(p, subsystem, "e"), "E")[0])


def run_ro_calib(params: HardwareParams, subsystem: str = "A", n_records: int = 100_000, seed: int = 0,
                 exact: bool = False, iterations: int = 6) -> ROCalibResult:
    """Simulate repeated-readout records and recover p_gE, p_eG and T1_RO.

    The raw isolated-flip rate also counts real round trips (a decay and a
    re-excitation in consecutive readouts).  The estimate therefore inverts
    the record model: the separately measured readout T1 and n_th are held
    fixed and (p_gE, p_eG) are adjusted until the modelled isolated-flip
    rates equal the observed ones.

    Args:
        params: hardware numbers.
        subsystem: "A" or "B".
        n_records: records per initial state (ignored when ``exact``).
        seed: RNG seed.
        exact: use the exact record probabilities instead of sampled counts.
        iterations: fixed-point steps of the inversion.
    """
    rng = np.random.default_rng(seed)
    sp = params.sub(subsystem)
    obs, counts = {}, {}
    for init, base in (("g", "G"), ("e", "E")):
        dist = record_distribution(params, subsystem, init)
        counts[init] = {k: v * n_records for k, v in dist.items()} if exact else sample_records(dist, n_records, rng)
        obs[init] = isolated_flip_rate(counts[init], base)
    raw_ge, raw_eg = obs["g"][0], obs["e"][0]
    ge, eg = raw_ge, raw_eg
    for _ in range(iterations):
        mg, me = _model_rates(params, subsystem, ge, eg)
        ge = min(max(ge + raw_ge - mg, 0.0), 0.5)
        eg = min(max(eg + raw_eg - me, 0.0), 0.5)
    q = persistent_decay_probability(counts["e"])
    # decay per readout step: t_M at the readout T1 and t_d at the ambient T1
    ambient = sp.t_d / sp.tr_T1
    x = -math.log(1 - q) - ambient if q > 0 else 0.0
    t1 = sp.t_M / x if x > 0 else math.inf
    return ROCalibResult(subsystem, n_records, ge, obs["g"][1], eg, obs["e"][1], t1, sp.T1_RO, raw_ge, raw_eg)


def synthetic_counts(records) -> dict:
    """Counts from an explicit list of record strings (for filter checks)."""
    out: dict = {}
    for r in records:
        out[r] = out.get(r, 0) + 1
    return out


def all_records(n_reads: int = N_READS):
    return ("".join(p) for p in itertools.product("GE", repeat=n_reads))
