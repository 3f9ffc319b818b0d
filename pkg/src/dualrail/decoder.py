"""Shot decoding, SPAM metrics and the least-squares fits used by the experiments."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import curve_fit

CLASSES = ("FPC", "FMC", "FA", "00", "01", "10", "11")
LOGICAL = {"FPC": "discarded", "FMC": "erasure", "FA": "erasure", "00": "erasure", "11": "erasure",
           "01": "0L", "10": "1L"}
STRATEGIES = ("majority", "first")


class MalformedRecord(ValueError):
    """A shot record that does not match the declared schedule."""


class FitError(RuntimeError):
    """A fit could not be performed on the given data."""


@dataclass(frozen=True)
class DecodedShot:
    cls: str
    logical: str


def classify_round(b: str, a: str) -> str:
    """Physical string "b a" from the two transmon outcomes (E -> "1", G -> "0")."""
    try:
        return {"G": "0", "E": "1"}[b] + {"G": "0", "E": "1"}[a]
    except KeyError:
        raise MalformedRecord(f"outcomes must be 'G' or 'E', got {(b, a)}") from None


def _round_strings(record, rounds: int) -> list:
    by_round: dict[int, dict[str, str]] = {}
    for step, sub, value in record:
        if step.startswith("round_"):
            by_round.setdefault(int(step.split("_")[1]), {})[sub] = value
    out = []
    for k in range(1, rounds + 1):
        r = by_round.get(k)
        if r is None or set(r) != {"A", "B"}:
            raise MalformedRecord(f"round {k} missing or incomplete in record")
        out.append(classify_round(r["B"], r["A"]))
    return out


def decode_rounds(strings: Sequence[str], strategy: str = "majority") -> str:
    """Combine per-round strings: agreement for N=2, strict majority for N>=3."""
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    if not strings:
        raise MalformedRecord("no rounds to decode")
    if strategy == "first" or len(strings) == 1:
        return strings[0]
    if len(strings) == 2:
        return strings[0] if strings[0] == strings[1] else "FA"
    (best, n), = Counter(strings).most_common(1)
    return best if n > len(strings) / 2 else "FA"


def decode_shot(record, rounds: int, strategy: str = "majority", prep: str | None = None) -> DecodedShot:
    """Decode one raw record with precedence FPC > FMC > round decoding.

    Args:
        record: iterable of (step, subsystem, outcome) triples.
        rounds: number of logical-measurement rounds N.
        strategy: "majority" (agreement / strict majority) or "first".
        prep: prepared state "b a"; required when the record holds cavity checks.

    Returns:
        DecodedShot with its class and logical projection.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    record = [tuple(o) for o in record]
    for step, sub, value in record:
        if value not in ("G", "E"):
            raise MalformedRecord(f"bad outcome {value!r} at step {step}")
        if step == "prep_check" and value == "E":
            return DecodedShot("FPC", "discarded")
        if step.startswith("cavity_check"):
            if prep is None:
                raise MalformedRecord("cavity checks present but the prepared state is unknown")
            target = prep[0] if sub == "B" else prep[1]
            if (value == "E") != (target == "1"):
                return DecodedShot("FPC", "discarded")
    for step, sub, value in record:
        if (step == "pre_check" or step.startswith("post_check")) and value == "E":
            return DecodedShot("FMC", "erasure")
    cls = decode_rounds(_round_strings(record, rounds), strategy)
    return DecodedShot(cls, LOGICAL[cls])


# -- tallies and metrics ----------------------------------------------------------

@dataclass
class Tally:
    """Class counts; weights may be fractional for exact distributions."""

    counts: dict = field(default_factory=lambda: {c: 0 for c in CLASSES})

    def add(self, cls: str, weight: float = 1) -> None:
        if cls not in self.counts:
            raise ValueError(f"unknown class {cls!r}")
        self.counts[cls] += weight

    def merge(self, other: "Tally") -> "Tally":
        return Tally({c: self.counts[c] + other.counts[c] for c in CLASSES})

    @property
    def n_all(self) -> float:
        return sum(self.counts.values())


@dataclass(frozen=True)
class Fraction:
    value: float
    sigma: float

    def to_dict(self) -> dict:
        return {"value": self.value, "sigma": self.sigma}


def _frac(num: float, den: float, n_shots: float | None) -> Fraction:
    if den <= 0:
        return Fraction(math.nan, math.nan)
    p = num / den
    n = den if n_shots is None else n_shots
    return Fraction(p, math.sqrt(max(p * (1 - p), 0.0) / n) if n > 0 else math.nan)


@dataclass(frozen=True)
class Metrics:
    prep: str
    counts: dict
    n_all: float
    n_fpc: float
    n_t: float
    erasure: Fraction
    misassignment: Fraction | None = None
    leakage_01: Fraction | None = None
    leakage_10: Fraction | None = None
    leakage_total: Fraction | None = None

    def to_dict(self) -> dict:
        out = {"prep": self.prep, "counts": dict(self.counts), "N_All": self.n_all, "N_FPC": self.n_fpc,
               "N_T": self.n_t, "erasure": self.erasure.to_dict()}
        for k in ("misassignment", "leakage_01", "leakage_10", "leakage_total"):
            v = getattr(self, k)
            if v is not None:
                out[k] = v.to_dict()
        return out


def tally(decoded: Iterable, prep: str) -> Metrics:
    """Count decoded shots (DecodedShot or class strings) and compute metrics."""
    t = Tally()
    for d in decoded:
        t.add(d.cls if isinstance(d, DecodedShot) else d)
    return metrics_from_counts(t.counts, prep)


def metrics_from_counts(counts: Mapping[str, float], prep: str, n_shots: float | None = None) -> Metrics:
    """SPAM metrics from class counts.

    Args:
        counts: class -> count (or probability for an exact distribution).
        prep: prepared state "b a".
        n_shots: nominal number of post-selected shots for the standard
            errors when ``counts`` are probabilities.
    """
    c = {k: float(counts.get(k, 0)) for k in CLASSES}
    n_all = sum(c.values())
    n_t = n_all - c["FPC"]
    erasure = _frac(c["FMC"] + c["00"] + c["11"] + c["FA"], n_t, n_shots)
    mis = l01 = l10 = lt = None
    logical = c["01"] + c["10"]
    scale = None if n_shots is None or n_t <= 0 else n_shots * logical / n_t
    if prep == "01":
        mis = _frac(c["10"], logical, scale)
    elif prep == "10":
        mis = _frac(c["01"], logical, scale)
    elif prep == "00":
        l01 = _frac(c["01"], n_t, n_shots)
        l10 = _frac(c["10"], n_t, n_shots)
        lt = _frac(c["01"] + c["10"], n_t, n_shots)
    return Metrics(prep, c, n_all, c["FPC"], n_t, erasure, mis, l01, l10, lt)


# -- fits -------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearFit:
    slope: float
    slope_err: float
    intercept: float
    intercept_err: float


def fit_linear(x, y, yerr=None) -> LinearFit:
    """Weighted least-squares line y = slope * x + intercept.

    With ``yerr`` the uncertainties are taken as absolute; without it (or if
    all errors are zero) the residual scatter sets the parameter errors.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < 2:
        raise FitError("need at least two points for a line")
    A = np.column_stack([x, np.ones_like(x)])
    weighted = yerr is not None and np.all(np.asarray(yerr, float) > 0)
    w = 1.0 / np.asarray(yerr, float) if weighted else np.ones_like(x)
    Aw, yw = A * w[:, None], y * w
    coef, *_ = np.linalg.lstsq(Aw, yw, rcond=None)
    cov = np.linalg.pinv(Aw.T @ Aw)
    if not weighted:
        dof = x.size - 2
        resid = yw - Aw @ coef
        cov = cov * (resid @ resid / dof if dof > 0 else 0.0)
    return LinearFit(float(coef[0]), float(math.sqrt(max(cov[0, 0], 0))),
                     float(coef[1]), float(math.sqrt(max(cov[1, 1], 0))))


def fit_sinusoid(phases, z) -> tuple[float, float, float]:
    """Least squares z = a cos(phi) + b sin(phi) + c; returns (amplitude, phase, offset)."""
    phases, z = np.asarray(phases, float), np.asarray(z, float)
    if phases.size < 3:
        raise FitError("need at least three phases")
    A = np.column_stack([np.cos(phases), np.sin(phases), np.ones_like(phases)])
    (a, b, c), *_ = np.linalg.lstsq(A, z, rcond=None)
    return float(math.hypot(a, b)), float(math.atan2(b, a)), float(c)


def fit_ramsey_contrast(phases, z_by_delay) -> np.ndarray:
    """Contrast (sinusoid amplitude) for each row of phase-swept <Z_L> data."""
    return np.array([fit_sinusoid(phases, row)[0] for row in np.atleast_2d(z_by_delay)])


@dataclass(frozen=True)
class DephasingFit:
    gamma_phi: float
    gamma_phi_err: float
    p_phi_per_us: float
    line: LinearFit


def dephasing_from_contrast(delays, contrast, contrast_err=None) -> DephasingFit:
    """Gamma_phi = -slope / intercept of contrast(t) ~ C0 (1 - Gamma_phi t); p_phi = Gamma_phi t / 2."""
    line = fit_linear(delays, contrast, contrast_err)
    if line.intercept == 0:
        raise FitError("zero contrast intercept")
    g = -line.slope / line.intercept
    gerr = abs(g) * math.hypot(line.slope_err / line.slope if line.slope else 0.0,
                               line.intercept_err / line.intercept)
    return DephasingFit(g, gerr, g / 2, line)


def _refine_period(t, z, guess: float) -> float:
    """Scan periods in [guess/2, 2 guess]; each trial is a linear fit of cos, sin and offset."""
    best, best_res = guess, math.inf
    for P in guess * np.geomspace(0.5, 2.0, 401):
        w = 2 * np.pi * t / P
        A = np.column_stack([np.cos(w), np.sin(w), np.ones_like(t)])
        coef, *_ = np.linalg.lstsq(A, z, rcond=None)
        res = float(np.sum((A @ coef - z) ** 2))
        if res < best_res:
            best, best_res = P, res
    return best


def fit_oscillation(t, z, period_guess: float) -> dict:
    """Fit z = A exp(-k t) cos(2 pi t / P + phi) + c with k >= 0.

    The period guess is first refined by a linear scan, which keeps the
    non-linear fit out of the local minima of the cosine.

    Returns:
        Dict with amplitude, tau (= 1/k), period, period_err, phase and offset.
    """
    t, z = np.asarray(t, float), np.asarray(z, float)

    def model(t, A, k, P, phi, c):
        return A * np.exp(-k * t) * np.cos(2 * np.pi * t / P + phi) + c

    P0 = _refine_period(t, z, period_guess)
    w = 2 * np.pi * t / P0
    (a, b, c), *_ = np.linalg.lstsq(np.column_stack([np.cos(w), np.sin(w), np.ones_like(t)]), z, rcond=None)
    p0 = [max(math.hypot(a, b), 1e-6), 1e-6, P0, math.atan2(-b, a), float(c)]
    lo = [0.0, 0.0, 0.5 * P0, -np.inf, -np.inf]
    hi = [np.inf, np.inf, 2.0 * P0, np.inf, np.inf]
    try:
        popt, pcov = curve_fit(model, t, z, p0=p0, bounds=(lo, hi), maxfev=20000, xtol=1e-14, ftol=1e-14)
    except RuntimeError as exc:
        raise FitError(str(exc)) from exc
    err = np.sqrt(np.clip(np.diag(pcov), 0, None))
    tau = 1.0 / popt[1] if popt[1] > 0 else math.inf
    return {"amplitude": popt[0], "tau": tau, "period": popt[2], "period_err": err[2],
            "phase": popt[3], "offset": popt[4]}


@dataclass(frozen=True)
class RBFit:
    A: float
    p: float
    B: float
    p_err: float

    @property
    def epc(self) -> float:
        return (1 - self.p) / 2


def fit_rb(depths, survival) -> RBFit:
    """Fit survival = A p^m + B; the error per Clifford is (1 - p)/2.

    A and B are bounded to [0, 1] since both are probabilities for a
    survival curve decaying from near 1 to the mixed-state value.
    """
    m, y = np.asarray(depths, float), np.asarray(survival, float)
    if np.ptp(y) < 1e-12:
        if np.allclose(y, 1.0):
            return RBFit(0.5, 1.0, 0.5, 0.0)
        raise FitError("flat RB data cannot constrain the decay")
    p0 = [float(y[0] - 0.5), 0.99, 0.5]
    try:
        popt, pcov = curve_fit(lambda m, A, p, B: A * p**m + B, m, y, p0=p0,
                               bounds=([0, 0, 0], [1, 1, 1]), maxfev=20000)
    except RuntimeError as exc:
        raise FitError(str(exc)) from exc
    return RBFit(popt[0], popt[1], popt[2], float(np.sqrt(max(pcov[1, 1], 0))))


# -- shot-record files ---------------------------------------------------------------

def write_shot_csv(path, records: Sequence) -> None:
    """One row per raw outcome: shot_id, step_label, subsystem, outcome."""
    with open(path, "w", newline="") as fh:
        fh.write("# shot_id: shot index; step_label: schedule step; subsystem: A or B; outcome: G or E\n")
        w = csv.writer(fh)
        w.writerow(["shot_id", "step_label", "subsystem", "outcome"])
        for i, rec in enumerate(records):
            for step, sub, value in rec:
                w.writerow([i, step, sub, value])


def read_shot_csv(path) -> list:
    shots: dict[int, list] = {}
    with open(path, newline="") as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        for row in rows:
            shots.setdefault(int(row["shot_id"]), []).append((row["step_label"], row["subsystem"], row["outcome"]))
    return [shots[k] for k in sorted(shots)]


def write_decoded_csv(path, decoded: Sequence[DecodedShot]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# shot_id: shot index; class: FPC/FMC/FA/00/01/10/11; logical: 0L/1L/erasure/discarded\n")
        w = csv.writer(fh)
        w.writerow(["shot_id", "class", "logical"])
        for i, d in enumerate(decoded):
            w.writerow([i, d.cls, d.logical])
