"""State preparation and the N-round logical measurement as branch-set transformations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .. import budget
from ..channels import Branch, BranchSet, Device, conditional_reset, evolve_branch, measure_transmon

SUBS = ("B", "A")  # application order for simultaneous operations
BASIS_LABELS = ("00", "01", "10", "11")


@dataclass(frozen=True)
class PrepMethod:
    """CheckOnly (``kind="check"``) or CheckPlusCavityChecks (``kind="cm"``)."""

    kind: str = "check"
    n_checks: int = 5
    n_reset: int = 6

    def __post_init__(self):
        if self.kind not in ("check", "cm"):
            raise ValueError("prep method kind must be 'check' or 'cm'")
        if self.n_checks < 1 or self.n_reset < 1:
            raise ValueError("repetition counts must be >= 1")


CHECK_ONLY = PrepMethod("check")
CHECK_PLUS_CAVITY = PrepMethod("cm")


@dataclass(frozen=True)
class Fault:
    """A single injected ancilla fault.

    ``location`` is "<step>:<point>" (see ``fault_locations``); ``kind`` is
    "decay", "heat" or "flip" (classification error at a readout).
    """

    location: str
    kind: str
    subsystem: str


def fault_locations(rounds: int) -> list:
    """Every (location, kind) slot of an N-round logical measurement."""
    readouts = ["pre_check"]
    for k in range(1, rounds + 1):
        readouts.append(f"round_{k}")
        if k < rounds:
            readouts.append(f"post_check_{k}")
    slots = []
    for step in readouts:
        slots.append((f"{step}:readout", "flip"))
        for point in ("mid_readout", "after_readout"):
            slots += [(f"{step}:{point}", "decay"), (f"{step}:{point}", "heat")]
        if step.startswith("round_"):
            for point in ("before_map", "mid_map", "after_reset"):
                slots += [(f"{step}:{point}", "decay"), (f"{step}:{point}", "heat")]
    return slots


def all_single_faults(rounds: int) -> list:
    return [Fault(loc, kind, s) for loc, kind in fault_locations(rounds) for s in SUBS]


class Runner:
    """Applies schedule steps to branch sets on one Device.

    Args:
        device: cached superoperators for the hardware parameters.
        faults: injected faults (used by the single-fault analysis).
    """

    def __init__(self, device: Device, faults: Iterable[Fault] = ()):
        self.device = device
        self.faults = tuple(faults)

    # fault plumbing -------------------------------------------------------------
    def _state_faults(self, location: str):
        return [f for f in self.faults if f.location == location and f.kind != "flip"]

    def _inject(self, bs: BranchSet, location: str) -> BranchSet:
        for f in self._state_faults(location):
            S = self.device.fault_superop(f.subsystem, f.kind)
            bs = bs.map_active(lambda b, S=S: [evolve_branch(b, S)])
        return bs

    def _flipped(self, step: str, s: str) -> bool:
        return any(f.location == f"{step}:readout" and f.kind == "flip" and f.subsystem == s for f in self.faults)

    # primitive steps --------------------------------------------------------------
    def evolve(self, bs: BranchSet, S: np.ndarray) -> BranchSet:
        return bs.map_active(lambda b: [evolve_branch(b, S)])

    def idle(self, bs: BranchSet, t: float, gamma_phi: float = 0.0, detuning_khz: float = 0.0) -> BranchSet:
        if t <= 0:
            return bs
        return self.evolve(bs, self.device.idle(t, gamma_phi, detuning_khz))

    def readout(self, bs: BranchSet, step: str, fail_flag: str | None = None,
                fail_on: dict | None = None) -> BranchSet:
        """Simultaneous readout of both transmons (B then A; they act on disjoint modes)."""
        for s in SUBS:
            mid = [self.device.fault_superop(f.subsystem, f.kind) for f in self._state_faults(f"{step}:mid_readout")
                   if f.subsystem == s]
            mid_S = None
            for M in mid:
                mid_S = M if mid_S is None else M @ mid_S
            target = (fail_on or {}).get(s, "E")
            bs = bs.map_active(lambda b, s=s, mid_S=mid_S, target=target: measure_transmon(
                b, self.device, s, step, flip=self._flipped(step, s), mid_fault=mid_S,
                fail_flag=fail_flag, fail_on=target))
        return self._inject(bs, f"{step}:after_readout")

    def map_cavities(self, bs: BranchSet, step: str) -> BranchSet:
        first = [self.device.map_halves(s)[0] for s in SUBS]
        second = [self.device.map_halves(s)[1] for s in SUBS]
        S1 = first[1] @ first[0]
        S2 = second[1] @ second[0]
        bs = self.evolve(self._inject(bs, f"{step}:before_map"), S1)
        bs = self._inject(bs, f"{step}:mid_map")
        return self.evolve(bs, S2)

    def reset(self, bs: BranchSet, step: str) -> BranchSet:
        def fn(b):
            for s in SUBS:
                b = conditional_reset(b, self.device, s)
            return [b]
        return self._inject(bs.map_active(fn), f"{step}:after_reset")

    # protocols -----------------------------------------------------------------------
    def initial_state(self, label: str) -> np.ndarray:
        """Cavities after reset (and OCP for |1>), transmons in |g>."""
        dev, L = self.device, self.device.layout
        pe = budget.prep_error_estimates(dev.params)
        factors = []
        for s, level in (("B", int(label[0])), ("A", int(label[1]))):
            sp = dev.params.sub(s)
            d = L.dim(L.cavity(s))
            er = pe.eps_reset[s]
            pops = np.zeros(d)
            pops[0], pops[1] = 1 - er, er
            if level == 1:
                eo = sp.eps_ocp
                pops = np.array([eo * pops[0], (1 - eo) * pops[0] + pops[1]] + [0.0] * (d - 2))
            factors += [np.diag(pops).astype(complex), np.diag([1.0, 0.0]).astype(complex)]
        rho = factors[0]
        for f in factors[1:]:
            rho = np.kron(rho, f)
        return rho

    def prepare(self, label: str, method: PrepMethod = CHECK_ONLY) -> BranchSet:
        """Preparation of a basis state "b a" with its checks; failed checks are flagged FPC."""
        if label not in BASIS_LABELS:
            raise ValueError(f"unknown basis label {label!r}")
        bs = BranchSet([Branch(1.0, self.initial_state(label))])
        bs = self.idle(bs, self.device.params.tau_ocp)
        bs = self.readout(bs, "prep_check", fail_flag="FPC")
        if method.kind == "cm":
            failing = {"B": "G" if label[0] == "1" else "E", "A": "G" if label[1] == "1" else "E"}
            for j in range(1, method.n_checks + 1):
                step = f"cavity_check_{j}"
                bs = self.map_cavities(bs, step)
                bs = self.readout(bs, step, fail_flag="FPC", fail_on=failing)
                bs = self.reset(bs, step)
        return bs

    def logical_measurement(self, bs: BranchSet, rounds: int) -> BranchSet:
        """Pre-check, then per round: map, readout, conditional reset, post-check (between rounds)."""
        if rounds < 1:
            raise ValueError("rounds must be >= 1")
        bs = self.readout(bs, "pre_check", fail_flag="FMC")
        for k in range(1, rounds + 1):
            step = f"round_{k}"
            bs = self.map_cavities(bs, step)
            bs = self.readout(bs, step)
            bs = self.reset(bs, step)
            if k < rounds:
                bs = self.readout(bs, f"post_check_{k}", fail_flag="FMC")
        return bs


def merge_active(bs: BranchSet) -> BranchSet:
    """Merge active branches sharing a record into one weighted mixture (exact for decoding)."""
    groups: dict = {}
    order = []
    rest = []
    for b in bs.branches:
        if b.flag is not None:
            rest.append(b)
            continue
        if b.record not in groups:
            groups[b.record] = []
            order.append(b.record)
        groups[b.record].append(b)
    merged = []
    for rec in order:
        bl = groups[rec]
        w = sum(b.weight for b in bl)
        rho = sum(b.weight * b.rho for b in bl) / w
        merged.append(Branch(w, rho, rec))
    return BranchSet(rest + merged, bs.pruned)
