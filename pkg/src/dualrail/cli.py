"""Command-line entry point: ``dualrail <experiment> [flags]``.

Every run writes plot-ready CSV files (columns documented in ``#`` header
lines), a ``summary.json`` and a ``manifest.json`` into ``--out``.
Exit codes: 0 success, 2 invalid configuration or failed validation,
1 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, budget
from .decoder import CLASSES, fit_linear, metrics_from_counts
from .params import ConfigError, HardwareParams, load_params, shipped_path
from .protocols import experiments as ex
from .protocols.rb import run_rb
from .protocols.rocalib import run_ro_calib
from .protocols.sampling import sample_shots
from .protocols.schedule import BASIS_LABELS, CHECK_ONLY, CHECK_PLUS_CAVITY

log = logging.getLogger("dualrail")

COMMANDS = ("spam", "bitflip", "nth", "ramsey", "echo", "rb", "rocalib", "budget", "intrinsic", "validate")


class _Output:
    """Tracks the files of one run so a failed run can remove them again."""

    def __init__(self, out_dir: Path):
        self.dir = out_dir
        self.files: list[Path] = []
        self.timings: dict = {}
        self.pruned: list = []

    def path(self, name: str) -> Path:
        p = self.dir / name
        self.files.append(p)
        return p

    def write_csv(self, name: str, columns: list, rows: list, doc: dict) -> None:
        with open(self.path(name), "w", newline="") as fh:
            for col in columns:
                fh.write(f"# {col}: {doc[col]}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_cell(v) for v in r])

    def write_json(self, name: str, data) -> None:
        with open(self.path(name), "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")

    def write_text(self, name: str, text: str) -> None:
        with open(self.path(name), "w") as fh:
            fh.write(text.rstrip("\n") + "\n")

    def cleanup(self) -> None:
        for p in self.files:
            if p.exists():
                p.unlink()


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")


def parse_delays(text: str) -> np.ndarray:
    """``start:stop:n`` in us (inclusive, n points) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, n = text.split(":")
            return np.linspace(float(start), float(stop), int(n))
        return np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad delay spec {text!r}; use start:stop:n") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="hardware parameter JSON (default: shipped params_paper.json)")
    common.add_argument("--out", default="dualrail_out", help="output directory")
    common.add_argument("--rounds", type=int, help="logical measurement rounds")
    common.add_argument("--delays", type=parse_delays, help="delays in us as start:stop:n")
    common.add_argument("--detuning-khz", type=float, default=None, help="beamsplitter detuning in kHz")
    common.add_argument("--phases", type=int, default=None, help="number of phases for the phase sweep")
    common.add_argument("--shots", type=int, default=None, help="sample this many shots per point")
    common.add_argument("--exact", action="store_true", help="report exact probabilities (default)")
    common.add_argument("--seed", type=int, default=0, help="RNG seed")
    common.add_argument("--workers", type=int, default=1, help="worker processes for delay sweeps")
    common.add_argument("--prep", default=None, help="prepared state, e.g. 01 or 10")
    common.add_argument("--prep-method", choices=("check", "cm"), default=None,
                        help="check only, or check plus cavity checks")
    common.add_argument("--strategy", choices=("majority", "first"), default="majority")
    parser = argparse.ArgumentParser(prog="dualrail", description="Dual-rail erasure qubit simulator.")
    parser.add_argument("--version", action="version", version=f"dualrail {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "spam": "SPAM experiment over the four basis states",
        "bitflip": "logical bit-flip versus idle delay",
        "nth": "heating bound: prep |00>, delay, 2-round measurement",
        "ramsey": "Ramsey on the dual-rail qubit",
        "echo": "echo on the dual-rail qubit",
        "rb": "randomized benchmarking",
        "rocalib": "readout calibration from repeated measurements",
        "budget": "analytic error budgets and SPAM matrix",
        "intrinsic": "intrinsic bit-flip lifetimes",
        "validate": "run the acceptance scorecard",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "rb":
            p.add_argument("--depolarizing", type=float, default=None,
                           help="inject logical depolarizing with this error per Clifford")
            p.add_argument("--rb-seeds", type=int, default=5)
        if name == "rocalib":
            p.add_argument("--subsystem", choices=("A", "B"), default="A")
    return parser


def _config_hash(params: HardwareParams, args: argparse.Namespace) -> str:
    plan = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in sorted(vars(args).items())
            if k not in ("out", "workers")}
    blob = json.dumps({"params": params.to_json_dict(), "plan": plan}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _prep_method(args, default):
    if args.prep_method is None:
        return default
    return CHECK_PLUS_CAVITY if args.prep_method == "cm" else CHECK_ONLY


# -- commands ------------------------------------------------------------------------------

_CLASS_DOC = {c: f"probability (or sampled fraction) of decoded class {c}" for c in CLASSES}


def _dist_row(d: ex.OutcomeDistribution, args, index: int) -> dict:
    if args.shots:
        counts = sample_shots(d, args.shots, seed=args.seed + index)
        probs = {c: counts[c] / args.shots for c in CLASSES}
        metrics = metrics_from_counts(counts, d.meta["prep"])
    else:
        probs = dict(d.probs)
        metrics = metrics_from_counts(d.probs, d.meta["prep"], math.inf)
    return {"probs": probs, "metrics": metrics}


def cmd_spam(params, args, out: _Output) -> dict:
    rounds = args.rounds or 1
    t0 = time.perf_counter()
    dists = ex.run_spam(params, rounds, _prep_method(args, CHECK_ONLY), args.strategy)
    out.timings["spam"] = time.perf_counter() - t0
    cols = ["prep", *CLASSES, "erasure", "erasure_err", "misassignment", "misassignment_err",
            "leakage_total", "leakage_total_err"]
    doc = {"prep": "prepared basis state (digits Bob, Alice)", **_CLASS_DOC,
           "erasure": "erasure fraction (FMC+FA+00+11)/N_T", "erasure_err": "binomial standard error",
           "misassignment": "logical misassignment (logical preps only)", "misassignment_err": "binomial standard error",
           "leakage_total": "leakage detection error (prep 00 only)", "leakage_total_err": "binomial standard error"}
    rows, per = [], {}
    for i, (prep, d) in enumerate(dists.items()):
        r = _dist_row(d, args, i)
        m = r["metrics"]
        mis_v = (m.misassignment.value, m.misassignment.sigma) if m.misassignment else ("", "")
        leak_v = (m.leakage_total.value, m.leakage_total.sigma) if m.leakage_total else ("", "")
        rows.append([prep, *[r["probs"][c] for c in CLASSES], m.erasure.value, m.erasure.sigma, *mis_v, *leak_v])
        per[prep] = {"probs": r["probs"], "metrics": m.to_dict()}
        out.pruned.append(d.pruned)
    out.write_csv("spam.csv", cols, rows, doc)
    summary = ex.spam_summary(dists)
    return {"rounds": rounds, "headline": summary, "per_prep": per}


def _sweep_csv(out: _Output, name: str, dists: list, args, x_name="delay_us") -> list:
    cols = [x_name, *CLASSES, "flip", "erasure", "erasure_err"]
    doc = {x_name: "idle delay in us", **_CLASS_DOC,
           "flip": "opposite-logical fraction among logical outcomes (blank for non-logical preps)",
           "erasure": "erasure fraction", "erasure_err": "binomial standard error"}
    rows = []
    for i, d in enumerate(dists):
        r = _dist_row(d, args, i)
        p = r["probs"]
        flip = ""
        if d.meta["prep"] in ("01", "10") and p["01"] + p["10"] > 0:
            other = "10" if d.meta["prep"] == "01" else "01"
            flip = p[other] / (p["01"] + p["10"])
        rows.append([d.meta["delay_us"], *[p[c] for c in CLASSES], flip, r["metrics"].erasure.value,
                     r["metrics"].erasure.sigma])
        out.pruned.append(d.pruned)
    out.write_csv(name, cols, rows, doc)
    return rows


def cmd_bitflip(params, args, out: _Output) -> dict:
    delays = args.delays if args.delays is not None else np.linspace(0, 20, 11)
    preps = [args.prep] if args.prep else ["01", "10"]
    summary = {}
    for prep in preps:
        t0 = time.perf_counter()
        dists = ex.run_bitflip(params, prep, delays, args.rounds or 1, _prep_method(args, CHECK_PLUS_CAVITY),
                               args.strategy, args.workers)
        out.timings[f"bitflip_{prep}"] = time.perf_counter() - t0
        rows = _sweep_csv(out, f"bitflip_{prep}.csv", dists, args)
        flips = np.array([r[len(CLASSES) + 1] for r in rows], float)
        fit = fit_linear(delays, flips) if len(delays) >= 2 else None
        summary[prep] = {"flip": flips.tolist(), "slope_per_us": fit.slope if fit else None,
                         "slope_err": fit.slope_err if fit else None}
    return {"delays_us": list(map(float, delays)), "per_prep": summary}


def cmd_nth(params, args, out: _Output) -> dict:
    delays = args.delays if args.delays is not None else np.array([0.0, 1e3, 2e3, 5e3, 1e4, 2e4])
    t0 = time.perf_counter()
    dists = ex.run_nth(params, delays, args.rounds or 2, _prep_method(args, CHECK_ONLY), args.workers)
    out.timings["nth"] = time.perf_counter() - t0
    _sweep_csv(out, "nth.csv", dists, args)
    last = dists[-1].probs
    return {"delays_us": list(map(float, delays)), "P01_longest": last["01"], "P10_longest": last["10"],
            "bound": 4e-4, "below_bound": bool(last["01"] < 4e-4 and last["10"] < 4e-4)}


def cmd_ramsey(params, args, out: _Output, echo: bool = False) -> dict:
    detuning = 0.0 if args.detuning_khz is None else args.detuning_khz
    n_ph = args.phases if args.phases is not None else (8 if detuning == 0 else 1)
    phases = np.linspace(0, 2 * np.pi, n_ph, endpoint=False) if n_ph > 1 else np.array([0.0])
    delays = args.delays if args.delays is not None else (
        np.linspace(0, 20, 6) if n_ph > 1 else np.linspace(0, 400, 41))
    t0 = time.perf_counter()
    res = ex.run_ramsey(params, delays, phases, detuning, echo, rounds=args.rounds or 1,
                        prep_method=_prep_method(args, CHECK_PLUS_CAVITY))
    name = "echo" if echo else "ramsey"
    out.timings[name] = time.perf_counter() - t0
    cols = ["delay_us", "phase_rad", "z_logical", "erasure"]
    doc = {"delay_us": "idle delay in us", "phase_rad": "phase of the second pi/2 pulse",
           "z_logical": "<Z_L> = (P10 - P01)/(P10 + P01), +1 for |10>", "erasure": "erasure fraction"}
    rows = [[t, ph, res.z[i, j], res.erasure[i, j]] for i, t in enumerate(res.delays)
            for j, ph in enumerate(res.phases)]
    out.write_csv(f"{name}.csv", cols, rows, doc)
    summary = {"gamma_phi_input": res.gamma_phi, "detuning_khz": detuning}
    if n_ph >= 3:
        fit = ex.ramsey_dephasing(res)
        summary.update(contrast=res.contrast().tolist(), gamma_phi_fit=fit.gamma_phi, gamma_phi_err=fit.gamma_phi_err,
                       p_phi_per_us=fit.p_phi_per_us)
    elif detuning:
        osc = ex.ramsey_period(res)
        summary.update(period_us=osc["period"], period_err=osc["period_err"])
    return summary


def cmd_rb(params, args, out: _Output) -> dict:
    t0 = time.perf_counter()
    dep = None if args.depolarizing is None else 2 * args.depolarizing
    res = run_rb(params, seeds=args.rb_seeds, seed=args.seed, depolarizing=dep,
                 physical_noise=dep is None, prep_method=_prep_method(args, CHECK_ONLY))
    out.timings["rb"] = time.perf_counter() - t0
    cols = ["depth", "survival_mean", "survival_std"]
    doc = {"depth": "number of random Cliffords before the recovery gate",
           "survival_mean": "mean post-selected survival over seeds", "survival_std": "standard deviation over seeds"}
    rows = [[int(m), res.survival[:, i].mean(), res.survival[:, i].std()] for i, m in enumerate(res.depths)]
    out.write_csv("rb.csv", cols, rows, doc)
    return res.to_dict()


def cmd_rocalib(params, args, out: _Output) -> dict:
    n = args.shots or 100_000
    res = run_ro_calib(params, args.subsystem, n, args.seed, exact=args.exact)
    sp = params.sub(args.subsystem)
    cols = ["quantity", "estimate", "sigma", "input"]
    doc = {"quantity": "calibrated quantity", "estimate": "recovered value", "sigma": "binomial standard error",
           "input": "value used to generate the records"}
    rows = [["p_gE", res.p_gE, res.p_gE_err, sp.p_gE], ["p_eG", res.p_eG, res.p_eG_err, sp.p_eG],
            ["T1_RO_us", res.T1_RO_implied, "", sp.T1_RO]]
    out.write_csv(f"rocalib_{args.subsystem}.csv", cols, rows, doc)
    return res.to_dict()


def cmd_budget(params, args, out: _Output) -> dict:
    method = args.prep_method or "check"
    texts, tables = [], {}
    for s in ("A", "B"):
        for target in budget.TARGETS:
            t = budget.single_mode_budget(params, s, target, include_prep=True, prep_method=method)
            texts.append(t.to_text())
            tables[f"{s}_{target}"] = t.to_dict()
    M = budget.spam_matrix(params, prep_method=method)
    pe = budget.prep_error_estimates(params)
    texts.append(M.to_text())
    out.write_text("budget.txt", "\n\n".join(texts))
    cols = ["out", *budget.STATES]
    doc = {"out": "assigned outcome", **{k: f"p(out | prepared {k})" for k in budget.STATES}}
    out.write_csv("spam_matrix.csv", cols, [[o, *[M.p(o, k) for k in budget.STATES]] for o in budget.STATES], doc)
    print("\n\n".join(texts))
    return {"tables": tables, "spam_matrix": M.to_dict(), "prep_errors": pe.to_dict(),
            "column_residual": M.column_residual()}


def cmd_intrinsic(params, args, out: _Output) -> dict:
    res = budget.intrinsic_lifetimes(params)
    swapped = budget.intrinsic_lifetimes(params, swap=True)
    text = budget.lifetimes_text(res) + "\n\nswapped cavity roles\n" + budget.lifetimes_text(swapped)
    out.write_text("intrinsic.txt", text)
    print(text)
    t = np.linspace(0, 1e4, 101)
    cols = ["t_us", "flip_0L", "flip_1L", "flip_0L_intrinsic_only", "flip_1L_intrinsic_only"]
    doc = {"t_us": "idle time in us", "flip_0L": "analytic apparent flip probability, prep 0L",
           "flip_1L": "analytic apparent flip probability, prep 1L",
           "flip_0L_intrinsic_only": "same with ideal assignment", "flip_1L_intrinsic_only": "same with ideal assignment"}
    cols_data = [budget.apparent_bitflip(t, params, "0L"), budget.apparent_bitflip(t, params, "1L"),
                 budget.apparent_bitflip(t, params, "0L", "intrinsic_only"),
                 budget.apparent_bitflip(t, params, "1L", "intrinsic_only")]
    out.write_csv("bitflip_analytic.csv", cols, [[t[i], *[c[i] for c in cols_data]] for i in range(t.size)], doc)
    return {"lifetimes": res, "swapped": swapped, "saturation": budget.saturation_estimate(params)}


def cmd_validate(params, args, out: _Output) -> dict:
    """Full scorecard for the shipped params_paper.json; trivial-limit checks for any other ``--config``."""
    from . import acceptance
    from .params import paper_params
    if params.replace(name="") == paper_params().replace(name=""):
        results = acceptance.run_all(verbose=True)
        out.write_text("scorecard.txt", "\n".join(c.line() for c in results))
        return {"criteria": [c.to_dict() for c in results], "all_passed": all(c.passed for c in results)}
    ok, measured = acceptance.trivial_limit_checks(params)
    line = f"[{'PASS' if ok else 'FAIL'}] trivial-limit checks on {args.config}: " + \
        ", ".join(f"{k}={v:.3g}" for k, v in measured.items())
    print(line)
    out.write_text("scorecard.txt", line)
    return {"trivial_limit": measured, "all_passed": ok}


HANDLERS = {"spam": cmd_spam, "bitflip": cmd_bitflip, "nth": cmd_nth, "ramsey": cmd_ramsey,
            "echo": lambda p, a, o: cmd_ramsey(p, a, o, echo=True), "rb": cmd_rb, "rocalib": cmd_rocalib,
            "budget": cmd_budget, "intrinsic": cmd_intrinsic, "validate": cmd_validate}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("DUALRAIL_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # bad flags, --help, --version
        return int(exc.code or 0)
    try:
        params = load_params(args.config or shipped_path("params_paper.json"))
        if args.rounds is not None and args.rounds < 1:
            raise ConfigError("--rounds must be >= 1")
        if args.shots is not None and args.shots < 1:
            raise ConfigError("--shots must be >= 1")
        if args.prep is not None and args.prep not in BASIS_LABELS:
            raise ConfigError(f"--prep must be one of {BASIS_LABELS}")
        if args.delays is not None and np.any(args.delays < 0):
            raise ConfigError("--delays must be >= 0")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = _Output(out_dir)
    log.info("running %s with %s", args.command, args.config or "shipped params_paper.json")
    t0 = time.perf_counter()
    try:
        summary = HANDLERS[args.command](params, args, out)
        out.write_json("summary.json", {"command": args.command, **summary})
        manifest = {"command": args.command, "config_hash": _config_hash(params, args), "version": __version__,
                    "files": [p.name for p in out.files] + ["manifest.json"],
                    "pruned_mass_max": max(out.pruned, default=0.0),
                    "wall_clock_s": {"total": time.perf_counter() - t0, **out.timings}}
        out.write_json("manifest.json", manifest)
    except Exception as exc:  # runtime failure: remove partial outputs
        log.exception("run failed")
        out.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.command == "validate" and not summary["all_passed"]:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
