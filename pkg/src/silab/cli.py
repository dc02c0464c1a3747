"""Command-line front end.

    silab simulate | lattice | verify {bm,siv,stationarity} | mc {hit,exit}
          | diag {slln,lil,zeros,frontier} | replay REPORT

Every report embeds the fully resolved configuration, so ``silab replay``
can rerun it and confirm the output is bit-identical.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import streams
from .geometry import Measure, Rect, load_sets, union_of, union_measure
from .lattice import (
    build_flow,
    consistent_numbering,
    diagonal_flow,
    extend_sequence,
    intersection_closure,
    left_neighborhoods,
)
from .processes import ProcessModel, sample_field, sample_path
from .timechange import invert_clock, retime
from . import verify as V

log = logging.getLogger("silab")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

COMMANDS = {
    "simulate": (None,),
    "lattice": (None,),
    "verify": ("bm", "siv", "stationarity"),
    "mc": ("hit", "exit"),
    "diag": ("slln", "lil", "zeros", "frontier"),
}
MODELS = {"sibm": "sibm", "poisson": "poisson", "common": "common", "skew": "skew"}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = ""
    subcommand: str | None = None
    dim: int = 2
    grid: int = 256
    tmax: float = 1.0
    mesh: float = 0.01
    seed: int | None = None
    replicates: int = 200
    model: str = "sibm"
    lam: float = 1.0
    alpha: float = 0.01
    a: float = 1.0
    b: float = 2.0
    level: float = 2.0
    eps: float = 0.5
    sigma_end: float = 1.0
    lattices: int = 50
    reflect: float | None = None
    retime_step: float | None = None
    input: str | None = None
    out: str | None = None
    format: str = "json"
    workers: int = 1
    field: bool = False

    def validate(self) -> None:
        checks = [
            ("dim", self.dim >= 1),
            ("grid", self.grid >= 1),
            ("tmax", self.tmax > 0),
            ("mesh", self.mesh > 0),
            ("replicates", self.replicates >= 1),
            ("lam", self.lam > 0),
            ("alpha", 0 < self.alpha < 1),
            ("eps", self.eps >= 0),
            ("sigma_end", self.sigma_end > 0),
            ("lattices", self.lattices >= 1),
            ("workers", self.workers >= 1),
            ("format", self.format in ("json", "csv")),
            ("model", self.model in MODELS),
        ]
        for key, ok in checks:
            if not ok:
                raise UsageError(f"invalid value for {key}: {getattr(self, key)!r}")
        if self.seed is not None and not 0 <= self.seed < 2**63:
            raise UsageError(f"invalid value for seed: {self.seed!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_ALIASES = {"lambda": "lam", "n": "replicates", "in": "input", "sigma-end": "sigma_end", "retime": "retime_step"}


def _coerce(key: str, raw: str):
    typ = _FIELDS[key].type
    if raw in ("None", "none", "") and "None" in str(typ):
        return None
    try:
        if typ.startswith("int"):
            return int(raw)
        if typ.startswith("float"):
            return float(raw)
        if typ == "bool":
            return raw.lower() in ("1", "true", "yes", "on")
    except ValueError:
        raise UsageError(f"invalid value for {key}: {raw!r}") from None
    return raw


def read_config_file(path: str) -> dict:
    """key=value lines; '#' starts a comment."""
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key).replace("-", "_")
        if key not in _FIELDS or key in ("command", "subcommand"):
            raise UsageError(f"unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int)
    g.add_argument("--replicates", "--n", dest="replicates", type=int)
    g.add_argument("--mesh", type=float)
    g.add_argument("--grid", type=int)
    g.add_argument("--tmax", type=float)
    g.add_argument("--dim", type=int)
    g.add_argument("--out")
    g.add_argument("--format", choices=("json", "csv"))
    g.add_argument("--config")
    g.add_argument("--workers", type=int)
    g.add_argument("--model", choices=sorted(MODELS))
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--a", type=float)
    g.add_argument("--b", type=float)
    g.add_argument("--level", type=float)
    g.add_argument("--eps", type=float)
    g.add_argument("--sigma-end", dest="sigma_end", type=float)
    g.add_argument("--lattices", type=int)
    g.add_argument("--reflect", type=float)
    g.add_argument("--retime", dest="retime_step", type=float)
    g.add_argument("--in", dest="input")
    g.add_argument("--field", action="store_const", const=True)

    p = argparse.ArgumentParser(prog="silab", description="Set-indexed Brownian motion laboratory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="sample a path (or field) and write it out")
    sub.add_parser("lattice", parents=[common], help="number a set collection and build its flow")
    for name in ("verify", "mc", "diag"):
        sp = sub.add_parser(name, help=f"{name} subcommands")
        inner = sp.add_subparsers(dest="subcommand", required=True)
        for s in COMMANDS[name]:
            inner.add_parser(s, parents=[common])
    rp = sub.add_parser("replay", help="rerun a report and compare bit for bit")
    rp.add_argument("report")
    rp.add_argument("--workers", type=int, default=None)
    return p


def parse_config(argv: list[str]) -> tuple[RunConfig, argparse.Namespace]:
    parser = _parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            raise
        raise UsageError("invalid command line") from exc
    if ns.command == "replay":
        return RunConfig(command="replay"), ns
    values: dict = {}
    if ns.config:
        values.update(read_config_file(ns.config))
    for key in _FIELDS:
        v = getattr(ns, key, None)
        if v is not None and key not in ("command", "subcommand"):
            values[key] = v
    cfg = RunConfig(command=ns.command, subcommand=getattr(ns, "subcommand", None), **values)
    cfg.validate()
    return cfg, ns


# --- commands ---------------------------------------------------------------


def _model(cfg: RunConfig) -> ProcessModel:
    return ProcessModel(MODELS[cfg.model], cfg.lam)


def _mc_report(name: str, est: V.MCEstimate, seed: int, ok: bool) -> dict:
    return {
        "test": name,
        "params": est.extra,
        "estimate": est.estimate,
        "stderr": est.stderr,
        "theory": est.theory,
        "z": est.z,
        "n": est.n,
        "verdict": "pass" if ok else "fail",
        "seed": seed,
    }


def _flow_from_input(cfg: RunConfig):
    sigma = Measure.lebesgue(cfg.dim)
    if cfg.input:
        dim, rects = load_sets(cfg.input)
        sigma = Measure.lebesgue(dim)
        lat = intersection_closure(rects)
        num = consistent_numbering(lat, sigma)
        return lat, num, build_flow(lat, num, sigma, cfg.mesh), sigma
    side = math.sqrt(cfg.sigma_end)
    return None, None, extend_sequence([Rect((side,) * cfg.dim)], sigma, cfg.mesh), sigma


def cmd_simulate(cfg: RunConfig) -> tuple[dict, list[dict]]:
    if cfg.field:
        f = sample_field(_model(cfg), cfg.grid, cfg.tmax, Measure.lebesgue(2), cfg.seed, 0)
        rows = f.values.tolist()
        report = {"test": "simulate_field", "params": {"n": cfg.grid, "tmax": cfg.tmax}, "values": f.values.tolist(), "verdict": "pass", "seed": cfg.seed}
        return report, rows
    _, _, flow, _ = _flow_from_input(cfg)
    path = sample_path(_model(cfg), flow, cfg.seed, 0)
    if cfg.retime_step:
        path = retime(path, invert_clock(flow.clock_pairs()), cfg.retime_step)
    rows = [{"alpha": a, "theta": t, "Y": y} for a, t, y in zip(path.alphas.tolist(), path.clock.tolist(), path.cumulative.tolist())]
    report = {"test": "simulate", "params": {"points": len(rows)}, "alpha": path.alphas.tolist(), "theta": path.clock.tolist(), "Y": path.cumulative.tolist(), "verdict": "pass", "seed": cfg.seed}
    return report, rows


def cmd_lattice(cfg: RunConfig) -> tuple[dict, list[dict]]:
    if not cfg.input:
        raise UsageError("lattice requires --in")
    lat, num, flow, sigma = _flow_from_input(cfg)
    cells = left_neighborhoods(lat, num, sigma)
    report = {
        "test": "lattice",
        "numbering": [list(r.corner) for r in num.ordered(lat)],
        "cells": [{"i": c.position, "corner": list(c.base.corner), "measure": c.measure} for c in cells.cells],
        "total": union_measure(union_of(*lat.sets), sigma),
        "flow": {"alpha": flow.alphas.tolist(), "theta": flow.clock.tolist()},
        "verdict": "pass",
        "seed": cfg.seed,
    }
    return report, report["cells"]


def cmd_verify(cfg: RunConfig) -> tuple[dict, list[dict]]:
    model = _model(cfg)
    if cfg.subcommand == "bm":
        cases = V.random_lattice_cases(cfg.lattices, cfg.seed)
        rep = V.bm_harness(model, cases, cfg.replicates, cfg.seed, cfg.alpha, cfg.reflect, cfg.workers)
        d = rep.to_dict()
        if model.kind in ("common", "skew"):
            # negative control: the suite must reject
            rate = rep.statistics["suite_rejection_rate"]
            d["test"] = "bm_control"
            d["thresholds"] = {"min_rejection_rate": 0.99}
            d["verdict"] = "pass" if rate >= 0.99 else "fail"
        return d, rep.raw
    if cfg.subcommand == "siv":
        sigma = Measure.lebesgue(2)
        t = cfg.tmax
        fa = extend_sequence([Rect((t, t / 2)), Rect((t, t))], sigma, cfg.mesh)
        fb = extend_sequence([Rect((t / 2, t)), Rect((t, t))], sigma, cfg.mesh)
        rep = V.siv_check(model, fa, fb, cfg.grid, t, sigma, cfg.replicates, cfg.seed, cfg.workers)
        return rep.to_dict(), rep.raw
    rects = [Rect((1.0, 0.5)), Rect((1.0, 1.0)), Rect((2.0, 2.0)), Rect((0.5, 2.0))]
    rep = V.stationarity_check(model, rects, cfg.eps, cfg.replicates, cfg.seed, n=64, tmax=4.0, alpha_level=cfg.alpha, workers=cfg.workers)
    return rep.to_dict(), rep.raw


def cmd_mc(cfg: RunConfig) -> tuple[dict, list[dict]]:
    if cfg.subcommand == "hit":
        flow = diagonal_flow(cfg.sigma_end, cfg.mesh)
        run = lambda s: V.mc_first_passage(flow, cfg.a, cfg.replicates, s, workers=cfg.workers)  # noqa: E731
        name = "mc_hit"
    else:
        length = V.exit_flow_length(cfg.a, cfg.b)
        flow = diagonal_flow(length, max(cfg.mesh, length / 4000))
        run = lambda s: V.mc_exit(flow, cfg.a, cfg.b, cfg.replicates, s, workers=cfg.workers)  # noqa: E731
        name = "mc_exit"
    est, used_seed, ok = V.rerun_on_fail(run, cfg.seed)
    rows = [{"replicate": i, "outcome": int(v)} for i, v in enumerate(est.samples.tolist())]
    return _mc_report(name, est, used_seed, ok), rows


def cmd_diag(cfg: RunConfig) -> tuple[dict, list[dict]]:
    if cfg.subcommand == "frontier":
        side = math.sqrt(cfg.sigma_end)
        est = V.mc_frontier(Rect((side, side)), cfg.level, cfg.grid, cfg.replicates, cfg.seed, workers=cfg.workers)
        d = _mc_report("diag_frontier", est, cfg.seed, True)
        d["verdict"] = "report-only"
        return d, [{"replicate": i, "outcome": int(v)} for i, v in enumerate(est.samples.tolist())]
    rep = V.asymptotic_diagnostics(replicates=cfg.replicates, seed=cfg.seed, workers=cfg.workers)
    d = rep.to_dict()
    keys = {
        "slln": ("frac_ratio_small", "exceed_fraction", "exceed_theory", "exceed_sd", "ratio_sd_theory"),
        "lil": ("lil_ratio_mean", "lil_ratio_q05", "lil_ratio_q95"),
        "zeros": ("zero_crossings_mean", "zero_crossings_reference_mean"),
    }[cfg.subcommand]
    d["test"] = f"diag_{cfg.subcommand}"
    d["statistics"] = {"schedule": d["statistics"]["schedule"], **{k: d["statistics"][k] for k in keys}}
    if cfg.subcommand != "slln":
        d["verdict"] = "report-only"
        d["subtests"] = {}
    return d, rep.raw


HANDLERS = {"simulate": cmd_simulate, "lattice": cmd_lattice, "verify": cmd_verify, "mc": cmd_mc, "diag": cmd_diag}


def execute(cfg: RunConfig) -> dict:
    """Run a resolved configuration; the report embeds it."""
    report, rows = HANDLERS[cfg.command](cfg)
    report["config"] = cfg.to_dict()
    report["_rows"] = rows
    return report


def _render(report: dict, fmt: str) -> str:
    rows = report.pop("_rows", [])
    if fmt == "csv":
        buf = io.StringIO()
        if rows and isinstance(rows[0], list):
            csv.writer(buf).writerows(rows)
        elif rows:
            writer = csv.DictWriter(buf, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        return buf.getvalue()
    return json.dumps(report, indent=2, default=_jsonable) + "\n"


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _verdict_code(report: dict) -> int:
    return EXIT_FAIL if report.get("verdict") == "fail" else EXIT_OK


def replay(path: str, workers: int | None = None) -> tuple[dict, bool]:
    with open(path) as fh:
        original = json.load(fh)
    raw = dict(original["config"])
    if workers is not None:
        raw["workers"] = workers
    cfg = RunConfig(**raw)
    cfg.validate()
    fresh = json.loads(_render(execute(cfg), "json"))
    # the worker count is a scheduling knob, not part of the result
    a = {k: v for k, v in original.items() if k != "config"}
    b = {k: v for k, v in fresh.items() if k != "config"}
    return fresh, a == b


def run(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg, ns = parse_config(argv)
    except UsageError as exc:
        print(f"silab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if getattr(ns, "verbose", False) else logging.WARNING, format="%(name)s: %(message)s")
    try:
        if cfg.command == "replay":
            fresh, same = replay(ns.report, ns.workers)
            print(json.dumps({"replay": ns.report, "identical": same}))
            return EXIT_OK if same else EXIT_FAIL
        if cfg.seed is None:
            cfg.seed = streams.fresh_seed()
            log.warning("no --seed given; using %d", cfg.seed)
        report = execute(cfg)
        code = _verdict_code(report)
        _emit(_render(report, cfg.format), cfg.out)
        return code
    except UsageError as exc:
        print(f"silab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"silab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"silab: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
