"""Statistical checks of the distributional identities of set-indexed
Brownian motion, run on sampled paths and fields."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, stats

from . import streams
from .geometry import Measure, Rect, UnionSet, union_subset
from .lattice import Flow, extend_sequence
from .processes import (
    ProcessModel,
    PathSample,
    blocks,
    block_chunks,
    evaluate_set_int,
    parallel_map,
    project_snapped,
    sample_field,
    snap_flow,
    snapped_measure,
)

log = logging.getLogger(__name__)

MIN_SUITE_INCREMENTS = 1000
CENSOR_LIMIT = 1e-4


@dataclass
class MCEstimate:
    estimate: float
    stderr: float
    theory: float
    n: int
    extra: dict = field(default_factory=dict)
    samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def z(self) -> float:
        return (self.estimate - self.theory) / self.stderr

    def within(self, tol: float) -> bool:
        return abs(self.estimate - self.theory) <= tol

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "theory": self.theory,
            "z": self.z,
            "n": self.n,
            "extra": self.extra,
        }


@dataclass
class TestReport:
    name: str
    statistics: dict
    thresholds: dict
    verdict: bool
    params: dict = field(default_factory=dict)
    seed: int | None = None
    subtests: dict = field(default_factory=dict)
    raw: list = field(default_factory=list, repr=False)

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "test": self.name,
            "params": self.params,
            "statistics": self.statistics,
            "thresholds": self.thresholds,
            "subtests": {k: ("pass" if v else "fail") for k, v in self.subtests.items()},
            "verdict": "pass" if self.verdict else "fail",
            "seed": self.seed,
        }


def binomial_stderr(p: float, n: int) -> float:
    # floor keeps z finite when every replicate agrees
    return max(math.sqrt(p * (1 - p) / n), 0.5 / n)


# --- Brownian suite ---------------------------------------------------------


SUBTESTS = ("mean", "variance", "normality", "lag1")


def bm_suite(series: PathSample, alpha_level: float = 0.01, min_increments: int = MIN_SUITE_INCREMENTS) -> TestReport:
    """Zero mean, chi-square variance, KS normality and lag-1 independence
    of the increments standardized by their recorded clock differences."""
    inc, dth = series.increments, series.dtheta
    n = inc.size
    if n < min_increments:
        raise ValueError(f"bm_suite needs at least {min_increments} increments, got {n}")
    if np.any(dth <= 0):
        raise ValueError("recorded clock differences must be positive")
    z = inc / np.sqrt(dth)
    level = alpha_level / 3  # Bonferroni over the three p-value tests

    sd = float(np.std(z))
    if sd > 0:
        t_res = stats.ttest_1samp(z, 0.0)
        p_mean = float(t_res.pvalue)
        t_stat = float(t_res.statistic)
    else:
        p_mean = 1.0 if float(np.mean(z)) == 0.0 else 0.0
        t_stat = 0.0 if p_mean else math.inf
    q = float(np.sum(z**2))
    p_var = float(2 * min(stats.chi2.cdf(q, n), stats.chi2.sf(q, n)))
    ks = stats.kstest(z, "norm")
    if sd > 0:
        lag1 = float(np.corrcoef(z[:-1], z[1:])[0, 1])
    else:
        lag1 = 1.0
    bound = 3 / math.sqrt(n)

    sub = {
        "mean": p_mean >= level,
        "variance": p_var >= level,
        "normality": float(ks.pvalue) >= level,
        "lag1": abs(lag1) <= bound,
    }
    statistics = {
        "n": n,
        "mean": float(np.mean(z)),
        "t": t_stat,
        "p_mean": p_mean,
        "variance_ratio": float(np.sum(inc**2) / np.sum(dth)),
        "chi2": q,
        "p_variance": p_var,
        "ks": float(ks.statistic),
        "p_ks": float(ks.pvalue),
        "lag1": lag1,
    }
    thresholds = {"alpha": alpha_level, "per_test_level": level, "lag1_bound": bound}
    return TestReport("bm_suite", statistics, thresholds, all(sub.values()), subtests=sub)


def reference_bm_series(n: int, step: float, rng: np.random.Generator) -> PathSample:
    """Plain one-parameter Brownian motion on a uniform grid, from numpy's own generator."""
    inc = rng.normal(0.0, math.sqrt(step), size=n)
    clock = step * np.arange(n + 1)
    return PathSample(clock.copy(), clock, np.concatenate([[0.0], np.cumsum(inc)]))


# --- quadratic variation ----------------------------------------------------


def qv_realized(path: PathSample) -> float:
    if len(path) < 2:
        raise ValueError("quadratic variation needs at least two points")
    return float(np.sum(path.increments**2))


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def _same_set(a: UnionSet, b: UnionSet) -> bool:
    return union_subset(a, b) and union_subset(b, a)


def siv_check(
    model: ProcessModel,
    flow_a: Flow,
    flow_b: Flow,
    n: int = 256,
    tmax: float = 1.0,
    sigma: Measure | None = None,
    replicates: int = 500,
    seed: int = 0,
    workers: int = 1,
) -> TestReport:
    """Realized brackets along two flows with shared endpoints, on shared fields."""
    sigma = sigma or Measure.lebesgue(2)
    if not (_same_set(flow_a.set_at(0), flow_b.set_at(0)) and _same_set(flow_a.end_set, flow_b.end_set)):
        raise ValueError("flows must share their start and end sets")
    snap_a = snap_flow(flow_a, n, tmax, sigma)
    snap_b = snap_flow(flow_b, n, tmax, sigma)

    def one(r: int) -> tuple[float, float]:
        f = sample_field(model, n, tmax, sigma, seed, r)
        return qv_realized(project_snapped(f, snap_a)), qv_realized(project_snapped(f, snap_b))

    qv = np.array(parallel_map(one, list(range(replicates)), workers))
    theory = model.bracket_rate() * float(snap_a.clock[-1] - snap_a.clock[0])
    diff = qv[:, 0] - qv[:, 1]
    md, sd_ = _mean_se(diff)
    ma, sa = _mean_se(qv[:, 0])
    mb, sb = _mean_se(qv[:, 1])
    sub = {
        "difference": abs(md) <= 3 * sd_,
        "flow_a": abs(ma - theory) <= 3 * sa,
        "flow_b": abs(mb - theory) <= 3 * sb,
    }
    statistics = {
        "mean_difference": md,
        "stderr_difference": sd_,
        "mean_qv_a": ma,
        "stderr_a": sa,
        "mean_qv_b": mb,
        "stderr_b": sb,
        "theory": theory,
    }
    params = {"model": model.kind, "lambda": model.lam, "n": n, "tmax": tmax, "replicates": replicates}
    raw = [{"replicate": i, "qv_a": float(x), "qv_b": float(y)} for i, (x, y) in enumerate(qv)]
    return TestReport("siv", statistics, {"z": 3.0}, all(sub.values()), params, seed, sub, raw)


# --- first passage and exit -------------------------------------------------


def _bridge_hit(prev: np.ndarray, cur: np.ndarray, level: float, dtheta: np.ndarray) -> np.ndarray:
    """Probability that a Brownian bridge between prev and cur reaches an upper level."""
    gap = np.maximum(level - prev, 0.0) * np.maximum(level - cur, 0.0)
    return np.exp(-2.0 * gap / dtheta)


def first_passage_theory(a: float, sigma_end: float) -> float:
    return float(2 - 2 * stats.norm.cdf(a / math.sqrt(sigma_end)))


def mc_first_passage(
    flow: Flow, a: float, n: int, seed: int, bridge: bool = True, workers: int = 1
) -> MCEstimate:
    """Fraction of exact paths along the flow whose running maximum reaches a.

    With ``bridge`` the path is monitored continuously: between two sampled
    points the crossing probability of the Brownian bridge is applied.
    """
    if not a > 0:
        raise ValueError("level must be positive")
    dth = flow.steps()
    sigma_end = float(flow.clock[-1] - flow.clock[0])

    def run(blk: tuple[int, int]) -> int:
        block, size = blk
        y = np.zeros(size)
        hit = np.zeros(size, dtype=bool)
        for start, inc, ub in block_chunks(ProcessModel.sibm(), dth, seed, block, size, bridge=bridge):
            path = y[:, None] + np.cumsum(inc, axis=1)
            prev = np.concatenate([y[:, None], path[:, :-1]], axis=1)
            h = path >= a
            if bridge:
                h |= ub < _bridge_hit(prev, path, a, dth[None, start : start + inc.shape[1]])
            hit |= h.any(axis=1)
            y = path[:, -1]
            if hit.all():
                break
        return hit

    hit = np.concatenate(parallel_map(run, blocks(n), workers))
    p = int(hit.sum()) / n
    extra = {"sigma_end": sigma_end, "a": a, "bridge": bridge}
    return MCEstimate(p, binomial_stderr(p, n), first_passage_theory(a, sigma_end), n, extra, hit)


def exit_theory(a: float, b: float) -> float:
    return abs(a) / (b + abs(a))


def mc_exit(flow: Flow, a: float, b: float, n: int, seed: int, bridge: bool = True, workers: int = 1) -> MCEstimate:
    """Fraction of exact paths whose first exit from (a, b) is through b.

    Within a step, bridge crossing probabilities for both barriers decide an
    exit; a double crossing inside one step is neglected, its probability is
    of order exp(-2 (b - a)^2 / step).
    """
    if not a < 0 < b:
        raise ValueError("need a < 0 < b")
    dth = flow.steps()

    def run(blk: tuple[int, int]) -> tuple[int, int]:
        block, size = blk
        y = np.zeros(size)
        done = np.zeros(size, dtype=bool)
        up = np.zeros(size, dtype=bool)
        for start, inc, ub in block_chunks(ProcessModel.sibm(), dth, seed, block, size, bridge=bridge):
            c = inc.shape[1]
            path = y[:, None] + np.cumsum(inc, axis=1)
            prev = np.concatenate([y[:, None], path[:, :-1]], axis=1)
            ev_up = path >= b
            ev_dn = path <= a
            if bridge:
                d = dth[None, start : start + c]
                inside = ~(ev_up | ev_dn)
                p_up = _bridge_hit(prev, path, b, d)
                p_dn = _bridge_hit(-prev, -path, -a, d)
                ev_up |= inside & (ub < p_up)
                ev_dn |= inside & ~ev_up & (ub < p_up + p_dn)
            ev = ev_up | ev_dn
            first = np.argmax(ev, axis=1)
            fresh = ~done & ev.any(axis=1)
            rows = np.nonzero(fresh)[0]
            up[rows] = ev_up[rows, first[rows]]
            done |= fresh
            y = path[:, -1]
            if done.all():
                break
        # 1 = exit through b, 0 = through a, -1 = censored at the end of the flow
        return np.where(done, up.astype(np.int8), np.int8(-1))

    outcome = np.concatenate(parallel_map(run, blocks(n), workers))
    censored = int(np.sum(outcome < 0))
    p = int(np.sum(outcome == 1)) / n
    extra = {
        "a": a,
        "b": b,
        "censored": censored,
        "censored_fraction": censored / n,
        "sigma_end": float(flow.clock[-1]),
        "bridge": bridge,
    }
    return MCEstimate(p, binomial_stderr(p, n), exit_theory(a, b), n, extra, outcome)


def exit_flow_length(a: float, b: float) -> float:
    """Clock length that makes censoring negligible."""
    return 20.0 * max(a * a, b * b)


def mc_verdict(est: MCEstimate, z_max: float = 3.0) -> bool:
    ok = abs(est.z) <= z_max
    if "censored_fraction" in est.extra:
        ok = ok and est.extra["censored_fraction"] < CENSOR_LIMIT
    return ok


def rerun_on_fail(run: Callable[[int], MCEstimate], seed: int, verdict: Callable[[MCEstimate], bool] = mc_verdict):
    """Run once; on failure rerun once with a derived seed. Two failures fail."""
    est = run(seed)
    if verdict(est):
        return est, seed, True
    fresh = int(np.random.SeedSequence([seed, 0x5EED]).generate_state(1, dtype=np.uint64)[0] >> 1)
    log.warning("seed %d failed (z=%.3f); rerunning with seed %d", seed, est.z, fresh)
    est2 = run(fresh)
    return est2, fresh, verdict(est2)


# --- reflection -------------------------------------------------------------


def first_passage_index(values: np.ndarray, a: float) -> int | None:
    hits = np.nonzero(np.maximum.accumulate(values) >= a)[0]
    return int(hits[0]) if hits.size else None


def reflect_path(path: PathSample, a: float, index: int | None = None) -> PathSample:
    """Y before the first index whose running max reaches a, 2a - Y from there on."""
    y = path.cumulative
    if index is None:
        index = first_passage_index(y, a)
    if index is None:
        return path.with_values(y.copy())
    out = y.copy()
    out[index:] = 2 * a - y[index:]
    return path.with_values(out)


# --- sigma-stationarity -----------------------------------------------------


def enlarge(a: Rect, eps: float, sigma: Measure, tmax: float) -> Rect:
    """A rectangle A^eps containing a with sigma(A^eps minus a) = eps, grown along x."""
    x, y = a.corner
    height = sigma.scale * float(sigma.axis(1, y))
    if eps == 0:
        return a
    if height <= 0:
        raise ValueError(f"cannot enlarge degenerate set {a.corner}")
    goal = float(sigma.axis(0, x)) + eps / height
    if float(sigma.axis(0, tmax)) < goal:
        raise ValueError(f"enlargement of {a.corner} by {eps} leaves the domain")
    x1 = optimize.brentq(lambda t: float(sigma.axis(0, t)) - goal, x, tmax, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return Rect((x1, y))


def stationarity_check(
    model: ProcessModel,
    rects: Sequence[Rect],
    eps: float,
    replicates: int = 2000,
    seed: int = 0,
    n: int = 64,
    tmax: float = 4.0,
    sigma: Measure | None = None,
    alpha_level: float = 0.01,
    workers: int = 1,
) -> TestReport:
    """Pairwise two-sample KS between laws of X(A^eps) - X(A) over base sets A."""
    sigma = sigma or Measure.lebesgue(2)
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if len(rects) < 2:
        raise ValueError("need at least two base sets")
    enlarged = [enlarge(r, eps, sigma, tmax) for r in rects]
    probe = sample_field(ProcessModel.sibm(), n, tmax, sigma, seed, 0)
    for r, e in zip(rects, enlarged):
        got = snapped_measure(probe, e) - snapped_measure(probe, r)
        if abs(got - eps) > 1e-9 * max(1.0, eps):
            raise ValueError(f"enlargement of {r.corner} is not grid aligned (snapped eps {got})")

    def one(rep: int) -> np.ndarray:
        f = sample_field(model, n, tmax, sigma, seed, rep)
        p = f.prefix
        return np.array([evaluate_set_int(f, e, p) - evaluate_set_int(f, r, p) for r, e in zip(rects, enlarged)]) * f.quantum

    samples = np.array(parallel_map(one, list(range(replicates)), workers))
    pairs = list(combinations(range(len(rects)), 2))
    level = alpha_level / len(pairs)
    pvals, dists = {}, {}
    for i, j in pairs:
        res = stats.ks_2samp(samples[:, i], samples[:, j])
        pvals[f"{i}-{j}"] = float(res.pvalue)
        dists[f"{i}-{j}"] = float(res.statistic)
    sub = {k: v >= level for k, v in pvals.items()}
    statistics = {
        "ks": dists,
        "p": pvals,
        "variances": samples.var(axis=0, ddof=1).tolist(),
    }
    params = {
        "model": model.kind,
        "eps": eps,
        "bases": [list(r.corner) for r in rects],
        "enlarged": [list(e.corner) for e in enlarged],
        "replicates": replicates,
        "n": n,
        "tmax": tmax,
        "measure": sigma.name,
    }
    raw = [{"replicate": i, **{f"base{j}": float(v) for j, v in enumerate(row)}} for i, row in enumerate(samples)]
    return TestReport("stationarity", statistics, {"per_pair_level": level}, all(sub.values()), params, seed, sub, raw)


# --- growing-domain diagnostics ---------------------------------------------


def schedule_flow(schedule: Sequence[float], mesh: float = 1.0) -> Flow:
    anchors = [Rect((math.sqrt(s), math.sqrt(s))) for s in schedule]
    return extend_sequence(anchors, Measure.lebesgue(2), mesh)


def _lil_scale(s: np.ndarray) -> np.ndarray:
    return np.sqrt(2 * s * np.log(np.log(s)))


def asymptotic_diagnostics(
    schedule: Sequence[float] = (1e2, 1e3, 1e4),
    replicates: int = 1000,
    seed: int = 0,
    level: float = 3.0,
    ratio_cut: float = 0.05,
    mesh: float = 1.0,
    workers: int = 1,
) -> TestReport:
    """Law of large numbers, unboundedness, LIL ratio and zero-crossing summaries."""
    flow = schedule_flow(schedule, mesh)
    dth = flow.steps()
    checkpoints = flow.anchor_indices()[1:]
    sched = flow.clock[checkpoints]

    def run(blk):
        block, size = blk
        y = np.zeros(size)
        amax = np.zeros(size)
        hit = np.zeros(size, dtype=bool)
        zeros = np.zeros(size, dtype=np.int64)
        at = np.zeros((size, len(checkpoints)))
        amax_at = np.zeros((size, len(checkpoints)))
        for start, inc, ub in block_chunks(ProcessModel.sibm(), dth, seed, block, size, bridge=True):
            c = inc.shape[1]
            path = y[:, None] + np.cumsum(inc, axis=1)
            prev = np.concatenate([y[:, None], path[:, :-1]], axis=1)
            h = (path >= level) | (ub < _bridge_hit(prev, path, level, dth[None, start : start + c]))
            hit |= h.any(axis=1)
            zeros += np.sum(np.sign(prev) * np.sign(path) < 0, axis=1)
            run_abs = np.maximum(amax[:, None], np.maximum.accumulate(np.abs(path), axis=1))
            for k, idx in enumerate(checkpoints):
                if start < idx <= start + c:
                    at[:, k] = path[:, idx - start - 1]
                    amax_at[:, k] = run_abs[:, idx - start - 1]
            amax = run_abs[:, -1]
            y = path[:, -1]
        return at, amax_at, hit, zeros

    res = parallel_map(run, blocks(replicates), workers)
    at = np.concatenate([r[0] for r in res])
    amax_at = np.concatenate([r[1] for r in res])
    hit = np.concatenate([r[2] for r in res])
    zeros = np.concatenate([r[3] for r in res])

    ref_rng = np.random.default_rng([seed, 0xD1A6])
    ref_zeros = []
    for _ in range(min(replicates, 200)):
        p = np.cumsum(ref_rng.normal(0.0, np.sqrt(dth)))
        ref_zeros.append(int(np.sum(np.sign(p[:-1]) * np.sign(p[1:]) < 0)))

    s_end = float(sched[-1])
    frac_small = float(np.mean(np.abs(at[:, -1]) / s_end <= ratio_cut))
    exceed = float(np.mean(hit))
    exceed_theory = first_passage_theory(level, s_end)
    exceed_sd = math.sqrt(exceed_theory * (1 - exceed_theory) / replicates)
    lil = amax_at / _lil_scale(sched)[None, :]
    sub = {
        "slln": frac_small >= 0.99,
        "unbounded": abs(exceed - exceed_theory) <= 3 * exceed_sd,
    }
    statistics = {
        "schedule": sched.tolist(),
        "frac_ratio_small": frac_small,
        "ratio_sd_theory": 1 / math.sqrt(s_end),
        "exceed_fraction": exceed,
        "exceed_theory": exceed_theory,
        "exceed_sd": exceed_sd,
        "lil_ratio_mean": lil.mean(axis=0).tolist(),
        "lil_ratio_q05": np.quantile(lil, 0.05, axis=0).tolist(),
        "lil_ratio_q95": np.quantile(lil, 0.95, axis=0).tolist(),
        "zero_crossings_mean": float(zeros.mean()),
        "zero_crossings_reference_mean": float(np.mean(ref_zeros)),
    }
    thresholds = {"slln_fraction": 0.99, "ratio_cut": ratio_cut, "level": level, "exceed_z": 3.0}
    params = {"schedule": list(schedule), "replicates": replicates, "mesh": mesh}
    raw = [
        {"replicate": i, "x_end": float(at[i, -1]), "reached_level": int(hit[i]), "zero_crossings": int(zeros[i])}
        for i in range(at.shape[0])
    ]
    return TestReport("asymptotic_diagnostics", statistics, thresholds, all(sub.values()), params, seed, sub, raw)


# --- frontier (exploratory) -------------------------------------------------


@dataclass
class Frontier:
    """First-passage indicator on grid corners (i, j) below a rectangle."""

    level: float
    passed: np.ndarray

    def is_monotone(self) -> bool:
        p = self.passed
        return bool(np.all(p[1:, :] >= p[:-1, :]) and np.all(p[:, 1:] >= p[:, :-1]))


def frontier_map(field_, a: Rect, level: float) -> Frontier:
    ix, iy = field_.snap_index(a.corner[0]), field_.snap_index(a.corner[1])
    vals = field_.prefix[: ix + 1, : iy + 1] * field_.quantum
    reached = vals >= level
    reached = np.logical_or.accumulate(np.logical_or.accumulate(reached, axis=0), axis=1)
    return Frontier(level, reached)


def frontier_sup(field_, a: Rect, level: float) -> bool:
    """Does X on some grid rectangle inside a reach the level."""
    ix, iy = field_.snap_index(a.corner[0]), field_.snap_index(a.corner[1])
    return bool((field_.prefix[: ix + 1, : iy + 1] * field_.quantum).max() >= level)


def mc_frontier(
    a: Rect, level: float, n: int = 256, replicates: int = 1000, seed: int = 0, tmax: float | None = None, workers: int = 1
) -> MCEstimate:
    """Sheet-supremum exceedance over all grid rectangles in a; report only."""
    sigma = Measure.lebesgue(2)
    tmax = tmax or max(a.corner)

    def one(r: int) -> bool:
        return frontier_sup(sample_field(ProcessModel.sibm(), n, tmax, sigma, seed, r), a, level)

    hits = np.array(parallel_map(one, list(range(replicates)), workers))
    p = float(hits.mean())
    theory = first_passage_theory(level, sigma.rect(a)) if level > 0 else 1.0
    extra = {"level": level, "n": n, "sigma_a": sigma.rect(a), "report_only": True}
    return MCEstimate(p, binomial_stderr(p, replicates), theory, replicates, extra, hits)


# --- sequence harness -------------------------------------------------------


@dataclass
class LatticeCase:
    flow: Flow
    step: float
    k: int


def random_lattice_cases(
    count: int, seed: int, kmax: int = 12, upper: float = 10.0, increments: int = 2000
) -> list[LatticeCase]:
    """Flows through random closed lattices of at most ``kmax`` rectangles,
    meshed so that retiming yields ``increments`` steps."""
    from .lattice import build_flow, consistent_numbering, intersection_closure, left_neighborhoods

    sigma = Measure.lebesgue(2)
    rng = np.random.default_rng([seed, 0x1A77])
    cases = []
    for _ in range(count):
        pts = np.maximum(rng.uniform(0.0, upper, size=(int(rng.integers(1, kmax + 1)), 2)), upper * 1e-3)
        rects = [Rect(p) for p in pts]
        lat = intersection_closure(rects)
        while len(lat) > kmax:
            rects.pop()
            lat = intersection_closure(rects)
        num = consistent_numbering(lat, sigma)
        step = left_neighborhoods(lat, num, sigma).total() / increments
        cases.append(LatticeCase(build_flow(lat, num, sigma, step / 2), step, len(lat)))
    return cases


def bm_harness(
    model: ProcessModel,
    cases: Sequence[LatticeCase],
    runs: int = 200,
    seed: int = 0,
    alpha_level: float = 0.01,
    reflect_fraction: float | None = None,
    workers: int = 1,
) -> TestReport:
    """Project the model along each flow, retime by the inverted clock and run
    bm_suite; report per-subtest rejection rates over ``runs`` runs."""
    from .processes import sample_path
    from .timechange import invert_clock, retime

    def one(r: int) -> dict:
        case = cases[r % len(cases)]
        path = sample_path(model, case.flow, seed, r)
        if reflect_fraction is not None:
            path = reflect_path(path, reflect_fraction * math.sqrt(case.flow.clock[-1]))
        series = retime(path, invert_clock(case.flow.clock_pairs()), case.step)
        return bm_suite(series, alpha_level)

    reports = parallel_map(one, list(range(runs)), workers)
    outcomes = [rep.subtests for rep in reports]
    rates = {k: float(np.mean([not o[k] for o in outcomes])) for k in SUBTESTS}
    overall = float(np.mean([not all(o.values()) for o in outcomes]))
    bound = alpha_level + 3 * math.sqrt(alpha_level * (1 - alpha_level) / runs)
    sub = {k: v <= bound for k, v in rates.items()}
    statistics = {"rejection_rates": rates, "suite_rejection_rate": overall}
    params = {"model": model.kind, "runs": runs, "cases": len(cases), "alpha": alpha_level}
    if reflect_fraction is not None:
        params["reflect_fraction"] = reflect_fraction
    raw = [
        {"run": r, "case": r % len(cases), **rep.statistics, **{f"{k}_pass": int(v) for k, v in rep.subtests.items()}}
        for r, rep in enumerate(reports)
    ]
    return TestReport("bm_harness", statistics, {"rejection_bound": bound}, all(sub.values()), params, seed, sub, raw)
