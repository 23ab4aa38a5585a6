"""Monte Carlo experiments and their reports.

Every replicate draws from its own stream ``(seed, TAG_SAMPLE, experiment, n, rep)``
so reports are identical for any number of workers.  Reports carry one CSV row
per (cell, replicate, statistic) plus per-cell summaries and threshold checks.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import chisquare

from .errors import DomainError
from .gapseq import GapSequence, Rwre, format_gap_spec
from .partition import Partition, mdp_partitions_of
from .rng import TAG_SAMPLE, TAG_WALK, stream
from .rwre import RwreGapParams, materialize_rwre_gaps
from .sampler import DEFAULT_TABLE_BUDGET, UniformSampler, matching_z, sample_grand_batch
from .shape import Scaling, horizon, phi, solve_T_star, theta, theta_of_T

CSV_COLUMNS = ("exp", "gaps", "ensemble", "n", "k", "z", "rep", "stat_name", "value", "seed_stream")
C0_PLAIN = math.sqrt(6) / (2 * math.pi)

# experiment codes inside the stream key
_EXP_CODES = {"limit-shape": 1, "parts-lln": 2, "ensemble-equivalence": 3, "rwre-pipeline": 4}


# --------------------------------------------------------------------------- #
# deviation from the limit shape

def sup_deviation(p: Partition, n: Optional[int] = None, q: float = 0.0, T: Optional[float] = None,
                  scaling: Scaling | str = Scaling.UNIT_AREA, t0: float = 0.05) -> float:
    """Exact ``sup_{t >= t0}`` distance between the rescaled Young boundary and the curve.

    Unit area compares ``n^{-1/2} Y(t sqrt(n))`` with ``theta^{-1} phi_T(t theta)``;
    intrinsic compares ``z Y(t / z)`` with ``phi_T(t)`` for ``z = theta / sqrt(n)``
    and uses ``t0 theta`` as the cut.  ``theta = theta_q(T)`` and ``T`` defaults to
    ``T_q``.  On each step of ``Y`` the boundary is constant and the curve is
    monotone, so the supremum over a step is attained at one of its ends.
    """
    if not t0 > 0:
        raise DomainError("t0 must be > 0")
    n = p.N if n is None else n
    if n <= 0:
        raise DomainError("n must be positive")
    if T is None:
        T = horizon(q)
    th = theta_of_T(q, T)
    if Scaling(scaling) is Scaling.UNIT_AREA:
        h, lo = 1.0 / math.sqrt(n), t0
        curve = lambda t: phi(q, T, t * th) / th
    else:
        h, lo = th / math.sqrt(n), t0 * th
        curve = lambda t: phi(q, T, t)
    y = np.asarray(p.parts, dtype=float) * h
    i = np.arange(len(y))
    right = (i + 1) * h
    keep = right > lo
    best = float(curve(np.array([max(lo, len(y) * h)]))[0])
    if keep.any():
        left = np.maximum(i[keep] * h, lo)
        c = y[keep]
        dev = np.maximum(np.abs(c - curve(left)), np.abs(c - curve(right[keep])))
        best = max(best, float(dev.max()))
    return best


# --------------------------------------------------------------------------- #
# reports

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ExperimentReport:
    """Rows, per-cell summaries and pass/fail checks for one experiment run."""
    exp: str
    gaps: str
    ensemble: str
    seed: int
    rows: list = field(default_factory=list)
    summary: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    wall_clock: Optional[float] = None

    def add_row(self, n, k, z, rep, stat_name, value, seed_stream):
        self.rows.append(dict(zip(CSV_COLUMNS, (self.exp, self.gaps, self.ensemble, n, k, z, rep,
                                                stat_name, value, seed_stream))))

    def check(self, name, value, threshold, passed):
        self.checks.append({"name": name, "value": value, "threshold": threshold, "passed": bool(passed)})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def to_dict(self, include_rows: bool = True) -> dict:
        d = {"exp": self.exp, "gaps": self.gaps, "ensemble": self.ensemble, "seed": self.seed,
             "summary": self.summary, "checks": self.checks, "passed": self.passed, "meta": self.meta}
        if include_rows:
            d["rows"] = self.rows
        if self.wall_clock is not None:
            d["wall_clock_s"] = self.wall_clock
        return d

    def to_json(self, include_rows: bool = True) -> str:
        return json.dumps(_jsonable(self.to_dict(include_rows)), sort_keys=True, indent=2) + "\n"

    def write(self, path: str, fmt: str = "csv") -> None:
        text = self.to_csv() if fmt == "csv" else self.to_json()
        with open(path, "w") as fh:
            fh.write(text)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        x = float(x)
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def _gaps_text(g: GapSequence, given: Optional[str]) -> str:
    if given is not None:
        return given
    try:
        return format_gap_spec(g.spec)
    except Exception:
        return repr(g)


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(fn, items))


def _quantiles(x):
    x = np.asarray(x, dtype=float)
    return {"median": float(np.median(x)), "q10": float(np.quantile(x, 0.1)),
            "q90": float(np.quantile(x, 0.9)), "mean": float(np.mean(x))}


# --------------------------------------------------------------------------- #
# experiments

def typical_length(q: float, n: int) -> int:
    """Typical number of parts: ``(T_q/theta_q) sqrt(n)``, or ``c_0 sqrt(n) log n`` at ``q = 0``."""
    if q == 0:
        return max(1, round(C0_PLAIN * math.sqrt(n) * math.log(n)))
    return max(1, round(horizon(q) / theta(q) * math.sqrt(n)))


def run_limit_shape_experiment(g: GapSequence, q_nominal: float, n_grid: Sequence[int], reps: int,
                               ensemble: str = "uniform-n", seed: int = 0, tau: Optional[float] = None,
                               t0: float = 0.05, threshold: Optional[float] = None,
                               budget: int = DEFAULT_TABLE_BUDGET, workers: int = 1,
                               gaps_text: Optional[str] = None, exp: str = "limit-shape",
                               timing: bool = False) -> ExperimentReport:
    """Sup-deviation from the limit shape for ``reps`` samples at each ``n``.

    ``ensemble``:

    * ``uniform-n``: exact uniform on all MDP partitions of ``n``; curve ``phi_{T_q}``;
    * ``typical-k``: exact uniform with ``k = typical_length(q, n)``; curve ``phi_{T_q}``;
    * ``uniform-nk``: exact uniform with ``k = round(tau sqrt(n))``; curve ``phi_{T_*}``.

    With ``threshold`` set, two checks are recorded: the median at the largest ``n``
    is below ``threshold`` and is strictly smaller than the median at the smallest ``n``.
    """
    if not n_grid or reps < 1:
        raise ValueError("need a nonempty n grid and reps >= 1")
    start = time.perf_counter()
    rep_ = ExperimentReport(exp, _gaps_text(g, gaps_text), ensemble, seed)
    code = _EXP_CODES.get(exp, 0)
    if ensemble == "uniform-nk":
        if tau is None:
            raise ValueError("uniform-nk needs tau")
        T = solve_T_star(q_nominal, tau)
    elif ensemble in ("uniform-n", "typical-k"):
        T = horizon(q_nominal)
    else:
        raise ValueError(f"unknown ensemble {ensemble!r}")
    rep_.meta.update({"q": q_nominal, "T": T, "theta": theta_of_T(q_nominal, T), "t0": t0, "reps": reps})
    if tau is not None:
        rep_.meta["tau"] = tau
    medians = []
    for n in n_grid:
        if ensemble == "uniform-n":
            k = None
        elif ensemble == "typical-k":
            k = typical_length(q_nominal, n)
        else:
            k = max(1, round(tau * math.sqrt(n)))
        sampler = UniformSampler(g, n, k, budget)

        def one(r, n=n, sampler=sampler):
            p = sampler.draw(stream(seed, TAG_SAMPLE, code, n, r))
            return p.K, sup_deviation(p, n, q_nominal, T, Scaling.UNIT_AREA, t0)

        out = _map(one, range(reps), workers)
        for r, (K, dev) in enumerate(out):
            sid = f"{seed}:{TAG_SAMPLE}:{code}:{n}:{r}"
            rep_.add_row(n, k, None, r, "sup_dev", dev, sid)
            rep_.add_row(n, k, None, r, "K", K, sid)
        devs = [d for _, d in out]
        cell = {"n": n, "k": k, "method": sampler.method, **_quantiles(devs),
                "K_over_sqrt_n": float(np.mean([K for K, _ in out]) / math.sqrt(n))}
        rep_.summary.append(cell)
        medians.append(cell["median"])
    if threshold is not None:
        rep_.check(f"median sup_dev at n={n_grid[-1]} < {threshold}", medians[-1], threshold,
                   medians[-1] < threshold)
        if len(n_grid) > 1:
            rep_.check(f"median at n={n_grid[-1]} < median at n={n_grid[0]}", medians[-1], medians[0],
                       medians[-1] < medians[0])
    if timing:
        rep_.wall_clock = time.perf_counter() - start
    return rep_


def run_parts_experiment(g: GapSequence, q: float, n_grid: Sequence[int], reps: int, seed: int = 0,
                         beta: float = 0.0, rel_tol: Optional[float] = None,
                         budget: int = DEFAULT_TABLE_BUDGET, workers: int = 1,
                         gaps_text: Optional[str] = None, timing: bool = False) -> ExperimentReport:
    """Number of parts under the uniform measure on MDP partitions of ``n``.

    For ``q > 0`` the statistic is ``K / sqrt(n)`` with target ``T_q / theta_q``; for
    ``q = 0`` it is ``K / (sqrt(n) log n)`` with target ``sqrt(6)(1 - beta) / (2 pi)``.
    ``rel_tol`` adds a check on the relative error of the mean at the largest ``n``.
    """
    start = time.perf_counter()
    rep_ = ExperimentReport("parts-lln", _gaps_text(g, gaps_text), "uniform-n", seed)
    code = _EXP_CODES["parts-lln"]
    if q > 0:
        target, stat = horizon(q) / theta(q), "K/sqrt(n)"
        norm = lambda n: math.sqrt(n)
    else:
        target, stat = C0_PLAIN * (1 - beta), "K/(sqrt(n)log(n))"
        norm = lambda n: math.sqrt(n) * math.log(n)
    rep_.meta.update({"q": q, "beta": beta, "target": target, "statistic": stat, "reps": reps})
    for n in n_grid:
        sampler = UniformSampler(g, n, None, budget)
        Ks = _map(lambda r, n=n: sampler.draw(stream(seed, TAG_SAMPLE, code, n, r)).K, range(reps), workers)
        vals = [K / norm(n) for K in Ks]
        for r, v in enumerate(vals):
            rep_.add_row(n, None, None, r, stat, v, f"{seed}:{TAG_SAMPLE}:{code}:{n}:{r}")
        mean = float(np.mean(vals))
        sd = float(np.std(vals, ddof=1)) if reps > 1 else 0.0
        rep_.summary.append({"n": n, "mean": mean, "sd": sd, "target": target,
                             "rel_error": abs(mean / target - 1)})
    if rel_tol is not None:
        err = rep_.summary[-1]["rel_error"]
        rep_.check(f"|mean/target - 1| at n={n_grid[-1]} <= {rel_tol}", err, rel_tol, err <= rel_tol)
    if timing:
        rep_.wall_clock = time.perf_counter() - start
    return rep_


def _chi2_uniform(draws, fiber):
    if len(fiber) <= 1:
        return 1.0
    index = {p: i for i, p in enumerate(fiber)}
    counts = np.zeros(len(fiber))
    for p in draws:
        counts[index[p]] += 1
    return float(chisquare(counts).pvalue)


def run_ensemble_equivalence(g: GapSequence, n_max: int, z: Optional[float] = None, samples: int = 10**5,
                             seed: int = 0, alpha: float = 1e-3, n_min: int = 1,
                             budget: int = DEFAULT_TABLE_BUDGET, gaps_text: Optional[str] = None,
                             timing: bool = False) -> ExperimentReport:
    """Chi-square uniformity on every fiber ``n_min <= n <= n_max``.

    For each nonempty fiber: (i) ``samples`` grand-canonical draws, kept when
    ``N = n``; (ii) ``samples`` exact uniform draws.  With ``z = None`` each fiber
    uses the ``z`` whose mean weight is ``n``.  Significance ``alpha`` is split
    over all tests (Bonferroni).
    """
    if n_max > 14:
        raise DomainError("full-fiber enumeration is limited to n_max <= 14")
    start = time.perf_counter()
    rep_ = ExperimentReport("ensemble-equivalence", _gaps_text(g, gaps_text), "grand|uniform-n", seed)
    code = _EXP_CODES["ensemble-equivalence"]
    tests = []
    for n in range(n_min, n_max + 1):
        fiber = mdp_partitions_of(g, n)
        if not fiber:
            continue
        sid = f"{seed}:{TAG_SAMPLE}:{code}:{n}"
        uni = UniformSampler(g, n, None, budget).draw_many(stream(seed, TAG_SAMPLE, code, n, 0), samples)
        p_uni = _chi2_uniform(uni, fiber)
        zn = z if z is not None else (matching_z(g, n) if len(fiber) > 1 and n > g.gap(0) else 1.0)
        grand = [p for p in sample_grand_batch(g, zn, stream(seed, TAG_SAMPLE, code, n, 1), samples) if p.N == n]
        p_grand = _chi2_uniform(grand, fiber) if grand else float("nan")
        rep_.add_row(n, None, zn, 0, "p_uniform", p_uni, sid + ":0")
        rep_.add_row(n, None, zn, 1, "p_grand_conditioned", p_grand, sid + ":1")
        rep_.summary.append({"n": n, "fiber_size": len(fiber), "z": zn, "grand_kept": len(grand),
                             "p_uniform": p_uni, "p_grand_conditioned": p_grand})
        tests += [(n, "uniform", p_uni), (n, "grand", p_grand)]
    level = alpha / max(len(tests), 1)
    rep_.meta.update({"alpha": alpha, "bonferroni_level": level, "tests": len(tests), "samples": samples})
    for n, kind, p in tests:
        rep_.check(f"{kind} n={n} p > {level:.3g}", p, level, p > level)
    if timing:
        rep_.wall_clock = time.perf_counter() - start
    return rep_


def run_rwre_pipeline(params: RwreGapParams, seed: int = 0, length: int = 10**5,
                      n_grid: Sequence[int] = (10**6,), reps: int = 50, t0: float = 0.05,
                      q_band: Optional[tuple] = None, drift_tol: Optional[float] = None,
                      threshold: Optional[float] = None, budget: int = DEFAULT_TABLE_BUDGET,
                      workers: int = 1, timing: bool = False) -> ExperimentReport:
    """Random-environment gaps end to end.

    Builds ``length`` gaps from the walk, estimates ``(q, beta)``, compares the
    walk's speed with the drift formula and runs the uniform limit-shape
    experiment against ``phi`` with ``q = a + b v``.
    """
    start = time.perf_counter()
    text = format_gap_spec(Rwre(params, seed))
    g = materialize_rwre_gaps(params, seed, length)
    from .gapseq import estimate_regularity

    q_hat, beta_hat = estimate_regularity(g, length)
    meta = dict(g.metadata)
    v_emp = meta["walk_end"] / length
    q_pred = meta["q_predicted"]
    shape = run_limit_shape_experiment(g, q_pred, n_grid, reps, "uniform-n", seed, t0=t0,
                                       threshold=threshold, budget=budget, workers=workers,
                                       gaps_text=text, exp="rwre-pipeline")
    rep_ = ExperimentReport("rwre-pipeline", text, "uniform-n", seed, rows=shape.rows,
                            summary=shape.summary, checks=[], meta=shape.meta)
    sid = f"{seed}:{TAG_WALK}"
    rep_.add_row(None, length, None, 0, "q_hat", float(q_hat), sid)
    rep_.add_row(None, length, None, 0, "beta_hat", float(beta_hat), sid)
    rep_.add_row(None, length, None, 0, "v_empirical", v_emp, sid)
    meta.update({"length": length, "q_hat": float(q_hat), "beta_hat": float(beta_hat), "v_empirical": v_emp})
    rep_.meta["rwre"] = meta
    if q_band is not None:
        rep_.check(f"q_hat in [{q_band[0]}, {q_band[1]}]", float(q_hat), list(q_band),
                   q_band[0] <= q_hat <= q_band[1])
    if drift_tol is not None:
        err = abs(v_emp - meta["v"])
        rep_.check(f"|X_k/k - v| <= {drift_tol}", err, drift_tol, err <= drift_tol)
    rep_.checks += shape.checks
    if meta["exploratory"]:
        rep_.meta["label"] = "exploratory"
    if timing:
        rep_.wall_clock = time.perf_counter() - start
    return rep_
