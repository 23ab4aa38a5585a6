"""Command line entry point: ``mdpart <command> ...``.

Commands: ``count``, ``constants``, ``shape``, ``sample``, ``rwre`` and
``experiment``.  ``experiment`` exits with status 2 when a threshold check fails.
"""

from __future__ import annotations

import argparse
import json
import sys

from .counting import count_mdp, count_mdp_by_k
from .errors import GapSpecError
from .gapseq import Constant, Explicit, GapSequence, IidRandom, Periodic, Rwre, format_gap_spec, parse_gap_spec
from .harness import (run_ensemble_equivalence, run_limit_shape_experiment, run_parts_experiment,
                      run_rwre_pipeline)
from .rng import TAG_SAMPLE
from .rwre import EnvironmentSpec, RwreGapParams, materialize_rwre_gaps, parse_a_sequence, parse_env_dist
from .sampler import CanonicalZK, GrandZ, SamplerConfig, UniformN, UniformNK
from .shape import Scaling, ShapeConstants, horizon, sample_curve


def _int(text):
    """Integers, also written as ``1e6``."""
    v = float(text)
    if v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {text}")
    return int(v)


def _int_list(text):
    return [_int(t) for t in text.split(",") if t]


def _gaps(text):
    try:
        return parse_gap_spec(text)
    except GapSpecError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def nominal_gap(spec) -> float:
    """Limiting gap ``q`` implied by a spec, used when ``--q`` is not given."""
    if isinstance(spec, Constant):
        return float(spec.q)
    if isinstance(spec, Periodic):
        return sum(spec.pattern) / len(spec.pattern)
    if isinstance(spec, Explicit):
        return float(spec.tail)
    if isinstance(spec, IidRandom):
        return float(spec.dist.mean)
    return spec.params.predicted_gap()


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------- #
# commands

def cmd_count(a):
    g = GapSequence(a.gaps)
    if a.k is not None:
        value = count_mdp(g, a.n, a.k)
        res = {"gaps": format_gap_spec(a.gaps), "n": a.n, "k": a.k, "count": str(value)}
    else:
        by_k = count_mdp_by_k(g, a.n)
        value = sum(by_k)
        res = {"gaps": format_gap_spec(a.gaps), "n": a.n, "count": str(value),
               "by_k": {str(k): str(c) for k, c in enumerate(by_k) if c}}
    print(json.dumps(res, sort_keys=True) if a.format == "json" else value)
    return 0


def cmd_constants(a):
    print(json.dumps(ShapeConstants.for_q(a.q).as_dict(), sort_keys=True))
    return 0


def cmd_shape(a):
    T = horizon(a.q) if a.T in (None, "tq") else float(a.T)
    pts = sample_curve(a.q, T, Scaling(a.scaling), a.points, a.t_cap)
    lines = ["x,y"] + [f"{x!r},{y!r}" for x, y in pts]
    _emit("\n".join(lines) + "\n", a.out)
    return 0


def cmd_sample(a):
    e = a.ensemble
    need = {"canonical": ("z", "k"), "grand": ("z",), "uniform-nk": ("n", "k"), "uniform-n": ("n",)}[e]
    for key in need:
        if getattr(a, key) is None:
            raise SystemExit(f"--{key} is required for {e}")
    ens = {"canonical": lambda: CanonicalZK(a.z, a.k), "grand": lambda: GrandZ(a.z),
           "uniform-nk": lambda: UniformNK(a.n, a.k), "uniform-n": lambda: UniformN(a.n)}[e]()
    cfg = SamplerConfig(GapSequence(a.gaps), ens, a.seed)
    draws = cfg.draw_many(a.count, workers=a.workers)
    out = []
    if a.format == "csv":
        out.append("rep,parts,N,K,seed_stream")
    for i, p in enumerate(draws):
        sid = f"{a.seed}:{TAG_SAMPLE}:{i}"
        if a.format == "jsonl":
            out.append(json.dumps({"rep": i, "parts": list(p.parts), "N": p.N, "K": p.K, "seed_stream": sid}))
        else:
            out.append(f'{i},"{p.to_text()}",{p.N},{p.K},{sid}')
    _emit("\n".join(out) + "\n", a.out)
    return 0


def _rwre_params(a):
    a_vals, a_tail = parse_a_sequence(a.a)
    return RwreGapParams(EnvironmentSpec(parse_env_dist(a.dist), a.seed), tuple(a_vals), a_tail, a.b)


def cmd_rwre(a):
    params = _rwre_params(a)
    g = materialize_rwre_gaps(params, a.seed, a.length)
    text = format_gap_spec(Explicit(tuple(int(x) for x in g.gaps(a.length)), params.a_tail)) + "\n"
    meta = {k: g.metadata[k] for k in ("v", "kappa", "regime", "q_predicted", "error_bound", "exploratory")}
    meta["source"] = format_gap_spec(Rwre(params, a.seed))
    meta_text = json.dumps(meta, sort_keys=True) + "\n"
    if a.out:
        _emit(text, a.out)
        sys.stdout.write(meta_text)
    else:
        sys.stdout.write(text + meta_text)
    return 0


def cmd_experiment(a):
    spec = a.gaps
    if a.kind != "rwre-pipeline" and spec is None:
        raise SystemExit("--gaps is required")
    if a.kind == "limit-shape":
        q = a.q if a.q is not None else nominal_gap(spec)
        rep = run_limit_shape_experiment(GapSequence(spec), q, a.n or [10**4], a.reps, a.ensemble, a.seed,
                                         tau=a.tau, t0=a.t0, threshold=a.threshold, workers=a.workers,
                                         gaps_text=format_gap_spec(spec), timing=a.timing)
    elif a.kind == "parts-lln":
        q = a.q if a.q is not None else nominal_gap(spec)
        rep = run_parts_experiment(GapSequence(spec), q, a.n or [10**4], a.reps, a.seed, beta=a.beta,
                                   rel_tol=a.rel_tol, workers=a.workers, gaps_text=format_gap_spec(spec),
                                   timing=a.timing)
    elif a.kind == "ensemble-equivalence":
        rep = run_ensemble_equivalence(GapSequence(spec), a.n_max, a.z, a.samples, a.seed, alpha=a.alpha,
                                       gaps_text=format_gap_spec(spec), timing=a.timing)
    else:
        if not isinstance(spec, Rwre):
            raise SystemExit("rwre-pipeline needs --gaps rwre:...")
        band = tuple(float(x) for x in a.q_band.split(",")) if a.q_band else None
        rep = run_rwre_pipeline(spec.params, spec.seed, a.length, a.n or [10**6], a.reps, a.t0, band,
                                a.drift_tol, a.threshold, workers=a.workers, timing=a.timing)
    _emit(rep.to_csv() if a.format == "csv" else rep.to_json(), a.out)
    for c in rep.checks:
        print(("PASS " if c["passed"] else "FAIL ") + c["name"] + f" (value {c['value']!r})", file=sys.stderr)
    return 0 if rep.passed else 2


# --------------------------------------------------------------------------- #

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mdpart", description="Minimal-difference partitions: counting, "
                                 "sampling, limit shapes and experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", help="exact number of MDP partitions")
    p.add_argument("--gaps", type=_gaps, required=True)
    p.add_argument("--n", type=_int, required=True)
    p.add_argument("--k", type=_int)
    p.add_argument("--format", choices=("json", "plain"), default="plain")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("constants", help="T_q and theta_q as JSON")
    p.add_argument("--q", type=float, required=True)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("shape", help="limit-shape curve as CSV")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--T", default=None, help="horizon, or 'tq' for T_q (default)")
    p.add_argument("--scaling", choices=[s.value for s in Scaling], default="unit-area")
    p.add_argument("--points", type=_int, default=200)
    p.add_argument("--t-cap", type=float, default=10.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_shape)

    p = sub.add_parser("sample", help="random MDP partitions")
    p.add_argument("--gaps", type=_gaps, required=True)
    p.add_argument("--ensemble", choices=("uniform-n", "uniform-nk", "grand", "canonical"), required=True)
    p.add_argument("--n", type=_int)
    p.add_argument("--k", type=_int)
    p.add_argument("--z", type=float)
    p.add_argument("--count", type=_int, default=1)
    p.add_argument("--seed", type=_int, default=0)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("rwre", help="gap sequence from a random walk in a random environment")
    p.add_argument("--dist", required=True, help="e.g. two-point:p1=0.75,w=1")
    p.add_argument("--a", required=True, help="const:<int> or list:<v,...>;tail=<v>")
    p.add_argument("--b", type=_int, required=True)
    p.add_argument("--length", type=_int, required=True)
    p.add_argument("--seed", type=_int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rwre)

    p = sub.add_parser("experiment", help="Monte Carlo experiments")
    p.add_argument("kind", choices=("limit-shape", "parts-lln", "ensemble-equivalence", "rwre-pipeline"))
    p.add_argument("--gaps", type=_gaps)
    p.add_argument("--q", type=float, help="limiting gap (default: implied by --gaps)")
    p.add_argument("--n", type=_int_list, help="comma-separated n grid")
    p.add_argument("--reps", type=_int, default=50)
    p.add_argument("--seed", type=_int, default=0)
    p.add_argument("--ensemble", choices=("uniform-n", "typical-k", "uniform-nk"), default="uniform-n")
    p.add_argument("--tau", type=float)
    p.add_argument("--t0", type=float, default=0.05)
    p.add_argument("--threshold", type=float, help="median sup-deviation bound at the largest n")
    p.add_argument("--rel-tol", type=float, help="parts-lln relative tolerance")
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--n-max", type=_int, default=12)
    p.add_argument("--z", type=float)
    p.add_argument("--samples", type=_int, default=10**5)
    p.add_argument("--alpha", type=float, default=1e-3)
    p.add_argument("--length", type=_int, default=10**5)
    p.add_argument("--q-band", help="lo,hi for the rwre q_hat check")
    p.add_argument("--drift-tol", type=float)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="include wall-clock time (breaks byte identity)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
