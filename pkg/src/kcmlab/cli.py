"""Command-line entry point: classify, bootstrap, kcm, droplet, chain.

Every output starts with '#' metadata lines (version, config hash, seed and
all parameters) so that a run can be reproduced bit for bit.  Scientific
FAIL findings are data and exit 0; operational errors exit 2.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .bootstrap import Region, estimate_T_U
from .chains import (ChainSizeError, ChainSpec, random_spec, relaxation_time, verify_hitting_bound,
                     verify_poincare, verify_scaling_reduction)
from .difficulty import OracleBudgetExhausted, family_difficulties
from .droplet import DropletError, droplet_check, verify_supercritical_rectangle
from .family import BUILTIN_NAMES, FamilyError, builtin, parse_family, serialize
from .geometry import Direction, SemicircleError, classify_tri, stable_set
from .kcm import KcmParams, estimate_tau0, stationarity_check


class CliError(Exception):
    pass


# ----------------------------------------------------------------------------
# shared plumbing


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    """'1-8' or '2,4,8'."""
    try:
        if "-" in text and "," not in text:
            a, b = text.split("-")
            return list(range(int(a), int(b) + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers like '1-8' or '2,4', got {text!r}") from None


def _direction(text):
    try:
        x, y = (int(t) for t in text.split(","))
        return Direction.of(x, y)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a direction 'x,y', got {text!r}") from None


def load_family(args):
    if args.family_file:
        try:
            with open(args.family_file) as fh:
                return parse_family(fh.read())
        except OSError as exc:
            raise CliError(f"cannot read family file: {exc}") from None
    if args.builtin:
        return builtin(args.builtin)
    raise CliError("give --builtin or --family-file")


def header(command: str, config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str)
    digest = hashlib.sha256(blob.encode()).hexdigest()[:16]
    lines = [f"# kcmlab {__version__}", f"# command: {command}", f"# config_hash: {digest}",
             f"# seed: {config.get('seed', 0)}"]
    for k in sorted(config):
        if k == "seed":
            continue
        v = config[k]
        if isinstance(v, str) and "\n" in v:
            v = " | ".join(s for s in v.strip().splitlines())
        lines.append(f"# {k}: {v}")
    return "\n".join(lines) + "\n"


def _config(args, family=None, **extra) -> dict:
    skip = {"func", "out", "jobs", "builtin", "family_file", "command"}
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    if family is not None:
        cfg["family"] = serialize(family)
    cfg.update(extra)
    return cfg


def _emit(args, text: str, summary: list) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        for line in summary:
            print(line)
    else:
        sys.stdout.write(text)


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ----------------------------------------------------------------------------
# classify


def classification_line(family, rep=None, label=None) -> str:
    label = label or classify_tri(family)
    if label.tri == "supercritical":
        return f"supercritical, {label.rooted}"
    if label.tri == "subcritical":
        return "subcritical"

    def show(sym, v):
        return f"{sym}={v.k}" if v.is_finite else f"{sym}>{v.bound} (bound)"

    rooted = {"alpha-rooted": "α-rooted", "beta-unrooted": "β-unrooted"}.get(rep.critical_label, rep.critical_label)
    return ", ".join(["critical", show("α", rep.alpha), show("β", rep.beta), rooted,
                      "balanced" if rep.balanced else "unbalanced"])


def cmd_classify(args) -> int:
    family = load_family(args)
    S = stable_set(family)
    label = classify_tri(family, S)
    cfg = _config(args, family)
    out = io.StringIO()
    out.write(header("classify", cfg))
    out.write(f"stable_set: {S.serialize().strip()}\n")
    rep = None
    if label.tri != "subcritical":
        rep = family_difficulties(family, bound=args.bound, window_radius=args.window,
                                  line_span=args.line_span)
        out.write(f"oracle: bound={rep.search_bound} window_radius={rep.window_radius} "
                  f"line_span={rep.line_span}\n")
        out.write(f"alpha: {rep.alpha} (semicircle midpoint {rep.alpha_midpoint})\n")
        out.write(f"beta: {rep.beta} (semicircle midpoint {rep.beta_midpoint})\n")
        out.write(rep.to_csv())
    line = classification_line(family, rep, label)
    out.write(f"result: {line}\n")
    _emit(args, out.getvalue(), [line])
    return 0


# ----------------------------------------------------------------------------
# bootstrap


def cmd_bootstrap(args) -> int:
    family = load_family(args)
    region = Region.torus(args.torus)
    out = io.StringIO()
    out.write(header("bootstrap", _config(args, family)))
    out.write("q,trials,median_rounds,ci_low,ci_high,censored,torus\n")
    summary = []
    for q in args.q:
        est = estimate_T_U(family, q, region, args.trials, args.t_max, seed=args.seed, jobs=args.jobs)
        med = f"≥{args.t_max}" if est.exceeds_t_max else str(est.median_rounds)
        lo = "" if est.ci_low is None else f"{est.ci_low:g}"
        hi = "" if est.ci_high is None else f"{est.ci_high:g}"
        out.write(f"{q:g},{est.trials},{med},{lo},{hi},{est.censored},{args.torus}x{args.torus}\n")
        summary.append(f"q={q:g}: median {med}")
    _emit(args, out.getvalue(), summary)
    return 0


# ----------------------------------------------------------------------------
# kcm


def cmd_kcm(args) -> int:
    family = load_family(args)
    label = classify_tri(family)
    out = io.StringIO()
    out.write(header("kcm", _config(args, family)))
    cols = "q,trials,mean_tau0,stderr,censored,fraction_zero,note"
    if args.stationarity:
        cols += ",density,sigma,z,chi2,chi2_dof,flips_01,flips_10,violations,stationarity"
    out.write(cols + "\n")
    summary = []
    if label.tri == "subcritical" and not args.force:
        msg = "warning: subcritical family, the KCM is not ergodic at small q; skipped (use --force)"
        print(msg, file=sys.stderr)
        out.write(f"# skipped: {msg}\n")
        _emit(args, out.getvalue(), [msg])
        return 0
    region = Region.torus(args.torus)
    for q in args.q:
        params = KcmParams(family, q, region, args.t_max, args.seed)
        est = estimate_tau0(params, args.trials, jobs=args.jobs)
        row = (f"{q:g},{est.trials},{est.mean!r},{est.stderr!r},{est.censored},"
               f"{est.fraction_zero!r},{est.note}")
        if args.stationarity:
            horizon = args.horizon if args.horizon is not None else args.t_max
            sp = KcmParams(family, q, region, horizon, args.seed)
            st = stationarity_check(sp, burn_in=args.burn_in, horizon=horizon,
                                    trials=args.stat_trials, snapshots=args.snapshots, jobs=args.jobs)
            row += (f",{st.density!r},{st.sigma!r},{st.z!r},{st.chi2!r},{st.chi2_dof},"
                    f"{st.flips_01},{st.flips_10},{st.witness_violations},"
                    f"{'PASS' if st.passed else 'FAIL'}")
        out.write(row + "\n")
        summary.append(f"q={q:g}: mean tau0 {est.mean:.4g} +- {est.stderr:.2g} {est.note}".rstrip())
    _emit(args, out.getvalue(), summary)
    return 0


# ----------------------------------------------------------------------------
# droplet


def cmd_droplet(args) -> int:
    family = load_family(args)
    label = classify_tri(family)
    out = io.StringIO()
    if label.tri == "supercritical":
        out.write(header("droplet", _config(args, family, redirected="supercritical rectangle")))
        rep = verify_supercritical_rectangle(family, args.n1, args.n2)
        out.write(rep.serialize())
        line = f"rectangle: left {'PASS' if rep.left else 'FAIL'}, right {'PASS' if rep.right else 'FAIL'}"
        out.write(f"result: {line}\n")
        _emit(args, out.getvalue(), [line])
        return 0
    mode = args.mode or ("generalized" if args.kind == "generalized" else "advance-width")
    out.write(header("droplet", _config(args, family, mode=mode)))
    # random placement draws anchor points on the external boundaries from the seed
    rng = np.random.default_rng(args.seed) if args.placement == "random" else None
    placement = "middle" if args.placement == "random" else args.placement
    run = droplet_check(family, args.u, args.kind, args.w, args.length, mode,
                        lam_cap=args.lam_cap, drop_strip=args.drop_strip,
                        placement=placement, rng=rng)
    out.write(f"direction: {run.u}\n")
    out.write(run.ring.serialize())
    for v in run.ring.directions:
        vor = run.voracious[v]
        z = " ".join(f"{x},{y}" for x, y in vor.Z)
        out.write(f"voracious {v}: status={vor.status} alpha={vor.alpha_v} lambda={vor.lam} Z=[{z}]\n")
    out.write(f"helping_sets: {len(run.helping)}\n")
    out.write(run.report.serialize())
    out.write(f"result: {run.status}\n")
    _emit(args, out.getvalue(), [f"droplet {mode}: {run.status}"])
    return 0


# ----------------------------------------------------------------------------
# chain


def _chain_relax(args, out, summary):
    out.write("kind,n,q,gap,relaxation_time,method,tolerance\n")
    for q in args.q:
        col = []
        for n in args.n:
            r = relaxation_time(ChainSpec.standard(args.kind, n, q))
            out.write(f"{args.kind},{n},{q:g},{r.gap!r},{r.relaxation_time!r},{r.method},{r.tolerance:g}\n")
            col.append(r.relaxation_time)
        mono = all(b >= a * (1 - 1e-12) for a, b in zip(col, col[1:]))
        summary.append(f"q={q:g}: relaxation times {'monotone' if mono else 'not monotone'} in n")


def _chain_poincare(args, out, summary):
    rng = np.random.default_rng(args.seed)
    specs = [random_spec(args.kind, rng, n_max=args.max_sites, s_max=args.max_states)
             for _ in range(args.specs)]
    reps = _map(lambda t: verify_poincare(t[1], args.trials, seed=args.seed + t[0]),
                list(enumerate(specs)), args.jobs)
    out.write("kind,index,n,q_digest,T_std,T_gen,worst_ratio,violations,unscaled_violations\n")
    total = unscaled = 0
    for i, (s, r) in enumerate(zip(specs, reps)):
        v = r.violations + (0 if r.gap_bound_ok else 1)
        total += v
        unscaled += r.unscaled_violations
        out.write(f"{args.kind},{i},{s.n},{s.digest()},{r.T_std!r},{r.T_gen!r},{r.worst_ratio!r},"
                  f"{v},{r.unscaled_violations}\n")
    summary.append(f"violations: {total}")
    summary.append(f"violations without the 1/q factor (not asserted): {unscaled}")


def _chain_scaling(args, out, summary):
    out.write("kind,n,q,levels,T_std,T_projected,T_gen,bound,margin,homogeneous_equal,inequality_ok,method\n")
    for q in args.q:
        for n in args.n:
            r = verify_scaling_reduction(n, q, args.kind)
            out.write(f"{args.kind},{n},{q:g},{r.levels},{r.T_std!r},{r.T_projected!r},{r.T_gen!r},"
                      f"{r.bound!r},{r.margin!r},{r.homogeneous_equal},{r.inequality_ok},{r.method}\n")
            summary.append(f"n={n} q={q:g}: equality {'exact' if r.homogeneous_equal else 'FAIL'}, "
                           f"inequality margin {r.margin:.6g}")


def _chain_hitting(args, out, summary):
    if args.kind != "east":
        raise CliError("the hitting bound check runs on the East chain")
    out.write("kind,n,q,mean_hitting,relaxation_time,bound,margin,holds\n")
    for q in args.q:
        for n in args.n:
            r = verify_hitting_bound(n, q)
            out.write(f"east,{n},{q:g},{r.mean_hitting!r},{r.relaxation_time!r},{r.bound!r},"
                      f"{r.margin!r},{r.holds}\n")
            state = "bound holds" if r.holds else "bound FAILS"
            summary.append(f"n={n} q={q:g}: {state}, margin {r.margin:.6g}")


def cmd_chain(args) -> int:
    out = io.StringIO()
    out.write(header("chain", _config(args)))
    summary = []
    {"relax": _chain_relax, "poincare": _chain_poincare,
     "scaling": _chain_scaling, "hitting": _chain_hitting}[args.check](args, out, summary)
    for line in summary:
        out.write(f"# {line}\n")
    _emit(args, out.getvalue(), summary)
    return 0


# ----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kcmlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"kcmlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, family=True):
        if family:
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--builtin", choices=BUILTIN_NAMES)
            g.add_argument("--family-file")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--out")

    c = sub.add_parser("classify", help="stable set, difficulties and class labels")
    common(c)
    c.add_argument("--bound", type=int, default=4)
    c.add_argument("--window", type=int, default=None, help="oracle window radius (default 8*radius)")
    c.add_argument("--line-span", type=int, default=64)
    c.set_defaults(func=cmd_classify)

    b = sub.add_parser("bootstrap", help="median infection time of the origin")
    common(b)
    b.add_argument("--q", type=_floats, default=[0.05, 0.1, 0.2])
    b.add_argument("--torus", type=int, default=64)
    b.add_argument("--trials", type=int, default=100)
    b.add_argument("--t-max", type=int, default=1000)
    b.set_defaults(func=cmd_bootstrap)

    k = sub.add_parser("kcm", help="persistence time and stationarity of the KCM")
    common(k)
    k.add_argument("--q", type=_floats, default=[0.2])
    k.add_argument("--torus", type=int, default=64)
    k.add_argument("--trials", type=int, default=500)
    k.add_argument("--t-max", type=float, default=1000.0)
    k.add_argument("--stationarity", action="store_true")
    k.add_argument("--stat-trials", type=int, default=8)
    k.add_argument("--burn-in", type=float, default=0.0)
    k.add_argument("--horizon", type=float, default=None)
    k.add_argument("--snapshots", type=int, default=8)
    k.add_argument("--force", action="store_true", help="run even for subcritical families")
    k.set_defaults(func=cmd_kcm)

    d = sub.add_parser("droplet", help="half-ring spreading or supercritical rectangle growth")
    common(d)
    d.add_argument("--u", type=_direction, default=None, help="semicircle midpoint 'x,y'")
    d.add_argument("--kind", choices=("plain", "elongated", "generalized"), default="plain")
    d.add_argument("--w", type=int, default=6)
    d.add_argument("--length", type=int, default=40)
    d.add_argument("--mode", choices=("advance-one", "advance-width", "corollary", "generalized"))
    d.add_argument("--lam-cap", type=int, default=32)
    d.add_argument("--drop-strip", type=int, default=None)
    d.add_argument("--placement", choices=("middle", "low", "high", "random"), default="middle")
    d.add_argument("--n1", type=int, default=8)
    d.add_argument("--n2", type=int, default=8)
    d.set_defaults(func=cmd_droplet)

    ch = sub.add_parser("chain", help="exact East and FA-1f chain spectra")
    common(ch, family=False)
    ch.add_argument("--kind", choices=("east", "fa1f"), default="east")
    ch.add_argument("--check", choices=("relax", "poincare", "scaling", "hitting"), default="relax")
    ch.add_argument("--n", type=_ints, default=list(range(1, 9)))
    ch.add_argument("--q", type=_floats, default=[0.3])
    ch.add_argument("--specs", type=int, default=50)
    ch.add_argument("--trials", type=int, default=20)
    ch.add_argument("--max-sites", type=int, default=6)
    ch.add_argument("--max-states", type=int, default=3)
    ch.set_defaults(func=cmd_chain)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, FamilyError, LookupError, OracleBudgetExhausted, DropletError,
            SemicircleError, ChainSizeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
