"""Command-line front end: every pipeline as a subcommand.

Subcommands: fowler, floquet, index-set, expand, verify, construct.
Parameters come from flags or an INI-style flat config file (`--config`),
with flags winning.  Reports are JSON (floats via repr: shortest exact
round-trip), orbits and fields are CSV.  FOWLER_LAB_THREADS caps internal
parallelism.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys

import numpy as np

from . import acceptance, cylinder, expansion, floquet, index_set, spheres
from .fowler import (FowlerParams, constant_orbit, constant_solution,
                     orbit_to_csv, orbit_to_json, periodic_orbit,
                     period_quadrature)


def _json_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_json(payload, path):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")


def _load_config(path):
    parser = configparser.ConfigParser()
    with open(path) as fh:
        text = fh.read()
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    parser.read_string(text)
    merged = {}
    for section in parser.sections():
        merged.update(dict(parser[section]))
    return merged


def _apply_config(args, parser):
    """Fill argparse defaults from the config file; explicit flags win."""
    if not getattr(args, "config", None):
        return args
    sub = parser._subparser_map[args.command]
    actions = {a.dest: a for a in sub._actions}
    # accept alias option spellings (e.g. "modes" for max-degree)
    aliases = {opt.lstrip("-").replace("-", "_"): a.dest
               for a in sub._actions for opt in a.option_strings}
    conf = _load_config(args.config)
    for key, raw in conf.items():
        dest = key.replace("-", "_")
        dest = aliases.get(dest, dest)
        if dest not in actions or not hasattr(args, dest):
            raise SystemExit(f"unknown config key: {key}")
        if getattr(args, dest) != actions[dest].default:
            continue  # explicitly set on the command line
        action = actions[dest]
        if isinstance(action, (argparse._StoreTrueAction,
                               argparse._StoreFalseAction)):
            value = raw.strip().lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            value = action.type(raw)
        else:
            value = raw
        setattr(args, dest, value)
    return args


def _params_from(args) -> FowlerParams:
    if args.problem == "ckn":
        if args.a is None or args.b is None:
            raise SystemExit("CKN problem requires --a and --b")
        return FowlerParams.ckn(args.n, args.a, args.b)
    return FowlerParams.conformal(args.n, args.k0)


def _orbit_from(args):
    params = _params_from(args)
    if args.constant:
        return constant_orbit(params)
    xistar = constant_solution(params)
    eps = args.epsilon if args.epsilon is not None else args.epsilon_frac * xistar
    return periodic_orbit(eps, params, tol=args.orbit_tol)


def _ensure_outdir(args):
    os.makedirs(args.outdir, exist_ok=True)
    return args.outdir


def _add_common(sub):
    sub.add_argument("--config", help="INI-style flat config file")
    sub.add_argument("--problem", choices=("conformal", "ckn"),
                     default="conformal")
    sub.add_argument("--n", type=int, default=5, help="ambient dimension")
    sub.add_argument("--k0", type=float, default=1.0,
                     help="curvature value at the singularity (conformal)")
    sub.add_argument("--a", type=float, default=None, help="CKN parameter a")
    sub.add_argument("--b", type=float, default=None, help="CKN parameter b")
    sub.add_argument("--epsilon", type=float, default=None,
                     help="orbit minimum (absolute)")
    sub.add_argument("--epsilon-frac", type=float, default=0.5,
                     help="orbit minimum as a fraction of the constant solution")
    sub.add_argument("--constant", action="store_true",
                     help="use the constant solution")
    sub.add_argument("--orbit-tol", type=float, default=1e-10)
    sub.add_argument("--outdir", default=".")
    sub.add_argument("--seed", type=int, default=20240801)


def _cmd_fowler(args):
    outdir = _ensure_outdir(args)
    orbit = _orbit_from(args)
    orbit_to_csv(orbit, os.path.join(outdir, "orbit.csv"))
    orbit_to_json(orbit, os.path.join(outdir, "orbit.json"))
    summary = {"period": orbit.period, "energy": orbit.energy,
               "max_xi": float(np.max(orbit.xi)), "epsilon": orbit.epsilon,
               "is_constant": orbit.is_constant,
               "energy_drift": orbit.energy_drift}
    if orbit.is_constant:
        params = orbit.params
        omega = math.sqrt(params.q * (params.e - 1.0))
        summary["mode0_rotation"] = omega
        print(f"constant solution xi* = {orbit.epsilon!r}, mode-0 rotation "
              f"omega = {omega!r}")
    else:
        summary["period_quadrature"] = period_quadrature(orbit.epsilon,
                                                         orbit.params)
        print(f"T = {orbit.period!r}  H = {orbit.energy!r}  "
              f"max xi = {summary['max_xi']!r}")
    write_json(summary, os.path.join(outdir, "orbit_summary.json"))
    return 0


def _cmd_floquet(args):
    outdir = _ensure_outdir(args)
    orbit = _orbit_from(args)
    data = floquet.exponent_sequence(orbit, args.modes, with_factors=True)
    rows = []
    print(f"{'i':>3} {'lambda':>10} {'type':>5} {'sigma/omega':>14} "
          f"{'bound margin':>13}")
    for d in data:
        if orbit.params.kind == "conformal":
            margin = (d.sigma**2 - (d.lam - orbit.params.n + 2)
                      if orbit.is_constant
                      else d.sigma**2 - (d.lam - (3 * orbit.params.n - 2) / 2))
        else:
            margin = float("nan")
        rate = d.sigma if d.sigma is not None else d.omega
        print(f"{d.index:>3} {d.lam:>10.4f} {d.type:>5} {rate:>14.8f} "
              f"{margin:>13.6f}")
        rows.append(dict(d.to_dict(), bound_margin=margin))
    write_json({"params": orbit.params.describe(), "epsilon": orbit.epsilon,
                "period": orbit.period, "modes": rows},
               os.path.join(outdir, "floquet.json"))
    return 0


def _cmd_index_set(args):
    outdir = _ensure_outdir(args)
    orbit = _orbit_from(args)
    count = spheres.index_of_last_degree(orbit.params.n, args.max_degree) + 1
    data = floquet.exponent_sequence(orbit, count)
    iset = index_set.generate([d.sigma for d in data], args.cutoff,
                              tol=args.resonance_tol,
                              degrees=[d.degree for d in data])
    singles, multis, resonances = index_set.split(iset)
    payload = dict(iset.to_dict(), singles=singles.tolist(),
                   multi_sums=multis.tolist(), resonances=resonances.tolist(),
                   angular_normalization="pole (zonal value 1 at <axis,theta>=1)")
    write_json(payload, os.path.join(outdir, "index_set.json"))
    print("mu:", " ".join(repr(float(v)) for v in iset.values))
    if len(resonances):
        print("resonant:", " ".join(repr(float(v)) for v in resonances))
    for w in iset.warnings:
        print("warning:", w)
    return 0


def _cmd_expand(args):
    outdir = _ensure_outdir(args)
    orbit = _orbit_from(args)
    if orbit.params.kind != "conformal":
        raise SystemExit("expand applies to the conformal problem")
    a = np.zeros(orbit.params.n)
    a[0] = args.amplitude
    terms = expansion.translate_expansion(orbit, a, args.order)
    payload = {"order": args.order, "amplitude": args.amplitude,
               "angular_normalization": "pole (zonal value 1 at <axis,theta>=1)",
               "terms": [t.to_dict() for t in terms]}
    write_json(payload, os.path.join(outdir, "expansion.json"))
    ts = np.linspace(args.t0, args.t0 + args.window, 257)
    svals = np.linspace(-1.0, 1.0, 33)
    total = orbit.value(ts)[:, None] + expansion.evaluate_terms(terms, ts, svals)
    with open(os.path.join(outdir, "expansion_eval.csv"), "w") as fh:
        fh.write("t," + ",".join(f"s_{s:.4f}" for s in svals) + "\n")
        for i, t in enumerate(ts):
            fh.write(",".join([repr(float(t))]
                              + [repr(float(v)) for v in total[i]]) + "\n")
    print(f"wrote {len(terms)} terms (order {args.order})")
    return 0


def _parse_components(args):
    degrees = [int(x) for x in str(args.kdegree).split(",")]
    kappas = [float(x) for x in str(args.kappa).split(",")]
    betas = [float(x) for x in str(args.beta).split(",")]
    if not len(degrees) == len(kappas) == len(betas):
        raise SystemExit("--kdegree/--kappa/--beta lists must have equal length")
    return tuple(zip(degrees, kappas, betas))


def _cmd_construct(args):
    outdir = _ensure_outdir(args)
    orbit = _orbit_from(args)
    if orbit.params.kind == "conformal":
        components = _parse_components(args)
        profile = cylinder.ForcingProfile(k0=orbit.params.c,
                                          components=components)
        v, trace = cylinder.contraction_construct(
            orbit, profile, t0=args.t0, window=args.window,
            max_degree=args.max_degree, tol=args.tol, h=args.h)
        ref = cylinder.orbit_field(orbit, v.t, max_degree=args.max_degree)
        diff = v.combination(ref, 1.0, -1.0)
        base_rate = profile.min_rate
    else:
        v, w_hat, trace = cylinder.ckn_construct(
            orbit, args.nu, amplitude=float(str(args.kappa).split(",")[0]),
            t0=args.t0, window=args.window, max_degree=args.max_degree,
            tol=args.tol, h=args.h)
        diff = v.combination(w_hat, 1.0, -1.0)
        base_rate = args.nu
    lo = v.t[0] + 0.5
    hi = lo + max(1, int((v.t[-1] - 1.5 - lo) / orbit.period)) * orbit.period
    fit = cylinder.decay_rate_fit(diff, t_window=(lo, hi))
    v.to_csv(os.path.join(outdir, "field.csv"))
    report = {"trace": trace.to_dict(), "fit": fit.to_dict(),
              "target_rate": base_rate,
              "angular_normalization": "pole (zonal value 1 at <axis,theta>=1)",
              "params": orbit.params.describe(), "epsilon": orbit.epsilon}
    write_json(report, os.path.join(outdir, "construct.json"))
    print(f"converged = {trace.converged} after {trace.iterations} iterations"
          f" (t0 = {trace.t0})")
    print(f"fitted decay slope {float(fit.slope)!r} (target {base_rate!r}, "
          f"log-corrected: {fit.log_corrected})")
    return 0 if trace.converged else 1


def _cmd_verify(args):
    outdir = _ensure_outdir(args)
    names = args.suite or ["all"]
    reports = acceptance.run_suite(names)
    # timings stay on stdout: the JSON report is byte-reproducible per seed
    stable = [{k: v for k, v in r.items() if k != "runtime_s"}
              for r in reports]
    write_json(stable, os.path.join(outdir, "verify.json"))
    failed = 0
    for r in reports:
        status = "PASS" if r["passed"] else "FAIL"
        failed += not r["passed"]
        print(f"{status}  {r['name']}  ({r['runtime_s']:.2f}s)")
    if failed:
        print(f"{failed} criterion(s) failed; details in verify.json")
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fowlerlab",
        description="Fowler orbits, Floquet spectra, index sets, expansion "
                    "terms and cylinder constructions")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("fowler", help="compute one periodic orbit")
    _add_common(p)
    p.set_defaults(func=_cmd_fowler)

    p = subs.add_parser("floquet", help="mode spectrum at an orbit")
    _add_common(p)
    p.add_argument("--modes", type=int, default=12)
    p.set_defaults(func=_cmd_floquet)

    p = subs.add_parser("index-set", help="exponent sums and resonances")
    _add_common(p)
    p.add_argument("--cutoff", type=float, default=4.0)
    p.add_argument("--max-degree", type=int, default=3)
    p.add_argument("--resonance-tol", type=float, default=1e-8)
    p.set_defaults(func=_cmd_index_set)

    p = subs.add_parser("expand", help="translate-family expansion terms")
    _add_common(p)
    p.add_argument("--order", type=int, choices=(1, 2), default=2)
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--t0", type=float, default=cylinder.DEFAULT_T0)
    p.add_argument("--window", type=float, default=cylinder.DEFAULT_WINDOW)
    p.set_defaults(func=_cmd_expand)

    p = subs.add_parser("construct", help="contraction construction run")
    _add_common(p)
    p.add_argument("--beta", default="1.5",
                   help="forcing decay rate(s), comma separated (conformal)")
    p.add_argument("--nu", type=float, default=2.4,
                   help="target decay rate (CKN)")
    p.add_argument("--kappa", default="0.05",
                   help="forcing / perturbation amplitude(s), comma separated")
    p.add_argument("--kdegree", default="1",
                   help="harmonic degree(s) of the forcing, comma separated")
    p.add_argument("--max-degree", "--modes", dest="max_degree", type=int,
                   default=2, help="largest retained zonal degree")
    p.add_argument("--t0", type=float, default=cylinder.DEFAULT_T0)
    p.add_argument("--window", type=float, default=cylinder.DEFAULT_WINDOW)
    p.add_argument("--h", type=float, default=cylinder.DEFAULT_H,
                   help="t-grid spacing")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=_cmd_construct)

    p = subs.add_parser("verify", help="run acceptance criteria")
    _add_common(p)
    p.add_argument("--suite", action="append",
                   help="criterion name (repeatable); default all")
    p.set_defaults(func=_cmd_verify)

    parser._subparser_map = {name: sp for name, sp in
                             subs.choices.items()}
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args = _apply_config(args, parser)
    try:
        return args.func(args)
    except (ValueError, KeyError, RuntimeError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record, sort_keys=True))
        return 1


if __name__ == "__main__":
    sys.exit(main())
