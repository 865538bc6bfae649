"""Command-line front end: ``pairsolve <command> [options]``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

import numpy as np

from . import bethe, duality, meanfield, phase, verify
from .bethe import Picture
from .model import (Coupling, LevelSet, Sector, StateVector, build_hamiltonian,
                    diagonalize_sector, sector_spectrum, spectrum_csv, spectrum_json)
from .states import fidelity

TABLES = {
    1: {"P": 3, "decimals": 5},
    2: {"P": 6, "decimals": 8},
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers


def _float_list(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _levels(args) -> LevelSet:
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
        return LevelSet.from_dict(cfg.get("levels", {"preset": "paper8"}))
    if args.epsilon:
        return LevelSet.from_epsilon(_float_list(args.epsilon))
    if args.z2:
        return LevelSet.from_z2(_float_list(args.z2))
    if args.preset:
        return LevelSet.preset(args.preset)
    if args.L is not None:
        return verify.default_levels(args.L)
    return LevelSet.preset(args.default_preset)


def _sector(args, levels: LevelSet) -> Sector:
    L = levels.L
    if args.L is not None and args.L != L:
        raise UsageError(f"--L {args.L} does not match {L} levels")
    if args.M is not None and args.P is not None:
        raise UsageError("give only one of --M and --P")
    if args.M is not None:
        s = Sector(L, args.M)
    elif args.P is not None:
        s = Sector.from_holes(L, args.P)
    else:
        raise UsageError("one of --M or --P is required")
    if s.is_empty:
        raise UsageError(f"block M={s.M} outside [0, {L}]")
    return s


def _coupling(args, bethe_side: bool = True) -> Coupling:
    """Parse --G; an exact critical coupling gets --offset on the Bethe side."""
    if args.G is None:
        raise UsageError("--G is required")
    c = Coupling.parse(args.G)
    if bethe_side and c.target is not None and c.offset == 0 and c.integer_inverse() is not None:
        c = Coupling.exact(c.target, args.offset)
    return c


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("PAIRSOLVE_THREADS")
    return int(env) if env else 1


def _emit(args, text: str):
    if not text.endswith("\n"):
        text += "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, allow_nan=True)


def _fmt(args, default):
    return args.format or default


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args):
    levels = _levels(args)
    sector = _sector(args, levels)
    picture = Picture(args.picture)
    K = picture.root_count(sector)
    if args.seed:
        seed = [int(s) - 1 for s in args.seed.split(",") if s.strip()]
    else:
        seed = list(range(K))
    if len(seed) != K or len(set(seed)) != K or any(not 0 <= s < levels.L for s in seed):
        raise UsageError(f"--seed needs {K} distinct levels in 1..{levels.L}")
    rs = bethe.continuation_solve(seed, picture, levels, _coupling(args), sector, tol=args.tol)
    if _fmt(args, "json") == "json":
        d = bethe.rootset_to_json(rs)
        d["warnings"] = bethe.classify_roots(rs).warnings
        _emit(args, _dumps(d))
    else:
        _emit(args, bethe.table_csv([rs], args.decimals))


def cmd_spectrum(args):
    levels = _levels(args)
    sector = _sector(args, levels)
    rs = bethe.enumerate_spectrum(levels, _coupling(args), sector, args.picture, tol=args.tol,
                                  threads=_threads(args))
    fmt = _fmt(args, "json")
    if fmt == "json":
        _emit(args, _dumps([bethe.rootset_to_json(r) for r in rs]))
    elif fmt == "csv":
        _emit(args, bethe.table_csv(rs, args.decimals))
    else:
        _emit(args, table_text(rs, args.decimals))


def cmd_ed(args):
    levels = _levels(args)
    sector = _sector(args, levels)
    c = _coupling(args, bethe_side=False)
    E = sector_spectrum(levels, c, sector)
    if _fmt(args, "csv") == "json":
        _emit(args, _dumps(spectrum_json(E, levels, sector, c)))
    else:
        _emit(args, spectrum_csv(E))


def cmd_duality(args):
    levels = _levels(args)
    sector = _sector(args, levels)
    c = _coupling(args, bethe_side=False)
    rep = duality.verify_duality_pairing(args.relation, levels, c, sector)
    d = rep.to_json()
    d["target_reached"] = rep.n_reached
    d["kernel"] = rep.n_kernel
    _emit(args, _dumps(d))


def cmd_inversion(args):
    levels = _levels(args)
    sector = _sector(args, levels)
    c = _coupling(args)
    rs = bethe.enumerate_spectrum(levels, c, sector, args.picture, tol=args.tol,
                                  threads=_threads(args))
    images = [duality.inversion_map(r) for r in rs]
    ct = images[0].coupling if images else duality.inverted_coupling(c, args.picture, sector)
    E = np.sort([r.energy for r in images])
    ed = sector_spectrum(levels, ct, sector)
    out = {
        "G": str(c), "G_inverted": ct.value, "picture": args.picture,
        "max_residual": max((r.residual for r in images), default=0.0),
        "max_energy_deviation": float(np.max(np.abs(E - ed))) if E.size else 0.0,
        "rootsets": [bethe.rootset_to_json(r) for r in images],
    }
    _emit(args, _dumps(out))


def cmd_meanfield(args):
    levels = _levels(args)
    if args.M is None:
        raise UsageError("--M is required")
    G = float(_coupling(args, bethe_side=False))
    sol = meanfield.solve_gap_equations(levels, G, args.M, args.which)
    ov = None
    if sol.found:
        sector = Sector(levels.L, args.M)
        _, V = diagonalize_sector(build_hamiltonian(levels, G, sector))
        vec = V[:, 0] if args.which == "min" else V[:, -1]
        ov = fidelity(meanfield.projected_state(sol), StateVector(sector, vec))
    _emit(args, _dumps(sol.to_json(levels, ov)))


def cmd_phase(args):
    if args.grid:
        _emit(args, phase.raster_csv(phase.raster((args.gmin, args.gmax), args.ng, args.nx)))
        return
    if args.g_inv is not None and args.x is not None:
        gi, x = args.g_inv, args.x
    elif args.L is not None and args.M is not None and args.G is not None:
        p = phase.phase_point(args.L, args.M, float(Coupling.parse(args.G)))
        gi, x = p.g_inv, p.x
    else:
        raise UsageError("give --grid, or --g-inv and --x, or --L --M --G")
    region = phase.classify(gi, x)
    d = {"g_inv": gi, "x": x, "region": region}
    try:
        d["h0"], d["h_inf"] = phase.condensate_fractions(gi, x)
    except phase.RegionError:
        pass
    _emit(args, _dumps(d))


def table_text(rootsets, decimals: int) -> str:
    rows = sorted(rootsets, key=bethe.energy_from_roots)
    w = decimals + 5
    lines = [f"{'Energy':>{w}}  Bethe roots"]
    for r in rows:
        lines.append(f"{bethe._fixed(bethe.energy_from_roots(r), decimals):>{w}}  "
                     + bethe.format_roots(r.v, decimals).replace(",", ", "))
    return "\n".join(lines) + "\n"


def cmd_table(args):
    spec = TABLES[args.which]
    levels = LevelSet.preset("paper8")
    c = Coupling.exact(Fraction(1, 2), args.offset)
    sector = Sector.from_holes(8, spec["P"])
    rs = bethe.enumerate_spectrum(levels, c, sector, Picture.HOLE, tol=args.tol,
                                  threads=_threads(args))
    fmt = _fmt(args, "table")
    dec = spec["decimals"]
    if fmt == "json":
        _emit(args, _dumps([bethe.rootset_to_json(r) for r in
                            sorted(rs, key=bethe.energy_from_roots)]))
    elif fmt == "csv":
        _emit(args, bethe.table_csv(rs, dec))
    else:
        _emit(args, table_text(rs, dec))


def cmd_verify(args):
    fn = verify.SUITES[args.suite]
    kw = {}
    if args.suite in ("oracle", "reflection", "duality", "meanfield") and args.L is not None:
        kw["L"] = args.L
    if args.suite == "appendixB":
        kw["L_max"] = args.Lmax
    if args.suite in ("oracle", "collapse", "sigma", "asymmetry"):
        kw["threads"] = _threads(args)
    ok = True
    lines = []
    for chk in fn(**kw):
        ok &= chk.passed
        lines.append(chk.to_json())
    _emit(args, "\n".join(lines))
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# parser


def _common(p, default_preset="paper8"):
    g = p.add_argument_group("model")
    g.add_argument("--preset", help="level preset (paper8, paperN, inv4)")
    g.add_argument("--epsilon", help="comma-separated eps_l in (-1, 1)")
    g.add_argument("--z2", help="comma-separated z_l**2")
    g.add_argument("--config", help="JSON run-config file with a 'levels' entry")
    g.add_argument("--L", type=int)
    g.add_argument("--M", type=int)
    g.add_argument("--P", type=int)
    g.add_argument("--G", help="coupling, e.g. 0.37 or 1/2+1e-7")
    p.set_defaults(default_preset=default_preset)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="pairsolve",
                                  description="Exact solutions of the p+ip pairing model.")
    glob = argparse.ArgumentParser(add_help=False)
    glob.add_argument("--tol", type=float, default=bethe.DEFAULT_TOL)
    glob.add_argument("--offset", type=float, default=bethe.DEFAULT_OFFSET,
                      help="offset added to exact critical couplings")
    glob.add_argument("--format", choices=("json", "csv", "table"))
    glob.add_argument("--out", help="write output here instead of stdout")
    glob.add_argument("--threads", type=int, help="worker processes (env PAIRSOLVE_THREADS)")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[glob], help="follow one seed to the target coupling")
    _common(p)
    p.add_argument("--picture", choices=("hole", "particle"), default="hole")
    p.add_argument("--seed", help="1-based free-limit levels, e.g. 1,2,3")
    p.add_argument("--decimals", type=int, default=8)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("spectrum", parents=[glob], help="all root sets of a block")
    _common(p)
    p.add_argument("--picture", choices=("hole", "particle"), default="hole")
    p.add_argument("--decimals", type=int, default=8)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("ed", parents=[glob], help="exact diagonalization of a block")
    _common(p)
    p.set_defaults(func=cmd_ed)

    p = sub.add_parser("duality", parents=[glob], help="map exact eigenstates through a duality")
    _common(p)
    p.add_argument("--relation", choices=("zeropair", "mixed", "combined"), required=True)
    p.set_defaults(func=cmd_duality)

    p = sub.add_parser("inversion", parents=[glob], help="invert every root set of a block")
    _common(p, default_preset="inv4")
    p.add_argument("--picture", choices=("hole", "particle"), default="hole")
    p.set_defaults(func=cmd_inversion)

    p = sub.add_parser("meanfield", parents=[glob], help="solve the gap equations")
    _common(p)
    p.add_argument("--which", choices=("min", "max"), default="min")
    p.set_defaults(func=cmd_meanfield)

    p = sub.add_parser("phase", parents=[glob], help="classify points of the phase diagram")
    p.add_argument("--g-inv", type=float)
    p.add_argument("--x", type=float)
    p.add_argument("--L", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--G")
    p.add_argument("--grid", action="store_true", help="emit a CSV raster")
    p.add_argument("--gmin", type=float, default=-2.0)
    p.add_argument("--gmax", type=float, default=2.0)
    p.add_argument("--ng", type=int, default=81)
    p.add_argument("--nx", type=int, default=41)
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("table", parents=[glob], help="regenerate the L=8 reference tables")
    p.add_argument("--which", type=int, choices=(1, 2), required=True)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("verify", parents=[glob], help="run a self-check suite")
    p.add_argument("--suite", choices=sorted(verify.SUITES), required=True)
    p.add_argument("--L", type=int)
    p.add_argument("--Lmax", type=int, default=30)
    p.set_defaults(func=cmd_verify)
    return top


def _error(kind: str, msg: str, **extra):
    d = {"error": kind, "message": msg}
    d.update(extra)
    sys.stderr.write(json.dumps(d) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rc = args.func(args)
    except UsageError as exc:
        _error("usage", str(exc))
        return 2
    except bethe.PartialSpectrumError as exc:
        _error(type(exc).__name__, str(exc),
               failed_seeds=[[l + 1 for l in s] for s in exc.failed_seeds])
        return 1
    except (ValueError, ArithmeticError, RuntimeError, KeyError, OSError) as exc:
        _error(type(exc).__name__, str(exc))
        return 1
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
