"""
nilheat command line: verification suite, kernel tables, sector decomposition and
point evaluation of the heat transform.

Usage (full verification, JSON report plus a summary table on stdout):
  python3 -m nilheat verify --config config/verify.conf --out reports/verify.json

Only some checks:
  python3 -m nilheat verify --check 'hermite.*' --check heat_transform.cross_route

Kernel tables on a square grid:
  python3 -m nilheat dump-kernel heat --t 0.1 --points 33 --extent 2
  python3 -m nilheat dump-kernel weight-W --k 1 --out weight.csv

Sector norms of a field sampled on the fundamental domain:
  python3 -m nilheat decompose field.csv --hermite 6 --norm-t 0.02

The transform of V_{k,j} f at complex points:
  python3 -m nilheat eval --alpha 0 --j 0 --at '0.3+0.1j,0.5' --route hermite

Exit codes: 0 success, 1 a check failed, 2 configuration or input error,
3 a numerical series did not converge.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from .checks import REGISTRY, run_checks, select_checks
from .config import CONVENTIONS, RunConfig, load_config
from .constants import manifest
from .errors import ConfigError, NilheatError, NonConvergenceError, ParseError
from .heat_transform import (
    PROFILE_RADIUS,
    manifold_kernel,
    sector_heat_transform,
    sector_norms,
    sector_transform_via_expansion,
    sector_transform_via_hermite,
)
from .heisenberg import CGroupPoint, GroupPoint, heat_kernel, identity, p_kernel, twisted_bergman_weight
from .hermite import HermiteParams, hermite_bergman_weight, hermite_eval_scaled, mehler_kernel, mehler_series
from .nilmanifold import LatticeParams, ManifoldFunction, manifold_grid, weil_brezin_field
from .numerics import Grid, SampledField, gaussian_function
from .report import VerificationReport, complex_columns, write_table

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_NONCONVERGENT = 3

KERNEL_KINDS = ("heat", "p", "mehler", "weight-W", "weight-U", "manifold-K")
ROUTES = ("hermite", "convolution", "expansion")
DEFAULT_REPORT = "nilheat_report.json"


# ----------------------------- Configuration ----------------------------- #

def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file (if any), then command-line overrides, then validation."""
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {
        "n": args.n,
        "k": args.k,
        "t": args.t,
        "grid": args.grid,
        "radius": args.radius,
        "tol": args.tol,
        "seed": args.seed,
        "out": args.out,
        "convention": args.convention,
        "workers": args.workers,
        "lambda_nodes": args.lambda_nodes,
        "timings": True if getattr(args, "timings", False) else None,
    }
    return cfg.with_overrides(overrides).validate()


def _open_out(path: Optional[str]) -> Tuple[TextIO, bool]:
    if not path:
        return sys.stdout, False
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p.open("w", encoding="utf-8", newline=""), True


def _emit(path: Optional[str], columns: Dict[str, Sequence], cfg: RunConfig, comments: Sequence[str]) -> None:
    stream, close = _open_out(path)
    try:
        write_table(stream, columns, manifest(cfg.n, cfg.t, cfg.k), comments)
    finally:
        if close:
            stream.close()
    if close:
        logger.info("wrote %s", path)


# ----------------------------- Input parsing ----------------------------- #

def _split(line: str) -> List[str]:
    return line.replace(",", " ").split()


def read_field(path: str) -> ManifoldFunction:
    """A field on the fundamental domain from rows 'x.. u.. xi re im' in grid order.

    n is read off the column count (2n + 3); the rows must enumerate the nodes of
    the fundamental-domain grid in C order.  A header row of names is allowed.
    """
    p = Path(path)
    if not p.exists():
        raise ParseError(0, "file not found", str(p))
    rows: List[List[float]] = []
    lines: List[int] = []
    width = None
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        tokens = _split(body)
        try:
            values = [float(tok) for tok in tokens]
        except ValueError:
            if not rows and width is None:
                width = len(tokens)
                continue
            raise ParseError(lineno, f"non-numeric entry in {body!r}", str(p)) from None
        if width is None:
            width = len(values)
        if len(values) != width:
            raise ParseError(lineno, f"expected {width} columns, got {len(values)}", str(p))
        rows.append(values)
        lines.append(lineno)
    if not rows:
        raise ParseError(0, "no data rows", str(p))
    if width not in (5, 7):
        raise ParseError(lines[0], f"expected 5 (n=1) or 7 (n=2) columns, got {width}", str(p))
    n = (width - 3) // 2
    data = np.asarray(rows)
    points = len(np.unique(np.round(data[:, 0], 9)))
    xi_points = len(np.unique(np.round(data[:, 2 * n], 9)))
    grid = manifold_grid(n, points, xi_points)
    if points ** (2 * n) * xi_points != len(rows):
        raise ParseError(lines[-1], f"{len(rows)} rows do not fill a {points}^{2 * n} x {xi_points} grid", str(p))
    mesh = grid.mesh().reshape(-1, 2 * n + 1)
    bad = np.nonzero(np.any(np.abs(mesh - data[:, :2 * n + 1]) > 1e-9, axis=1))[0]
    if len(bad):
        i = int(bad[0])
        raise ParseError(lines[i], f"row is not the grid node {tuple(float(v) for v in mesh[i])}", str(p))
    values = (data[:, 2 * n + 1] + 1j * data[:, 2 * n + 2]).reshape(grid.points)
    logger.info("read %s: n=%d, %d cell points, %d xi points", p, n, points, xi_points)
    return ManifoldFunction(n, SampledField(grid, values))


def parse_points(specs: Sequence[str], n: int, source: Optional[str] = None, first_line: int = 1) -> np.ndarray:
    """Complex points 'z.. w.. [zeta]' (comma or space separated) as an array (P, 2n + 1)."""
    out = []
    for offset, spec in enumerate(specs):
        lineno = first_line + offset
        body = spec.split("#", 1)[0].strip()
        if not body:
            continue
        tokens = _split(body)
        if len(tokens) not in (2 * n, 2 * n + 1):
            raise ParseError(lineno, f"expected {2 * n} or {2 * n + 1} coordinates, got {len(tokens)}", source)
        try:
            coords = [complex(tok.replace("i", "j")) for tok in tokens]
        except ValueError:
            raise ParseError(lineno, f"cannot read complex coordinates from {body!r}", source) from None
        if len(coords) == 2 * n:
            coords.append(0j)
        out.append(coords)
    if not out:
        raise ParseError(first_line, "no evaluation points", source)
    return np.asarray(out, dtype=complex)


def _parse_ints(text: str, n: int, what: str) -> Tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in _split(text))
    except ValueError:
        raise ConfigError(what, f"expected integers, got {text!r}") from None
    if len(vals) == 1 and n > 1:
        vals = vals + (0,) * (n - 1)
    if len(vals) != n:
        raise ConfigError(what, f"expected {n} entries, got {len(vals)}")
    return vals


# ----------------------------- verify ----------------------------- #

def cmd_verify(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    if args.list:
        for cid in select_checks(args.check):
            entry = REGISTRY[cid]
            print(f"{cid:<45} {entry.ref or '-':<22} {entry.reference}")
        return 0
    results = run_checks(cfg, args.check)
    report = VerificationReport(cfg, results)
    path = report.write(cfg.out or DEFAULT_REPORT)
    print(report.summary_table())
    logger.info("report written to %s (lock %s)", path, report.lock_hash()[:12])
    return report.exit_code()


# ----------------------------- dump-kernel ----------------------------- #

def cmd_dump_kernel(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    n, t, k = cfg.n, cfg.t, cfg.k
    if args.kind == "manifold-K":
        axis = np.arange(args.points) / args.points
    else:
        axis = np.linspace(-args.extent, args.extent, args.points)
    A, B = np.meshgrid(axis, axis, indexing="ij")
    a, b = A.reshape(-1), B.reshape(-1)

    def embed(v: np.ndarray) -> np.ndarray:
        arr = np.zeros((v.size, n))
        arr[:, 0] = v
        return arr

    default_lam = -4.0 * math.pi * k if args.kind == "weight-W" else 4.0 * math.pi * k
    lam = args.lam if args.lam is not None else default_lam
    if args.kind == "p":
        lam = abs(lam)  # p_t^lam is even in lam
    comments = [f"kind={args.kind} n={n} t={t!r} lam={lam!r} xi={args.xi!r}"]
    if args.kind == "heat":
        vals = heat_kernel(t, GroupPoint(embed(a), embed(b), np.full(a.size, args.xi)), cfg.lambda_nodes)
        columns = {"x": a, "u": b, **complex_columns("k", vals)}
    elif args.kind == "p":
        columns = {"x": a, "u": b, "p": p_kernel(lam, t, embed(a), embed(b))}
    elif args.kind == "mehler":
        hp = HermiteParams(lam, t)
        columns = {
            "x": a,
            "u": b,
            "closed": mehler_kernel(hp, embed(a), embed(b)),
            "series": mehler_series(hp, embed(a), embed(b), args.degree),
        }
    elif args.kind == "weight-W":
        vals = twisted_bergman_weight(lam, t, 1j * embed(a), 1j * embed(b))
        columns = {"y": a, "v": b, "W": vals}
    elif args.kind == "weight-U":
        columns = {"x": a, "y": b, "U": hermite_bergman_weight(HermiteParams(lam, t), embed(a), embed(b))}
    else:
        g = GroupPoint(embed(a), embed(b), np.full(a.size, args.xi))
        vals = manifold_kernel(t, g, identity(n), tol=cfg.tol)
        columns = {"x": a, "u": b, **complex_columns("K", vals)}
    _emit(cfg.out, columns, cfg, comments)
    return 0


# ----------------------------- decompose ----------------------------- #

def _alpha_label(alpha: Sequence[int]) -> str:
    return "a" + "-".join(str(v) for v in alpha)


def cmd_decompose(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    F = read_field(args.input)
    rows = sector_norms(F, args.norm_t, cfg.convention, hermite_degree=args.hermite)
    columns: Dict[str, List] = {"k": [], "j": [], "l2_norm": [], "transform_norm": []}
    alphas: List[Tuple[int, ...]] = []
    for row in rows:
        if row.coeffs is not None:
            alphas.extend(a for a in row.coeffs.terms if a not in alphas)
    for alpha in alphas:
        columns[f"{_alpha_label(alpha)}_re"] = []
        columns[f"{_alpha_label(alpha)}_im"] = []
    for row in rows:
        columns["k"].append(row.k)
        columns["j"].append("" if row.j is None else " ".join(str(v) for v in row.j))
        columns["l2_norm"].append(row.l2_norm)
        columns["transform_norm"].append(row.transform_norm)
        for alpha in alphas:
            c = row.coeffs.terms.get(alpha) if row.coeffs is not None else None
            columns[f"{_alpha_label(alpha)}_re"].append(None if c is None else c.real)
            columns[f"{_alpha_label(alpha)}_im"].append(None if c is None else c.imag)
    total = sum(r.l2_norm ** 2 for r in rows)
    logger.info("sector energy %.12g against field energy %.12g", total, F.field.norm() ** 2)
    comments = [
        f"decompose {args.input} convention={cfg.convention} norm_t={args.norm_t!r}",
        "j labels the pieces (nu_j, rho_k(.) f) of sectors k >= 1",
        "sectors k < 0 get one row with j blank and no transform norm",
    ]
    _emit(cfg.out, columns, cfg, comments)
    return 0


# ----------------------------- eval ----------------------------- #

def cmd_eval(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    n, t = cfg.n, cfg.t
    params = LatticeParams(n, cfg.k)
    j = params.check_index(_parse_ints(args.j, n, "j"))
    if args.points_file:
        text = Path(args.points_file).read_text(encoding="utf-8").splitlines()
        pts = parse_points(text, n, args.points_file)
    elif args.at:
        pts = parse_points(args.at, n, "--at")
    else:
        raise ConfigError("points", "give --at or --points")

    if args.gaussian is not None:
        centre = np.zeros(n) + args.center
        f = gaussian_function(centre, args.gaussian)
        radius = max(PROFILE_RADIUS, float(np.max(np.abs(centre))) + 8.0 * args.gaussian + 1.0)
    else:
        alpha = _parse_ints(args.alpha, n, "alpha")
        f = lambda y: hermite_eval_scaled(alpha, params.lam, y)
        radius = PROFILE_RADIUS
    profile = Grid.cube(n, radius, int(math.ceil(radius * (32 if n == 1 else 16))) * 2)

    z, w, zeta = pts[:, :n], pts[:, n:2 * n], pts[:, 2 * n]
    if args.route == "convolution":
        S = weil_brezin_field(params, j, f, cfg.grid)
        vals = sector_heat_transform(S, t, pts[:, :2 * n]).value(zeta)
    elif args.route == "expansion":
        vals = sector_transform_via_expansion(params, j, f, t, CGroupPoint(z, w, zeta), grid=profile)
    else:
        vals = sector_transform_via_hermite(params, j, f, t, CGroupPoint(z, w, zeta), profile)
    columns: Dict[str, Sequence] = {}
    for i in range(n):
        columns.update(complex_columns(f"z{i + 1}", z[:, i]))
    for i in range(n):
        columns.update(complex_columns(f"w{i + 1}", w[:, i]))
    columns.update(complex_columns("zeta", zeta))
    columns.update(complex_columns("value", vals))
    comments = [f"eval route={args.route} k={cfg.k} j={' '.join(map(str, j))} t={t!r}"]
    _emit(cfg.out, columns, cfg, comments)
    return 0


# ----------------------------- CLI ----------------------------- #

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nilheat",
        description="Heat kernel transform on Heisenberg nilmanifolds: verification and tables",
    )
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    p.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = p.add_subparsers(dest="cmd", required=True)

    def add_common(sp: argparse.ArgumentParser):
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--n", type=int, help="dimension of the Heisenberg group (1 or 2)")
        sp.add_argument("--k", type=int, help="central sector index k >= 1")
        sp.add_argument("--t", type=float, help="heat time")
        sp.add_argument("--grid", type=int, help="quadrature points per unit length")
        sp.add_argument("--radius", type=float, help="lattice truncation radius")
        sp.add_argument("--tol", type=float, help="tail tolerance for lattice sums")
        sp.add_argument("--seed", type=int, help="random seed")
        sp.add_argument("--out", help="output path (tables default to stdout)")
        sp.add_argument("--convention", choices=CONVENTIONS, help="Bergman norm normalisation")
        sp.add_argument("--workers", type=int, help="worker processes for verify")
        sp.add_argument("--lambda-nodes", dest="lambda_nodes", type=int, help="quadrature nodes for the lambda integral of the heat kernel")
        return sp

    # verify
    sp = add_common(sub.add_parser("verify", help="run the verification checks and write a JSON report"))
    sp.add_argument("--check", action="append", help="glob over check ids (repeatable)")
    sp.add_argument("--list", action="store_true", help="list matching checks and exit")
    sp.add_argument("--timings", action="store_true", help="record runtime_ms per check")
    sp.set_defaults(func=cmd_verify)

    # dump-kernel
    sp = add_common(sub.add_parser("dump-kernel", help="tabulate a kernel or weight on a square grid"))
    sp.add_argument("kind", choices=KERNEL_KINDS)
    sp.add_argument("--points", type=int, default=33, help="grid points per axis")
    sp.add_argument("--extent", type=float, default=2.0, help="half-width of the grid")
    sp.add_argument("--xi", type=float, default=0.0, help="central coordinate for heat and manifold-K")
    sp.add_argument("--lam", type=float, default=None, help="lambda (default +-4 pi k by kind)")
    sp.add_argument("--degree", type=int, default=80, help="series degree for mehler")
    sp.set_defaults(func=cmd_dump_kernel)

    # decompose
    sp = add_common(sub.add_parser("decompose", help="sector norms of a sampled field on the nilmanifold"))
    sp.add_argument("input", help="rows 'x.. u.. xi re im' on the fundamental-domain grid")
    sp.add_argument("--hermite", type=int, default=None, metavar="N", help="add Hermite coefficients up to degree N")
    sp.add_argument("--norm-t", type=float, default=0.02, help="heat time for the transform-side norms")
    sp.set_defaults(func=cmd_decompose)

    # eval
    sp = add_common(sub.add_parser("eval", help="evaluate T_t(V_{k,j} f) at complex points"))
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--alpha", default="0", help="f = Phi_alpha^lam, alpha as integers")
    src.add_argument("--gaussian", type=float, default=None, metavar="WIDTH", help="f = Gaussian of this width")
    sp.add_argument("--center", type=float, default=0.0, help="Gaussian center (all coordinates)")
    sp.add_argument("--j", default="0", help="index j in A_k")
    sp.add_argument("--route", choices=ROUTES, default="hermite")
    sp.add_argument("--at", action="append", help="one point 'z.. w.. [zeta]' (repeatable)")
    sp.add_argument("--points", dest="points_file", help="file of points, one per line")
    sp.set_defaults(func=cmd_eval)

    return p


def configure_logging(verbose: int = 0, quiet: bool = False) -> None:
    level = logging.WARNING if quiet else (logging.DEBUG if verbose else logging.INFO)
    logging.basicConfig(level=level, format="[%(module)-12s] %(message)s", stream=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        configure_logging(args.verbose, args.quiet)
        return int(args.func(args) or 0)
    except KeyboardInterrupt:
        print("Interrupted.", file=sys.stderr)
        return 130
    except (ConfigError, ParseError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_NONCONVERGENT
    except NilheatError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
