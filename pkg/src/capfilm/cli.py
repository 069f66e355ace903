"""Command-line front end.

    capfilm solve|sweep|verify|render <scenario> [--out DIR] [--epsilon-list ...]
                                                [--resolution R] [--seed N]

Exit codes: 0 success, 1 usage or data error, 2 numerical failure (no
convergence, or a verification check that ran and failed).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .film import FilmComplex, film_from_dict, film_to_dict
from .perturb import default_sites, expansion_fit, fit_exponent, max_bump_t
from .scenarios import ScenarioError, ScenarioFile, load_scenario
from .solver import SolverError, lambda_estimate, minimize
from .spanning import is_spanning, steiner_baseline
from .svg import film_svg, scaling_svg
from .verify import (
    VerificationReport,
    convex_hull_check,
    density_check,
    first_variation_check,
    hull_field_residual,
    junction_check,
    random_fields,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

REPORT_COLUMNS = ["energy", "volume", "lambda", "classification", "junction_residual", "spanning_ok", "iterations"]
SWEEP_COLUMNS = ["epsilon"] + REPORT_COLUMNS + ["converged"]
VERIFY_COLUMNS = ["check", "status", "margin", "details"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in header])
    return buf.getvalue()


def _write(out: Path, name: str, text: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_bytes(text.encode("utf-8"))


def _config(sf: ScenarioFile, args):
    cfg = sf.config
    if args.resolution is not None:
        if not args.resolution > 0.0:
            raise UsageError("--resolution must be positive")
        cfg = replace(cfg, resample_target_edge_length=args.resolution)
    return cfg


def _single_epsilon(sf: ScenarioFile, args) -> float:
    if not args.epsilon_list:
        return sf.epsilon
    if len(args.epsilon_list) != 1:
        raise UsageError("this command takes at most one ε")
    return args.epsilon_list[0]


def _film_json(f: FilmComplex) -> str:
    return json.dumps(film_to_dict(f), sort_keys=True, indent=1) + "\n"


# --------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    sf = load_scenario(args.scenario)
    eps = _single_epsilon(sf, args)
    s = sf.scenario(eps, _config(sf, args))
    f, rep = minimize(s)
    out = Path(args.out)
    _write(out, "report.csv", _csv(REPORT_COLUMNS, [rep.row()]))
    _write(out, "film.svg", film_svg(f))
    _write(out, "film.json", _film_json(f))
    print(f"energy {rep.energy:.12g}  lambda {rep.lam:.6g}  {rep.classification.value}  "
          f"iterations {rep.iterations}")
    if not rep.converged:
        print("error: maximum iterations reached without convergence", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _threads(n: int) -> int:
    raw = os.environ.get("CAPFILM_THREADS")
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise UsageError(f"CAPFILM_THREADS must be an integer, got {raw!r}")
        if cap < 1:
            raise UsageError("CAPFILM_THREADS must be at least 1")
    return max(1, min(cap, n))


def cmd_sweep(args) -> int:
    sf = load_scenario(args.scenario)
    eps_list = sorted(set(args.epsilon_list or []))
    if len(eps_list) < 4:
        raise UsageError("need ≥4 points for a sweep")
    if any(not e > 0.0 for e in eps_list):
        raise UsageError("ε values must be positive")
    cfg = _config(sf, args)

    def run(eps):
        try:
            return eps, minimize(sf.scenario(eps, cfg))[1], None
        except (SolverError, ValueError) as exc:
            return eps, None, str(exc)

    with ThreadPoolExecutor(max_workers=_threads(len(eps_list))) as pool:
        results = sorted(pool.map(run, eps_list), key=lambda r: r[0])
    rows, failed = [], []
    for eps, rep, err in results:
        if rep is None or not rep.converged:
            failed.append((eps, err or "no convergence"))
        if rep is not None:
            rows.append({"epsilon": eps, **rep.row(), "converged": rep.converged})
    out = Path(args.out)
    _write(out, "sweep.csv", _csv(SWEEP_COLUMNS, rows))
    if failed:
        for eps, err in failed:
            print(f"error: ε={eps!r}: {err}", file=sys.stderr)
        return EXIT_NUMERIC

    eps = np.array([r["epsilon"] for r in rows])
    lam = np.array([r["lambda"] for r in rows])
    energy = np.array([r["energy"] for r in rows])
    fits = []
    series = {}
    if np.all(lam != 0.0):
        fits.append({"quantity": "lambda", "exponent": fit_exponent(eps, np.abs(lam)),
                     "sign": "negative" if np.all(lam < 0) else "positive" if np.all(lam > 0) else "mixed"})
        series["lambda"] = lam
    ell, _ = steiner_baseline(sf.wireframe, sf.spec)
    excess = energy - 2.0 * ell
    if np.all(excess != 0.0):
        fits.append({"quantity": "psi_minus_2l", "exponent": fit_exponent(eps, np.abs(excess)),
                     "sign": "negative" if np.all(excess < 0) else "positive" if np.all(excess > 0) else "mixed"})
        series["psi - 2l"] = excess
    _write(out, "fits.csv", _csv(["quantity", "exponent", "sign"], fits))
    _write(out, "scaling.svg", scaling_svg(eps, series, title=Path(args.scenario).stem))
    for row in fits:
        print(f"{row['quantity']}: exponent {row['exponent']:.4f} ({row['sign']})")
    return EXIT_OK


def _verify_reports(sf: ScenarioFile, f: FilmComplex, seed: int) -> list[VerificationReport]:
    w = f.wireframe
    lam = lambda_estimate(f)[0] if f.regions else 0.0
    reports = []
    span = is_spanning(f, w, sf.spec).spanning if len(w) else True
    reports.append(VerificationReport("spanning", span, 0.0, "winding-class search"))
    reports.append(convex_hull_check(f, lam))
    if f.regions:
        reports.append(first_variation_check(f, lam, random_fields(w, 20, seed=seed)))
    eta = 0.01 * (w.diameter() if len(w) else 1.0)
    reports.append(hull_field_residual(f, lam, eta))
    ratio = density_check(f, seed=seed)
    reports.append(VerificationReport("density", ratio >= 1.0, ratio, f"min length(K∩B_r)/r {ratio:.4f}"))
    if f.junctions():
        reports.append(junction_check(f))
    else:
        reports.append(VerificationReport("junction_balance", False, 0.0, "no junctions", applicable=False))
    collapsed = any(e.multiplicity == 2 for e in f.edges)
    if collapsed and f.regions:
        x1, x2 = default_sites(f)
        t_max = max_bump_t(f, x1, x2)
        tr = expansion_fit(f, t_max * np.geomspace(1e-3, 1e-2, 5), x1, x2)
        rel = abs(tr.fitted_slope + lam) / abs(lam)
        reports.append(VerificationReport("expansion", rel < 0.05, rel,
                                          f"slope {tr.fitted_slope:.6g} against -λ {-lam:.6g}"))
    else:
        reports.append(VerificationReport("expansion", False, 0.0, "needs collapsed film and liquid",
                                          applicable=False))
    return reports


def cmd_verify(args) -> int:
    sf = load_scenario(args.scenario)
    seed = sf.seed if args.seed is None else args.seed
    if args.film:
        f = _load_film(args.film)
        if not np.array_equal(f.wireframe.centers, sf.wireframe.centers) or not np.array_equal(
            f.wireframe.radii, sf.wireframe.radii
        ):
            raise UsageError("film and scenario use different wire frames")
    else:
        eps = _single_epsilon(sf, args)
        f, rep = minimize(sf.scenario(eps, _config(sf, args)))
        if not rep.converged:
            print("error: solve did not converge", file=sys.stderr)
            return EXIT_NUMERIC
    reports = _verify_reports(sf, f, seed)
    _write(Path(args.out), "verify.csv", _csv(VERIFY_COLUMNS, [r.row() for r in reports]))
    for r in reports:
        note = "not applicable" if not r.applicable else r.status
        print(f"{r.check:18s} {note:15s} {r.details}")
    return EXIT_OK if all(r.passed for r in reports if r.applicable) else EXIT_NUMERIC


def _load_film(path) -> FilmComplex:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}")
    try:
        return film_from_dict(data)
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"{path}: {exc}")


def cmd_render(args) -> int:
    path = Path(args.scenario)
    if path.suffix == ".json":
        f = _load_film(path)
    else:
        sf = load_scenario(path)
        f = sf.initial(_single_epsilon(sf, args))
    _write(Path(args.out), "film.svg", film_svg(f))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify, "render": cmd_render}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="capfilm", description="Planar soap-film capillarity solver and property checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("scenario", help="scenario file (render also accepts a film .json)")
        c.add_argument("--out", default="out", help="output directory (default: out)")
        c.add_argument("--epsilon-list", nargs="+", type=float, metavar="EPS")
        c.add_argument("--resolution", type=float, help="target edge length of the film mesh")
        c.add_argument("--seed", type=int, help="seed for random test fields and samples")
        if name == "verify":
            c.add_argument("--film", help="verify this film .json instead of solving")
            c.add_argument("--all", action="store_true", help="run every check (the default)")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
