"""Command line front end: ``bmsruin {solve,verify,simulate,roots}``.

Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 verification
failure (files are still written).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ModelError, NoRealRoot, SolverError
from .model import BonusMalusSystem, DistributionSpec
from .presets import PRESETS
from .roots import SearchOptions, locate_roots
from .solver import SeriesSolution, eval_psi, lundberg_bound, solve
from .transforms import CharacteristicFunction
from .verify import simulate_ruin, verify

log = logging.getLogger("bmsruin")

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    system: BonusMalusSystem
    terms: int = 16
    precision: str = "double"
    search: SearchOptions = SearchOptions()
    u_max: float = 10.0
    points: int = 201
    residual_tol: float = math.inf
    mc_points: list = field(default_factory=lambda: [0.0, 1.0, 2.0])
    n_paths: int = 100_000
    horizon: Optional[float] = None
    seed: int = 0
    out: Path = Path("out")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if "system" not in d:
            raise ConfigError("config needs a 'system' block")
        solver = d.get("solver", {})
        ver = d.get("verify", {})
        grid = ver.get("grid", {})
        mc = ver.get("mc", {})
        search = dict(solver.get("search", {}))
        if "root_tol" in solver:
            search["root_tol"] = solver["root_tol"]
        names = {f.name for f in dataclasses.fields(SearchOptions)}
        bad = sorted(set(search) - names)
        if bad:
            raise ConfigError(f"unknown search overrides {bad}; expected a subset of {sorted(names)}")
        cfg = cls(
            system=parse_system(d["system"]),
            terms=int(solver.get("terms", 16)),
            precision=str(solver.get("precision", "double")),
            search=SearchOptions(**search),
            u_max=float(grid.get("u_max", 10.0)),
            points=int(grid.get("points", 201)),
            residual_tol=float(ver.get("residual_tol", math.inf)),
            mc_points=[float(x) for x in mc.get("points", [0.0, 1.0, 2.0])],
            n_paths=int(mc.get("n_paths", 100_000)),
            horizon=None if mc.get("horizon") is None else float(mc["horizon"]),
            seed=int(mc.get("seed", 0)),
            out=Path(d.get("output", {}).get("directory", "out")),
        )
        cfg.check()
        return cfg

    def check(self) -> None:
        if self.terms < 0:
            raise ConfigError(f"terms must be >= 0, got {self.terms}")
        if self.precision not in ("double", "extended"):
            raise ConfigError(f"precision must be 'double' or 'extended', got {self.precision!r}")
        if not (self.u_max > 0 and math.isfinite(self.u_max)):
            raise ConfigError(f"u_max must be positive and finite, got {self.u_max}")
        if self.points < 1:
            raise ConfigError("residual grid is empty (points < 1)")
        if self.n_paths < 0:
            raise ConfigError("n_paths must be >= 0")
        if any(p < 0 or not math.isfinite(p) for p in self.mc_points):
            raise ConfigError("Monte Carlo points must be finite and non-negative")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.u_max, self.points)


def parse_system(d: dict) -> BonusMalusSystem:
    """System block: premium given as weights, transition matrix or a law."""
    try:
        prem, claim = d["premium"], DistributionSpec.from_dict(d["claim"])
        lam1, lam2 = float(d["lambda1"]), float(d["lambda2"])
    except KeyError as exc:
        raise ConfigError(f"system block is missing {exc}") from None
    forms = [k for k in ("weights", "matrix", "distribution") if k in prem]
    if len(forms) != 1:
        raise ConfigError("premium needs exactly one of 'weights', 'matrix' or 'distribution', "
                          f"got {forms or 'none'}")
    if forms[0] == "distribution":
        return BonusMalusSystem(DistributionSpec.from_dict(prem["distribution"]), claim, lam1, lam2)
    if "premiums" not in prem:
        raise ConfigError("premium block needs a 'premiums' vector")
    if forms[0] == "weights":
        return BonusMalusSystem.from_weights(prem["premiums"], prem["weights"], claim, lam1, lam2)
    return BonusMalusSystem.from_transition_matrix(prem["matrix"], prem["premiums"], claim, lam1, lam2)


def load_config(path: Optional[str], preset: Optional[str]) -> dict:
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        return {"system": system_to_dict(PRESETS[preset]())}
    if path is None:
        raise ConfigError("either --config or --preset is required")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None


def system_to_dict(system: BonusMalusSystem) -> dict:
    if system.discrete:
        c, pi = system.premium.atoms
        premium = {"premiums": c.tolist(), "weights": pi.tolist()}
    else:
        premium = {"distribution": system.premium.to_dict()}
    return {"premium": premium, "claim": system.claim.to_dict(),
            "lambda1": system.lambda1, "lambda2": system.lambda2}


# ---------------------------------------------------------------------------
# files


def _fmt(x) -> str:
    return repr(float(x))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(["" if isinstance(v, float) and math.isnan(v) else _fmt(v) for v in row])


def read_solution(directory: Path) -> SeriesSolution:
    path = directory / "solution.csv"
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        terms = [(float(r["decay_rate"]), float(r["frequency"]), float(r["cos_coef"]), float(r["sin_coef"]))
                 for r in rows]
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed row ({exc})") from None
    closed = False
    report = directory / "report.txt"
    if report.exists():
        closed = "closed_form: true" in report.read_text()
    return SeriesSolution.from_real_form(terms, closed)


def _write_roots(path: Path, cf: CharacteristicFunction, roots) -> None:
    write_csv(path, ["re", "im", "abs_D", "abs_Dprime"],
              [(r.z.real, r.z.imag, abs(complex(cf.D(r.z))), abs(r.dprime)) for r in roots.roots])


# ---------------------------------------------------------------------------
# commands


def cmd_solve(cfg: RunConfig, args) -> int:
    res = solve(cfg.system, cfg.terms, cfg.precision, cfg.search)
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    _write_roots(out / "roots.csv", res.cf, res.roots)
    write_csv(out / "solution.csv", ["decay_rate", "frequency", "cos_coef", "sin_coef"], res.solution.real_form)
    u = cfg.grid
    psi = np.atleast_1d(eval_psi(res.solution, u))
    bound = (res.lundberg.A * np.exp(-res.lundberg.r0 * u)) if res.lundberg else np.full(len(u), np.nan)
    write_csv(out / "psi.csv", ["u", "psi", "lundberg_bound"], zip(u, psi, bound))
    lines = [
        f"closed_form: {'true' if res.solution.closed_form else 'false'}",
        f"terms: {len(res.solution)}",
        f"condition_number: {_fmt(res.solution.condition_number)}",
        f"lundberg_r0: {_fmt(res.lundberg.r0) if res.lundberg else 'none'}",
        f"lundberg_A: {_fmt(res.lundberg.A) if res.lundberg else 'none'}",
        f"drift: {_fmt(res.system.drift)}",
        f"search_region: {res.roots.search_region}",
        f"precision: {cfg.precision}",
    ]
    lines += [f"warning: {w}" for w in res.warnings]
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    for w in res.warnings:
        log.warning(w)
    print(f"{len(res.solution)} terms, psi(0) = {_fmt(psi[0])}, closed_form = {res.solution.closed_form}; "
          f"wrote {out}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    src = Path(args.solution) if args.solution else cfg.out
    sol = read_solution(src)
    cf = CharacteristicFunction(cfg.system)
    try:
        lb = lundberg_bound(cf, sol)
        lund = (lb.r0, lb.A)
    except NoRealRoot:
        lund = None
    mc_u = cfg.mc_points if cfg.n_paths > 0 else []
    rep = verify(cfg.system, sol, cfg.grid, cfg.residual_tol, mc_u, cfg.n_paths or 1, cfg.seed,
                 cfg.horizon, lund)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out / "verification.csv", ["u", "residual", "mc_estimate", "mc_ci", "series_psi"], rep.rows())
    for n in rep.notes:
        log.warning(n)
    print(f"sup residual {rep.sup_residual:.3e} (tolerance {cfg.residual_tol:g}): "
          f"{'ok' if rep.residual_ok else 'FAIL'}")
    if rep.mc is not None:
        slack = 3 * rep.mc.ci + 0.002
        for p, g, s in zip(rep.mc.u, rep.mc_gap, slack):
            print(f"u = {p:g}: |MC - series| = {g:.4f} (allowed {s:.4f}) {'ok' if g <= s else 'FAIL'}")
    if rep.lundberg_ok is not None:
        print(f"Lundberg bound: {'ok' if rep.lundberg_ok else 'FAIL'}")
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_simulate(cfg: RunConfig, args) -> int:
    if not cfg.mc_points:
        raise ConfigError("no Monte Carlo points configured")
    res = simulate_ruin(cfg.system, cfg.mc_points, max(cfg.n_paths, 1), cfg.seed, cfg.horizon)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out / "simulation.csv", ["u", "estimate", "ci", "n_paths"],
              [(u, e, c, res.n_paths) for u, e, c in res.as_rows()])
    for u, e, c in res.as_rows():
        print(f"psi({u:g}) ~ {e:.5f} +/- {c:.5f}")
    print(f"seed {res.seed}, horizon {res.horizon:g}, {res.n_paths} paths, {res.seconds:.1f} s")
    return EXIT_OK


def cmd_roots(cfg: RunConfig, args) -> int:
    cf = CharacteristicFunction(cfg.system)
    roots = locate_roots(cf, cfg.terms, cfg.search)
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_roots(cfg.out / "roots.csv", cf, roots)
    for r in roots.roots:
        print(f"{r.z.real!r} {r.z.imag:+.17g}j  |D'| = {abs(r.dprime):.4g}")
    print(f"exhaustive: {str(roots.exhaustive).lower()}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "simulate": cmd_simulate, "roots": cmd_roots}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bmsruin", description="Ruin probabilities for Bonus-Malus systems")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [("solve", "zeros, coefficients, psi grid and report"),
                        ("verify", "residual and Monte Carlo check of a solution"),
                        ("simulate", "Monte Carlo ruin estimates"),
                        ("roots", "zeros of D in the left half-plane")]:
        s = sub.add_parser(name, help=help_)
        src = s.add_mutually_exclusive_group()
        src.add_argument("--config", help="JSON run configuration")
        src.add_argument("--preset", help=f"built-in system: {', '.join(sorted(PRESETS))}")
        s.add_argument("--terms", type=int, help="number of zeros K (overrides the config)")
        s.add_argument("--out", help="output directory (overrides the config)")
        s.add_argument("--seed", type=int, help="Monte Carlo seed (overrides the config)")
        if name == "verify":
            s.add_argument("--solution", help="directory holding solution.csv (default: output directory)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        raw = load_config(args.config, args.preset)
        solver = raw.setdefault("solver", {})
        if args.terms is not None:
            solver["terms"] = args.terms
        if args.out is not None:
            raw.setdefault("output", {})["directory"] = args.out
        if args.seed is not None:
            raw.setdefault("verify", {}).setdefault("mc", {})["seed"] = args.seed
        cfg = RunConfig.from_dict(raw)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"solver error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
