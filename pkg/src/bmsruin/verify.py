"""Independent checks of a series solution.

Two routes: the residual of the survival integral equation

    r(u) = -(lambda1 + lambda2) S(u) + lambda1 E[S(u + C)] + lambda2 int_0^u S(u - x) f(x) dx

with ``S = 1 - psi``, and a Monte Carlo estimate of the ruin probability.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import QuadratureFailure
from .model import BonusMalusSystem, DistributionSpec
from .solver import SeriesSolution, eval_psi
from .transforms import CharacteristicFunction, cdf, claim_convolution, pdf, premium_mgf

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# residual


def residual(system: BonusMalusSystem, sol: SeriesSolution, u, method: str = "analytic"):
    """Integral-equation residual of ``1 - psi`` at the points ``u``.

    ``analytic`` uses the closed-form transforms term by term; ``quadrature``
    integrates the real series numerically and shares nothing with the
    transform code beyond the densities.
    """
    if method == "analytic":
        return _residual_analytic(system, sol, u)
    if method == "quadrature":
        return residual_of(system, lambda t: 1.0 - eval_psi(sol, t), u)
    raise ValueError(f"method must be 'analytic' or 'quadrature', got {method!r}")


def _residual_analytic(system: BonusMalusSystem, sol: SeriesSolution, u):
    u = np.asarray(u, dtype=float)
    lam1, lam2 = system.lambda1, system.lambda2
    z, A = sol.z, sol.A
    mc = np.asarray(premium_mgf(system.premium, z), dtype=complex).reshape(-1) if len(z) else z
    ez = np.exp(np.multiply.outer(u, z))                     # |u| x K
    psi = (ez @ A).real
    shifted = 1.0 - (ez @ (A * mc)).real                     # E[S(u + C)]
    conv = np.zeros_like(u, dtype=complex)
    if lam2 > 0:
        for zj, Aj in zip(z, A):
            conv = conv + Aj * claim_convolution(system.claim, zj, u)
        conv = cdf(system.claim, u) - conv
    r = -(lam1 + lam2) * (1.0 - psi) + lam1 * shifted + lam2 * conv.real
    return r[()]


def residual_of(system: BonusMalusSystem, survival: Callable, u, epsabs: Optional[float] = None,
                limit: int = 400):
    """Residual of an arbitrary survival function by adaptive quadrature.

    ``survival`` is a vectorised callable ``S(t)``; the equation is linear
    in ``S``, so ``S = 0`` has zero residual and sums of inputs add.
    """
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    lam1, lam2 = system.lambda1, system.lambda2
    if epsabs is None:
        epsabs = 1e-12 * system.total_rate
    out = np.empty_like(u)
    for k, uk in enumerate(u):
        s0 = float(survival(uk))
        if system.premium.is_discrete:
            c, pi = system.premium.atoms
            shifted = float(np.sum(pi * survival(uk + c)))
        else:
            shifted = _quad(lambda c: survival(uk + c) * pdf(system.premium, c), 0.0, np.inf,
                            epsabs, limit)
        conv = 0.0
        if lam2 > 0 and uk > 0:
            conv = _quad(lambda x: survival(uk - x) * pdf(system.claim, x), 0.0, uk, epsabs, limit,
                         points=_claim_breaks(system.claim, uk))
        out[k] = -(lam1 + lam2) * s0 + lam1 * shifted + lam2 * conv
    return out[0] if scalar else out


def _claim_breaks(spec: DistributionSpec, u: float):
    if spec.kind == "uniform":
        pts = [p for p in (spec.params["a"], spec.params["b"]) if 0 < p < u]
        return pts or None
    return None


def _quad(f, a, b, epsabs, limit, points=None):
    kw = dict(epsabs=epsabs, epsrel=1e-12, limit=limit, full_output=1)
    if points is not None and np.isfinite(b):
        kw["points"] = points
    res = integrate.quad(lambda t: float(f(t)), a, b, **kw)
    val, err = res[0], res[1]
    if len(res) > 3 and err > max(1e3 * epsabs, 1e-9):
        raise QuadratureFailure(f"quad on [{a}, {b}] did not converge (error estimate {err:.3g})")
    return val


def sup_residual(system: BonusMalusSystem, sol: SeriesSolution, u_max: float = 10.0,
                 points: int = 1001, method: str = "analytic") -> tuple[float, float]:
    """``(sup |r(u)|, argmax u)`` over an even grid on ``[0, u_max]``."""
    u = np.linspace(0.0, u_max, points)
    r = np.abs(residual(system, sol, u, method))
    k = int(np.argmax(r))
    return float(r[k]), float(u[k])


# ---------------------------------------------------------------------------
# Monte Carlo


def sample(spec: DistributionSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` variates from ``spec``."""
    p, k = spec.params, spec.kind
    if k == "point_mass":
        return np.full(size, p["value"])
    if k == "discrete_mixture":
        vals, wts = spec.atoms
        idx = np.searchsorted(np.cumsum(wts), rng.random(size) * wts.sum(), side="right")
        return vals[np.minimum(idx, len(vals) - 1)]
    if k == "exponential":
        return rng.standard_exponential(size) / p["rate"]
    if k == "gamma_integer_shape":
        return rng.standard_exponential((size, p["shape"])).sum(axis=1) / p["rate"]
    if k == "half_normal":
        return np.abs(rng.standard_normal(size)) * p["sigma"]
    if k == "maxwell_chi":
        return np.linalg.norm(rng.standard_normal((size, 3)), axis=1) * p["sigma"]
    if k == "uniform":
        return p["a"] + (p["b"] - p["a"]) * rng.random(size)
    raise ValueError(f"cannot sample {k}")


@dataclass(frozen=True)
class MonteCarloResult:
    u: np.ndarray
    estimate: np.ndarray
    ci: np.ndarray
    n_paths: int
    seed: int
    horizon: float
    level: float
    censored: int
    seconds: float

    def as_rows(self):
        return list(zip(self.u.tolist(), self.estimate.tolist(), self.ci.tolist()))


BLOCK = 10_000


def default_horizon(r0: Optional[float]) -> float:
    """Time horizon ``50 max(1, 1/r0)`` (50 when no exponent is known)."""
    return 50.0 * max(1.0, 1.0 / r0) if r0 else 50.0


def simulate_ruin(system: BonusMalusSystem, u, n_paths: int = 100_000, seed: int = 0,
                  horizon: Optional[float] = None, r0: Optional[float] = None,
                  level: Optional[float] = None) -> MonteCarloResult:
    """Monte Carlo ruin probabilities for every initial reserve in ``u``.

    Paths start from zero reserve; premium events add draws of C, claim
    events subtract draws of X, and event times are exponential with rate
    ``lambda1 + lambda2``. Ruin from reserve ``u`` means the surplus is
    ``<= -u`` at some claim epoch before ``horizon``, so one pass over the
    running minimum serves every ``u`` with common random numbers.

    A path is also retired once its surplus exceeds ``max(u) + level``
    (default ``40 / r0``): from there ruin has probability of order
    ``exp(-40)``. Each block of ``BLOCK`` paths has its own Philox stream
    spawned from ``seed``.
    """
    t0 = time.perf_counter()
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    if r0 is None and system.lambda2 > 0 and (horizon is None or level is None):
        from .roots import rightmost_negative_real_root
        root = rightmost_negative_real_root(CharacteristicFunction(system))
        r0 = -root if root is not None else None
    if horizon is None:
        horizon = default_horizon(r0)
    if level is None:
        level = 40.0 / r0 if r0 else np.inf
    ceiling = float(u.max()) + level
    children = np.random.SeedSequence(seed).spawn(math.ceil(n_paths / BLOCK))
    ruined = np.zeros(len(u), dtype=np.int64)
    censored = 0
    for b, child in enumerate(children):
        size = min(BLOCK, n_paths - b * BLOCK)
        rng = np.random.Generator(np.random.Philox(child))
        lowest, left = _run_block(system, rng, size, horizon, ceiling)
        ruined += np.sum(lowest[:, None] <= -u[None, :], axis=0)
        censored += left
    est = ruined / n_paths
    ci = 1.96 * np.sqrt(est * (1 - est) / n_paths)
    return MonteCarloResult(u, est, ci, n_paths, seed, float(horizon), float(level), censored,
                            time.perf_counter() - t0)


def _run_block(system, rng, size, horizon, ceiling):
    """Running minimum of the surplus at claim epochs (``inf`` if no claim)
    and the number of paths stopped by the horizon rather than the ceiling."""
    p_claim = system.lambda2 / system.total_rate
    rate = system.total_rate
    surplus = np.zeros(size)
    clock = np.zeros(size)
    lowest = np.full(size, np.inf)
    active = np.arange(size)
    censored = 0
    while active.size:
        n = active.size
        t = clock[active] + rng.standard_exponential(n) / rate
        live = t <= horizon
        censored += n - int(live.sum())
        active, t = active[live], t[live]
        n = active.size
        claim = rng.random(n) < p_claim
        nc = int(claim.sum())
        s = surplus[active]
        s[claim] -= sample(system.claim, rng, nc)
        s[~claim] += sample(system.premium, rng, n - nc)
        surplus[active] = s
        clock[active] = t
        hit = active[claim]
        lowest[hit] = np.minimum(lowest[hit], s[claim])
        active = active[s < ceiling]
    return lowest, censored


# ---------------------------------------------------------------------------
# report


@dataclass
class VerificationReport:
    """Residual grid, optional Monte Carlo points and the Lundberg check.

    ``mc`` may cover a subset of ``u``; rows without a simulation carry NaN
    in the Monte Carlo columns.
    """

    u: np.ndarray
    residual: np.ndarray
    series_psi: np.ndarray
    mc: Optional[MonteCarloResult] = None
    sup_residual: float = float("nan")
    tolerance: float = float("inf")
    lundberg_ok: Optional[bool] = None
    notes: list[str] = field(default_factory=list)

    @property
    def residual_ok(self) -> bool:
        return bool(self.sup_residual <= self.tolerance)

    @property
    def mc_gap(self) -> np.ndarray:
        """``|MC estimate - series psi|`` at the simulated points."""
        if self.mc is None:
            return np.zeros(0)
        return np.abs(self.mc.estimate - self._psi_at(self.mc.u))

    @property
    def mc_ok(self) -> bool:
        if self.mc is None:
            return True
        return bool(np.all(self.mc_gap <= 3 * self.mc.ci + MC_BIAS))

    @property
    def passed(self) -> bool:
        return self.residual_ok and self.mc_ok and self.lundberg_ok is not False

    def _psi_at(self, pts):
        return np.array([self.series_psi[np.nonzero(self.u == p)[0][0]] for p in pts])

    def rows(self):
        est = np.full(len(self.u), np.nan)
        ci = np.full(len(self.u), np.nan)
        if self.mc is not None:
            for p, e, c in self.mc.as_rows():
                k = np.nonzero(self.u == p)[0][0]
                est[k], ci[k] = e, c
        return list(zip(self.u.tolist(), self.residual.tolist(), est.tolist(), ci.tolist(),
                        self.series_psi.tolist()))


MC_BIAS = 0.002


def lundberg_holds(sol: SeriesSolution, r0: float, A: float, u_max: float, points: int = 2001) -> bool:
    """``psi(u) <= A exp(-r0 u)`` on an even grid over ``[0, u_max]``."""
    u = np.linspace(0.0, u_max, points)
    bound = A * np.exp(-r0 * u)
    return bool(np.all(eval_psi(sol, u) <= bound + 1e-12 * max(A, 1.0)))


def verify(system: BonusMalusSystem, sol: SeriesSolution, u, tolerance: float = float("inf"),
           mc_u=(), n_paths: int = 100_000, seed: int = 0, horizon: Optional[float] = None,
           lundberg=None, method: str = "analytic") -> VerificationReport:
    """Residual on the grid ``u``; Monte Carlo at ``mc_u``; Lundberg check.

    ``lundberg`` is an ``(r0, A)`` pair or None to skip that check.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    mc_u = np.atleast_1d(np.asarray(mc_u, dtype=float))
    if u.size == 0:
        raise ValueError("empty residual grid")
    if np.any(~np.isfinite(u)) or np.any(u < 0) or np.any(mc_u < 0):
        raise ValueError("grid points must be finite and non-negative")
    pts = np.union1d(u, mc_u)
    r = np.atleast_1d(residual(system, sol, pts, method))
    psi = np.atleast_1d(eval_psi(sol, pts))
    r0 = lundberg[0] if lundberg is not None else None
    mc = simulate_ruin(system, mc_u, n_paths, seed, horizon=horizon, r0=r0) if mc_u.size else None
    on_grid = np.isin(pts, u)
    sup = float(np.max(np.abs(r[on_grid])))
    lok = lundberg_holds(sol, lundberg[0], lundberg[1], float(u.max())) if lundberg is not None else None
    rep = VerificationReport(pts, r, psi, mc, sup, tolerance, lok)
    if not sol.closed_form:
        rep.notes.append("truncated series: residual measures truncation error")
    if system.drift <= 0:
        rep.notes.append("non-positive drift: ruin is certain and the series is not meaningful")
    if mc is not None and mc.censored:
        rep.notes.append(f"{mc.censored} paths reached the horizon {mc.horizon:g} unresolved")
    return rep
