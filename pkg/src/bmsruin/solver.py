"""Residue coefficients of the ruin probability and the resulting series.

With simple zeros ``z_i`` of D in the open left half-plane the ruin
probability is ``psi(u) = sum_i A_i exp(z_i u)`` where
``A_i = N_psi(z_i) / (z_i D'(z_i))``. Expanding ``N_psi`` with the trial
series turns the residue conditions into a linear system for the ``A_i``:

    D'(z_i) A_i = -lambda1 { (M_C(z_i) - 1)/z_i - M_C'(z_i) A_i
                             + sum_{j != i} A_j (M_C(z_i) - M_C(z_j)) / (z_j - z_i) }

For a discrete premium ``M_C(s) = sum_l pi_l exp(c_l s)`` and the braces are
the level sums ``sum_l pi_l exp(c_l z_i) {...}``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import mpmath
import numpy as np
import scipy.linalg
from scipy import optimize

from .errors import NoRealRoot, SingularSystem
from .model import BonusMalusSystem, ValidationReport, validate
from .roots import RootSet, SearchOptions, locate_roots, rightmost_negative_real_root
from .transforms import CharacteristicFunction

log = logging.getLogger(__name__)

ILL_CONDITIONED = 1e8


class IllConditioned(RuntimeWarning):
    pass


class RealTerm(NamedTuple):
    """``exp(-decay u) (cos_coef cos(frequency u) + sin_coef sin(frequency u))``."""

    decay_rate: float
    frequency: float
    cos_coef: float
    sin_coef: float


@dataclass(frozen=True)
class SeriesSolution:
    z: np.ndarray
    A: np.ndarray
    real_form: tuple[RealTerm, ...]
    closed_form: bool
    condition_number: float
    npsi: np.ndarray
    warnings: tuple[str, ...] = ()

    @property
    def terms(self) -> list[tuple[complex, complex]]:
        return list(zip(self.z.tolist(), self.A.tolist()))

    def __len__(self) -> int:
        return len(self.z)

    def psi(self, u):
        return eval_psi(self, u)

    def psi_complex(self, u):
        """``sum_i A_i exp(z_i u)`` evaluated term by term (complex result)."""
        u = np.asarray(u, dtype=float)
        if not len(self.z):
            return np.zeros_like(u, dtype=complex)[()]
        return (np.exp(np.multiply.outer(u, self.z)) @ self.A)[()]

    @classmethod
    def from_real_form(cls, rows, closed_form: bool = False) -> "SeriesSolution":
        """Rebuild roots and coefficients from real-form rows (e.g. a CSV reload)."""
        z, A = [], []
        terms = []
        for a, b, cc, sc in rows:
            terms.append(RealTerm(float(a), float(b), float(cc), float(sc)))
            if b == 0:
                z.append(complex(-a, 0.0))
                A.append(complex(cc, 0.0))
            else:
                Ah = complex(cc, -sc) / 2
                z += [complex(-a, -b), complex(-a, b)]
                A += [Ah.conjugate(), Ah]
        z = np.array(z, dtype=complex)
        A = np.array(A, dtype=complex)
        return cls(z, A, tuple(terms), closed_form, float("nan"), np.full(len(z), np.nan, dtype=complex))


# ---------------------------------------------------------------------------
# assembly


def _premium_atoms(cf: CharacteristicFunction):
    c, pi = cf.system.premium.atoms
    return c, pi


def assemble_discrete(cf: CharacteristicFunction, roots) -> tuple[np.ndarray, np.ndarray]:
    """Linear system ``M A = b`` for a discrete premium.

    ``roots`` is a :class:`RootSet` or a sequence of zeros. Off-diagonal level
    sums ``exp(c z_i) (1 - exp(-(z_i - z_j) c))`` are formed as
    ``exp(c z_i) - exp(c z_j)`` so nothing overflows for far-left zeros.
    """
    if not cf.system.discrete:
        raise ValueError("assemble_discrete needs a discrete premium law")
    z = _zs(roots)
    K = len(z)
    if K == 0:
        return np.zeros((0, 0), complex), np.zeros(0, complex)
    lam1 = cf.system.lambda1
    c, pi = _premium_atoms(cf)
    E = np.exp(np.multiply.outer(z, c))          # K x levels
    m = E @ pi                                   # sum_l pi_l exp(c_l z_i)
    mc = E @ (pi * c)                            # sum_l pi_l c_l exp(c_l z_i)
    dprime = np.asarray(cf.D_prime(z), dtype=complex)
    M = np.empty((K, K), dtype=complex)
    for i in range(K):
        with np.errstate(divide="ignore", invalid="ignore"):
            M[i] = lam1 * (m[i] - m) / (z - z[i])
        M[i, i] = dprime[i] - lam1 * mc[i]
    b = -lam1 * (m - 1.0) / z
    return M, b


def assemble_continuous(cf: CharacteristicFunction, roots) -> tuple[np.ndarray, np.ndarray]:
    """Linear system ``M A = b`` for a continuous (doubly stochastic) premium."""
    z = _zs(roots)
    K = len(z)
    if K == 0:
        return np.zeros((0, 0), complex), np.zeros(0, complex)
    lam1 = cf.system.lambda1
    m = np.asarray(cf.M_C(z), dtype=complex).reshape(K)
    mp = np.asarray(cf.M_C_prime(z), dtype=complex).reshape(K)
    dprime = np.asarray(cf.D_prime(z), dtype=complex).reshape(K)
    M = np.empty((K, K), dtype=complex)
    for i in range(K):
        with np.errstate(divide="ignore", invalid="ignore"):
            M[i] = lam1 * (m[i] - m) / (z - z[i])
        M[i, i] = dprime[i] - lam1 * mp[i]
    b = -lam1 * (m - 1.0) / z
    return M, b


def assemble(cf: CharacteristicFunction, roots):
    return (assemble_discrete if cf.system.discrete else assemble_continuous)(cf, roots)


def _zs(roots) -> np.ndarray:
    return roots.z if isinstance(roots, RootSet) else np.asarray(roots, dtype=complex).reshape(-1)


def _assemble_mp(cf: CharacteristicFunction, z: list):
    lam1 = mpmath.mpf(cf.system.lambda1)
    K = len(z)
    m = [cf.M_C(zi) for zi in z]
    mp_ = [cf.M_C_prime(zi) for zi in z]
    M = mpmath.matrix(K, K)
    b = mpmath.matrix(K, 1)
    for i in range(K):
        for j in range(K):
            M[i, j] = cf.D_prime(z[i]) - lam1 * mp_[i] if i == j else lam1 * (m[i] - m[j]) / (z[j] - z[i])
        b[i] = -lam1 * (m[i] - 1) / z[i]
    return M, b


# ---------------------------------------------------------------------------
# solve


def _pairs(z: np.ndarray) -> list[Optional[int]]:
    out: list[Optional[int]] = []
    for zi in z:
        if zi.imag == 0:
            out.append(None)
            continue
        j = np.nonzero(z == zi.conjugate())[0]
        out.append(int(j[0]) if j.size else None)
    return out


def _real_form(z: np.ndarray, A: np.ndarray) -> tuple[RealTerm, ...]:
    rows = []
    for zi, Ai in zip(z, A):
        if zi.imag == 0:
            rows.append(RealTerm(float(-zi.real), 0.0, float(Ai.real), 0.0))
        elif zi.imag > 0:
            rows.append(RealTerm(float(-zi.real), float(zi.imag), float(2 * Ai.real), float(-2 * Ai.imag)))
    return tuple(rows)


def solve_series(matrix, rhs, roots, closed_form: Optional[bool] = None) -> SeriesSolution:
    """Solve ``M A = b`` by LU with partial pivoting and build the series.

    Conjugate roots get exactly conjugate coefficients (the pair average),
    so the series is real. ``closed_form`` defaults to the root set's
    exhaustiveness flag.
    """
    notes: list[str] = []
    z = _zs(roots)
    if closed_form is None:
        closed_form = bool(getattr(roots, "exhaustive", False))
    if isinstance(matrix, mpmath.matrix):
        A, cond = _solve_mp(matrix, rhs)
    else:
        M = np.asarray(matrix, dtype=complex)
        b = np.asarray(rhs, dtype=complex)
        if M.shape != (len(z), len(z)) or b.shape != (len(z),):
            raise ValueError(f"system shape {M.shape}/{b.shape} does not match {len(z)} roots")
        if len(z) == 0:
            A, cond = np.zeros(0, complex), 1.0
        else:
            if not np.all(np.isfinite(M)) or not np.all(np.isfinite(b)):
                raise SingularSystem("non-finite entries in the residue system")
            with warnings.catch_warnings():
                # an exactly zero pivot is reported as SingularSystem below
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
            norm = np.linalg.norm(M, 1)
            if np.min(np.abs(np.diag(lu))) < 1e-14 * norm:
                raise SingularSystem("pivot below 1e-14 * ||M|| in the residue system")
            A = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
            cond = float(np.abs(np.linalg.cond(M, 1)))
    if cond > ILL_CONDITIONED:
        msg = f"residue system is ill-conditioned (1-norm condition number {cond:.3g})"
        notes.append(msg)
        warnings.warn(msg, IllConditioned, stacklevel=2)

    A = np.array(A, dtype=complex)
    for i, j in enumerate(_pairs(z)):
        if j is not None and j > i:
            avg = 0.5 * (A[i] + A[j].conjugate())
            A[i], A[j] = avg, avg.conjugate()
        elif j is None:
            if z[i].imag == 0:
                A[i] = A[i].real
    dprime = roots.dprime if isinstance(roots, RootSet) else np.full(len(z), np.nan, dtype=complex)
    npsi = A * z * dprime
    return SeriesSolution(z=z, A=A, real_form=_real_form(z, A), closed_form=closed_form,
                          condition_number=cond, npsi=npsi, warnings=tuple(notes))


def _solve_mp(M, b):
    A = mpmath.lu_solve(M, b)
    cond = mpmath.mnorm(M, 1) * mpmath.mnorm(M ** -1, 1)
    return [complex(A[i]) for i in range(M.rows)], float(cond)


def eval_psi(sol: SeriesSolution, u):
    """Ruin probability from the real form of the series."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    for a, b, cc, sc in sol.real_form:
        e = np.exp(-a * u)
        out = out + (e * cc if b == 0 else e * (cc * np.cos(b * u) + sc * np.sin(b * u)))
    return out[()]


# ---------------------------------------------------------------------------
# residue identity


def npsi_from_definition(cf: CharacteristicFunction, z, A) -> np.ndarray:
    """``N_psi(z_i) = -z_i lambda1 E[exp(z_i C) R_{1-psi}(C, z_i)]`` from the series.

    ``R_{1-psi}(c, s) = int_0^c (1 - psi(t)) exp(-s t) dt`` is integrated in
    closed form for the trial series. Checks the solved coefficients against
    ``A_i z_i D'(z_i)`` without reusing the assembled matrix.
    """
    z = np.asarray(z, dtype=complex)
    A = np.asarray(A, dtype=complex)
    lam1 = cf.system.lambda1
    out = np.empty(len(z), dtype=complex)
    if cf.system.discrete:
        c, pi = _premium_atoms(cf)
        for i, zi in enumerate(z):
            R = (1 - np.exp(-zi * c)) / zi - A[i] * c
            for j, zj in enumerate(z):
                if j != i:
                    R = R - A[j] * np.expm1((zj - zi) * c) / (zj - zi)
            out[i] = -zi * lam1 * np.sum(pi * np.exp(c * zi) * R)
    else:
        m = np.asarray(cf.M_C(z), dtype=complex).reshape(-1)
        mp = np.asarray(cf.M_C_prime(z), dtype=complex).reshape(-1)
        for i, zi in enumerate(z):
            acc = (m[i] - 1) / zi - A[i] * mp[i]
            for j, zj in enumerate(z):
                if j != i:
                    acc -= A[j] * (m[j] - m[i]) / (zj - zi)
            out[i] = -zi * lam1 * acc
    return out


# ---------------------------------------------------------------------------
# Lundberg bound


class LundbergBound(NamedTuple):
    r0: float
    A: float


def lundberg_bound(cf: CharacteristicFunction, sol: SeriesSolution, root: Optional[float] = None,
                   margin: float = 1e-9, points: int = 2001) -> LundbergBound:
    """``psi(u) <= A exp(-r0 u)`` with ``-r0`` just right of the rightmost negative real zero.

    ``A`` is the maximum of ``psi(u) exp(r0 u)`` on ``points`` grid points
    spanning ``[0, 20/r0]``.
    """
    if root is None:
        root = rightmost_negative_real_root(cf)
    if root is None:
        raise NoRealRoot("D(s) has no strictly negative real zero; no Lundberg exponent")
    r0 = -root * (1.0 - margin)
    if not len(sol):
        return LundbergBound(r0, 0.0)
    u = np.linspace(0.0, 20.0 / r0, points)
    g = eval_psi(sol, u) * np.exp(r0 * u)
    k = int(np.argmax(g))
    A = float(g[k])
    # the grid maximum can sit just below a peak between nodes
    lo, hi = u[max(k - 1, 0)], u[min(k + 1, points - 1)]
    res = optimize.minimize_scalar(lambda t: -eval_psi(sol, t) * np.exp(r0 * t), bounds=(lo, hi),
                                   method="bounded", options={"xatol": 1e-12 * max(hi, 1.0)})
    A = max(A, float(-res.fun))
    return LundbergBound(r0, max(A * (1 + 1e-12), 0.0))


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class SolveResult:
    system: BonusMalusSystem
    cf: CharacteristicFunction
    roots: RootSet
    solution: SeriesSolution
    lundberg: Optional[LundbergBound]
    validation: ValidationReport
    warnings: list[str] = field(default_factory=list)


def polish_roots_mp(cf: CharacteristicFunction, z, dps: int = 30, maxit: int = 50) -> list:
    """Newton-polish binary64 zeros at ``dps`` significant digits."""
    out = []
    with mpmath.workdps(dps):
        tol = mpmath.mpf(10) ** (-dps + 3) * cf.scale
        for zi in z:
            w = mpmath.mpc(zi)
            if zi.imag == 0:
                w = mpmath.mpc(w.real, 0)
            for _ in range(maxit):
                d = cf.D(w)
                if abs(d) <= tol:
                    break
                w = w - d / cf.D_prime(w)
                if zi.imag == 0:
                    w = mpmath.mpc(w.real, 0)
            out.append(w)
    return out


def solve(system: BonusMalusSystem, terms: int, precision: str = "double",
          opts: SearchOptions = SearchOptions(), dps: int = 30) -> SolveResult:
    """Locate ``terms`` zeros, solve for the coefficients and bound the result.

    ``precision="extended"`` re-polishes the zeros and solves the residue
    system with ``dps`` significant digits (mpmath); the zero search itself
    always runs in binary64.
    """
    report = validate(system)
    cf = CharacteristicFunction(system)
    roots = locate_roots(cf, terms, opts)
    notes = list(report.warnings) + list(roots.warnings)
    if precision == "extended" and len(roots):
        zmp = polish_roots_mp(cf, roots.z, dps)
        with mpmath.workdps(dps):
            M, b = _assemble_mp(cf, zmp)
            sol = solve_series(M, b, roots)
    elif precision == "double":
        M, b = assemble(cf, roots)
        sol = solve_series(M, b, roots)
    else:
        raise ValueError(f"precision must be 'double' or 'extended', got {precision!r}")
    notes += list(sol.warnings)
    if terms == 0:
        notes.append("zero terms requested: psi is identically 0")
    try:
        bound = lundberg_bound(cf, sol)
    except NoRealRoot as exc:
        bound = None
        notes.append(str(exc))
    return SolveResult(system, cf, roots, sol, bound, report, notes)
