"""Locating the zeros of D(s) in the open left half-plane.

Zeros are counted with the argument principle on rectangles, isolated by
recursive subdivision, seeded with the contour estimate of their location
and polished with Newton's method. Poles of D come from the catalog, so
their orders are subtracted exactly instead of deflated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BoundaryTooClose,
    EvaluationOverflow,
    MultipleRootDetected,
    NonIntegerWinding,
    SearchExhausted,
    SolverError,
)
from .transforms import CharacteristicFunction

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self) -> None:
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def contains(self, z: complex, slack: float = 0.0) -> bool:
        return (self.x0 - slack <= z.real <= self.x1 + slack) and (self.y0 - slack <= z.imag <= self.y1 + slack)

    def corners(self) -> list[complex]:
        return [complex(self.x0, self.y0), complex(self.x1, self.y0),
                complex(self.x1, self.y1), complex(self.x0, self.y1)]


@dataclass(frozen=True)
class SearchOptions:
    """Root search parameters; ``None`` radius means a data-driven default."""

    eps: float = 1e-9
    initial_radius: Optional[float] = None
    growth: float = math.sqrt(2.0)
    r_max: float = 1e4
    root_tol: float = 1e-11
    simple_tol: float = 1e-8
    snap_tol: float = 1e-8
    max_edge_points: int = 400_000
    max_phase_step: float = 0.5


@dataclass(frozen=True)
class Root:
    z: complex
    dprime: complex
    residual: float
    paired_index: Optional[int] = None


@dataclass(frozen=True)
class RootSet:
    roots: tuple[Root, ...]
    search_region: Optional[Rect]
    exhaustive: bool
    warnings: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.roots)

    @property
    def z(self) -> np.ndarray:
        return np.array([r.z for r in self.roots], dtype=complex)

    @property
    def dprime(self) -> np.ndarray:
        return np.array([r.dprime for r in self.roots], dtype=complex)


# ---------------------------------------------------------------------------
# argument principle


@dataclass
class _Contour:
    winding: int
    moment: complex  # sum of zeros minus sum of poles (with multiplicity)


def _eval(cf: CharacteristicFunction, pts: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        v = np.asarray(cf.D(pts), dtype=complex)
    if not np.all(np.isfinite(v)):
        raise EvaluationOverflow("D(s) is not finite on the contour (binary64 range exceeded)")
    return v


def _edge(cf, a: complex, b: complex, opts: SearchOptions, budget: list[int]):
    """Adaptively sample D on the segment [a, b] until consecutive phase and
    log-modulus changes are small. Returns (points, values) including both ends."""
    length = abs(b - a)
    n0 = int(min(512, max(16, 8 * length)))
    t = np.linspace(0.0, 1.0, n0 + 1)
    vals = _eval(cf, a + (b - a) * t)
    floor = 1e-14 * cf.scale
    while True:
        if np.min(np.abs(vals)) <= floor:
            raise BoundaryTooClose(f"D vanishes on the contour segment {a} -> {b}")
        r = vals[1:] / vals[:-1]
        bad = (np.abs(np.angle(r)) > opts.max_phase_step) | (np.abs(np.log(np.abs(r))) > 1.0)
        if not bad.any():
            return t, vals
        if np.min(np.diff(t)[bad]) * length < 1e-14 * (1.0 + abs(a)):
            raise BoundaryTooClose(f"contour passes through a zero or pole near {a} -> {b}")
        mids = 0.5 * (t[:-1][bad] + t[1:][bad])
        mvals = _eval(cf, a + (b - a) * mids)
        budget[0] += mids.size
        if budget[0] > opts.max_edge_points:
            raise NonIntegerWinding("boundary refinement did not converge within the point budget")
        order = np.argsort(np.concatenate([t, mids]), kind="stable")
        t = np.concatenate([t, mids])[order]
        vals = np.concatenate([vals, mvals])[order]


def _contour(cf: CharacteristicFunction, rect: Rect, opts: SearchOptions) -> _Contour:
    corners = rect.corners()
    budget = [0]
    pts, vals = [], []
    for k in range(4):
        a, b = corners[k], corners[(k + 1) % 4]
        t, v = _edge(cf, a, b, opts, budget)
        pts.append(a + (b - a) * t[:-1])
        vals.append(v[:-1])
    z = np.concatenate(pts + [pts[0][:1]])
    v = np.concatenate(vals + [vals[0][:1]])

    def wind(z, v):
        r = v[1:] / v[:-1]
        dlog = np.log(np.abs(r)) + 1j * np.angle(r)
        w = np.sum(dlog.imag) / (2 * np.pi)
        mom = np.sum(0.5 * (z[1:] + z[:-1]) * dlog) / (2j * np.pi)
        return w, mom

    w, mom = wind(z, v)
    # one uniform refinement pass must not change the count
    zm = 0.5 * (z[1:] + z[:-1])
    vm = _eval(cf, zm)
    z2 = np.empty(2 * zm.size + 1, dtype=complex)
    v2 = np.empty_like(z2)
    z2[0::2], v2[0::2] = z, v
    z2[1::2], v2[1::2] = zm, vm
    w2, mom2 = wind(z2, v2)
    n = round(w2)
    if abs(w2 - n) > 1e-3 or round(w) != n:
        raise NonIntegerWinding(f"winding number unstable on {rect}: {w:.6f} vs {w2:.6f}")
    return _Contour(int(n), complex(mom2))


def _nudged(rect: Rect, k: int) -> Rect:
    d = 1e-6 * (k + 1) * max(rect.width, rect.height)
    return Rect(rect.x0 - d, rect.x1 + 0.1 * d, rect.y0 - d, rect.y1 + d)


def _safe_contour(cf, rect: Rect, opts: SearchOptions) -> tuple[_Contour, Rect]:
    for k in range(4):
        r = rect if k == 0 else _nudged(rect, k)
        near_pole = any(
            min(abs(p - r.x0), abs(p - r.x1)) < 1e-8 and r.y0 <= 0 <= r.y1 or
            (r.x0 <= p <= r.x1 and min(abs(r.y0), abs(r.y1)) < 1e-8)
            for p, _ in cf.pole_list
        )
        if near_pole:
            continue
        try:
            return _contour(cf, r, opts), r
        except BoundaryTooClose:
            continue
    raise BoundaryTooClose(f"could not move the boundary of {rect} away from zeros/poles")


def census(cf: CharacteristicFunction, rect, opts: SearchOptions = SearchOptions()) -> int:
    """Number of zeros minus number of poles of D inside ``rect`` (with multiplicity).

    ``rect`` is a :class:`Rect` or an ``(x0, x1, y0, y1)`` tuple. The boundary
    is nudged outward slightly when it runs through a zero or a pole.
    """
    if not isinstance(rect, Rect):
        rect = Rect(*rect)
    return _safe_contour(cf, rect, opts)[0].winding


def zero_count(cf: CharacteristicFunction, rect, opts: SearchOptions = SearchOptions()) -> int:
    """Number of zeros (with multiplicity) inside ``rect``."""
    if not isinstance(rect, Rect):
        rect = Rect(*rect)
    c, r = _safe_contour(cf, rect, opts)
    return c.winding + cf.poles_inside(r.x0, r.x1, r.y0, r.y1)


# ---------------------------------------------------------------------------
# Newton polishing


def newton(cf: CharacteristicFunction, z0: complex, tol: float, maxit: int = 80) -> tuple[complex, bool]:
    """Damped Newton iteration on D. Returns (z, converged) with
    converged meaning ``|D(z)| <= tol``."""
    z = complex(z0)
    with np.errstate(all="ignore"):
        d = complex(cf.D(z))
    for _ in range(maxit):
        if not np.isfinite(d):
            return z, False
        if abs(d) <= tol:
            return z, True
        with np.errstate(all="ignore"):
            dp = complex(cf.D_prime(z))
        if dp == 0 or not np.isfinite(dp):
            return z, False
        step = d / dp
        for _ in range(30):
            zn = z - step
            with np.errstate(all="ignore"):
                dn = complex(cf.D(zn))
            if np.isfinite(dn) and abs(dn) < abs(d):
                break
            step *= 0.5
        else:
            return z, abs(d) <= tol
        if abs(zn - z) <= 4e-16 * max(1.0, abs(z)) and abs(dn) > tol:
            return zn, False
        z, d = zn, dn
    return z, abs(d) <= tol


# ---------------------------------------------------------------------------
# isolation by subdivision


def _split_candidates(rect: Rect, cf: CharacteristicFunction):
    fracs = (0.5 + 1 / 61, 0.43, 0.57, 0.37, 0.63)
    vertical = rect.width >= rect.height
    for f in fracs:
        if vertical:
            x = rect.x0 + f * rect.width
            if any(abs(x - p) < 0.02 * rect.width for p, _ in cf.pole_list):
                continue
            yield Rect(rect.x0, x, rect.y0, rect.y1), Rect(x, rect.x1, rect.y0, rect.y1)
        else:
            y = rect.y0 + f * rect.height
            # real zeros sit on the axis; keep horizontal cuts off it
            if abs(y) < 0.02 * rect.height:
                continue
            yield Rect(rect.x0, rect.x1, rect.y0, y), Rect(rect.x0, rect.x1, y, rect.y1)


def _isolate(cf, rect: Rect, nz: int, moment: complex, opts: SearchOptions, out: list[complex], depth: int = 0):
    if nz <= 0:
        return
    tol = opts.root_tol * cf.scale
    size = max(rect.width, rect.height)
    if nz == 1:
        poles = sum(m * p for p, m in cf.pole_list if rect.contains(complex(p)))
        guess = moment + poles
        if not rect.contains(guess, 0.5 * size):
            guess = rect.center
        z, ok = newton(cf, guess, tol)
        if ok and rect.contains(z, 1e-9 * (1 + abs(z))):
            out.append(z)
            return
        if not ok:
            z, ok = newton(cf, rect.center, tol)
            if ok and rect.contains(z, 1e-9 * (1 + abs(z))):
                out.append(z)
                return
    if size < 1e-9 * (1 + abs(rect.center)) or depth > 80:
        if nz >= 2:
            raise MultipleRootDetected(
                f"{nz} zeros of D cluster within {size:.2g} of {rect.center}; the residue series "
                "requires simple zeros (all derivatives D'(z_i) non-zero)")
        raise SolverError(f"Newton failed to converge to the isolated zero near {rect.center}")

    last_err: Exception | None = None
    for a, b in _split_candidates(rect, cf):
        try:
            ca, ra = _safe_contour(cf, a, opts)
            cb, rb = _safe_contour(cf, b, opts)
        except BoundaryTooClose as exc:
            last_err = exc
            continue
        na = ca.winding + cf.poles_inside(ra.x0, ra.x1, ra.y0, ra.y1)
        nb = cb.winding + cf.poles_inside(rb.x0, rb.x1, rb.y0, rb.y1)
        if na + nb != nz:
            last_err = NonIntegerWinding(f"census not additive on {rect}: {na} + {nb} != {nz}")
            continue
        _isolate(cf, a, na, ca.moment, opts, out, depth + 1)
        _isolate(cf, b, nb, cb.moment, opts, out, depth + 1)
        return
    raise last_err or BoundaryTooClose(f"no admissible split for {rect}")


def _zeros_in(cf, rect: Rect, opts: SearchOptions) -> tuple[list[complex], Rect]:
    c, r = _safe_contour(cf, rect, opts)
    nz = c.winding + cf.poles_inside(r.x0, r.x1, r.y0, r.y1)
    if nz < 0:
        raise NonIntegerWinding(f"negative zero count {nz} on {r}")
    out: list[complex] = []
    _isolate(cf, r, nz, c.moment, opts, out)
    return out, r


def _polish_real(cf, x: float, tol: float) -> float:
    for _ in range(40):
        d = complex(cf.D(x)).real
        if abs(d) <= tol:
            break
        dp = complex(cf.D_prime(x)).real
        if dp == 0:
            break
        xn = x - d / dp
        if xn == x:
            break
        x = xn
    return x


def _refine(cf, z: complex, real: bool) -> complex:
    """Extra Newton steps down to rounding level: continue while |D| shrinks."""
    d = abs(complex(cf.D(z)))
    for _ in range(6):
        with np.errstate(all="ignore"):
            step = complex(cf.D(z)) / complex(cf.D_prime(z))
        zn = complex(z.real - step.real, 0.0) if real else z - step
        with np.errstate(all="ignore"):
            dn = abs(complex(cf.D(zn)))
        if not np.isfinite(dn) or dn >= d:
            break
        z, d = zn, dn
    return z


def _default_radius(cf: CharacteristicFunction) -> float:
    poles = [abs(p) for p, _ in cf.pole_list if p < 0]
    return max([2.0] + [1.25 * p for p in poles])


def _finalize(cf, zs: list[complex], opts: SearchOptions) -> list[complex]:
    """Snap near-real zeros, keep the upper half-plane member of each pair and
    mirror it, drop duplicates."""
    tol = opts.root_tol * cf.scale
    upper: list[complex] = []
    for z in zs:
        if z.real >= 0:
            continue
        if abs(z.imag) <= opts.snap_tol:
            upper.append(_refine(cf, complex(_polish_real(cf, z.real, tol), 0.0), True))
        elif z.imag > 0:
            upper.append(_refine(cf, z, False))
    uniq: list[complex] = []
    for z in sorted(upper, key=lambda w: (abs(w), np.angle(w))):
        if all(abs(z - w) > 1e-7 * (1 + abs(z)) for w in uniq):
            uniq.append(z)
    full = []
    for z in uniq:
        full.append(z)
        if z.imag != 0:
            full.append(z.conjugate())
    return sorted(full, key=lambda w: (abs(w), np.angle(w)))


def _make_rootset(cf, zs: list[complex], region, exhaustive: bool, opts: SearchOptions, notes) -> RootSet:
    roots = []
    for z in zs:
        dp = complex(cf.D_prime(z))
        if abs(dp) < opts.simple_tol:
            raise MultipleRootDetected(
                f"|D'(z)| = {abs(dp):.3g} < {opts.simple_tol:g} at z = {z}: zero is not simple; "
                "the residue series needs all derivatives D'(z_i) non-zero")
        roots.append([z, dp, float(abs(cf.D(z)))])
    idx = {complex(r[0]): i for i, r in enumerate(roots)}
    out = []
    for i, (z, dp, res) in enumerate(roots):
        j = idx.get(z.conjugate()) if z.imag != 0 else None
        out.append(Root(z=z, dprime=dp, residual=res, paired_index=j))
    return RootSet(tuple(out), region, exhaustive, tuple(notes))


def locate_roots(cf: CharacteristicFunction, count: int, opts: SearchOptions = SearchOptions()) -> RootSet:
    """The ``count`` zeros of D of smallest modulus in the open left half-plane.

    Search rectangles ``[-R, -eps] x [-eta, R]`` grow geometrically; each
    growth step only isolates zeros in the newly added strips. The search
    stops once ``count`` zeros are known and the last of them (by modulus)
    lies within R, so no zero of smaller modulus can be missing. A conjugate
    pair is never split: if ``count`` would cut one, its partner is added.

    ``exhaustive`` is set when every zero in the final rectangle is returned
    and a census of a rectangle twice as large finds no further zero.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return RootSet((), None, False)
    notes: list[str] = []
    R = opts.initial_radius or _default_radius(cf)
    eta = min(0.05, 0.05 * R)
    x1 = -opts.eps
    zs: list[complex] = []
    region: Optional[Rect] = None
    history: list[tuple[float, int]] = []
    while True:
        try:
            if region is None:
                new, region = _zeros_in(cf, Rect(-R, x1, -eta, R), opts)
                zs += new
            else:
                left, left_r = _zeros_in(cf, Rect(-R, region.x0, region.y0, R), opts)
                top, top_r = _zeros_in(cf, Rect(region.x0, region.x1, region.y1, left_r.y1), opts)
                zs += left + top
                region = Rect(left_r.x0, region.x1, region.y0, left_r.y1)
        except EvaluationOverflow as exc:
            raise SearchExhausted(
                f"only {len(_finalize(cf, zs, opts))} of {count} zeros found before D(s) left the "
                f"binary64 range at radius {R:.4g}; {exc}") from exc
        full = _finalize(cf, zs, opts)
        history.append((R, len(full)))
        reach = min(-region.x0, region.y1)
        if len(full) >= count and abs(full[count - 1]) <= reach:
            break
        if R * opts.growth > opts.r_max:
            stable = [n for r, n in history if r >= R / 64.0]
            if full and len(set(stable)) == 1 and history[0][0] <= R / 64.0:
                notes.append(f"only {len(full)} zeros found up to radius {R:.4g}; requested {count}")
                log.warning(notes[-1])
                break
            raise SearchExhausted(f"found {len(full)} of {count} zeros within radius {R:.4g}")
        R *= opts.growth

    chosen = full[:count]
    if len(chosen) < len(full) and chosen[-1].imag != 0 and chosen[-1].conjugate() not in chosen:
        chosen = full[:count + 1]
        notes.append(f"added the conjugate partner of the last zero: {len(chosen)} terms instead of {count}")
        log.warning(notes[-1])

    # report the conjugation-symmetric rectangle that holds every zero found
    region = Rect(region.x0, region.x1, -region.y1, region.y1)
    exhaustive = False
    if len(chosen) == len(full):
        big = Rect(2 * region.x0, region.x1, 2 * region.y0, 2 * region.y1)
        try:
            exhaustive = zero_count(cf, big, opts) == len(full)
        except SolverError:
            exhaustive = False
    return _make_rootset(cf, chosen, region, exhaustive, opts, notes)


def rightmost_negative_real_root(cf: CharacteristicFunction, opts: SearchOptions = SearchOptions(),
                                 scan_limit: float = 64.0) -> Optional[float]:
    """Largest r < 0 with D(r) = 0, or None if D keeps its sign on the scanned range.

    Scans the negative real axis from just left of the origin to the first
    pole of D (or ``scan_limit``), brackets the first sign change and
    refines it with Brent's method. A census of a thin rectangle around
    ``(r, 0)`` then confirms that no zero lies nearer the origin.
    """
    negative_poles = [p for p, _ in cf.pole_list if p < 0]
    left = max(negative_poles) if negative_poles else -scan_limit
    xs = -np.unique(np.concatenate([np.geomspace(1e-7, 1.0, 80) * abs(left),
                                    np.linspace(0.0, 1.0, 4001)[1:] * abs(left)]))
    xs = xs[xs > left * (1 - 1e-9)] if negative_poles else xs
    with np.errstate(all="ignore"):
        vals = np.asarray(cf.D(xs.astype(complex))).real
    finite = np.isfinite(vals)
    if not finite[0]:
        raise SearchExhausted("D(s) is not finite next to the origin")
    if not finite.all():
        stop = int(np.argmin(finite))
        xs, vals = xs[:stop], vals[:stop]
    s0 = np.sign(vals[0])
    change = np.nonzero(np.sign(vals) != s0)[0]
    if s0 == 0 or change.size == 0:
        return None
    k = int(change[0])
    f = lambda x: complex(cf.D(x)).real
    r = brentq(f, xs[k], xs[k - 1], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    r = _polish_real(cf, r, opts.root_tol * cf.scale)
    try:
        h = 0.25 * abs(r)
        nearer = zero_count(cf, Rect(r + 1e-3 * abs(r), -opts.eps, -h, h), opts)
        if nearer:
            log.warning("census found %d zero(s) between %g and the origin", nearer, r)
    except SolverError as exc:
        log.warning("could not confirm the rightmost real zero by census: %s", exc)
    return float(r)
