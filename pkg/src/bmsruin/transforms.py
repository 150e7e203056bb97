"""Complex moment functions, claim Laplace transforms and the function D(s).

Every transform is evaluated in closed form so it is meromorphic by
construction. Inputs may be Python/numpy complex scalars or arrays
(binary64), or mpmath numbers, in which case the evaluation is carried out
at the current ``mpmath.mp.dps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import SimpleNamespace

import mpmath
import numpy as np
from scipy import special

from .errors import PoleHit
from .model import BonusMalusSystem, DistributionSpec

POLE_TOL = 1e-12
SQRT2 = math.sqrt(2.0)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
SQRT_PI_OVER_2 = math.sqrt(math.pi / 2.0)


# ---------------------------------------------------------------------------
# complex error function


def complex_erfcx(z):
    """Scaled complementary error function ``exp(z^2) erfc(z)``.

    Backed by the Faddeeva function, ``erfcx(z) = w(iz)``. Finite wherever
    ``erfc`` itself would overflow on the right half-plane; returns ``inf``
    where ``Re z << 0`` pushes the scaled value out of range.
    """
    if _is_mp(z):
        z = mpmath.mpmathify(z)
        return mpmath.exp(z * z) * mpmath.erfc(z)
    return special.wofz(1j * np.asarray(z, dtype=complex))[()]


def complex_erfc(z):
    """Complementary error function for complex argument.

    Uses ``erfc(z) = exp(-z^2) w(iz)`` on the right half-plane and the
    reflection ``erfc(z) = 2 - erfc(-z)`` on the left. Raises OverflowError
    when the result is outside the binary64 range.
    """
    if _is_mp(z):
        return mpmath.erfc(z)
    z = np.asarray(z, dtype=complex)
    right = z.real >= 0
    zz = np.where(right, z, -z)
    with np.errstate(over="ignore", invalid="ignore"):
        val = np.exp(-zz * zz) * special.wofz(1j * zz)
        val = np.where(right, val, 2.0 - val)
    if not np.all(np.isfinite(val)):
        raise OverflowError("erfc overflows binary64; use complex_erfcx")
    return val[()]


# ---------------------------------------------------------------------------
# backends


def _is_mp(x) -> bool:
    return isinstance(x, (mpmath.mpc, mpmath.mpf))


_NP = SimpleNamespace(exp=np.exp, erfcx=complex_erfcx, sqrt2=SQRT2,
                      sqrt_2_over_pi=SQRT_2_OVER_PI, sqrt_pi_over_2=SQRT_PI_OVER_2)


def _mp_ns():
    return SimpleNamespace(exp=mpmath.exp, erfcx=complex_erfcx, sqrt2=mpmath.sqrt(2),
                           sqrt_2_over_pi=mpmath.sqrt(2 / mpmath.pi),
                           sqrt_pi_over_2=mpmath.sqrt(mpmath.pi / 2))


def _prep(s):
    if _is_mp(s):
        return mpmath.mpc(s), _mp_ns()
    return np.asarray(s, dtype=complex), _NP


def _out(v):
    return v[()] if isinstance(v, np.ndarray) else v


# ---------------------------------------------------------------------------
# poles


def laplace_poles(spec: DistributionSpec) -> tuple[tuple[float, int], ...]:
    """Poles (location, order) of ``s -> E[exp(-s X)]``."""
    if spec.kind == "exponential":
        return ((-spec.params["rate"], 1),)
    if spec.kind == "gamma_integer_shape":
        return ((-spec.params["rate"], spec.params["shape"]),)
    return ()


def _check_poles(spec: DistributionSpec, s, sign: int = 1) -> None:
    for p, _ in laplace_poles(spec):
        d = abs(complex(s) - sign * p) if _is_mp(s) else np.abs(s - sign * p)
        if np.any(d < POLE_TOL):
            raise PoleHit(f"{spec.kind} transform evaluated within {POLE_TOL:g} of its pole at {sign * p}")


# ---------------------------------------------------------------------------
# Laplace transforms E[exp(-sX)] and their derivatives

_UNIFORM_SERIES_TERMS = 26
_UNIFORM_SERIES_RADIUS = 1.0


def _phi(t, ns):
    """(1 - exp(-t))/t with the removable singularity at 0 filled in."""
    if ns is not _NP:
        if abs(t) < _UNIFORM_SERIES_RADIUS:
            return mpmath.nsum(lambda n: (-t) ** n / mpmath.factorial(n + 1), [0, mpmath.inf])
        return (1 - mpmath.exp(-t)) / t
    series = sum((-t) ** n / math.factorial(n + 1) for n in range(_UNIFORM_SERIES_TERMS))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        closed = -np.expm1(-t) / t
    return np.where(np.abs(t) < _UNIFORM_SERIES_RADIUS, series, closed)


def _dphi(t, ns):
    if ns is not _NP:
        if abs(t) < _UNIFORM_SERIES_RADIUS:
            return mpmath.nsum(lambda n: n * (-1) ** n * t ** (n - 1) / mpmath.factorial(n + 1), [1, mpmath.inf])
        return (mpmath.exp(-t) * (1 + t) - 1) / t ** 2
    series = sum(n * (-1) ** n * t ** (n - 1) / math.factorial(n + 1) for n in range(1, _UNIFORM_SERIES_TERMS))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        closed = (np.exp(-t) * (1 + t) - 1) / t ** 2
    return np.where(np.abs(t) < _UNIFORM_SERIES_RADIUS, series, closed)


def _gauss_moments(sigma, s, ns, upto: int, u=0.0):
    """Tail moments ``g_n = exp(s u) * int_u^inf x^n exp(-x^2/(2 sigma^2) - s x) dx``.

    ``g_0`` is an erfcx expression; higher moments follow from integrating
    ``d/dx [x^n exp(-x^2/(2 sigma^2) - s x)]`` over ``[u, inf)``, which gives
    ``g_{n+1} = sigma^2 (n g_{n-1} - s g_n + u^n E)`` with
    ``E = exp(-u^2/(2 sigma^2))``. At ``u = 0`` this is the same as
    differentiating the Gaussian base integral in ``s``.
    """
    s2 = sigma * sigma
    E = ns.exp(-(u * u) / (2 * s2))
    g = [sigma * ns.sqrt_pi_over_2 * E * ns.erfcx((u + s2 * s) / (sigma * ns.sqrt2))]
    g.append(s2 * (E - s * g[0]))
    for n in range(1, upto):
        g.append(s2 * (n * g[n - 1] - s * g[n] + u ** n * E))
    return g


def _erfcx_split(x):
    """``erfcx(x) = g + ind * 2 exp(x^2)`` with ``g`` bounded and ``ind = Re x < 0``."""
    left = x.real < 0
    g = np.where(left, -complex_erfcx(np.where(left, -x, x)), complex_erfcx(x))
    return g, left


def _gauss_conv_moments(sigma, z: complex, u, upto: int):
    """``exp(z u) g_n(0) - g_n(u)`` for n = 0..upto without cancellation.

    On the left half-plane ``erfcx`` carries a ``2 exp(x^2)`` part; for the
    head and the tail of the convolution those parts are the same function
    ``G = 2 exp(z u + sigma^2 z^2 / 2)``, so they cancel exactly whenever
    both erfcx arguments sit on the same side, and are bounded otherwise.
    """
    s2 = sigma * sigma
    E = np.exp(-(u * u) / (2 * s2))
    a = np.asarray(sigma * z / SQRT2, dtype=complex)
    w = (u + s2 * z) / (sigma * SQRT2)
    ga, ia = _erfcx_split(a)
    gw, iw = _erfcx_split(w)
    h0 = [SQRT_PI_OVER_2 * sigma * ga]
    hu = [SQRT_PI_OVER_2 * sigma * E * gw]
    q = [SQRT_PI_OVER_2 * sigma]
    h0.append(s2 * (1.0 - z * h0[0]))
    hu.append(s2 * (E - z * hu[0]))
    q.append(-s2 * z * q[0])
    for n in range(1, upto):
        h0.append(s2 * (n * h0[n - 1] - z * h0[n]))
        hu.append(s2 * (n * hu[n - 1] - z * hu[n] + u ** n * E))
        q.append(s2 * (n * q[n - 1] - z * q[n]))
    ez = np.exp(z * u)
    jump = ia.astype(int) - iw.astype(int)
    with np.errstate(over="ignore", invalid="ignore"):
        G = np.where(jump != 0, 2.0 * np.exp(z * u + 0.5 * s2 * z * z), 0.0)
    return [ez * h0[n] - hu[n] + jump * G * q[n] for n in range(upto + 1)]


def laplace(spec: DistributionSpec, s):
    """``E[exp(-s X)]`` continued analytically to the complex plane."""
    _check_poles(spec, s)
    s, ns = _prep(s)
    p, k = spec.params, spec.kind
    with np.errstate(over="ignore", invalid="ignore"):
        if k == "point_mass":
            v = ns.exp(-p["value"] * s)
        elif k == "discrete_mixture":
            v = sum(w * ns.exp(-c * s) for c, w in p["atoms"])
        elif k == "exponential":
            v = p["rate"] / (p["rate"] + s)
        elif k == "gamma_integer_shape":
            v = (p["rate"] / (p["rate"] + s)) ** p["shape"]
        elif k == "half_normal":
            v = ns.erfcx(p["sigma"] * s / ns.sqrt2)
        elif k == "maxwell_chi":
            sig = p["sigma"]
            v = ns.sqrt_2_over_pi / sig ** 3 * _gauss_moments(sig, s, ns, 2)[2]
        else:
            a, b = p["a"], p["b"]
            v = ns.exp(-a * s) * _phi((b - a) * s, ns)
    return _out(v)


def laplace_prime(spec: DistributionSpec, s):
    """Derivative of :func:`laplace` in ``s``, i.e. ``-E[X exp(-s X)]``."""
    _check_poles(spec, s)
    s, ns = _prep(s)
    p, k = spec.params, spec.kind
    with np.errstate(over="ignore", invalid="ignore"):
        if k == "point_mass":
            v = -p["value"] * ns.exp(-p["value"] * s)
        elif k == "discrete_mixture":
            v = sum(-c * w * ns.exp(-c * s) for c, w in p["atoms"])
        elif k == "exponential":
            v = -p["rate"] / (p["rate"] + s) ** 2
        elif k == "gamma_integer_shape":
            b, n = p["rate"], p["shape"]
            v = -n * b ** n / (b + s) ** (n + 1)
        elif k == "half_normal":
            sig = p["sigma"]
            v = sig * sig * s * ns.erfcx(sig * s / ns.sqrt2) - sig * ns.sqrt_2_over_pi
        elif k == "maxwell_chi":
            sig = p["sigma"]
            v = -ns.sqrt_2_over_pi / sig ** 3 * _gauss_moments(sig, s, ns, 3)[3]
        else:
            a, b = p["a"], p["b"]
            h = b - a
            e = ns.exp(-a * s)
            v = e * (h * _dphi(h * s, ns) - a * _phi(h * s, ns))
    return _out(v)


def claim_laplace(spec: DistributionSpec, s):
    """Laplace transform of the claim density, ``int_0^inf exp(-s x) f_X(x) dx``."""
    return laplace(spec, s)


def claim_laplace_prime(spec: DistributionSpec, s):
    return laplace_prime(spec, s)


def premium_mgf(spec: DistributionSpec, s):
    """Moment function ``M_C(s) = E[exp(s C)]``."""
    return laplace(spec, -s)


def premium_mgf_prime(spec: DistributionSpec, s):
    return -laplace_prime(spec, -s)


# ---------------------------------------------------------------------------
# densities, distribution functions and truncated convolutions


def pdf(spec: DistributionSpec, x):
    x = np.asarray(x, dtype=float)
    p, k = spec.params, spec.kind
    xp = np.clip(x, 0.0, None)
    if k == "exponential":
        v = p["rate"] * np.exp(-p["rate"] * xp)
    elif k == "gamma_integer_shape":
        b, n = p["rate"], p["shape"]
        v = b ** n * xp ** (n - 1) * np.exp(-b * xp) / math.factorial(n - 1)
    elif k == "half_normal":
        sig = p["sigma"]
        v = SQRT_2_OVER_PI / sig * np.exp(-xp * xp / (2 * sig * sig))
    elif k == "maxwell_chi":
        sig = p["sigma"]
        v = SQRT_2_OVER_PI * xp * xp / sig ** 3 * np.exp(-xp * xp / (2 * sig * sig))
    elif k == "uniform":
        a, b = p["a"], p["b"]
        v = np.where((x >= a) & (x <= b), 1.0 / (b - a), 0.0)
    else:
        raise ValueError(f"{k} has no density")
    return np.where(x < 0, 0.0, v)[()]


def cdf(spec: DistributionSpec, u):
    u = np.clip(np.asarray(u, dtype=float), 0.0, None)
    p, k = spec.params, spec.kind
    if k == "exponential":
        v = -np.expm1(-p["rate"] * u)
    elif k == "gamma_integer_shape":
        v = special.gammainc(p["shape"], p["rate"] * u)
    elif k == "half_normal":
        v = special.erf(u / (p["sigma"] * SQRT2))
    elif k == "maxwell_chi":
        sig = p["sigma"]
        v = special.erf(u / (sig * SQRT2)) - SQRT_2_OVER_PI * u / sig * np.exp(-u * u / (2 * sig * sig))
    elif k == "uniform":
        v = np.clip((u - p["a"]) / (p["b"] - p["a"]), 0.0, 1.0)
    elif k == "point_mass":
        v = (u >= p["value"]).astype(float)
    else:
        vals, wts = spec.atoms
        v = np.sum(wts * (u[..., None] >= vals), axis=-1)
    return v[()]


def claim_convolution(spec: DistributionSpec, z, u):
    """``int_0^u exp(z (u - x)) f_X(x) dx`` in closed form.

    Written as ``exp(zu) L(z)`` minus the continued tail
    ``exp(zu) int_u^inf exp(-z x) f_X(x) dx``. For the Gaussian-type laws
    the unbounded parts of the two pieces are cancelled analytically.
    """
    z = complex(z)
    u = np.asarray(u, dtype=float)
    p, k = spec.params, spec.kind
    if k == "uniform":
        a, b = p["a"], p["b"]
        m = np.minimum(u, b)
        with np.errstate(over="ignore", invalid="ignore"):
            v = (np.exp(z * (u - a)) - np.exp(z * (u - m))) / (z * (b - a))
        return np.where(u > a, v, 0.0)[()]
    if k == "half_normal":
        return (SQRT_2_OVER_PI / p["sigma"] * _gauss_conv_moments(p["sigma"], z, u, 0)[0])[()]
    if k == "maxwell_chi":
        return (SQRT_2_OVER_PI / p["sigma"] ** 3 * _gauss_conv_moments(p["sigma"], z, u, 2)[2])[()]
    head = np.exp(z * u) * laplace(spec, z)
    if k in ("exponential", "gamma_integer_shape"):
        b = p["rate"]
        n = p.get("shape", 1)
        y = (b + z) * u
        poly = sum(y ** m / math.factorial(m) for m in range(n))
        tail = (b / (b + z)) ** n * np.exp(-b * u) * poly
    else:
        raise ValueError(f"{k} is not a claim law")
    return (head - tail)[()]


# ---------------------------------------------------------------------------
# D(s)


@dataclass(frozen=True)
class CharacteristicFunction:
    """``D(s) = -lambda1 - lambda2 + lambda1 M_C(s) + lambda2 M_X(-s)`` for a system.

    ``pole_list`` holds the exact (location, order) pairs of the poles of D:
    claim-transform poles in the left half-plane and premium moment-function
    poles in the right half-plane.
    """

    system: BonusMalusSystem
    pole_list: tuple[tuple[float, int], ...] = field(init=False)

    def __post_init__(self) -> None:
        poles = list(laplace_poles(self.system.claim)) if self.system.lambda2 > 0 else []
        poles += [(-p, m) for p, m in laplace_poles(self.system.premium)]
        object.__setattr__(self, "pole_list", tuple(poles))

    @property
    def scale(self) -> float:
        return self.system.total_rate

    def M_C(self, s):
        return premium_mgf(self.system.premium, s)

    def M_C_prime(self, s):
        return premium_mgf_prime(self.system.premium, s)

    def D(self, s):
        sy = self.system
        v = -sy.lambda1 - sy.lambda2 + sy.lambda1 * self.M_C(s)
        if sy.lambda2:
            v = v + sy.lambda2 * claim_laplace(sy.claim, s)
        return v

    def D_prime(self, s):
        sy = self.system
        v = sy.lambda1 * self.M_C_prime(s)
        if sy.lambda2:
            v = v + sy.lambda2 * claim_laplace_prime(sy.claim, s)
        return v

    def poles_inside(self, x0: float, x1: float, y0: float, y1: float) -> int:
        """Total pole order strictly inside a rectangle."""
        return sum(m for p, m in self.pole_list if x0 < p < x1 and y0 < 0 < y1)


def eval_D(cf: CharacteristicFunction, s):
    return cf.D(s)


def eval_D_prime(cf: CharacteristicFunction, s):
    return cf.D_prime(s)
