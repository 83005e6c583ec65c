"""Resolvent kernels of the free hierarchical Laplacian.

The kernel at coinciding points is the pole expansion

    R(lam) = sum_{k>=1} A_k / (lam_k - lam),      A_k = (p-1) * p**-k,

independent of the base point.  At distinct points with minimal common ball
of rank m the expansion starts with a single negative-residue term,

    R(lam, x, y) = -p**-m / (lam_m - lam) + sum_{k>m} A_k / (lam_k - lam).

Series are summed with a certified remainder: after K explicit terms the
omitted ranks contribute p**-K / (0 - lam) exactly in the limit, and the
correction is bounded by lam_(K+1) * p**-K / (dist(lam, [0, lam_(K+1)]) * |lam|).
Every returned value carries that bound.  Zero energy (the Green function)
is evaluated in closed form and is available only in the transient regime.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

from .errors import PoleProximity, RecurrentRegime, ToleranceNotMet
from .laplacian import PowerLaw, a_weight, lambda_of_rank
from .lattice import LatticeConfig, common_rank

DEFAULT_TOL = 1e-13
DEFAULT_GUARD = 1e-12

_MAX_SERIES_TERMS = 500_000


@dataclass(frozen=True)
class ResolventValue:
    """Kernel value with a certified truncation-tail bound.

    pole_distance is the distance from the evaluation point to the nearest
    spectral pole ({lam_k} or their limit point 0); tail_bound is finite
    whenever that distance is positive.
    """

    value: complex
    tail_bound: float
    pole_distance: float


def _segment_distance(lam: complex, s: float) -> float:
    """Distance from lam to the real segment [0, s]."""
    if lam.real < 0:
        return math.hypot(lam.real, lam.imag)
    if lam.real > s:
        return math.hypot(lam.real - s, lam.imag)
    return abs(lam.imag)


def pole_distance(lam: complex, p: int, spec) -> float:
    """Distance from lam to {0} union {lam_k}."""
    lam = complex(lam)
    best = abs(lam)
    if lam.real <= 0:
        return best
    k = 1
    while k < _MAX_SERIES_TERMS:
        lk = lambda_of_rank(p, spec, k)
        best = min(best, abs(lam - lk))
        if lk < lam.real:
            return best
        k += 1
    return best


def _series_from_rank(lam: complex, p: int, spec, m: int, tol: float):
    """sum_{k>m} A_k / (lam_k - lam) with certified tail, lam != 0."""
    absl = abs(lam)
    total = 0.0 if lam.imag == 0.0 else 0j
    lam_s = lam.real if lam.imag == 0.0 else lam
    pk = float(p) ** (-m)
    for k in range(m + 1, m + _MAX_SERIES_TERMS):
        pk /= p
        total += (p - 1) * pk / (lambda_of_rank(p, spec, k) - lam_s)
        nxt = lambda_of_rank(p, spec, k + 1)
        d_seg = _segment_distance(lam, nxt)
        if d_seg > 0.0:
            # associated as two ratios so extreme |lam| cannot underflow it
            bound = (nxt / absl) * (pk / d_seg)
            if bound < tol:
                return total + pk / (0.0 - lam_s), bound
    raise ToleranceNotMet("resolvent series did not certify within the term cap")


def _zero_energy_tail(p: int, spec, m: int) -> float:
    """sum_{k>m} A_k / lam_k, exact under the multiplier's tail model."""
    if isinstance(spec, PowerLaw):
        if spec.alpha >= 1:
            raise RecurrentRegime(f"zero-energy series diverges for alpha = {spec.alpha}")
        beta = 1.0 - spec.alpha
        return (p - 1) * p ** (-spec.alpha) * p ** (-(m + 1) * beta) / (1.0 - p ** (-beta))
    ratio = 1.0 / (p * spec.tail_ratio)
    if ratio >= 1.0:
        raise RecurrentRegime("tabulated tail decays no faster than the lattice weights")
    total = 0.0
    k = m + 1
    while k <= len(spec.values):
        total += a_weight(p, k) / lambda_of_rank(p, spec, k)
        k += 1
    first_tail = a_weight(p, k) / lambda_of_rank(p, spec, k)
    return total + first_tail / (1.0 - ratio)


def _guard_violation(lam: complex, dist: float, guard: float) -> bool:
    """Whether lam is dangerously close to an actual pole.

    The poles all lie on the positive real axis; for Re(lam) <= 0 every
    denominator lam_k - lam is bounded below by |lam| with uniform sign, so
    evaluation there is well-conditioned however close to 0 the point sits
    (negative bound-state roots can hug 0 from below).
    """
    return lam.real > 0 and dist < guard


@lru_cache(maxsize=65536)
def _diag_cached(lam: complex, p: int, spec, tol: float, guard: float) -> ResolventValue:
    dist = pole_distance(lam, p, spec)
    if lam == 0:
        # Green-function endpoint: exact closed form, transient regime only
        return ResolventValue(complex(_zero_energy_tail(p, spec, 0)), 0.0, 0.0)
    if _guard_violation(lam, dist, guard):
        raise PoleProximity(f"lambda = {lam} is within {guard} of a spectral pole")
    value, bound = _series_from_rank(lam, p, spec, 0, tol)
    return ResolventValue(complex(value), bound, dist)


def resolvent_diag(lam, p: int, spec, tol: float = DEFAULT_TOL,
                   guard: float = DEFAULT_GUARD) -> ResolventValue:
    """R(lam, a, a); base-point independent, hence cached per (lam, spec)."""
    return _diag_cached(complex(lam), p, spec, float(tol), float(guard))


def resolvent_offdiag(lam, x: int, y: int, p: int, spec, tol: float = DEFAULT_TOL,
                      guard: float = DEFAULT_GUARD) -> ResolventValue:
    """R(lam, x, y) for x != y."""
    if x == y:
        raise ValueError("off-diagonal kernel requires x != y")
    lam = complex(lam)
    m = common_rank(p, x, y)
    lam_m = lambda_of_rank(p, spec, m)
    if lam == 0:
        tail = _zero_energy_tail(p, spec, m)
        return ResolventValue(complex(-(float(p) ** (-m)) / lam_m + tail), 0.0, 0.0)
    dist = pole_distance(lam, p, spec)
    if _guard_violation(lam, dist, guard):
        raise PoleProximity(f"lambda = {lam} is within {guard} of a spectral pole")
    lam_s = lam.real if lam.imag == 0.0 else lam
    first = -(float(p) ** (-m)) / (lam_m - lam_s)
    tail, bound = _series_from_rank(lam, p, spec, m, tol)
    return ResolventValue(complex(first + tail), bound, dist)


def resolvent_kernel(lam, x: int, y: int, p: int, spec, tol: float = DEFAULT_TOL,
                     guard: float = DEFAULT_GUARD) -> ResolventValue:
    """Diagonal or off-diagonal kernel, dispatched on the point pair."""
    if x == y:
        return resolvent_diag(lam, p, spec, tol, guard)
    return resolvent_offdiag(lam, x, y, p, spec, tol, guard)


def green_function(x: int, y: int, p: int, spec,
                   tol: float = DEFAULT_TOL) -> ResolventValue:
    """Zero-energy kernel; raises RecurrentRegime when the series diverges."""
    del tol  # closed form, kept for signature symmetry with the series ops
    if x == y:
        return ResolventValue(complex(_zero_energy_tail(p, spec, 0)), 0.0, 0.0)
    m = common_rank(p, x, y)
    value = -(float(p) ** (-m)) / lambda_of_rank(p, spec, m) + _zero_energy_tail(p, spec, m)
    return ResolventValue(complex(value), 0.0, 0.0)


def truncated_eigenvalues(cfg: LatticeConfig) -> list[float]:
    """Distinct eigenvalues {0} + {lam_k - shift} of the depth-n operator."""
    p, n = cfg.p, cfg.depth
    shift = lambda_of_rank(p, cfg.multiplier, n + 1)
    return [0.0] + [lambda_of_rank(p, cfg.multiplier, k) - shift for k in range(1, n + 1)]


def resolvent_truncated(lam, x: int, y: int, cfg: LatticeConfig,
                        guard: float = DEFAULT_GUARD) -> complex:
    """Exact (x, y) entry of the inverse of (L_n - lam*I) on the depth-n block.

    Finite eigen-expansion: the usual pole terms with eigenvalues shifted by
    lam_(n+1), plus the flat-mode contribution p**-n / (0 - lam).
    """
    lam = complex(lam)
    p, n = cfg.p, cfg.depth
    spec = cfg.multiplier
    shift = lambda_of_rank(p, spec, n + 1)
    dist = min(abs(lam - mu) for mu in truncated_eigenvalues(cfg))
    if dist < guard:
        raise PoleProximity(f"lambda = {lam} is within {guard} of a truncated eigenvalue")
    lam_s = lam.real if lam.imag == 0.0 else lam
    m = common_rank(p, x, y)
    total = (float(p) ** (-n)) / (0.0 - lam_s)
    for k in range(m + 1, n + 1):
        total += a_weight(p, k) / (lambda_of_rank(p, spec, k) - shift - lam_s)
    if x != y:
        total += -(float(p) ** (-m)) / (lambda_of_rank(p, spec, m) - shift - lam_s)
    return complex(total)
