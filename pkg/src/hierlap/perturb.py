"""Point perturbations H = L - sum_i sigma_i * delta_{a_i}.

The perturbed point spectrum solves scalar or determinant secular equations
built from the free resolvent: R(lam) = 1/sigma in the rank-one case, and
det(Sigma^-1 - R(lam, a, a)) = 0 for N bumps.  Because the derivative of the
resolvent matrix in lam is a Gram matrix (hence positive definite), every
eigenvalue branch of the secular matrix decreases strictly across a spectral
gap, so roots are located by bisecting the count of negative branches; this
certifies brackets even for nearly degenerate roots and detects the truly
degenerate ones instead of merging them.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (RootCountAmbiguous, RootRejected, SecularSingularity,
                     ToleranceNotMet)
from .laplacian import (PowerLaw, apply_truncated, describe_multiplier,
                        lambda_of_rank)
from .lattice import LatticeConfig, common_rank_profile
from .resolvent import (DEFAULT_GUARD, DEFAULT_TOL, pole_distance,
                        resolvent_diag, resolvent_kernel)

SECULAR_GUARD = 1e-10
_BISECT_CAP = 300


@dataclass(frozen=True)
class Potential:
    """Finite bump collection; V(x) = -sum_i sigma_i * delta_{a_i}(x).

    Positive sigma is an attractive well.
    """

    bumps: tuple

    def __post_init__(self):
        bumps = tuple((int(a), float(s)) for a, s in self.bumps)
        object.__setattr__(self, "bumps", bumps)
        if not bumps:
            raise ValueError("potential needs at least one bump")
        locs = [a for a, _ in bumps]
        if len(set(locs)) != len(locs):
            raise ValueError("bump locations must be pairwise distinct")
        if any(a < 0 for a in locs):
            raise ValueError("bump locations must be non-negative")
        if any(s == 0.0 for _, s in bumps):
            raise ValueError("bump amplitudes must be nonzero")

    @property
    def locations(self) -> tuple:
        return tuple(a for a, _ in self.bumps)

    @property
    def sigmas(self) -> tuple:
        return tuple(s for _, s in self.bumps)

    @property
    def size(self) -> int:
        return len(self.bumps)


@dataclass(frozen=True)
class SecularMatrix:
    """Matrix with 1/sigma_i on the diagonal and -R(lam, a_i, a_j) off it."""

    lam: complex
    entries: np.ndarray

    @property
    def size(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class SpectrumEntry:
    value: float
    kind: str        # "inherited" | "gap_root" | "negative_root" | "above_top_root"
    gap: object      # gap index k for inherited/gap_root entries, else None
    multiplicity: float  # math.inf for inherited eigenvalues
    residual: float


@dataclass(frozen=True)
class SpectrumReport:
    entries: tuple
    config: dict

    def of_kind(self, kind: str):
        return [e for e in self.entries if e.kind == kind]


def is_recurrent(p: int, spec) -> bool:
    """Whether the zero-energy resolvent series diverges."""
    if isinstance(spec, PowerLaw):
        return spec.alpha >= 1.0
    return p * spec.tail_ratio <= 1.0


def resolvent_scalar(lam: float, p: int, spec, tol: float = DEFAULT_TOL,
                     guard: float = DEFAULT_GUARD) -> float:
    """Real diagonal resolvent value, the monotone side of the secular equation."""
    return resolvent_diag(lam, p, spec, tol, guard).value.real


def neg_threshold(p: int, alpha: float) -> float:
    """Coupling above which the attractive one-bump operator binds, (p - p^alpha)/(p - 1)."""
    return (p - p**alpha) / (p - 1)


def neg_count(alpha: float, sigma: float, p: int) -> int:
    """Number of negative eigenvalues (0 or 1) of the one-bump operator."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if alpha >= 1.0:
        return 1
    return 1 if sigma > neg_threshold(p, alpha) else 0


def _bisect_scalar(f, lo: float, hi: float, tol_abs: float):
    """Root of increasing f by bisection, certified to bracket width tol_abs."""
    flo, fhi = f(lo), f(hi)
    if flo > 0.0 or fhi < 0.0:
        raise ToleranceNotMet(
            f"root not bracketed in [{lo}, {hi}] (f ends: {flo:.3e}, {fhi:.3e})")
    for _ in range(_BISECT_CAP):
        if hi - lo <= tol_abs:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:  # float resolution exhausted
            break
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    if hi - lo <= tol_abs:
        return 0.5 * (lo + hi)
    raise ToleranceNotMet(f"bracket stalled at width {hi - lo:.3e} > {tol_abs:.3e}")


def rank_one_roots(sigma: float, p: int, spec, k_max: int, tol: float = 1e-12,
                   guard: float = DEFAULT_GUARD) -> SpectrumReport:
    """Certified roots of R(lam) = 1/sigma in every gap up to k_max.

    For sigma > 0 the negative root is searched exactly when the recurrence
    criterion or R(0) > 1/sigma holds; for sigma < 0 the root above the top
    of the spectrum is searched instead.
    """
    if sigma == 0.0:
        raise ValueError("sigma must be nonzero")
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    target = 1.0 / sigma
    f = lambda lam: resolvent_scalar(lam, p, spec, guard=guard) - target

    entries = []
    edge = 2.0 * guard  # bracket strictly inside the pole guard
    lam_1 = lambda_of_rank(p, spec, 1)
    for k in range(1, k_max + 1):
        lam_hi = lambda_of_rank(p, spec, k)
        lam_lo = lambda_of_rank(p, spec, k + 1)
        entries.append(SpectrumEntry(lam_hi, "inherited", k, math.inf, 0.0))
        tol_abs = tol * max(abs(lam_hi), 1.0)
        root = _bisect_scalar(f, lam_lo + edge, lam_hi - edge, tol_abs)
        entries.append(SpectrumEntry(root, "gap_root", k, 1.0, abs(f(root))))

    if sigma > 0:
        if is_recurrent(p, spec) or resolvent_scalar(0.0, p, spec) > target:
            lo = -(2.0 * sigma + lam_1)
            # near the binding threshold the root hugs 0 from below; walk the
            # upper bracket end toward 0 until it straddles the root
            hi = -edge
            while f(hi) < 0.0 and hi < -1e-300:
                hi = -abs(hi) * 1e-30
            root = _bisect_scalar(f, lo, hi, tol * max(abs(lo), 1.0))
            entries.append(SpectrumEntry(root, "negative_root", None, 1.0, abs(f(root))))
    else:
        hi = lam_1 + 2.0 * abs(sigma)
        root = _bisect_scalar(f, lam_1 + edge, hi, tol * max(hi, 1.0))
        entries.append(SpectrumEntry(root, "above_top_root", None, 1.0, abs(f(root))))

    entries.sort(key=lambda e: e.value)
    config = {"p": p, "multiplier": describe_multiplier(spec), "sigma": sigma,
              "k_max": k_max, "tol": tol}
    return SpectrumReport(entries=tuple(entries), config=config)


def krein_rank_one(lam, x: int, y: int, sigma: float, a: int, p: int, spec,
                   tol: float = DEFAULT_TOL, guard: float = DEFAULT_GUARD,
                   secular_guard: float = SECULAR_GUARD) -> complex:
    """Perturbed resolvent kernel of L - sigma*delta_a via the rank-one identity."""
    r_aa = resolvent_diag(lam, p, spec, tol, guard).value
    denom = 1.0 - sigma * r_aa
    if abs(denom) < secular_guard:
        raise SecularSingularity(f"1 - sigma*R(lam,a,a) = {denom:.3e} at lam = {lam}")
    r_xy = resolvent_kernel(lam, x, y, p, spec, tol, guard).value
    r_xa = resolvent_kernel(lam, x, a, p, spec, tol, guard).value
    r_ay = resolvent_kernel(lam, a, y, p, spec, tol, guard).value
    return r_xy + sigma * r_xa * r_ay / denom


def secular_matrix(lam, pot: Potential, p: int, spec, tol: float = DEFAULT_TOL,
                   guard: float = DEFAULT_GUARD) -> SecularMatrix:
    """Assemble the N x N secular matrix at lam."""
    lam = complex(lam)
    locs = pot.locations
    n = pot.size
    dtype = float if lam.imag == 0.0 else complex
    entries = np.zeros((n, n), dtype=dtype)
    for i in range(n):
        entries[i, i] = 1.0 / pot.sigmas[i]
        for j in range(i + 1, n):
            val = resolvent_kernel(lam, locs[i], locs[j], p, spec, tol, guard).value
            entries[i, j] = entries[j, i] = -val if dtype is complex else -val.real
    entries.flags.writeable = False
    return SecularMatrix(lam=lam, entries=entries)


def b_matrix(lam, pot: Potential, p: int, spec, tol: float = DEFAULT_TOL,
             guard: float = DEFAULT_GUARD) -> np.ndarray:
    """Sigma^-1 - R(lam, a, a): the secular matrix minus R(lam) on the diagonal."""
    sec = secular_matrix(lam, pot, p, spec, tol, guard)
    r_diag = resolvent_diag(lam, p, spec, tol, guard).value
    if sec.entries.dtype == np.float64:
        r_diag = r_diag.real
    return sec.entries - r_diag * np.eye(pot.size, dtype=sec.entries.dtype)


def _negative_branches(lam: float, pot: Potential, p: int, spec, guard: float) -> int:
    return int(np.sum(np.linalg.eigvalsh(b_matrix(lam, pot, p, spec, guard=guard)) < 0.0))


def _bisect_branch_levels(pot, p, spec, lo, hi, tol_abs, guard, kind, gap, entries):
    """Locate every branch zero-crossing of the secular matrix in (lo, hi)."""
    count = lambda lam: _negative_branches(lam, pot, p, spec, guard)
    c_lo, c_hi = count(lo), count(hi)
    roots = []
    for level in range(c_lo + 1, c_hi + 1):
        a, b = lo, hi
        for _ in range(_BISECT_CAP):
            if b - a <= tol_abs:
                break
            mid = 0.5 * (a + b)
            if mid <= a or mid >= b:
                break
            if count(mid) >= level:
                b = mid
            else:
                a = mid
        if b - a > tol_abs:
            raise ToleranceNotMet(f"branch bracket stalled at width {b - a:.3e}")
        roots.append(0.5 * (a + b))
    for r1, r2 in zip(roots, roots[1:]):
        if r2 - r1 <= 8.0 * tol_abs:
            raise RootCountAmbiguous(
                f"roots at {r1!r} and {r2!r} are inseparable at resolution {tol_abs:.3e}")
    for root in roots:
        branch_vals = np.linalg.eigvalsh(b_matrix(root, pot, p, spec, guard=guard))
        entries.append(SpectrumEntry(root, kind, gap, 1.0, float(np.min(np.abs(branch_vals)))))
    return len(roots)


def finite_rank_roots(pot: Potential, p: int, spec, k_max: int, tol: float = 1e-12,
                      guard: float = DEFAULT_GUARD) -> SpectrumReport:
    """All secular-determinant roots per gap plus negative/above-top roots."""
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    entries = []
    edge = 2.0 * guard
    lam_1 = lambda_of_rank(p, spec, 1)
    sig_abs = max(abs(s) for s in pot.sigmas)
    for k in range(1, k_max + 1):
        lam_hi = lambda_of_rank(p, spec, k)
        lam_lo = lambda_of_rank(p, spec, k + 1)
        entries.append(SpectrumEntry(lam_hi, "inherited", k, math.inf, 0.0))
        tol_abs = tol * max(abs(lam_hi), 1.0)
        _bisect_branch_levels(pot, p, spec, lam_lo + edge, lam_hi - edge,
                              tol_abs, guard, "gap_root", k, entries)

    lo = -(2.0 * sig_abs + lam_1)
    hi = -edge
    if any(s > 0 for s in pot.sigmas):
        # capture bound states that hug 0 from below
        deeper = -1e-300
        if _negative_branches(deeper, pot, p, spec, guard) > \
                _negative_branches(hi, pot, p, spec, guard):
            hi = deeper
    _bisect_branch_levels(pot, p, spec, lo, hi, tol * max(abs(lo), 1.0),
                          guard, "negative_root", None, entries)
    if any(s < 0 for s in pot.sigmas):
        hi = lam_1 + 2.0 * sig_abs
        _bisect_branch_levels(pot, p, spec, lam_1 + edge, hi, tol * max(hi, 1.0),
                              guard, "above_top_root", None, entries)

    entries.sort(key=lambda e: e.value)
    config = {"p": p, "multiplier": describe_multiplier(spec),
              "locations": list(pot.locations), "sigmas": list(pot.sigmas),
              "k_max": k_max, "tol": tol}
    return SpectrumReport(entries=tuple(entries), config=config)


def krein_finite_rank(lam, x: int, y: int, pot: Potential, p: int, spec,
                      tol: float = DEFAULT_TOL, guard: float = DEFAULT_GUARD,
                      secular_guard: float = SECULAR_GUARD) -> complex:
    """Perturbed resolvent kernel via the N x N linear solve."""
    bmat = b_matrix(lam, pot, p, spec, tol, guard)
    svals = np.linalg.svd(bmat, compute_uv=False)
    if svals[-1] < secular_guard * max(1.0, svals[0]):
        raise SecularSingularity(f"secular matrix singular to {svals[-1]:.3e} at lam = {lam}")
    locs = pot.locations
    r_ay = np.array([resolvent_kernel(lam, a, y, p, spec, tol, guard).value for a in locs])
    r_xa = np.array([resolvent_kernel(lam, x, a, p, spec, tol, guard).value for a in locs])
    if bmat.dtype == np.float64 and complex(lam).imag == 0.0:
        r_ay, r_xa = r_ay.real, r_xa.real
    w = np.linalg.solve(bmat, r_ay)
    return complex(resolvent_kernel(lam, x, y, p, spec, tol, guard).value + r_xa @ w)


def correction_norm_bound(lam, pot: Potential, p: int, spec,
                          tol: float = DEFAULT_TOL, guard: float = DEFAULT_GUARD) -> float:
    """Operator-norm bound on the finite-rank resolvent correction.

    ||inverse of the secular matrix|| times the squared norm of the free
    resolvent, the latter being 1/dist(lam, Spec(L)).
    """
    bmat = b_matrix(lam, pot, p, spec, tol, guard)
    svals = np.linalg.svd(bmat, compute_uv=False)
    dist = pole_distance(complex(lam), p, spec)
    return float(1.0 / svals[-1] / dist**2)


@dataclass(frozen=True)
class PointMassEigenfunction:
    values: np.ndarray        # unit-norm over the block
    residual: float           # ||H psi - (root - shift) psi|| on the block
    coefficients: np.ndarray  # null-vector weights of the resolvent columns


def resolvent_profile(lam, a: int, p: int, spec, block_size: int,
                      tol: float = DEFAULT_TOL, guard: float = DEFAULT_GUARD) -> np.ndarray:
    """R(lam, x, a) for every x in {0, ..., block_size - 1}.

    The kernel depends on x only through the common rank with a, so one value
    per rank is computed and scattered.
    """
    mm = common_rank_profile(p, a, block_size)
    table = np.zeros(int(mm.max()) + 1, dtype=complex)
    table[0] = resolvent_diag(lam, p, spec, tol, guard).value
    for m in range(1, len(table)):
        # flip digit m-1 of a without carry: the witness shares the rank-m
        # ball with a but not the rank-(m-1) one
        step = p ** (m - 1)
        witness = a + step if (a // step) % p == 0 else a - step
        table[m] = resolvent_kernel(lam, witness, a, p, spec, tol, guard).value
    out = table[mm]
    return out.real if complex(lam).imag == 0.0 else out


def eigenfunction(lam_root: float, pot: Potential, p: int, spec, block_depth: int,
                  tol: float = DEFAULT_TOL, guard: float = DEFAULT_GUARD) -> PointMassEigenfunction:
    """Reconstruct the eigenfunction of a certified secular root on a block."""
    bmat = b_matrix(lam_root, pot, p, spec, tol, guard)
    _, svals, vt = np.linalg.svd(bmat)
    if svals[-1] > 1e-6 * max(1.0, svals[0]):
        raise RootRejected(
            f"secular matrix at {lam_root!r} has smallest singular value {svals[-1]:.3e}")
    zeta = vt[-1]
    cfg = LatticeConfig(p=p, depth=block_depth, multiplier=spec)
    block = cfg.n_points
    if any(a >= block for a in pot.locations):
        raise ValueError("every bump must lie inside the reconstruction block")
    psi = np.zeros(block)
    for coeff, a in zip(zeta, pot.locations):
        psi += coeff * resolvent_profile(lam_root, a, p, spec, block, tol, guard)
    psi /= np.linalg.norm(psi)
    shift = lambda_of_rank(p, spec, block_depth + 1)
    h_psi = apply_truncated(cfg, psi)
    for a, s in pot.bumps:
        h_psi[a] -= s * psi[a]
    residual = float(np.linalg.norm(h_psi - (lam_root - shift) * psi))
    return PointMassEigenfunction(values=psi, residual=residual, coefficients=zeta)
