"""Sparse deterministic potentials and random-amplitude diagnostics.

For bump amplitudes drawn from a density supported on [lo, hi], the limit
points of the amplitude sequence almost surely fill the whole interval, so
the essential spectrum picks up, inside every spectral gap, the closed
interval of solutions of R(lam) in [1/hi, 1/lo].  The Monte-Carlo routines
below estimate fractional moments of the perturbed resolvent and eigenvector
decay statistics on dense truncations; they are diagnostics with explicit
confidence procedures, not proofs.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import SecularSingularity, ToleranceNotMet
from .lattice import LatticeConfig, common_rank_profile, distance
from .laplacian import assemble_dense, describe_multiplier, lambda_of_rank
from .oracle import dense_eigensolve
from .perturb import (Potential, is_recurrent, krein_finite_rank,
                      resolvent_scalar)
from .resolvent import DEFAULT_GUARD

_BISECT_CAP = 300


@dataclass(frozen=True)
class SparseConfig:
    """Sparse bump locations plus an amplitude distribution on [lo, hi].

    density is either "uniform" or a tuple of positive weights describing a
    piecewise-constant density over equal-width cells of [lo, hi].
    """

    locations: tuple
    amplitude_range: tuple
    density: object = "uniform"

    def __post_init__(self):
        locs = tuple(int(a) for a in self.locations)
        object.__setattr__(self, "locations", locs)
        rng = (float(self.amplitude_range[0]), float(self.amplitude_range[1]))
        object.__setattr__(self, "amplitude_range", rng)
        if len(locs) < 1:
            raise ValueError("at least one bump location is required")
        if any(b <= a for a, b in zip(locs, locs[1:])):
            raise ValueError("locations must be strictly increasing")
        if locs[0] < 0:
            raise ValueError("locations must be non-negative")
        if not 0 < rng[0] <= rng[1]:
            raise ValueError(f"amplitude range must satisfy 0 < lo <= hi, got {rng}")
        if self.density != "uniform":
            weights = tuple(float(w) for w in self.density)
            object.__setattr__(self, "density", weights)
            if not weights or any(w < 0 for w in weights) or sum(weights) <= 0:
                raise ValueError("tabulated density needs non-negative weights, not all zero")

    def distances_to(self, p: int, y: int) -> list:
        return [distance(p, a, y) for a in self.locations]


def validate_sparse_growth(cfg: SparseConfig, p: int, y: int = 0) -> None:
    """Check that d(a_i, y) is eventually strictly increasing over the list."""
    dists = cfg.distances_to(p, y)
    tail = dists[max(0, len(dists) - max(2, len(dists) // 2)):]
    if any(b <= a for a, b in zip(tail, tail[1:])):
        raise ValueError("bump distances to the reference point do not eventually increase")


def sparsity_metric(p: int, locations, r: float, horizon: int = 0) -> float:
    """sup over i >= horizon of sum_{j >= horizon, j != i} d(a_i, a_j)**-r."""
    if not 0 < r <= 1:
        raise ValueError(f"exponent r must lie in (0, 1], got {r}")
    locs = list(locations)[horizon:]
    if len(locs) < 2:
        raise ValueError("need at least two locations beyond the horizon")
    best = 0.0
    for i, a in enumerate(locs):
        total = math.fsum(
            float(distance(p, a, b)) ** (-r) for j, b in enumerate(locs) if j != i)
        best = max(best, total)
    return best


@dataclass(frozen=True)
class SpectralInterval:
    gap: object       # gap index k, or None for the negative-axis interval
    lo: float
    hi: float
    lo_residual: float
    hi_residual: float
    clipped_at_zero: bool = False


@dataclass(frozen=True)
class EssentialSpectrumSet:
    inherited: tuple       # (0, lam_1, ..., lam_k_max)
    intervals: tuple       # one SpectralInterval per gap k = 1..k_max
    negative: object       # SpectralInterval or None
    config: dict


def _bisect_to_target(f, lo, hi, target, tol):
    """lam with f(lam) = target for increasing f; certifies the residual."""
    flo, fhi = f(lo), f(hi)
    if flo > target or fhi < target:
        raise ToleranceNotMet(f"target {target} not bracketed in [{lo}, {hi}]")
    for _ in range(_BISECT_CAP):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    residual = abs(f(root) - target)
    if residual > tol:
        raise ToleranceNotMet(f"endpoint residual {residual:.3e} exceeds {tol:.3e}")
    return root, residual


def essential_spectrum_sparse(cfg: SparseConfig, p: int, spec, k_max: int,
                              tol: float = 1e-10,
                              guard: float = DEFAULT_GUARD) -> EssentialSpectrumSet:
    """Certified interval endpoints R(lam) in [1/hi, 1/lo] per gap and below zero."""
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    lo_amp, hi_amp = cfg.amplitude_range
    t_lo, t_hi = 1.0 / hi_amp, 1.0 / lo_amp  # increasing R hits t_lo first
    f = lambda lam: resolvent_scalar(lam, p, spec, guard=guard)
    edge = 2.0 * guard

    intervals = []
    for k in range(1, k_max + 1):
        a = lambda_of_rank(p, spec, k + 1) + edge
        b = lambda_of_rank(p, spec, k) - edge
        lo_end, lo_res = _bisect_to_target(f, a, b, t_lo, tol)
        hi_end, hi_res = _bisect_to_target(f, a, b, t_hi, tol)
        intervals.append(SpectralInterval(k, lo_end, hi_end, lo_res, hi_res))

    lam_1 = lambda_of_rank(p, spec, 1)
    bracket_lo = -(2.0 * hi_amp + lam_1)
    negative = None
    if is_recurrent(p, spec):
        lo_end, lo_res = _bisect_to_target(f, bracket_lo, -edge, t_lo, tol)
        hi_end, hi_res = _bisect_to_target(f, bracket_lo, -edge, t_hi, tol)
        negative = SpectralInterval(None, lo_end, hi_end, lo_res, hi_res)
    else:
        r_zero = resolvent_scalar(0.0, p, spec)
        if r_zero > t_lo:
            lo_end, lo_res = _bisect_to_target(f, bracket_lo, -edge, t_lo, tol)
            if r_zero > t_hi:
                hi_end, hi_res = _bisect_to_target(f, bracket_lo, -edge, t_hi, tol)
                negative = SpectralInterval(None, lo_end, hi_end, lo_res, hi_res)
            else:
                negative = SpectralInterval(None, lo_end, 0.0, lo_res, 0.0,
                                            clipped_at_zero=True)

    inherited = (0.0,) + tuple(lambda_of_rank(p, spec, k) for k in range(1, k_max + 1))
    config = {"p": p, "multiplier": describe_multiplier(spec),
              "amplitude_range": list(cfg.amplitude_range), "k_max": k_max, "tol": tol}
    return EssentialSpectrumSet(inherited=inherited, intervals=tuple(intervals),
                                negative=negative, config=config)


def _draw_amplitude(cfg: SparseConfig, u: float) -> float:
    lo, hi = cfg.amplitude_range
    if cfg.density == "uniform":
        return lo + (hi - lo) * u
    weights = np.asarray(cfg.density, dtype=float)
    cdf = np.cumsum(weights) / np.sum(weights)
    cell = int(np.searchsorted(cdf, u, side="right"))
    cell = min(cell, len(weights) - 1)
    prev = cdf[cell - 1] if cell > 0 else 0.0
    frac = (u - prev) / max(cdf[cell] - prev, 1e-300)
    width = (hi - lo) / len(weights)
    return lo + (cell + frac) * width


def _sample_keyed(cfg: SparseConfig, key: tuple) -> Potential:
    sigmas = []
    for i in range(len(cfg.locations)):
        rng = np.random.default_rng(np.random.SeedSequence(list(key) + [i]))
        sigmas.append(_draw_amplitude(cfg, rng.random()))
    return Potential(tuple(zip(cfg.locations, sigmas)))


def sample_potential(cfg: SparseConfig, seed: int) -> Potential:
    """Draw one amplitude per location, one independent stream per location.

    The stream for location i is keyed by (seed, i), so the draw for any
    location is reproducible regardless of how work is scheduled.
    """
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    return _sample_keyed(cfg, (seed,))


@dataclass(frozen=True)
class MomentEstimate:
    s: float
    tau: float
    eps: float
    per_location: tuple     # (location, mean of |R_V|^s, standard error)
    samples: np.ndarray     # effective trials x locations, |R_V|^s
    trials_effective: int
    trials_discarded: int
    seed: int


def fractional_moment_estimate(cfg: SparseConfig, p: int, spec, s: float, tau: float,
                               eps: float, y: int, trials: int, seed: int) -> MomentEstimate:
    """Monte-Carlo means of |R_V(tau + i*eps, a_j, y)|^s per bump location.

    Trials whose sampled secular matrix is numerically singular are dropped
    and counted, never resampled.
    """
    if not 0 < s < 0.5:
        raise ValueError(f"s must lie in (0, 1/2), got {s}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if trials < 2:
        raise ValueError("need at least two trials for a standard error")
    if len(cfg.locations) >= 2:
        validate_sparse_growth(cfg, p, y)
    lam = complex(tau, eps)
    locs = cfg.locations
    rows = []
    discarded = 0
    for t in range(trials):
        pot = _sample_keyed(cfg, (seed, t))
        try:
            row = [abs(krein_finite_rank(lam, a, y, pot, p, spec)) ** s for a in locs]
        except SecularSingularity:
            discarded += 1
            continue
        rows.append(row)
    samples = np.array(rows)
    n_eff = len(rows)
    per_location = []
    for j, a in enumerate(locs):
        col = samples[:, j]
        mean = math.fsum(col) / n_eff
        var = math.fsum((c - mean) ** 2 for c in col) / (n_eff - 1)
        per_location.append((a, mean, math.sqrt(var / n_eff)))
    return MomentEstimate(s=s, tau=tau, eps=eps, per_location=tuple(per_location),
                          samples=samples, trials_effective=n_eff,
                          trials_discarded=discarded, seed=seed)


@dataclass(frozen=True)
class LocalizationReport:
    decay_slopes: np.ndarray     # one fitted slope per analyzed eigenvector
    iprs: np.ndarray
    median_slope: float
    median_slope_ci95: tuple
    outside_mass_fraction: float
    eigenvalues_total: int
    windows: tuple               # fattened (lo, hi) windows actually used
    trials: int
    seed: int
    config: dict


def _decay_slope(psi: np.ndarray, p: int) -> float:
    peak = int(np.argmax(np.abs(psi)))
    ranks = common_rank_profile(p, peak, len(psi))
    dist_arr = np.float64(p) ** ranks
    dist_arr[peak] = 0.0
    rho = np.log1p(dist_arr)
    mag = np.abs(psi)
    mask = mag > 1e-13 * mag.max()
    slope, _ = np.polyfit(rho[mask], np.log(mag[mask]), 1)
    return float(slope)


def localization_diagnostics(cfg: SparseConfig, p: int, spec, depth: int, trials: int,
                             seed: int, k_gaps: int = 3, window_fat: float = 1e-3,
                             threads: int = 1) -> LocalizationReport:
    """Dense-truncation eigenvector statistics under random amplitudes.

    Per trial: eigensolve of the truncated perturbed operator; eigenvalues
    falling in the fattened essential-spectrum windows contribute an inverse
    participation ratio and a least-squares decay rate of ln|psi| against
    rho(x, peak) = ln(1 + d(x, peak)).  Finite volume cannot rule out
    continuous spectrum; these are decay statistics only.

    Trial t draws its amplitudes from streams keyed (seed, t, location), so
    the report is identical for any thread count.
    """
    lattice = LatticeConfig(p=p, depth=depth, multiplier=spec)
    block = lattice.n_points
    if any(a >= block for a in cfg.locations):
        raise ValueError("every bump location must lie inside the truncation block")
    if trials < 1:
        raise ValueError("need at least one trial")

    ess = essential_spectrum_sparse(cfg, p, spec, k_max=depth)
    shift = lambda_of_rank(p, spec, depth + 1)
    fat = shift + window_fat
    all_ivals = list(ess.intervals) + ([ess.negative] if ess.negative else [])
    fattened = [(iv.lo - fat, iv.hi + fat) for iv in all_ivals]
    analysis_ivals = [iv for iv in all_ivals if iv.gap is None or iv.gap <= k_gaps]
    analysis_windows = [(iv.lo - fat, iv.hi + fat) for iv in analysis_ivals]
    inherited = [0.0] + [lambda_of_rank(p, spec, k) for k in range(1, depth + 1)]

    base = assemble_dense(lattice).entries

    def trial_stats(t):
        pot = _sample_keyed(cfg, (seed, t))
        h = base.copy()
        for a, sig in pot.bumps:
            h[a, a] -= sig
        spectrum = dense_eigensolve(h)
        t_slopes, t_iprs, t_outside = [], [], 0
        for idx, mu in enumerate(spectrum.eigenvalues):
            in_window = any(lo <= mu <= hi for lo, hi in fattened)
            near_inherited = any(abs(mu - v) <= fat for v in inherited)
            if not in_window and not near_inherited:
                t_outside += 1
            if any(lo <= mu <= hi for lo, hi in analysis_windows):
                psi = spectrum.eigenvectors[:, idx]
                t_iprs.append(float(np.sum(psi**4)))
                t_slopes.append(_decay_slope(psi, p))
        return t_slopes, t_iprs, t_outside

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_trial = list(pool.map(trial_stats, range(trials)))
    else:
        per_trial = [trial_stats(t) for t in range(trials)]

    slopes, iprs = [], []
    outside = 0
    total = trials * block
    for t_slopes, t_iprs, t_outside in per_trial:
        slopes.extend(t_slopes)
        iprs.extend(t_iprs)
        outside += t_outside

    slopes_arr = np.array(slopes)
    iprs_arr = np.array(iprs)
    median = float(np.median(slopes_arr)) if len(slopes_arr) else math.nan
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB007]))
    if len(slopes_arr):
        boot = [float(np.median(rng.choice(slopes_arr, size=len(slopes_arr), replace=True)))
                for _ in range(2000)]
        ci = (float(np.percentile(boot, 2.5)), float(np.percentile(boot, 97.5)))
    else:
        ci = (math.nan, math.nan)
    config = {"p": p, "multiplier": describe_multiplier(spec), "depth": depth,
              "locations": list(cfg.locations),
              "amplitude_range": list(cfg.amplitude_range),
              "k_gaps": k_gaps, "window_fat": window_fat}
    return LocalizationReport(decay_slopes=slopes_arr, iprs=iprs_arr,
                              median_slope=median, median_slope_ci95=ci,
                              outside_mass_fraction=outside / total,
                              eigenvalues_total=total,
                              windows=tuple(analysis_windows), trials=trials,
                              seed=seed, config=config)
