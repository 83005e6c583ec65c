"""Hierarchical Laplacian on the p-adic lattice.

The operator is a weighted sum of averaging defects over the interval
partition at every rank r >= 1, with rank-r weight C_r decreasing
geometrically.  Everything observable about it is carried by two sequences:

* the positive eigenvalues lam_1 > lam_2 > ... > 0, where lam_k is attached
  to eigenfunctions supported on rank-k balls, and
* the lattice weights A_k = (p-1) * p**-k, the L2 mass the point mass at any
  site puts on the rank-k eigenspace.

A power-law multiplier gives lam_k = kappa**(k-1) with kappa = p**-alpha;
a tabulated multiplier supplies the eigenvalue list directly and is
extrapolated beyond the table with the geometric ratio of its last two
entries.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ToleranceNotMet
from .lattice import BallAddress, LatticeConfig, common_rank

_MAX_SERIES_TERMS = 500_000


@dataclass(frozen=True)
class PowerLaw:
    """Multiplier u -> u**alpha; eigenvalue ratio kappa = p**-alpha."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    def spectral_dimension(self) -> float:
        return 2.0 / self.alpha


@dataclass(frozen=True)
class TabulatedMultiplier:
    """Explicit positive eigenvalue table lam_1 > lam_2 > ... > 0.

    Beyond the table the sequence is extrapolated geometrically with ratio
    values[-1]/values[-2], so tails of all series stay certified under the
    documented extrapolation model.
    """

    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) < 2:
            raise ValueError("tabulated multiplier needs at least two eigenvalues")
        if any(v <= 0 for v in vals):
            raise ValueError("tabulated eigenvalues must be positive")
        if any(b >= a for a, b in zip(vals, vals[1:])):
            raise ValueError("tabulated eigenvalues must decrease strictly")

    @property
    def tail_ratio(self) -> float:
        return self.values[-1] / self.values[-2]


def kappa(p: int, spec) -> float:
    if not isinstance(spec, PowerLaw):
        raise TypeError("kappa is defined for power-law multipliers only")
    return p ** (-spec.alpha)


def describe_multiplier(spec) -> dict:
    """JSON-friendly echo of a multiplier spec."""
    if isinstance(spec, PowerLaw):
        return {"kind": "power_law", "alpha": spec.alpha}
    return {"kind": "tabulated", "values": list(spec.values)}


def lambda_of_rank(p: int, spec, rank: int) -> float:
    """Eigenvalue lam_rank; rank 0 (singleton) carries the full weight lam_1."""
    if rank < 0:
        raise ValueError(f"rank must be >= 0, got {rank}")
    k = max(rank, 1)
    if isinstance(spec, PowerLaw):
        return p ** (-spec.alpha * (k - 1))
    vals = spec.values
    if k <= len(vals):
        return vals[k - 1]
    return vals[-1] * spec.tail_ratio ** (k - len(vals))


def lambda_of_ball(p: int, spec, b: BallAddress) -> float:
    return lambda_of_rank(p, spec, b.rank)


def coefficient(p: int, spec, rank: int) -> float:
    """Weight of the rank-r averaging term: lam_r - lam_(r+1) (0 at rank 0)."""
    if rank == 0:
        return 0.0
    return lambda_of_rank(p, spec, rank) - lambda_of_rank(p, spec, rank + 1)


def a_weight(p: int, k: int) -> float:
    """Spectral weight A_k = (p-1) * p**-k of the point mass at rank k."""
    return (p - 1) * p ** (-k)


def jump_constant(p: int, alpha: float) -> float:
    """Prefactor of the jump kernel, (1/kappa - 1) / (1 - kappa/p)."""
    kap = p ** (-alpha)
    return (1.0 / kap - 1.0) / (1.0 - kap / p)


def jump_kernel(p: int, spec, x: int, y: int) -> float:
    """Off-diagonal jump rate J(x, y); power-law multipliers only."""
    if not isinstance(spec, PowerLaw):
        raise TypeError("jump kernel in closed form requires a power-law multiplier")
    if x == y:
        raise ValueError("jump kernel is defined off the diagonal only")
    m = common_rank(p, x, y)
    # d(x,y)^-(1+alpha) evaluated as a single power of p, d = p**m
    return jump_constant(p, spec.alpha) * p ** (-m * (1.0 + spec.alpha))


def spectrum_of_L(p: int, spec, k_max: int) -> list[float]:
    """The k_max largest eigenvalues lam_1 > lam_2 > ... (0 is always spectral too)."""
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    return [lambda_of_rank(p, spec, k) for k in range(1, k_max + 1)]


def spectral_function(tau: float, p: int, spec) -> float:
    """Integrated eigenvalue counting function N(tau).

    Left-continuous step function jumping at each lam_k; on the step
    (lam_(k+2), lam_(k+1)] its value is p**-k, the reciprocal measure of the
    rank-k ball carrying the eigenfunctions directly above.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if tau > lambda_of_rank(p, spec, 1):
        return 1.0
    k = 0
    while lambda_of_rank(p, spec, k + 2) >= tau:
        k += 1
    return float(p) ** (-k)


@dataclass(frozen=True)
class EigenPair:
    """Child ball B inside its parent B', with the eigenvalue lam(B') of f_B."""

    ball: BallAddress
    sibling_index: int
    eigenvalue: float


def eigen_pairs(cfg: LatticeConfig):
    """All (child ball, eigenvalue) pairs with parent rank <= depth."""
    p = cfg.p
    out = []
    for parent_rank in range(1, cfg.depth + 1):
        lam = lambda_of_rank(p, cfg.multiplier, parent_rank)
        for child_index in range(p ** (cfg.depth - parent_rank + 1)):
            out.append(EigenPair(BallAddress(parent_rank - 1, child_index), child_index % p, lam))
    return out


def eigenfunction_vector(cfg: LatticeConfig, ball: BallAddress) -> np.ndarray:
    """f_B = 1_B/m(B) - 1_B'/m(B') restricted to the truncation block."""
    p = cfg.p
    if ball.rank + 1 > cfg.depth:
        raise ValueError("parent ball exceeds the truncation depth")
    n = cfg.n_points
    v = np.zeros(n)
    mb = p**ball.rank
    lo = ball.index * mb
    v[lo : lo + mb] += 1.0 / mb
    parent = ball.parent(p)
    mbp = p**parent.rank
    lo = parent.index * mbp
    v[lo : lo + mbp] -= 1.0 / mbp
    return v


@dataclass(frozen=True)
class DenseOperator:
    """Truncated operator on the depth-n block.

    Eigenvalues are {0} with the constant eigenvector plus
    {lam_k - truncation_shift : k = 1..n} with multiplicities (p-1)*p**(n-k);
    the shift is lam_(n+1), the total weight of the discarded ranks.
    """

    depth: int
    entries: np.ndarray
    truncation_shift: float


def _common_rank_matrix(p: int, depth: int) -> np.ndarray:
    """Matrix of minimal common ranks over the depth-n block."""
    n = p**depth
    same_count = np.zeros((n, n), dtype=np.int16)
    cur = np.arange(n)
    for _ in range(depth + 1):
        same_count += cur[:, None] == cur[None, :]
        cur = cur // p
    return (depth + 1 - same_count).astype(np.int64)


def assemble_dense(cfg: LatticeConfig) -> DenseOperator:
    """Dense matrix of the operator truncated to ranks 1..depth."""
    p, n = cfg.p, cfg.depth
    spec = cfg.multiplier
    coeffs = [coefficient(p, spec, r) for r in range(1, n + 1)]
    # tails[m] = sum_{r=m..n} C_r * p^-r: minus the off-diagonal entry at common rank m
    tails = np.zeros(n + 1)
    acc = 0.0
    for r in range(n, 0, -1):
        acc += coeffs[r - 1] * p ** (-r)
        tails[r] = acc
    shift = lambda_of_rank(p, spec, n + 1)
    diag = (lambda_of_rank(p, spec, 1) - shift) - tails[1]

    m_matrix = _common_rank_matrix(p, n)
    entries = -np.take(tails, m_matrix)
    np.fill_diagonal(entries, diag)
    entries.flags.writeable = False
    return DenseOperator(depth=n, entries=entries, truncation_shift=shift)


def apply_truncated(cfg: LatticeConfig, vec: np.ndarray) -> np.ndarray:
    """Matrix-free action of the truncated operator on a block vector."""
    p, n = cfg.p, cfg.depth
    spec = cfg.multiplier
    v = np.asarray(vec, dtype=float)
    if v.shape != (cfg.n_points,):
        raise ValueError(f"expected a vector of length {cfg.n_points}, got {v.shape}")
    total = lambda_of_rank(p, spec, 1) - lambda_of_rank(p, spec, n + 1)
    out = total * v
    for r in range(1, n + 1):
        means = v.reshape(-1, p**r).mean(axis=1)
        out -= coefficient(p, spec, r) * np.repeat(means, p**r)
    return out


def heat_kernel_diag_certified(t: float, p: int, spec, tol: float = 1e-13):
    """(value, remainder bound) of the on-diagonal heat kernel series."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    total = 0.0
    pk = 1.0
    for k in range(1, _MAX_SERIES_TERMS):
        pk /= p
        total += (p - 1) * pk * math.exp(-lambda_of_rank(p, spec, k) * t)
        bound = t * lambda_of_rank(p, spec, k + 1) * pk
        if bound < tol:
            return total + pk, bound
    raise ToleranceNotMet("heat kernel series did not certify within the term cap")


def heat_kernel_diag(t: float, p: int, spec, tol: float = 1e-13) -> float:
    """On-diagonal heat kernel sum_k A_k * exp(-lam_k * t).

    The series is cut once the analytic remainder bound t*lam_(K+1)*p**-K
    (from 0 <= 1 - exp(-x) <= x) drops below tol; the limit contribution
    p**-K of the omitted ranks is added exactly.
    """
    return heat_kernel_diag_certified(t, p, spec, tol)[0]


def heat_kernel_certified(t: float, x: int, y: int, p: int, spec, tol: float = 1e-13):
    """(value, remainder bound) of p(t, x, y)."""
    if x == y:
        return heat_kernel_diag_certified(t, p, spec, tol)
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    m = common_rank(p, x, y)
    em = math.exp(-lambda_of_rank(p, spec, m) * t)
    total = 0.0
    pk = float(p) ** (-m)
    for k in range(m + 1, m + _MAX_SERIES_TERMS):
        pk /= p
        total += (p - 1) * pk * (math.exp(-lambda_of_rank(p, spec, k) * t) - em)
        bound = t * lambda_of_rank(p, spec, k + 1) * pk
        if bound < tol:
            return total + pk * (1.0 - em), bound
    raise ToleranceNotMet("heat kernel series did not certify within the term cap")


def heat_kernel(t: float, x: int, y: int, p: int, spec, tol: float = 1e-13) -> float:
    """Heat kernel p(t, x, y) via the eigen-expansion.

    For x != y with common ball rank m the expansion regroups into
    sum_{j>m} A_j * (exp(-lam_j t) - exp(-lam_m t)), a series of positive
    terms, so small-t evaluation suffers no cancellation.
    """
    return heat_kernel_certified(t, x, y, p, spec, tol)[0]


def heat_kernel_truncated(cfg: LatticeConfig, t: float) -> np.ndarray:
    """Exact heat kernel matrix exp(-t*L_n) of the truncated operator."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    p, n = cfg.p, cfg.depth
    spec = cfg.multiplier
    shift = lambda_of_rank(p, spec, n + 1)
    # decay factors of the n interior eigenspaces plus the flat mode
    decay = np.array(
        [math.exp(-(lambda_of_rank(p, spec, j) - shift) * t) for j in range(1, n + 1)]
    )
    weights = np.array([a_weight(p, j) for j in range(1, n + 1)])
    # tail_sums[m] = sum_{j=m+1..n} A_j exp(-mu_j t)
    tail_sums = np.zeros(n + 1)
    tail_sums[:n] = np.cumsum((weights * decay)[::-1])[::-1]
    first = np.zeros(n + 1)
    ranks = np.arange(1, n + 1)
    first[1:] = -(np.float64(p) ** (-ranks)) * decay
    per_rank = tail_sums + first + p ** (-n)

    m_matrix = _common_rank_matrix(p, n)
    return np.take(per_rank, m_matrix)
