import math

import numpy as np
import pytest

from hierlap.errors import RootCountAmbiguous, RootRejected, SecularSingularity
from hierlap.laplacian import PowerLaw, assemble_dense, lambda_of_rank
from hierlap.lattice import LatticeConfig, common_rank, distance
from hierlap.oracle import dense_eigensolve, dense_resolvent_solve
from hierlap.perturb import (Potential, b_matrix, correction_norm_bound,
                             eigenfunction, finite_rank_roots,
                             krein_finite_rank, krein_rank_one, neg_count,
                             neg_threshold, rank_one_roots, resolvent_scalar,
                             secular_matrix)
from hierlap.resolvent import resolvent_diag, resolvent_kernel, resolvent_truncated

P2A1 = PowerLaw(1.0)
P2AH = PowerLaw(0.5)


def dense_hamiltonian(cfg, pot):
    h = assemble_dense(cfg).entries.copy()
    for a, s in pot.bumps:
        h[a, a] -= s
    return h


def gap_eigenvalues(evals, p, spec, k, shift, pad=1e-8):
    lo = lambda_of_rank(p, spec, k + 1) - shift + pad
    hi = lambda_of_rank(p, spec, k) - shift - pad
    return [e for e in evals if lo < e < hi]


def test_negative_root_criterion_examples():
    rep = rank_one_roots(1.0, 2, P2AH, k_max=2)
    assert len(rep.of_kind("negative_root")) == 1  # R(0) = 1.707... > 1
    rep = rank_one_roots(0.5, 2, P2AH, k_max=2)
    assert len(rep.of_kind("negative_root")) == 0  # 1/sigma = 2 > R(0)


def test_rank_one_gap_roots_against_dense_oracle():
    k_max, n = 3, 11
    sigma = 1.0
    cfg = LatticeConfig(2, n, P2A1)
    pot = Potential(((0, sigma),))
    shift = assemble_dense(cfg).truncation_shift
    evals = dense_eigensolve(dense_hamiltonian(cfg, pot)).eigenvalues
    rep = rank_one_roots(sigma, 2, P2A1, k_max=k_max)
    for k in range(1, k_max + 1):
        root = [e for e in rep.of_kind("gap_root") if e.gap == k]
        assert len(root) == 1
        in_gap = gap_eigenvalues(evals, 2, P2A1, k, shift)
        assert len(in_gap) == 1
        assert abs(root[0].value - shift - in_gap[0]) < 1e-6


def test_rank_one_exactly_one_per_gap_random_sigma():
    rng = np.random.default_rng(41)
    r_zero = resolvent_scalar(0.0, 2, P2AH)
    for _ in range(50):
        sigma = float(rng.uniform(-2, 2))
        if abs(sigma) < 1e-3:
            continue
        rep = rank_one_roots(sigma, 2, P2AH, k_max=6)
        for k in range(1, 7):
            roots = [e for e in rep.of_kind("gap_root") if e.gap == k]
            assert len(roots) == 1
            assert lambda_of_rank(2, P2AH, k + 1) < roots[0].value < lambda_of_rank(2, P2AH, k)
        has_neg = len(rep.of_kind("negative_root")) == 1
        assert has_neg == (sigma > 0 and r_zero > 1.0 / sigma)
        has_top = len(rep.of_kind("above_top_root")) == 1
        assert has_top == (sigma < 0)


def test_inherited_entries_have_infinite_multiplicity():
    rep = rank_one_roots(1.0, 2, P2A1, k_max=2)
    inherited = rep.of_kind("inherited")
    assert sorted(e.value for e in inherited) == [0.5, 1.0]
    assert all(math.isinf(e.multiplicity) for e in inherited)


def test_neg_count_threshold():
    assert neg_count(1.5, 0.01, 2) == 1
    assert neg_count(0.5, 0.5857, 2) == 0
    assert neg_count(0.5, 0.5859, 2) == 1
    assert neg_threshold(2, 0.5) == pytest.approx(2 - 2**0.5, rel=1e-15)
    with pytest.raises(ValueError):
        neg_count(0.5, -1.0, 2)


def test_neg_count_consistent_with_root_finder_grid():
    alphas = np.linspace(0.1, 1.9, 20)
    sigmas = np.linspace(0.1, 1.9, 20)
    for alpha in alphas:
        spec = PowerLaw(float(alpha))
        for sigma in sigmas:
            if abs(sigma - neg_threshold(2, float(alpha))) < 1e-6:
                continue
            rep = rank_one_roots(float(sigma), 2, spec, k_max=1)
            assert len(rep.of_kind("negative_root")) == neg_count(float(alpha), float(sigma), 2)


def test_krein_rank_one_sigma_zero():
    lam = 0.61
    for x, y in [(0, 0), (0, 5), (3, 9)]:
        assert krein_rank_one(lam, x, y, 0.0, 0, 2, P2A1) == \
            resolvent_kernel(lam, x, y, 2, P2A1).value


def test_krein_prime_identity():
    for lam in (0.7, -0.4, 0.3 + 0.05j):
        r_aa = resolvent_diag(lam, 2, P2A1).value
        lhs = krein_rank_one(lam, 4, 4, 0.9, 4, 2, P2A1)
        assert abs(lhs - r_aa / (1 - 0.9 * r_aa)) < 1e-14


def test_krein_secular_singularity_guard():
    root = rank_one_roots(1.0, 2, P2A1, k_max=1).of_kind("gap_root")[0].value
    with pytest.raises(SecularSingularity):
        krein_rank_one(root, 0, 1, 1.0, 0, 2, P2A1)


def truncated_krein(lam_shifted, x, y, pot, cfg):
    """Finite-lattice perturbed resolvent from the truncated free kernel."""
    locs = pot.locations
    n = len(locs)
    rmat = np.zeros((n, n))
    for i in range(n):
        rmat[i, i] = resolvent_truncated(lam_shifted, locs[i], locs[i], cfg).real
        for j in range(i + 1, n):
            rmat[i, j] = rmat[j, i] = resolvent_truncated(
                lam_shifted, locs[i], locs[j], cfg).real
    bmat = np.diag([1.0 / s for s in pot.sigmas]) - rmat
    r_ay = np.array([resolvent_truncated(lam_shifted, a, y, cfg).real for a in locs])
    r_xa = np.array([resolvent_truncated(lam_shifted, x, a, cfg).real for a in locs])
    base = resolvent_truncated(lam_shifted, x, y, cfg).real
    return base + r_xa @ np.linalg.solve(bmat, r_ay)


def test_krein_rank_one_against_dense_oracle():
    n = 11
    cfg = LatticeConfig(2, n, P2A1)
    shift = assemble_dense(cfg).truncation_shift
    sigma, a = 0.8, 3
    pot = Potential(((a, sigma),))
    h = dense_hamiltonian(cfg, pot)
    for lam, x, y in [(0.7, 0, 5), (0.3, 9, 9), (-0.5, 1, 64)]:
        lam_shifted = lam - shift
        oracle = dense_resolvent_solve(h, lam_shifted, y).vector[x].real
        got = truncated_krein(lam_shifted, x, y, pot, cfg)
        assert abs(got - oracle) < 1e-11
        # the infinite-lattice value agrees up to the truncation budget
        inf_val = krein_rank_one(lam, x, y, sigma, a, 2, P2A1).real
        assert abs(inf_val - oracle) < 1e-4


def test_secular_matrix_properties():
    lam = 0.66
    pot1 = Potential(((0, 2.0),))
    assert secular_matrix(lam, pot1, 2, P2A1).entries[0, 0] == 0.5
    pot = Potential(((0, 1.0), (17, 0.7), (200, 1.4)))
    sec = secular_matrix(lam, pot, 2, P2A1)
    assert np.array_equal(sec.entries, sec.entries.T)
    for i, a in enumerate(pot.locations):
        for j, b in enumerate(pot.locations):
            if i != j:
                expect = -resolvent_kernel(lam, a, b, 2, P2A1).value.real
                assert sec.entries[i, j] == expect


def test_gershgorin_offdiagonal_bound():
    # |R(lam, a_i, a_j)| < 2 / (delta * lam_k) wherever lam - lam(common ball)
    # exceeds lam_k / 2
    pot = Potential(((16, 0.8), (64, 1.0), (256, 1.25)))
    locs = pot.locations
    delta = min(distance(2, a, b) for i, a in enumerate(locs)
                for b in locs[i + 1:])
    for k in (1, 2, 3):
        lam_k = lambda_of_rank(2, P2A1, k)
        for frac in (0.3, 0.6, 0.9):
            lam = lambda_of_rank(2, P2A1, k + 1) + frac * (
                lam_k - lambda_of_rank(2, P2A1, k + 1))
            for i, a in enumerate(locs):
                for b in locs[i + 1:]:
                    lam_m = lambda_of_rank(2, P2A1, common_rank(2, a, b))
                    if lam - lam_m <= lam_k / 2:
                        continue
                    val = abs(resolvent_kernel(lam, a, b, 2, P2A1).value)
                    assert val < 2.0 / (delta * lam_k)


def test_finite_rank_two_bumps_against_dense_oracle():
    n = 11
    cfg = LatticeConfig(2, n, P2A1)
    shift = assemble_dense(cfg).truncation_shift
    pot = Potential(((0, 1.0), (256, 1.0)))
    rep = finite_rank_roots(pot, 2, P2A1, k_max=1)
    roots = [e.value for e in rep.of_kind("gap_root")]
    assert len(roots) == 2
    evals = dense_eigensolve(dense_hamiltonian(cfg, pot)).eigenvalues
    in_gap = gap_eigenvalues(evals, 2, P2A1, 1, shift)
    assert len(in_gap) == 2
    for root, mu in zip(sorted(roots), sorted(in_gap)):
        assert abs(root - shift - mu) < 1e-6


def test_finite_rank_wide_separation_converges_to_rank_one():
    sigma = 1.0
    single = rank_one_roots(sigma, 2, P2A1, k_max=2)
    for sep_rank in (10, 14):
        pot = Potential(((0, sigma), (2**sep_rank, sigma)))
        rep = finite_rank_roots(pot, 2, P2A1, k_max=2)
        for k in (1, 2):
            lone = [e.value for e in single.of_kind("gap_root") if e.gap == k][0]
            pair = sorted(e.value for e in rep.of_kind("gap_root") if e.gap == k)
            assert len(pair) == 2
            delta = float(2 ** (sep_rank + 1))
            radius = 2.0 / (delta * lambda_of_rank(2, P2A1, k))
            assert all(abs(v - lone) < radius for v in pair)


def test_finite_rank_at_most_n_roots_per_gap():
    rng = np.random.default_rng(17)
    for _ in range(6):
        n_bumps = int(rng.integers(2, 5))
        locs = sorted(map(int, rng.choice(2**10, size=n_bumps, replace=False)))
        sigmas = rng.uniform(0.3, 2.0, size=n_bumps)
        pot = Potential(tuple(zip(locs, sigmas)))
        try:
            rep = finite_rank_roots(pot, 2, P2A1, k_max=3)
        except RootCountAmbiguous:
            continue
        for k in (1, 2, 3):
            count = sum(1 for e in rep.of_kind("gap_root") if e.gap == k)
            assert count <= n_bumps


def test_finite_rank_degenerate_symmetric_config_is_ambiguous():
    # three pairwise-equidistant sibling bumps with equal coupling: the two
    # antisymmetric combinations give an exact double eigenvalue at 1 - sigma
    pot = Potential(((0, 1.5), (1, 1.5), (2, 1.5)))
    with pytest.raises(RootCountAmbiguous):
        finite_rank_roots(pot, 3, PowerLaw(1.0), k_max=1)


def test_finite_rank_negative_roots_when_all_bind():
    # recurrent regime: every attractive bump contributes one negative root
    pot = Potential(((0, 0.7), (64, 1.2), (512, 0.9)))
    rep = finite_rank_roots(pot, 2, P2A1, k_max=1)
    assert len(rep.of_kind("negative_root")) == 3


def test_finite_rank_above_top_roots_for_repulsive_bumps():
    pot = Potential(((0, -0.8), (64, 1.0)))
    rep = finite_rank_roots(pot, 2, P2A1, k_max=1)
    assert len(rep.of_kind("above_top_root")) == 1


def test_krein_finite_rank_reduces_to_rank_one():
    pot = Potential(((5, 1.3),))
    for lam in (0.7, -0.2, 0.4 + 0.1j):
        a = krein_finite_rank(lam, 0, 9, pot, 2, P2A1)
        b = krein_rank_one(lam, 0, 9, 1.3, 5, 2, P2A1)
        assert abs(a - b) < 1e-13


def test_krein_finite_rank_identities_and_oracle():
    n = 11
    cfg = LatticeConfig(2, n, P2A1)
    shift = assemble_dense(cfg).truncation_shift
    pot = Potential(((3, 0.9), (40, 1.1), (700, 0.6)))
    h = dense_hamiltonian(cfg, pot)
    lam = 0.72
    oracle = dense_resolvent_solve(h, lam - shift, 9).vector
    got = truncated_krein(lam - shift, 4, 9, pot, cfg)
    assert abs(got - oracle[4].real) < 1e-11
    inf_val = krein_finite_rank(lam, 4, 9, pot, 2, P2A1).real
    assert abs(inf_val - oracle[4].real) < 1e-4

    # (R_V1)/(R_V2): per-entry evaluation vs a single linear solve
    locs = pot.locations
    bmat = b_matrix(lam, pot, 2, P2A1)
    y = 9
    r_ay = np.array([resolvent_kernel(lam, a, y, 2, P2A1).value.real for a in locs])
    rhs = np.linalg.solve(bmat, r_ay)
    for i, (a, s) in enumerate(pot.bumps):
        lhs = s * krein_finite_rank(lam, a, y, pot, 2, P2A1).real
        assert abs(lhs - rhs[i]) < 1e-12


def test_correction_kernel_rank():
    # dense-oracle route: T = (H - lam)^-1 - (L - lam)^-1 has numerical rank N
    cfg = LatticeConfig(2, 8, P2A1)
    pot = Potential(((0, 1.0), (17, 0.8), (130, 1.3)))
    lam = 0.7 - assemble_dense(cfg).truncation_shift
    l_dense = assemble_dense(cfg).entries
    h = dense_hamiltonian(cfg, pot)
    eye = np.eye(cfg.n_points)
    t_mat = np.linalg.solve(h - lam * eye, eye) - np.linalg.solve(l_dense - lam * eye, eye)
    svals = np.linalg.svd(t_mat, compute_uv=False)
    assert svals[pot.size] < 1e-10 * svals[0]
    assert svals[pot.size - 1] > 1e-6 * svals[0]


def test_correction_norm_bound_controls_dense_correction():
    cfg = LatticeConfig(2, 8, P2A1)
    pot = Potential(((0, 1.0), (17, 0.8)))
    lam = 0.7
    bound = correction_norm_bound(lam, pot, 2, P2A1)
    assert bound > 0
    lam_shifted = lam - assemble_dense(cfg).truncation_shift
    l_dense = assemble_dense(cfg).entries
    h = dense_hamiltonian(cfg, pot)
    eye = np.eye(cfg.n_points)
    t_mat = np.linalg.solve(h - lam_shifted * eye, eye) \
        - np.linalg.solve(l_dense - lam_shifted * eye, eye)
    assert np.linalg.norm(t_mat, 2) < 2.0 * bound


def test_full_spectrum_union_reconstruction():
    # inherited eigenvalues plus shift-compensated secular roots account for
    # the whole dense spectrum within the truncation error budget
    n = 10
    cfg = LatticeConfig(2, n, P2A1)
    shift = assemble_dense(cfg).truncation_shift
    budget = shift + 1e-9
    pot = Potential(((0, 1.0), (40, 0.7), (513, 1.4)))
    rep = finite_rank_roots(pot, 2, P2A1, k_max=9)
    predicted = [0.0] + [lambda_of_rank(2, P2A1, k) - shift for k in range(1, n + 1)]
    predicted += [e.value - shift for e in rep.entries if e.kind != "inherited"]
    evals = dense_eigensolve(dense_hamiltonian(cfg, pot)).eigenvalues
    worst = max(min(abs(mu - v) for v in predicted) for mu in evals)
    assert worst < budget
    # and every predicted root is realized by some dense eigenvalue
    for e in rep.entries:
        if e.kind != "inherited":
            assert min(abs(mu - (e.value - shift)) for mu in evals) < budget


def test_eigenfunction_rank_one_profile_and_residual():
    sigma = 1.0
    root = rank_one_roots(sigma, 2, P2A1, k_max=1).of_kind("gap_root")[0].value
    pot = Potential(((0, sigma),))
    ef = eigenfunction(root, pot, 2, P2A1, block_depth=12)
    block = 2**12
    profile = np.array([resolvent_kernel(root, x, 0, 2, P2A1).value.real
                        for x in range(0, block, 97)])
    ratio = ef.values[::97] / profile
    assert np.max(np.abs(ratio - ratio[0])) < 1e-9 * np.abs(ratio[0])
    assert ef.residual < 1e-6
    # support reaches the far end of the block
    assert np.min(np.abs(ef.values[-2**10:])) > 0


def test_eigenfunction_rejects_non_root():
    pot = Potential(((0, 1.0),))
    with pytest.raises(RootRejected):
        eigenfunction(0.77, pot, 2, P2A1, block_depth=6)


def test_interlacing_recorded():
    rep = rank_one_roots(-1.4, 2, P2A1, k_max=5, tol=1e-13)
    for e in rep.of_kind("gap_root"):
        lo = lambda_of_rank(2, P2A1, e.gap + 1)
        hi = lambda_of_rank(2, P2A1, e.gap)
        assert lo + 1e-13 < e.value < hi - 1e-13


def test_potential_validation():
    with pytest.raises(ValueError):
        Potential(())
    with pytest.raises(ValueError):
        Potential(((0, 1.0), (0, 2.0)))
    with pytest.raises(ValueError):
        Potential(((0, 0.0),))
