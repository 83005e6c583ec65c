"""Spectra of hierarchical Laplacians on p-adic lattices and their point perturbations."""

from .errors import (ConvergenceFailure, HierlapError, NearSingular,
                     PoleProximity, RecurrentRegime, RootCountAmbiguous,
                     RootRejected, SecularSingularity, SymmetryViolation,
                     ToleranceNotMet)
from .laplacian import (DenseOperator, EigenPair, PowerLaw,
                        TabulatedMultiplier, apply_truncated, assemble_dense,
                        coefficient, heat_kernel, heat_kernel_diag,
                        heat_kernel_truncated, jump_kernel, kappa,
                        lambda_of_ball, lambda_of_rank, spectral_function,
                        spectrum_of_L)
from .lattice import (BallAddress, LatticeConfig, ball_of, common_ball,
                      common_rank, distance, geodesic_to_root, measure)
from .oracle import (DenseSpectrum, ResolventSolve, dense_eigensolve,
                     dense_resolvent_solve, multiplicities)
from .perturb import (PointMassEigenfunction, Potential, SecularMatrix,
                      SpectrumEntry, SpectrumReport, b_matrix, eigenfunction,
                      finite_rank_roots, krein_finite_rank, krein_rank_one,
                      neg_count, neg_threshold, rank_one_roots, secular_matrix)
from .resolvent import (ResolventValue, green_function, resolvent_diag,
                        resolvent_kernel, resolvent_offdiag,
                        resolvent_truncated)
from .sparse import (EssentialSpectrumSet, LocalizationReport, MomentEstimate,
                     SparseConfig, SpectralInterval, essential_spectrum_sparse,
                     fractional_moment_estimate, localization_diagnostics,
                     sample_potential, sparsity_metric)

__version__ = "0.1.0"
