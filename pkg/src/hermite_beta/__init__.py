"""Simulation and verification tools for the Hermite beta ensemble."""

from .errors import (DegenerateSampleError, DomainError, HermiteBetaError, NumericalInconsistencyError,
                     ParameterError)
from .model import (ConjugatedModel, EnsembleParams, TridiagonalModel, conjugate, dense_eigenvalues,
                    sample_batch, sample_chi, sample_ensemble, sample_gamma)
from .sturm import CountResult, count_below, count_below_many, count_interval, eigenvalue_by_index
from .phase import (AffineMap, PhaseTrajectory, RatioChain, SpectralFrame, ash, backward_phase, build_S,
                    cayley, count_interval_phase, eta_arg, forward_phase, lift_affine, lift_rotation,
                    phase_at_infinity, ratio_chain, rho, unhat)
from .asymptotics import (DriftPieces, MomentReport, StepMoments, diffusion_a, drift_b, martingale_variance,
                          moment_check, osc_terms, step_sample)
from .experiments import (ExperimentConfig, ExperimentReport, normality_suite, run_global_law, run_index_clt,
                          run_local_law, semicircle_cdf, semicircle_density, variance_slope)

__version__ = "0.1.0"
