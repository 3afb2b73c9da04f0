"""Restarted primal-dual reconstruction for subsampled unitary transforms.

Modules
-------
numerics     random streams, norms, power iteration
transforms   centred DFT, sequency-ordered Walsh-Hadamard, Haar wavelets, DCT
sparsity     sparsity-in-levels models, weights and recovery constants
sampling     multilevel sampling schemes and measurement operators
solver       FIRENET inner iterations and restart schedule
adversarial  worst-case perturbation search
barriers     closed-form minimiser sets and the accuracy-barrier table
io           binary array and PGM formats
cli          command line front end
"""
__version__ = "0.1.0"

from .numerics import MatrixOperator, NormEstimate, make_rng, operator_norm
from .sampling import MeasurementOperator, SamplingScheme, draw_scheme, sample_allocation, scheme_for_fraction
from .solver import SolverConfig, firenet_no_restart, firenet_reconstruct, inner_iterations
from .sparsity import LevelModel, RnsplConstants

__all__ = [
    "__version__",
    "MatrixOperator",
    "NormEstimate",
    "make_rng",
    "operator_norm",
    "MeasurementOperator",
    "SamplingScheme",
    "draw_scheme",
    "sample_allocation",
    "scheme_for_fraction",
    "SolverConfig",
    "firenet_reconstruct",
    "firenet_no_restart",
    "inner_iterations",
    "LevelModel",
    "RnsplConstants",
]
