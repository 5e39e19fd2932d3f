"""Signal recovery from one-bit Gaussian measurements by linear-objective convex programs."""

__version__ = "0.1.0"

from .errors import DegenerateInputError, NumericalError, ParameterError  # noqa: E402
from .geometry import (mean_width_mc, support_sparse_exact, tessellation_audit,  # noqa: E402
                       l1_embedding_audit, dykstra_project)
from .kernels import BACKEND  # noqa: E402
from .measure import (BitFlip, CovarianceSpec, Logistic, MeasurementRecord, Noiseless,  # noqa: E402
                      PreQuantNoise, corrupt, lambda_analytic, lambda_empirical, read_record,
                      synthesize, write_record)
from .sampling import RngSpec, Signal, sample_signal  # noqa: E402
from .solve import (CorrelatedSparse, EstimateReport, NuclearFrobenius, SparseBall,  # noqa: E402
                    correlated_argmax, estimate, generic_argmax, lowrank_argmax, sparse_argmax)

__all__ = [
    "__version__", "BACKEND",
    "ParameterError", "DegenerateInputError", "NumericalError",
    "RngSpec", "Signal", "sample_signal",
    "Noiseless", "BitFlip", "PreQuantNoise", "Logistic", "CovarianceSpec", "MeasurementRecord",
    "synthesize", "corrupt", "lambda_analytic", "lambda_empirical", "read_record", "write_record",
    "SparseBall", "CorrelatedSparse", "NuclearFrobenius", "EstimateReport",
    "sparse_argmax", "generic_argmax", "correlated_argmax", "lowrank_argmax", "estimate",
    "dykstra_project", "support_sparse_exact", "mean_width_mc", "tessellation_audit",
    "l1_embedding_audit",
]
