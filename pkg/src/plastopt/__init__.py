"""Phase-field topology optimization for elastoplastic bodies with linear
kinematic hardening."""
from ._backend import BACKEND
from ._kernels_py import NewtonDivergence

__version__ = "0.1.0"
__all__ = ["BACKEND", "NewtonDivergence", "__version__"]
