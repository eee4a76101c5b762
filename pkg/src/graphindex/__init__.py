"""Index computations for Sturm-Liouville operators on metric graphs."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
