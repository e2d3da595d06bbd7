"""Berezin-Toeplitz quantization on compact Kähler curves, numerically.

Models (round and deformed sphere, flat torus) provide quadrature and
holomorphic bases; :mod:`btlab.hilbert` builds orthonormal bases per level;
:mod:`btlab.operators` and :mod:`btlab.coherent` compute Toeplitz matrices,
Berezin transforms and Bergman densities; :mod:`btlab.asymptotics` fits
ladders of levels in 1/m.
"""

from .geometry import MODEL_KINDS, SphereModel, TorusModel, make_model
from .hilbert import QuantumLevel, build_level, cached_level
from .operators import toeplitz

__version__ = "0.1.0"

__all__ = [
    "MODEL_KINDS",
    "SphereModel",
    "TorusModel",
    "make_model",
    "QuantumLevel",
    "build_level",
    "cached_level",
    "toeplitz",
]
