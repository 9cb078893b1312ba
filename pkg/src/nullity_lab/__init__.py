"""Numerical engine for the nullity distribution of submanifolds of space forms.

Subpackages cover the ambient model geometries, a catalog of parametrized
immersions, fundamental-form and nullity computations, horizontal lifts and
holonomy sampling, horizontal connectivity solvers, spherical-tube
constructions, and a batch experiment CLI (``nullity-lab``).
"""

from nullity_lab.ambient import SpaceForm, euclidean, sphere, hyperbolic
from nullity_lab.immersions import ChartedImmersion, ImmersionJet, catalog, lookup

__all__ = [
    "SpaceForm",
    "euclidean",
    "sphere",
    "hyperbolic",
    "ChartedImmersion",
    "ImmersionJet",
    "catalog",
    "lookup",
]

__version__ = "0.1.0"
