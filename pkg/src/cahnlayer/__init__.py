"""Boundary-layer energies of the Dirichlet Cahn-Hilliard functional.

Modules: :mod:`potential` (double wells), :mod:`geodesic` (``d_W`` and the
near-well integrals), :mod:`profile` (layer profiles), :mod:`minimizer1d`
(weighted 1D minimisers), :mod:`geometry` (planar boundaries and tubular
coordinates), :mod:`field2d` (recovery fields in a planar domain) and
:mod:`harness` (experiments, fits and reports).
"""

__version__ = "0.1.0"
