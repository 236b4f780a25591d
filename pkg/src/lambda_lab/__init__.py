"""Numerical laboratory for the lowest eigenvalue of -4 Delta + R on
discretized flat tori: spectra, variations, tensor decompositions, and
Ricci-DeTurck flow, all on one centered-difference calculus.

Submodules import numpy; this file stays import-light so the command
line can pin thread counts first.
"""

__version__ = "0.1.0"

__all__ = ["grid", "manifold", "spectral", "jets", "variation", "decomp",
           "flow", "sampling", "lfld", "config", "cli"]
