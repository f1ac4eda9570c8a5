"""Finite-horizon transboundary pollution control.

Closed-form local and global solutions on bounded (Neumann cosine series)
and unbounded (heat-kernel / Fourier integral) spatial domains, an
independent Crank-Nicolson / forward-backward-sweep oracle, social-cost
comparison, and verification of the qualitative propositions.
"""

__version__ = "0.1.0"

from .model import (PAPER_2015, PAPER_P0, Bounded, CenteredBump, Constant,
                    Grid, ModelParams, Provenance, SolutionField, Tabulated,
                    Unbounded, ValidationError, make_grid)

__all__ = [
    "PAPER_2015", "PAPER_P0", "Bounded", "CenteredBump", "Constant", "Grid",
    "ModelParams", "Provenance", "SolutionField", "Tabulated", "Unbounded",
    "ValidationError", "make_grid", "__version__",
]
