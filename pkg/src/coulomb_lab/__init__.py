"""Numerics for the renormalized Coulomb energy of planar point configurations."""

from coulomb_lab.errors import LabError, NumericalDefect, BlockSizeTooSmall

__all__ = ["LabError", "NumericalDefect", "BlockSizeTooSmall"]

__version__ = "0.1.0"
