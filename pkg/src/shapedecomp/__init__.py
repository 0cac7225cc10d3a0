"""Shape decomposition of three-fermion wave functions.

Exact tools for splitting a diagonally alternating function of three
particles in three dimensions into its 36 shape generators and bosonic
coefficient functions, plus an explicitly correlated Gaussian solver that
applies the analysis to the lowest quartet state of the lithium atom.
"""

__version__ = "0.1.0"

from .ringcore import Poly9, PermPair, Variable  # noqa: F401
