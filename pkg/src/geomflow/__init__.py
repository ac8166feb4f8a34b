"""Geometric mechanics toolkit.

Rigid body dynamics on SE(3), spectral field calculus and ideal
incompressible flow on the flat 2-torus, and variational diagnostics
tying the two together.
"""

__version__ = "0.1.0"
