"""Exactly solvable decoherence of a macroscopic body in a Hepp-Coleman-type environment.

Two independent engines compute the body's reduced density matrix: the
closed-form :mod:`hcdeco.rdm` and the grid propagation oracle
:mod:`hcdeco.oracle`.
"""

__version__ = "0.1.0"
