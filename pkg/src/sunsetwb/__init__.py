"""Symbolic-numeric workbench for the on-shell two-loop sunset self-energy.

Reduces the diagram's hypergeometric representation with theta-operator
calculus, rediscovers the algebraic relation among its three nontrivial
master integrals, verifies it to arbitrary precision, and contrasts the
counting with a Laporta-style integration-by-parts reduction.
"""

__version__ = "0.1.0"
