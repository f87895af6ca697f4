"""Scenario-based capital-requirement engine over finite one-period markets.

Computes the minimal cost of an eligible-asset portfolio that moves a
financial position into an acceptance set, and mechanically checks the
structural properties of that functional (translation invariance,
level-set geometry, finiteness and degeneracy) on concrete instances.
"""

__version__ = "0.1.0"
