"""Exact numerics and Monte Carlo for true self-avoiding walks on trees.

The walk picks each step with probability proportional to exp(-beta * L)
where L is the current crossing count of the adjacent edge. The library
covers the one-dimensional crossing-count chains and their ruin
asymptotics, renewal/first-return analysis of the chain away from a
boundary layer, first-excursion percolation on trees, and the
recurrence/transience diagnostics tied to the branching-ruin number.
"""

__version__ = "0.1.0"
