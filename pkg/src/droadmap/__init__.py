"""Directed roadmap graphs over 2D occupancy maps.

Builds probabilistic roadmaps whose edges carry learnable direction scalars,
optimizes vertex positions and directions by stochastic gradient descent over
random path queries, and evaluates the resulting directed graphs with a
multi-agent planner and a continuous flow simulator.
"""

__version__ = "0.1.0"
