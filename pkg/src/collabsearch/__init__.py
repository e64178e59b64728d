"""Human-robot collaborative search simulator.

A robot agent plans over a registry of attractive/repulsive reward sources
with a sourced RRT*, driven by an observability/isolation search reward on
a discretized map; a human agent is steered live through a browser client
or by a scripted greedy policy.
"""

__version__ = "0.1.0"
