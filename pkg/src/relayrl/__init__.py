"""Simulation laboratory for a two-hop cooperative relay network.

The package simulates K single-antenna relays between a multi-antenna source
and destination under temporally correlated Rayleigh fading, and trains three
agents to minimize outage probability: a random baseline, a flat deep
Q-network over the joint relay/power action space, and a hierarchical agent
(gradient-bandit relay selection + goal-conditioned dueling Q-network power
control).
"""

__version__ = "0.1.0"
