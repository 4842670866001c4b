"""Multi-UAV tracking of a moving ground URLLC user.

Agents are trained centrally (monotonic value mixing over a global state)
and execute decentrally, exchanging scalar attention summaries with one
slot of delay. The channel half of the package turns a (reliability,
latency) requirement into SNR thresholds and coverage radii for the
air-to-ground link.
"""

__version__ = "0.1.0"
