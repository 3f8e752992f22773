"""Beam-hopping ICAN LEO constellation simulator.

Submodules follow the simulation pipeline: ``constellation`` (orbits and
geometry), ``beams`` (UV-plane layouts and the antenna pattern), ``link``
(budget and SINR), ``positioning`` (TDOA CRLB/GDOP and a Monte-Carlo
oracle), ``procedure`` (ISB timing and the UE state machine) and
``engine`` (scenario runs, summaries and output).
"""

__version__ = "0.1.0"
