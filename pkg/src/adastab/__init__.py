"""Distributed adaptive high-gain stabilization with diagonal matrix gains.

Submodules:

- ``matana``: M-/H-matrix tests, diagonal-dominance scalings, matrix measures
- ``odesim``: RK4 simulation of the adaptive closed loops, threshold gains, solution bounds
- ``graphnet``: graphs, Laplacians, adaptive synchronization of oscillator networks
- ``scenario`` / ``runner`` / ``cli``: scenario files, dispatch and the command line
"""

__version__ = "0.1.0"
