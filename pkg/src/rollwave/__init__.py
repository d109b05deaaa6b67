"""Periodic roll waves of the viscous St. Venant equations and their Bloch stability.

Subpackages cover the wave parameters and scalings (:mod:`rollwave.model`),
the weakly unstable KdV limit (:mod:`rollwave.kdv_limit`), profile solvers
(:mod:`rollwave.profile`), linearized spectral problems
(:mod:`rollwave.linearize`), Hill's method (:mod:`rollwave.hill`), the
periodic Evans function (:mod:`rollwave.evans`), and parameter sweeps
(:mod:`rollwave.sweep`).
"""

__version__ = "0.1.0"
