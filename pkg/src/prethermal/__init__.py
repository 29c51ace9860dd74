"""Numerical toolkit for heating in aperiodically driven quantum systems.

Modules
-------
drives
    Step sequences (Thue-Morse, random multipolar, Fibonacci) and continuous drives.
spectra
    DFTs, Riesz products, binned envelopes and suppression-class fits.
arithmetic
    Frequency labels, resonance penalties, subadditivity checks and small divisors.
linres
    Linear-response heating rates by quadrature and the Laplace method.
fer
    Discrete Fer recursion on a qubit and the Mori-Magnus recursion.
flow
    Decay-sequence plans and non-perturbative heating-time bounds.
evolve
    Exact evolution of small spin chains under step drives.
cli
    Command-line runner and recipes.
"""

from __future__ import annotations

__version__ = "0.1.0"

from . import arithmetic, drives, errors, evolve, fer, flow, linres, spectra  # noqa: F401
from .errors import PrethermalError  # noqa: F401
