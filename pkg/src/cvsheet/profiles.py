"""Smooth one-dimensional profiles shared across the package.

Everything here is built from a single monotone quintic ramp with flat
endpoints.  The ramp's peak slope is 1.25 (the minimum attainable by a
quintic with zero endpoint derivatives), so a ramp stretched over a width
``w`` has max slope ``1.25 / w``.  That margin is what lets the front
cutoff meet its slope budget of 1/2 on a width-3 ramp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def quintic_step(t):
    """Monotone 0 -> 1 ramp on [0, 1]; quintic, zero slope at both ends.

    p(t) = 5 t^2 - 10 t^3 + 10 t^4 - 4 t^5, clamped outside [0, 1].
    Peak slope 1.25 at the interior critical point.
    """
    t = np.clip(t, 0.0, 1.0)
    return t * t * (5.0 + t * (-10.0 + t * (10.0 - 4.0 * t)))


def quintic_step_d(t):
    """Derivative of :func:`quintic_step` (zero outside [0, 1])."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    tc = np.clip(t, 0.0, 1.0)
    d = tc * (10.0 + tc * (-30.0 + tc * (40.0 - 20.0 * tc)))
    return np.where(inside, d, 0.0)


@dataclass(frozen=True)
class CutoffChi:
    """Even cutoff profile: 1 on [-plateau, plateau], 0 outside the support.

    The ramps live on [plateau, plateau + width] and its mirror.  With the
    defaults (plateau 1, width 3, support [-4, 4]) the max slope is
    1.25 / 3 < 1/2.
    """

    plateau: float = 1.0
    width: float = 3.0

    @property
    def support(self) -> float:
        return self.plateau + self.width

    def value(self, x):
        r = (np.abs(np.asarray(x, dtype=float)) - self.plateau) / self.width
        return 1.0 - quintic_step(r)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        r = (np.abs(x) - self.plateau) / self.width
        return -np.sign(x) * quintic_step_d(r) / self.width

    def __call__(self, x):
        return self.value(x)


def make_cutoff(plateau: float = 1.0, width: float = 3.0) -> CutoffChi:
    """Front-lifting cutoff: identically 1 on [-1, 1], max slope <= 1/2."""
    return CutoffChi(plateau=plateau, width=width)


@dataclass(frozen=True)
class EtaProfile:
    """Monotone decreasing collar profile: eta(0) = 1, eta = 0 for x >= eps."""

    eps: float

    def value(self, x):
        return 1.0 - quintic_step(np.asarray(x, dtype=float) / self.eps)

    def __call__(self, x):
        return self.value(x)


@dataclass(frozen=True)
class SigmaWeight:
    """Conormal weight: sigma(x) = x on [0, 1/2], 1 for x >= 1.

    The blend on [1/2, 1] is the quintic Hermite interpolant matching value
    and first derivative at both ends; its slope 0.5 + 6 t^2 - 14 t^3
    + 7.5 t^4 (t the blend coordinate) is nonnegative, so sigma increases
    monotonically.
    """

    def value(self, x):
        x = np.asarray(x, dtype=float)
        t = np.clip(2.0 * (x - 0.5), 0.0, 1.0)
        blend = 0.5 + t * (0.5 + t * t * (2.0 + t * (-3.5 + 1.5 * t)))
        out = np.where(x <= 0.5, x, blend)
        return np.where(x >= 1.0, 1.0, out)

    def __call__(self, x):
        return self.value(x)


def lowpass_symbol(r):
    """Smoothing symbol: 1 for r <= 1, 0 for r >= 2, quintic in between."""
    return 1.0 - quintic_step(np.asarray(r, dtype=float) - 1.0)


def time_bump(t, T):
    """Even C^1 bump in time: 1 on |t| <= T/2, 0 for |t| >= T."""
    r = (np.abs(np.asarray(t, dtype=float)) - 0.5 * T) / (0.5 * T)
    return 1.0 - quintic_step(r)


def time_bump_d(t, T):
    """Derivative of :func:`time_bump`."""
    t = np.asarray(t, dtype=float)
    r = (np.abs(t) - 0.5 * T) / (0.5 * T)
    return -np.sign(t) * quintic_step_d(r) / (0.5 * T)
