"""Manufactured forcings and run scenarios shared by tests and the CLI.

Forcing fields vanish in the past (smooth ramp from t = 0), keep their
magnetic rows discretely divergence-free by deriving them from a stream
function (the x1/x2 stencils act on different axes, so the discrete curl
has exactly zero divergence), and stay clear of the far truncation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .mhd import IH1, IH2, IP, IS, IU1, IU2
from .profiles import quintic_step


@dataclass
class ManufacturedForcing:
    """Causal interior forcing with divergence-free magnetic rows.

    ``k2`` selects the x2 wavenumber (index of the periodic mode), ``ramp``
    the rise time, ``x1_center``/``x1_width`` the wall-normal envelope.
    Calling with t returns (2, 6, n1, n2) in the good-unknown components.
    """

    grid: Grid
    amplitude: float = 1.0
    k2: int = 1
    ramp: float = 0.2
    x1_center: float | None = None
    x1_width: float | None = None
    omega: float = 1.3

    def __post_init__(self):
        g = self.grid
        x1, x2 = g.mesh()
        c = self.x1_center if self.x1_center is not None else 0.25 * g.L1
        w = self.x1_width if self.x1_width is not None else 0.15 * g.L1
        # wall mask zeroes the stream function identically on x1 = 0 so the
        # magnetic wall source f_n|_0 vanishes exactly
        env = (np.exp(-((x1 - c) / w) ** 2)
               * quintic_step(x1 / (0.15 * g.L1)))
        k = 2 * np.pi * self.k2 / g.L2
        stream = env * np.sin(k * x2) / max(k, 1.0)
        # per side: div (f_n, f5 d1Phi) = 0 requires d1 f4 = -sgn d2 f5
        self._f4 = g.d2(stream)
        self._f5 = -g.d1(stream)
        self._fp = env * np.cos(k * x2)
        self._fu = np.stack([env * np.sin(k * x2), env * np.cos(k * x2 + 0.7)])
        self._fS = 0.5 * env * np.sin(k * x2 + 1.1)

    def __call__(self, t: float) -> np.ndarray:
        g = self.grid
        if t <= 0.0:
            return np.zeros((2, 6, g.n1, g.n2))
        r = float(quintic_step(t / self.ramp)) * np.cos(self.omega * t)
        out = np.empty((2, 6, g.n1, g.n2))
        for i, sgn in enumerate((1.0, -1.0)):
            out[i, IP] = self._fp
            out[i, IU1] = self._fu[0]
            out[i, IU2] = sgn * self._fu[1]
            out[i, IH1] = self._f4
            out[i, IH2] = sgn * self._f5
            out[i, IS] = sgn * self._fS
        return self.amplitude * r * out


@dataclass
class ManufacturedBoundaryData:
    """Causal boundary data (g1+, g1-, g2) for the inhomogeneous problem."""

    grid: Grid
    amplitude: float = 1.0
    k2: int = 1
    ramp: float = 0.2

    def __call__(self, t: float) -> np.ndarray:
        g = self.grid
        if t <= 0.0:
            return np.zeros((3, g.n2))
        r = float(quintic_step(t / self.ramp))
        k = 2 * np.pi * self.k2 / g.L2
        x2 = g.x2
        return self.amplitude * r * np.stack([
            np.sin(k * x2), 0.5 * np.cos(k * x2), 0.3 * np.sin(k * x2 + 0.4)])
