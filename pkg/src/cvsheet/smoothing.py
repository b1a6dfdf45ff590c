"""Frequency-cutoff smoothing family for the iteration.

S_theta acts as a tensorized multiplier in an orthogonal basis per axis:

  * t: cosine transform on [0, T] (even reflection keeps the non-periodic
    axis artifact-free), frequencies pi k / T;
  * x2: a real FFT with the periodic wavenumbers;
  * x1: eigenmodes of the discrete conormal operator (sigma d1)^T W
    (sigma d1) restricted to interior rows, so the "frequency" is measured
    against the sigma-stretched coordinate; the wall row is untouched.

The symbol is 1 below theta and 0 above 2 theta, so fields supported on
low modes are exact fixed points, applying S_theta twice differs from once
only in the transition band, and two fields with equal wall traces keep
equal wall traces (the x1 part preserves row 0, the (t, x2) parts act on
the trace alone there).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct, idct, irfft, rfft

from .grid import Grid
from .norms import hm_star_norm
from .grid import GridFunction
from .profiles import SigmaWeight, lowpass_symbol


@dataclass
class Smoother:
    """Family S_theta on causal space-time fields (..., nt, n1, n2).

    ``axes`` selects the smoothing directions; dropping "x1" yields the
    variant whose wall behavior is governed purely by the trace.
    """

    grid: Grid
    nt: int
    T: float
    axes: tuple = ("t", "x1", "x2")
    sigma: SigmaWeight = field(default_factory=SigmaWeight)

    def __post_init__(self):
        g = self.grid
        self.freq_t = np.pi * np.arange(self.nt) / max(self.T, 1e-300)
        self.freq_x2 = 2 * np.pi * np.arange(g.n2 // 2 + 1) / g.L2
        if "x1" in self.axes:
            self._build_conormal_basis()

    def _build_conormal_basis(self):
        g = self.grid
        n = g.n1
        D = np.zeros((n, n))
        h = g.h1
        for i in range(2, n - 2):
            D[i, i - 2:i + 3] = np.array([1, -8, 0, 8, -1]) / (12 * h)
        D[0, :4] = np.array([-11, 18, -9, 2]) / (6 * h)
        D[1, :4] = np.array([-2, -3, 6, -1]) / (6 * h)
        D[-1, -4:] = np.array([-2, 9, -18, 11]) / (6 * h)
        D[-2, -4:] = np.array([1, -6, 3, 2]) / (6 * h)
        Ds = self.sigma.value(g.x1)[:, None] * D
        W = np.diag(g.w1)
        K = Ds.T @ W @ Ds
        # interior block: modes vanish on the wall row by construction
        Ki = K[1:, 1:]
        Wi = W[1:, 1:]
        from scipy.linalg import eigh
        lam, V = eigh(Ki, Wi)
        lam = np.clip(lam, 0.0, None)
        self.conormal_freq = np.sqrt(lam)
        self.conormal_modes = V            # W-orthonormal columns
        self.conormal_weights = np.diag(Wi)

    def __call__(self, u: np.ndarray, theta: float) -> np.ndarray:
        """Apply S_theta; u is (..., nt, n1, n2)."""
        u = np.asarray(u, dtype=float)
        out = u
        if "t" in self.axes:
            coef = dct(out, type=2, axis=-3, norm="ortho")
            coef *= lowpass_symbol(self.freq_t / theta)[:, None, None]
            out = idct(coef, type=2, axis=-3, norm="ortho")
        if "x2" in self.axes:
            coef = rfft(out, axis=-1)
            coef *= lowpass_symbol(self.freq_x2 / theta)
            out = irfft(coef, n=self.grid.n2, axis=-1)
        if "x1" in self.axes:
            wall = out[..., :1, :]
            interior = out[..., 1:, :]
            V = self.conormal_modes
            w = self.conormal_weights
            coef = np.einsum("km,k,...kj->...mj", V, w, interior)
            coef *= lowpass_symbol(self.conormal_freq / theta)[:, None]
            smoothed = np.einsum("km,...mj->...kj", V, coef)
            out = np.concatenate([wall, smoothed], axis=-2)
        return out

    def d_theta(self, u: np.ndarray, theta: float,
                dtheta: float = 1e-3) -> np.ndarray:
        """Centered difference of theta -> S_theta u."""
        return (self(u, theta + dtheta) - self(u, theta - dtheta)) / (2 * dtheta)

    def band_limited_sample(self, theta: float, rng) -> np.ndarray:
        """A random field that is an exact fixed point of S_theta.

        Built from basis modes with per-axis frequency <= theta, plus a
        wall-row extension (constant x1-profile is not band-limited; the
        wall row itself is preserved exactly instead).
        """
        g = self.grid
        nt = self.nt
        out = np.zeros((nt, g.n1, g.n2))
        kt = [k for k in range(nt) if self.freq_t[k] <= theta]
        k2 = [k for k in range(g.n2 // 2 + 1) if self.freq_x2[k] <= theta]
        k1 = [k for k in range(len(self.conormal_freq))
              if self.conormal_freq[k] <= theta]
        tgrid = np.arange(nt)
        for _ in range(6):
            it = kt[rng.integers(0, len(kt))]
            i2 = k2[rng.integers(0, len(k2))]
            amp = rng.normal()
            tmode = np.cos(np.pi * (tgrid + 0.5) * it / nt)
            x2mode = np.cos(2 * np.pi * i2 * np.arange(g.n2) / g.n2
                            + (0.0 if i2 in (0, g.n2 // 2) else rng.uniform(0, 2*np.pi)))
            if "x1" in self.axes:
                x1mode = np.zeros(g.n1)
                x1mode[1:] = self.conormal_modes[:, k1[rng.integers(0, len(k1))]]
            else:
                x1mode = rng.normal(size=g.n1)
            out += amp * tmode[:, None, None] * x1mode[None, :, None] \
                * x2mode[None, None, :]
        return out


@dataclass
class SmoothingHarnessReport:
    """Fitted constants of the three smoothing estimates per (k, j, theta)."""

    as1: dict
    as2: dict
    as3: dict

    def max_constant(self) -> float:
        vals = (list(self.as1.values()) + list(self.as2.values())
                + list(self.as3.values()))
        return float(max(vals))


def smoothing_harness(smoother: Smoother, samples: int = 4,
                      thetas=(2.0, 4.0, 8.0, 16.0), orders=(1, 2, 3),
                      rng=None) -> SmoothingHarnessReport:
    """Measure the gain/approximation/derivative ratios over a theta sweep.

    as1: |S u|_k <= C theta^{(k-j)+} |u|_j  (all k, j);
    as2: |S u - u|_k <= C theta^{k-j} |u|_j  (k <= j);
    as3: |d/dtheta S u|_k <= C theta^{k-j-1} |u|_j.
    Reported values are max ratios over the samples.
    """
    rng = rng or np.random.default_rng(0)
    g = smoother.grid
    dt = smoother.T / (smoother.nt - 1)
    as1, as2, as3 = {}, {}, {}
    from .norms import evaluate_field_params, sample_field_params
    fields = [evaluate_field_params(sample_field_params(rng), g,
                                    smoother.nt, smoother.T).values
              for _ in range(samples)]
    norms = {}

    def norm(u, k):
        key = (id(u), k)
        if key not in norms:
            norms[key] = hm_star_norm(GridFunction(u, g, dt=dt), k,
                                      "omega_t").total
        return norms[key]

    for theta in thetas:
        for u in fields:
            su = smoother(u, theta)
            du = smoother.d_theta(u, theta)
            for k in orders:
                for j in orders:
                    gain = theta ** max(k - j, 0)
                    r1 = norm(su, k) / (gain * norm(u, j))
                    as1[(k, j, theta)] = max(as1.get((k, j, theta), 0.0), r1)
                    r3 = (np.sqrt(hm_star_norm(
                        GridFunction(du, g, dt=dt), k, "omega_t").total ** 2)
                        / (theta ** (k - j - 1) * norm(u, j)))
                    as3[(k, j, theta)] = max(as3.get((k, j, theta), 0.0), r3)
                    if k <= j:
                        diff = hm_star_norm(GridFunction(su - u, g, dt=dt),
                                            k, "omega_t").total
                        r2 = diff / (theta ** (k - j) * norm(u, j))
                        as2[(k, j, theta)] = max(as2.get((k, j, theta), 0.0),
                                                 r2)
    return SmoothingHarnessReport(as1=as1, as2=as2, as3=as3)
