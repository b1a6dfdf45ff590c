"""Front lifting and the straightened-coordinate geometry.

The discontinuity front x1 = phi(t, x2) is flattened by the change of
variables Phi±(t, x) = ±x1 + Psi±(t, x), Psi±(t, x) = chi(±x1) phi(t, x2),
which maps both sides onto the fixed half-plane x1 > 0.  Because the cutoff
chi has slope at most 1/2, any front with sup|phi| < 1/2 keeps the Jacobian
d1Phi+ >= 1/2 (and d1Phi- <= -1/2), so the transform never degenerates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid
from .mhd import PhysState, assemble_a0, assemble_a1, assemble_a2
from .profiles import CutoffChi, make_cutoff

__all__ = [
    "CutoffChi", "make_cutoff", "FrontField", "TangentFrame", "LiftedFront",
    "lift_front", "assemble_a1_tilde", "transformed_vectors",
]


class DegenerateJacobianError(RuntimeError):
    """|d1Phi| fell below tolerance: front smallness violated."""


@dataclass
class FrontField:
    """Front phi on the boundary grid, optionally with stored derivatives.

    ``phi`` is (..., n2) (a leading time axis is allowed).  ``small`` flags
    sup|phi| < 1/2, the hypothesis under which the straightening map stays
    uniformly non-degenerate.
    """

    phi: np.ndarray
    grid: Grid
    dphi_t: np.ndarray | None = None
    dphi_2: np.ndarray | None = None

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)

    @property
    def small(self) -> bool:
        return bool(np.max(np.abs(self.phi)) < 0.5)

    def d2(self) -> np.ndarray:
        if self.dphi_2 is not None:
            return self.dphi_2
        return self.grid.d2_boundary(self.phi)


@dataclass(frozen=True)
class TangentFrame:
    """Boundary frame N = (1, -d2 phi), tau = (d2 phi, 1)."""

    N1: np.ndarray
    N2: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray

    @classmethod
    def from_slope(cls, dphi_2) -> "TangentFrame":
        s = np.asarray(dphi_2, dtype=float)
        one = np.ones_like(s)
        return cls(N1=one, N2=-s, tau1=s, tau2=one)


@dataclass
class LiftedFront:
    """Psi±, Phi± and their derivatives on the spatial grid.

    Arrays are stacked on a leading side axis (index 0 = '+', 1 = '-') and
    broadcast any leading time axes of phi.
    """

    front: FrontField
    chi: CutoffChi
    psi: np.ndarray          # (2, ..., n1, n2)
    d1_psi: np.ndarray
    d2_psi: np.ndarray
    dt_psi: np.ndarray
    phi_grad: np.ndarray     # d2 phi on the boundary grid
    grid: Grid = field(init=False)

    def __post_init__(self):
        self.grid = self.front.grid

    @property
    def d1_phi_map(self) -> np.ndarray:
        """d1Phi± = ±1 + d1Psi±."""
        sgn = np.array([1.0, -1.0]).reshape((2,) + (1,) * (self.psi.ndim - 1))
        return sgn + self.d1_psi

    @property
    def jacobian_min(self) -> tuple[float, float]:
        """(min over grid of d1Phi+, max of d1Phi-)."""
        j = self.d1_phi_map
        return float(np.min(j[0])), float(np.max(j[1]))


def lift_front(front: FrontField, chi: CutoffChi, dphi_t=None) -> LiftedFront:
    """Build Psi± = chi(±x1) phi and Phi± = ±x1 + Psi± on the grid.

    ``dphi_t`` supplies the time derivative of phi when the lift of
    dPsi/dt is needed (steady fronts pass nothing and get zero).
    """
    grid = front.grid
    x1 = grid.x1[:, None]
    phi = front.phi[..., None, :]       # (..., 1, n2)
    # chi is even, so chi(+x1) = chi(-x1) on the grid and the lifts agree;
    # the derivative d/dx1[chi(±x1)] = ±chi'(±x1) also coincides sidewise.
    cv = chi.value(x1)
    cdp = chi.derivative(x1)            # d/dx1 chi(x1)
    cdm = -chi.derivative(-x1)          # d/dx1 chi(-x1)
    psi = np.stack([cv * phi, cv * phi])
    d1_psi = np.stack([cdp * phi, cdm * phi])
    d2p = front.d2()[..., None, :]
    d2_psi = np.stack([cv * d2p, cv * d2p])
    if dphi_t is None and front.dphi_t is not None:
        dphi_t = front.dphi_t
    if dphi_t is None:
        dt_psi = np.zeros_like(psi)
    else:
        dpt = np.asarray(dphi_t, dtype=float)[..., None, :]
        dt_psi = np.stack([cv * dpt, cv * dpt])
    return LiftedFront(front=front, chi=chi, psi=psi, d1_psi=d1_psi,
                       d2_psi=d2_psi, dt_psi=dt_psi, phi_grad=front.d2())


def assemble_a1_tilde(state: PhysState, lifted: LiftedFront, eos,
                      side: int, jac_tol: float = 1e-3) -> np.ndarray:
    """Transformed boundary-normal matrix for one side.

    A1~ = (A1 - A0 dPsi/dt - A2 d2Psi) / d1Phi, a pointwise symmetric
    combination; reduces to ±A1 for a flat steady front.
    """
    i = 0 if side > 0 else 1
    jac = lifted.d1_phi_map[i]
    signed = jac if side > 0 else -jac
    if np.min(signed) < jac_tol:
        raise DegenerateJacobianError(
            "sign-definite |d1Phi| >= %g failed on the grid; the front "
            "violates the smallness hypothesis sup|phi| < 1/2" % jac_tol)
    state = _broadcast_state(state, jac.shape)
    A0 = assemble_a0(state, eos)
    A1 = assemble_a1(state, eos)
    A2 = assemble_a2(state, eos)
    return (A1 - A0 * lifted.dt_psi[i] - A2 * lifted.d2_psi[i]) / jac


def _broadcast_state(state: PhysState, shape) -> PhysState:
    def bc(f):
        f = np.asarray(f, dtype=float)
        return np.broadcast_to(f, np.broadcast_shapes(f.shape, shape))

    return PhysState(p=bc(state.p), u1=bc(state.u1), u2=bc(state.u2),
                     H1=bc(state.H1), H2=bc(state.H2), S=bc(state.S),
                     side=state.side)


def transformed_vectors(state: PhysState, lifted: LiftedFront, side: int):
    """Straightened velocity/field vectors (u_n, H_n, v, w, h) for one side.

    u_n = u1 - u2 d2Psi, v = (u_n, u2 d1Phi), w = v - (dPsi/dt, 0),
    h = (H_n, H2 d1Phi).  At x1 = 0 the n-components coincide with the
    N-components built from the raw front slope.
    """
    i = 0 if side > 0 else 1
    d2psi = lifted.d2_psi[i]
    d1phi = lifted.d1_phi_map[i]
    u_n = state.u1 - state.u2 * d2psi
    H_n = state.H1 - state.H2 * d2psi
    v = np.stack(np.broadcast_arrays(u_n, state.u2 * d1phi))
    w = v.copy()
    w[0] = w[0] - lifted.dt_psi[i]
    h = np.stack(np.broadcast_arrays(H_n, state.H2 * d1phi))
    return u_n, H_n, v, w, h
