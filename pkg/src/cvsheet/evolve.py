"""Time integration of the effective linearized problem with energy ledger.

The characteristic system

    A0c dV/dt + A1c d1 V + A2c d2 V + A3c V = J^T F

marches with a 3-stage strong-stability-preserving Runge-Kutta scheme.  The
wall at x1 = 0 is characteristic of constant rank 4: per side exactly one
combination (q ± u_n) enters the domain.  Boundary data are imposed by
injection: outgoing combinations are read off the updated interior, the
incoming ones and the front time derivative are solved from the three
linearized wall conditions, and the remaining components evolve freely
(their normal coefficient vanishes on the wall).

The ledger accumulates the quadratic energies I, I0, I1n, Isigma, I2, the
front norms, and the residual of the symmetrized-system energy identity

    d/dt \\int (B0c V . V) = boundary flux + source + zero-order terms,

whose discrete violation must vanish under refinement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid
from .linearized import (IHN, IH2V, IQ, IUN, BasicState,
                         assemble_effective)
from .mhd import IH1, IH2
from .profiles import SigmaWeight, quintic_step
from .stability import LambdaPair, extend_lambda


class NumericsError(RuntimeError):
    """CFL violation or non-finite values during a run."""


@dataclass
class LedgerRow:
    t: float
    I: float
    I0: float
    I1n: float
    Isigma: float
    I2: float
    phiL2: float
    identity_residual: float

    @property
    def I1star(self) -> float:
        return self.I + self.I0 + self.Isigma + self.I2


@dataclass
class EnergyLedger:
    rows: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("t,I,I0,I1n,Isigma,I2,phiL2,identity_residual\n")
            for r in self.rows:
                fh.write(f"{r.t!r},{r.I!r},{r.I0!r},{r.I1n!r},{r.Isigma!r},"
                         f"{r.I2!r},{r.phiL2!r},{r.identity_residual!r}\n")

    def final(self) -> LedgerRow:
        return self.rows[-1]


@dataclass
class Trajectory:
    times: np.ndarray
    phi: np.ndarray                      # (nt_sampled, n2)
    ledger: EnergyLedger
    boundary_energy: np.ndarray
    div_residual: np.ndarray             # per-step max-norm of div hdot
    hn_residual: np.ndarray              # wall magnetic constraint residual
    snapshots: np.ndarray | None = None  # (nsnap, 2, 6, n1, n2)
    snapshot_times: np.ndarray | None = None
    apriori: dict = field(default_factory=dict)

    @property
    def cstar(self) -> float:
        """Fitted a priori constant (|Udot|_{1,*,T} + |phi|_{H1}) / |F|_{1,*,T}."""
        a = self.apriori
        num = np.sqrt(a["u_sq"]) + np.sqrt(a["phi_sq"])
        den = np.sqrt(a["f_sq"])
        return float(num / den) if den > 0 else float("inf")


def _speed_bound(basic: BasicState) -> float:
    eos = basic.eos
    fr = basic.frame(0.0)
    smax = 0.0
    for st in fr.states:
        rho = eos.density(st.p, st.S)
        c2 = 1.0 / eos.density_dp(st.p, st.S)
        ca2 = (np.asarray(st.H1) ** 2 + np.asarray(st.H2) ** 2) / rho
        cf = np.sqrt(c2 + ca2)
        smax = max(smax, float(np.max(np.abs(st.u1) + cf)),
                   float(np.max(np.abs(st.u2) + cf)))
    return smax


def cfl_timestep(basic: BasicState, cfl: float = 0.4) -> float:
    """Stable explicit step for the fast magnetosonic bound of the state."""
    g = basic.grid
    return cfl / (_speed_bound(basic) * (2.0 / g.h1 + 1.0 / g.h2))


class _CoeffCache:
    """Assembled solver coefficients: one bundle for steady states, linear
    interpolation between snapshot-time bundles otherwise."""

    _KEYS = ("M1", "M2", "M3", "A0invJt", "J")

    def __init__(self, basic: BasicState, lam_field):
        self.basic = basic
        self.lam_field = lam_field
        self._steady = None
        self._snap: dict = {}

    def at(self, t: float):
        if self.basic.steady:
            if self._steady is None:
                self._steady = self._build(0.0)
            return self._steady
        tg = self.basic.tgrid
        tc = float(np.clip(t, tg[0], tg[-1]))
        k = max(min(int(np.searchsorted(tg, tc, side="right")) - 1,
                    len(tg) - 2), 0)
        w = (tc - tg[k]) / (tg[k + 1] - tg[k])
        b0 = self._bundle(k)
        if w == 0.0:
            return b0
        b1 = self._bundle(k + 1)
        out = {key: (1 - w) * b0[key] + w * b1[key] for key in self._KEYS}
        out["traces"] = {key: (1 - w) * b0["traces"][key]
                         + w * b1["traces"][key] for key in b0["traces"]}
        return out

    def _bundle(self, k: int):
        if k not in self._snap:
            self._snap[k] = self._build(float(self.basic.tgrid[k]))
        return self._snap[k]

    def _build(self, t: float):
        fr = self.basic.frame(t)
        dJdt = None
        if not self.basic.steady:
            tg = self.basic.tgrid
            dd = 0.25 * float(tg[1] - tg[0])
            from .linearized import j_matrix
            dJdt = (j_matrix(self.basic.frame(t + dd))
                    - j_matrix(self.basic.frame(t - dd))) / (2 * dd)
        ops = assemble_effective(fr, self.lam_field, dJdt=dJdt)
        inv = np.linalg.inv(np.moveaxis(ops.A0, (1, 2), (-2, -1)))
        A0inv = np.moveaxis(inv, (-2, -1), (1, 2))
        mm = "sik...,skj...->sij..."
        return {
            "frame": fr,
            "ops": ops,
            "J": ops.J,
            "M1": np.einsum(mm, A0inv, ops.A1),
            "M2": np.einsum(mm, A0inv, ops.A2),
            "M3": np.einsum(mm, A0inv, ops.A3),
            "A0invJt": np.einsum(mm, A0inv, np.swapaxes(ops.J, 1, 2)),
            "traces": fr.boundary_traces(),
        }


def evolve(basic: BasicState, t_final: float, *, forcing=None, bdata=None,
           lam_pair: LambdaPair | None = None, collar_eps: float | None = None,
           cfl: float = 0.4, sponge_width: float = 0.2,
           sponge_strength: float = 2.0, ledger: bool = True,
           ledger_stride: int = 1, snapshot_times=None,
           dt_override: float | None = None, stability_k: float = 1e-3,
           max_steps: int = 200_000) -> Trajectory:
    """March the linearized problem from rest with causal data.

    ``forcing(t) -> (2, 6, n1, n2)`` in the good-unknown components and
    ``bdata(t) -> (3, n2)`` for (g1+, g1-, g2) both default to zero.  Zero
    data reproduce the zero solution exactly.
    """
    grid = basic.grid
    lam_field = None
    if ledger:
        if lam_pair is None:
            try:
                lam_pair = basic.frame(0.0).lambda_boundary(k=stability_k)
            except Exception:
                lam_pair = LambdaPair(lam_plus=np.zeros(grid.n2),
                                      lam_minus=np.zeros(grid.n2))
        eps = collar_eps if collar_eps is not None else max(
            4 * grid.h1, 0.05 * grid.L1)
        lam_field = extend_lambda(lam_pair, grid.x1, eps=eps)
        lam_field = np.broadcast_to(lam_field, (2, grid.n1, grid.n2)).copy()

    stepper = LinearizedStepper(basic, forcing=forcing, bdata=bdata,
                                lam_field=lam_field, cfl=cfl,
                                sponge_width=sponge_width,
                                sponge_strength=sponge_strength)
    cache = stepper.cache
    dt = dt_override or stepper.dt_cfl
    nsteps = int(np.ceil(t_final / dt))
    if nsteps > max_steps:
        raise NumericsError(f"CFL step count {nsteps} exceeds max_steps")
    dt = t_final / nsteps
    n1_phys = stepper.n1_phys
    F_at = stepper.F_at

    sigma = SigmaWeight().value(grid.x1)[:, None]

    V = np.zeros((2, 6, grid.n1, grid.n2))
    phi = np.zeros(grid.n2)

    ledger_obj = EnergyLedger()
    times = [0.0]
    phis = [phi.copy()]
    be = [0.0]
    divres = [0.0]
    hnres = [0.0]
    apriori = {"u_sq": 0.0, "phi_sq": 0.0, "f_sq": 0.0}
    led = _LedgerAccumulator(grid, cache, dt, stepper.sponge) if ledger else None
    if led is not None:
        led.start(V, phi, F_at(0.0))
        ledger_obj.rows.append(led.row(0.0, V, phi, None))

    snap_req = list(snapshot_times) if snapshot_times is not None else []
    snaps, snap_ts = [], []
    if snap_req and abs(snap_req[0]) < 1e-12:
        snaps.append(V.copy())
        snap_ts.append(0.0)
        snap_req.pop(0)

    t = 0.0
    V_prev = V.copy()
    for n in range(nsteps):
        V, phi = stepper.step(V, phi, t, dt)
        t = (n + 1) * dt

        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(phi))):
            raise NumericsError(f"non-finite values at t={t:.6g}")

        co_now = cache.at(t)
        times.append(t)
        phis.append(phi.copy())
        be.append(_boundary_energy(grid, V))
        dres, hres = _constraint_residuals(grid, basic.frame(t), V, phi,
                                           n1_phys)
        divres.append(dres)
        hnres.append(hres)
        _accumulate_apriori(apriori, grid, sigma, co_now, V, V_prev, phi,
                            F_at, t, dt)
        if led is not None:
            led.advance_flux(V, F_at(t))
            if (n + 1) % ledger_stride == 0 or n == nsteps - 1:
                ledger_obj.rows.append(led.row(t, V, phi, (V_prev, dt)))
        V_prev = V.copy()

        while snap_req and t >= snap_req[0] - 0.5 * dt:
            snaps.append(V.copy())
            snap_ts.append(t)
            snap_req.pop(0)

    return Trajectory(
        times=np.asarray(times), phi=np.asarray(phis), ledger=ledger_obj,
        boundary_energy=np.asarray(be), div_residual=np.asarray(divres),
        hn_residual=np.asarray(hnres),
        snapshots=np.asarray(snaps) if snaps else None,
        snapshot_times=np.asarray(snap_ts) if snap_ts else None,
        apriori=apriori)


def _mat_apply2(M, v):
    return np.einsum("sij...,sj...->si...", M, v)


class LinearizedStepper:
    """One SSP-RK3 step of the characteristic system with wall injection.

    Incoming characteristics (q + u_n on the plus side, q - u_n on the
    minus side) and the front are driven by the three wall conditions; the
    outgoing combinations come from the interior update; the remaining
    components are free (their wall-normal coefficient vanishes).
    """

    def __init__(self, basic: BasicState, *, forcing=None, bdata=None,
                 lam_field=None, cfl: float = 0.4, sponge_width: float = 0.2,
                 sponge_strength: float = 2.0):
        self.basic = basic
        self.grid = basic.grid
        self.cache = _CoeffCache(basic, lam_field)
        self.cfl = cfl
        grid = basic.grid
        smax = _speed_bound(basic)
        self.dt_cfl = cfl / (smax * (2.0 / grid.h1 + 1.0 / grid.h2))
        x1 = grid.x1[:, None]
        sp_start = grid.L1 * (1.0 - sponge_width)
        self.sponge = sponge_strength * quintic_step(
            (x1 - sp_start) / (grid.L1 - sp_start))
        # constraint monitors stop short of the sponge by the stencil width
        self.n1_phys = max(int(np.searchsorted(grid.x1, sp_start)) - 3, 4)
        self._forcing = forcing
        self._bdata = bdata
        self._zero_f = np.zeros((2, 6, grid.n1, grid.n2))
        self._zero_g = np.zeros((3, grid.n2))

    def F_at(self, t):
        return self._forcing(t) if self._forcing is not None else self._zero_f

    def g_at(self, t):
        return self._bdata(t) if self._bdata is not None else self._zero_g

    def rhs(self, V, phi, t):
        grid = self.grid
        co = self.cache.at(t)
        dV = (_mat_apply2(co["A0invJt"], self.F_at(t))
              - _mat_apply2(co["M1"], grid.d1(V))
              - _mat_apply2(co["M2"], grid.d2(V))
              - _mat_apply2(co["M3"], V))
        dV -= self.sponge * V
        tr = co["traces"]
        g = self.g_at(t)
        dphi = (V[0, IUN, 0, :] + phi * tr["d1uNp"]
                - tr["u2p"] * grid.d2_boundary(phi) + g[0])
        return dV, dphi

    def apply_bc(self, V, phi, t):
        grid = self.grid
        tr = self.cache.at(t)["traces"]
        g = self.g_at(t)
        d2phi = grid.d2_boundary(phi)
        bp = V[0, IQ, 0, :] - V[0, IUN, 0, :]
        bm = V[1, IQ, 0, :] + V[1, IUN, 0, :]
        d = (g[0] - g[1] - (tr["u2p"] - tr["u2m"]) * d2phi
             + phi * (tr["d1uNp"] + tr["d1uNm"]))
        e = g[2] - phi * tr["d1q_jump"]
        un_p = 0.5 * (e - bp + bm - d)
        un_m = un_p + d
        V[0, IUN, 0, :] = un_p
        V[1, IUN, 0, :] = un_m
        V[0, IQ, 0, :] = bp + un_p
        V[1, IQ, 0, :] = bm - un_m

    def step(self, V, phi, t, dt):
        """Advance (V, phi) from t to t + dt (three Shu-Osher stages)."""
        k1V, k1p = self.rhs(V, phi, t)
        V1 = V + dt * k1V
        p1 = phi + dt * k1p
        self.apply_bc(V1, p1, t + dt)

        k2V, k2p = self.rhs(V1, p1, t + dt)
        V2 = 0.75 * V + 0.25 * (V1 + dt * k2V)
        p2 = 0.75 * phi + 0.25 * (p1 + dt * k2p)
        self.apply_bc(V2, p2, t + 0.5 * dt)

        k3V, k3p = self.rhs(V2, p2, t + 0.5 * dt)
        Vn = V / 3.0 + 2.0 / 3.0 * (V2 + dt * k3V)
        pn = phi / 3.0 + 2.0 / 3.0 * (p2 + dt * k3p)
        self.apply_bc(Vn, pn, t + dt)
        return Vn, pn


def constraint_monitor(traj: Trajectory) -> dict:
    """Per-step residual series of div hdot and the wall magnetic relation."""
    return {"times": traj.times, "div": traj.div_residual,
            "hn": traj.hn_residual}


def energy_ledger(traj: Trajectory) -> EnergyLedger:
    return traj.ledger


def verify_apriori(traj: Trajectory) -> float:
    """Fitted constant of the solution-to-forcing H1* bound."""
    return traj.cstar


def step_linearized(basic: BasicState, V, phi, t, dt, *, forcing=None,
                    bdata=None, cfl_guard: float = 1.25):
    """Single explicit step of the effective problem; checks the CFL bound."""
    stepper = LinearizedStepper(basic, forcing=forcing, bdata=bdata)
    if dt > cfl_guard * stepper.dt_cfl:
        raise NumericsError(
            f"dt={dt:.3e} violates the CFL bound {stepper.dt_cfl:.3e}")
    Vn, pn = stepper.step(np.array(V, copy=True), np.array(phi, copy=True),
                          t, dt)
    if not (np.all(np.isfinite(Vn)) and np.all(np.isfinite(pn))):
        raise NumericsError("non-finite values after step")
    return Vn, pn


def _boundary_energy(grid: Grid, V) -> float:
    return float(np.sum(V[:, :, 0, :] ** 2) * grid.h2)


def _constraint_residuals(grid: Grid, frame, V, phi, n1_phys: int):
    """Max-norm residuals of div hdot and the wall magnetic constraint.

    Measured on the physical region only: the sponge damping is not
    divergence-compatible, so the absorbing collar is excluded.
    """
    lifted = frame.lifted
    div_max = 0.0
    hn_max = 0.0
    d2phi = grid.d2_boundary(phi)
    for i in range(2):
        sgn = 1.0 if i == 0 else -1.0
        d1phi = lifted.d1_phi_map[i]
        div = grid.d1(V[i, IHN]) + grid.d2(V[i, IH2V] * d1phi)
        div_max = max(div_max, float(np.max(np.abs(div[:n1_phys]))))
        tr = frame.U[i, IH2, 0, :] * d2phi - V[i, IHN, 0, :] \
            - sgn * phi * grid.d1(frame.U[i, IH1]
                                  - frame.U[i, IH2] * d2phi[None, :])[0, :]
        hn_max = max(hn_max, float(np.max(np.abs(tr))))
    return div_max, hn_max


def _accumulate_apriori(acc, grid: Grid, sigma, co, V, V_prev, phi, F_at, t, dt):
    """Trapezoid-free accumulation (left Riemann) of the H1* integrands."""
    J = co["J"]
    Ud = np.einsum("sij...,sj...->si...", J, V)
    Ud_prev = np.einsum("sij...,sj...->si...", J, V_prev)
    dtU = (Ud - Ud_prev) / dt
    terms = (Ud ** 2 + dtU ** 2 + (sigma * grid.d1(Ud)) ** 2
             + grid.d2(Ud) ** 2)
    acc["u_sq"] += float(grid.integrate(terms.sum(axis=(0, 1)))) * dt
    d2p = grid.d2_boundary(phi)
    # dphi/dt from the kinematic wall condition of the plus side
    tr = co["traces"]
    dtp = V[0, IUN, 0, :] + phi * tr["d1uNp"] - tr["u2p"] * d2p
    acc["phi_sq"] += float(np.sum(phi ** 2 + dtp ** 2 + d2p ** 2)) * grid.h2 * dt
    f = F_at(t)
    fprev = F_at(max(t - dt, 0.0))
    dtf = (f - fprev) / dt
    fterms = (f ** 2 + dtf ** 2 + (sigma * grid.d1(f)) ** 2 + grid.d2(f) ** 2)
    acc["f_sq"] += float(grid.integrate(fterms.sum(axis=(0, 1)))) * dt


class _LedgerAccumulator:
    """Per-step quadratic energies and the energy-identity bookkeeping.

    The marched V solves the characteristic A-system (with the sponge),
    so the symmetrized identity carries three right-hand contributions:
    the wall/far boundary fluxes of B1c, the source 2 (J^T (S F + T div
    hdot / d1Phi)) . V, and the zero-order quadratic form including the
    sponge damping through B0c.  Steady basic states only.
    """

    def __init__(self, grid: Grid, cache: _CoeffCache, dt: float, sponge):
        if not cache.basic.steady:
            raise ValueError("the energy ledger supports steady basic states")
        self.grid = grid
        self.cache = cache
        self.dt = dt
        self.sigma = SigmaWeight().value(grid.x1)[:, None]
        self.sponge = sponge
        self._flux_int = 0.0
        self._prev_integrand = None
        ops = cache.at(0.0)["ops"]
        if ops.B0 is None:
            raise ValueError("ledger requires the symmetrized family")
        self.ops = ops
        g = grid
        self._zo_matrix = (g.d1(ops.B1) + g.d2(ops.B2)
                           - (ops.B3 + np.swapaxes(ops.B3, 1, 2))
                           - 2.0 * sponge * ops.B0)
        # T-vector of the secondary symmetrizer per side, in U-space
        from .stability import symmetrizer_matrices
        fr = cache.at(0.0)["frame"]
        self._T = np.stack([
            symmetrizer_matrices(fr.states[i],
                                 cache.lam_field[i], fr.basic.eos)[1]
            for i in range(2)])
        self._frame = fr

    def start(self, V, phi, f0):
        self._Q0 = self._q(V)
        self._prev_integrand = self._integrand(V, f0)

    def _q(self, V):
        vals = np.einsum("sij...,si...,sj...->s...", self.ops.B0, V, V)
        return float(self.grid.integrate(vals.sum(axis=0)))

    def _integrand(self, V, F):
        ops = self.ops
        g = self.grid
        b_wall = np.einsum("sij...,si...,sj...->s...",
                           ops.B1[..., 0, :], V[..., 0, :], V[..., 0, :])
        b_far = np.einsum("sij...,si...,sj...->s...",
                          ops.B1[..., -1, :], V[..., -1, :], V[..., -1, :])
        flux = float((b_wall.sum(axis=0) * g.h2).sum()
                     - (b_far.sum(axis=0) * g.h2).sum())
        SF = np.einsum("sij...,sj...->si...", ops.S, F)
        # the discrete div hdot source restores the exact A/B equivalence
        lifted = self._frame.lifted
        for i in range(2):
            div = (g.d1(V[i, IHN]) + g.d2(V[i, IH2V] * lifted.d1_phi_map[i]))
            SF[i] += self._T[i] * (div / lifted.d1_phi_map[i])
        Fc = np.einsum("sji...,sj...->si...", ops.J, SF)
        src = 2.0 * float(g.integrate(
            np.einsum("si...,si...->s...", Fc, V).sum(axis=0)))
        zo = float(g.integrate(np.einsum(
            "sij...,si...,sj...->s...", self._zo_matrix, V, V).sum(axis=0)))
        return flux + src + zo

    def advance_flux(self, V, F):
        """Trapezoid accumulation of the identity's right-hand side."""
        val = self._integrand(V, F)
        self._flux_int += 0.5 * self.dt * (self._prev_integrand + val)
        self._prev_integrand = val

    def row(self, t, V, phi, prev) -> LedgerRow:
        g = self.grid
        I = float(g.integrate((V ** 2).sum(axis=(0, 1))))
        Isig = float(g.integrate(((self.sigma * g.d1(V)) ** 2).sum(axis=(0, 1))))
        I2 = float(g.integrate((g.d2(V) ** 2).sum(axis=(0, 1))))
        d1Vn = g.d1(V[:, (IQ, IUN, IHN), :, :])
        I1n = float(g.integrate((d1Vn ** 2).sum(axis=(0, 1))))
        if prev is None:
            I0 = 0.0
        else:
            V_prev, dt = prev
            I0 = float(g.integrate((((V - V_prev) / dt) ** 2).sum(axis=(0, 1))))
        phiL2 = float(np.sqrt(np.sum(phi ** 2) * g.h2))
        Q = self._q(V)
        res = Q - self._Q0 - self._flux_int
        return LedgerRow(t=t, I=I, I0=I0, I1n=I1n, Isigma=Isig, I2=I2,
                         phiL2=phiL2, identity_residual=res)
