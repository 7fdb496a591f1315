"""Nonlinear method-of-lines solvers for the three geometries.

Interior scheme: 4th-order centered differences on the convection term with
an upwind-bias dissipation matrix |J_bg - s I| Delta^4 / (12 h) built from
the frozen background characteristic frame (3rd-order accurate), explicit
RK4 in time, pointwise source.  Boundary and shock-interface nodes are
closed algebraically at every stage: the half-line trace solves the
boundary-condition system with outgoing characteristic extrapolations, and
the shock interface solves the full Rankine-Hugoniot system jointly for the
phase speed and the entering trace components.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    AmplitudeEscape,
    BoundaryTraceFailure,
    FitUnreliable,
    IllPosedBoundary,
    InsufficientSampling,
    ShockDisintegration,
    ShockTraceFailure,
    StepRejected,
)
from .numerics import derivative, second_derivative, trapezoid
from .systems import ShockProfile, SystemDescriptor


# ---------------------------------------------------------------------------
# configuration and results
# ---------------------------------------------------------------------------

@dataclass
class SimConfig:
    L: float
    h: float
    T: float
    cfl: float = 0.45
    boundary_order: int = 3
    newton_tol: float = 1e-12
    newton_maxiter: int = 10
    snapshot_stride: int = 4
    eps_run: float = 0.5          # abort when W^{1,inf} + |psi'| + |psi''| exceeds this
    max_halvings: int = 20

    def __post_init__(self):
        if not 0.0 < self.cfl <= 0.9:
            raise ValueError("cfl must lie in (0, 0.9]")
        if self.L <= 0 or self.h <= 0 or self.T <= 0:
            raise ValueError("L, h, T must be positive")

    def check_domain(self, max_speed: float, support_radius: float):
        if self.L < max_speed * self.T + support_radius:
            raise ValueError(
                f"domain too small: need L >= {max_speed * self.T + support_radius:g} "
                "so outgoing information does not re-enter")


@dataclass
class Trajectory:
    geometry: str
    times: np.ndarray
    snapshots: list
    x: Optional[np.ndarray] = None
    x_minus: Optional[np.ndarray] = None
    x_plus: Optional[np.ndarray] = None
    h: float = 0.0
    norms: dict = field(default_factory=dict)
    psi: Optional[np.ndarray] = None
    psi_prime: Optional[np.ndarray] = None
    psi_ddot: Optional[np.ndarray] = None
    psi_inf: Optional[float] = None
    rh_residual_max: float = 0.0
    events: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def norm_series(self, name: str) -> np.ndarray:
        return np.asarray(self.norms[name])


# ---------------------------------------------------------------------------
# norms and rate fitting
# ---------------------------------------------------------------------------

def measure_norms(x: np.ndarray, V: np.ndarray, h: float) -> dict:
    """Discrete L2, Linf, W1inf, H2 of a grid function on one domain."""
    V = V[:, None] if V.ndim == 1 else V
    dV = derivative(V, h)
    d2V = second_derivative(V, h)
    l2sq = float(trapezoid((V ** 2).sum(axis=1), h))
    h1sq = float(trapezoid((dV ** 2).sum(axis=1), h))
    h2sq = float(trapezoid((d2V ** 2).sum(axis=1), h))
    linf = float(np.abs(V).max())
    w1inf = max(linf, float(np.abs(dV).max()))
    return {"L2": np.sqrt(l2sq), "Linf": linf, "W1inf": w1inf,
            "H2": np.sqrt(l2sq + h1sq + h2sq)}


def combine_norms(a: dict, b: dict) -> dict:
    return {"L2": float(np.hypot(a["L2"], b["L2"])),
            "Linf": max(a["Linf"], b["Linf"]),
            "W1inf": max(a["W1inf"], b["W1inf"]),
            "H2": float(np.hypot(a["H2"], b["H2"]))}


def fit_decay_rate(t: np.ndarray, y: np.ndarray, window: tuple[float, float],
                   floor: float = 1e-13) -> tuple[float, float]:
    """Least-squares exponential rate of y over the window: y ~ C e^{-a t}.

    Returns (rate, r_squared).  Raises FitUnreliable for short windows or
    data at the numerical floor.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = (t >= window[0]) & (t <= window[1])
    if mask.sum() < 5:
        raise FitUnreliable("window selects fewer than 5 samples")
    ts, ys = t[mask], y[mask]
    if np.any(ys <= 10.0 * floor):
        raise FitUnreliable("series at the numerical floor inside the window")
    ly = np.log(ys)
    A = np.vstack([ts, np.ones_like(ts)]).T
    sol, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(res[0]) if res.size else float(np.sum((ly - A @ sol) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(-sol[0]), float(r2)


# ---------------------------------------------------------------------------
# interior scheme
# ---------------------------------------------------------------------------

def _abs_matrix(J: np.ndarray, shift: float) -> np.ndarray:
    """|J - shift I| in the eigen sense (J diagonalizable, real spectrum)."""
    w, R = np.linalg.eig(J)
    return (R @ np.diag(np.abs(w.real - shift)) @ np.linalg.inv(R)).real


class _Interior:
    """Convection + source right-hand side on one uniform grid."""

    def __init__(self, sys: SystemDescriptor, U_bg: np.ndarray, sigma: float,
                 h: float):
        self.sys = sys
        self.h = h
        self.U_bg = np.atleast_1d(np.asarray(U_bg, dtype=float))
        self.sigma = sigma
        self.J_bg = np.atleast_2d(sys.flux_jacobian(self.U_bg))

    def rhs(self, U: np.ndarray, shift: float) -> np.ndarray:
        """-(J(U) - shift I) dU/dx - |J_bg - shift| D4 U/(12h) + g(U)."""
        dU = derivative(U, self.h)
        J = self.sys.flux_jacobian(U)
        conv = np.einsum("xab,xb->xa", J, dU) - shift * dU
        out = -conv + self.sys.source(U)
        absJ = _abs_matrix(self.J_bg, shift)
        d4 = U[4:] - 4.0 * U[3:-1] + 6.0 * U[2:-2] - 4.0 * U[1:-3] + U[:-4]
        out[2:-2] -= (d4 @ absJ.T) / (12.0 * self.h)
        return out

    def max_speed(self, U: np.ndarray, shift: float) -> float:
        J = self.sys.flux_jacobian(U)
        diag = np.einsum("xaa->xa", J) - shift
        offsum = np.abs(J).sum(axis=2) - np.abs(np.einsum("xaa->xa", J))
        return float((np.abs(diag) + offsum).max())


def _extrapolate(U: np.ndarray, side: str) -> np.ndarray:
    """Cubic extrapolation of the boundary node from its four neighbors."""
    if side == "left":
        return 4.0 * U[1] - 6.0 * U[2] + 4.0 * U[3] - U[4]
    return 4.0 * U[-2] - 6.0 * U[-3] + 4.0 * U[-4] - U[-5]


# ---------------------------------------------------------------------------
# constant equilibrium (whole line)
# ---------------------------------------------------------------------------

def _init_grid_data(x: np.ndarray, V0, n: int) -> np.ndarray:
    if callable(V0):
        vals = np.asarray(V0(x), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        return vals
    vals = np.asarray(V0, dtype=float)
    return vals[:, None] if vals.ndim == 1 else vals.copy()


def simulate_constant(sys: SystemDescriptor, U_bar, V0, cfg: SimConfig,
                      sigma: float = 0.0) -> Trajectory:
    """Whole-line run about a constant equilibrium (frame speed sigma)."""
    U_bar = np.atleast_1d(np.asarray(U_bar, dtype=float))
    npts = int(round(2 * cfg.L / cfg.h)) + 1
    x = np.linspace(-cfg.L, cfg.L, npts)
    h = x[1] - x[0]
    V = _init_grid_data(x, V0, sys.n)
    interior = _Interior(sys, U_bar, sigma, h)

    def rhs(Vg, t):
        return interior.rhs(U_bar + Vg, sigma)

    def bound_fn(Vg):
        return _gershgorin(sys, U_bar + Vg, sigma)

    return _march(sys, cfg, x, h, V, rhs, bound_fn, geometry="whole-line")


def _march(sys, cfg, x, h, V, rhs, bound_fn, geometry):
    """Shared RK4 loop with CFL monitoring, guards, and snapshotting."""
    dt = cfg.cfl * h / max(bound_fn(V), 1e-12)
    t = 0.0
    halvings = 0
    step_idx = 0
    times = [0.0]
    snaps = [V.copy()]
    norm_keys = ("L2", "Linf", "W1inf", "H2")
    norms = {k: [measure_norms(x, V, h)[k]] for k in norm_keys}
    events = []
    while t < cfg.T - 1e-12:
        dt_step = min(dt, cfg.T - t)
        bound = bound_fn(V)
        if dt_step * bound / h > 0.9:
            halvings += 1
            if halvings > cfg.max_halvings:
                raise StepRejected("CFL halving budget exhausted", dt_new=dt / 2)
            dt /= 2.0
            events.append(f"t={t:.6g}: dt halved to {dt:.3e}")
            continue
        k1 = rhs(V, t)
        k2 = rhs(V + 0.5 * dt_step * k1, t + 0.5 * dt_step)
        k3 = rhs(V + 0.5 * dt_step * k2, t + 0.5 * dt_step)
        k4 = rhs(V + dt_step * k3, t + dt_step)
        V = V + dt_step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt_step
        step_idx += 1
        nv = measure_norms(x, V, h)
        if nv["W1inf"] > cfg.eps_run:
            raise AmplitudeEscape(
                f"W1inf={nv['W1inf']:.3g} exceeded eps_run={cfg.eps_run:g} at t={t:.4g}")
        if step_idx % cfg.snapshot_stride == 0 or t >= cfg.T - 1e-12:
            times.append(t)
            snaps.append(V.copy())
            for k in norm_keys:
                norms[k].append(nv[k])
    return Trajectory(geometry=geometry, times=np.array(times), snapshots=snaps,
                      x=x, h=h, norms={k: np.array(v) for k, v in norms.items()},
                      events=events)


def _gershgorin(sys, V, shift: float) -> float:
    U = V
    J = sys.flux_jacobian(U)
    diag = np.einsum("xaa->xa", J) - shift
    offsum = np.abs(J).sum(axis=2) - np.abs(np.einsum("xaa->xa", J))
    return float((np.abs(diag) + offsum).max())


# ---------------------------------------------------------------------------
# half-line IBVP
# ---------------------------------------------------------------------------

def _newton_boundary(sys: SystemDescriptor, U_seed: np.ndarray,
                     U_ex: np.ndarray, L_out: np.ndarray, phi_val: np.ndarray,
                     tol: float, maxiter: int) -> np.ndarray:
    """Solve {B[U0] = phi, L_out (U0 - U_ex) = 0} by Newton."""
    U0 = U_seed.copy()
    scale = 1.0 + np.abs(U_ex).max()
    for _ in range(maxiter):
        res_b = np.atleast_1d(sys.boundary_map(U0)) - phi_val
        res_c = L_out @ (U0 - U_ex)
        res = np.concatenate([res_b, res_c])
        if np.abs(res).max() < tol * scale:
            return U0
        Jb = np.atleast_2d(sys.boundary_jacobian(U0))
        J = np.vstack([Jb, L_out])
        U0 = U0 - np.linalg.solve(J, res)
    res_b = np.atleast_1d(sys.boundary_map(U0)) - phi_val
    res_c = L_out @ (U0 - U_ex)
    if max(np.abs(res_b).max(), np.abs(res_c).max()) < tol * scale:
        return U0
    raise BoundaryTraceFailure(
        f"boundary Newton stalled, residual {np.abs(res_b).max():.3e}")


def simulate_ibvp(sys: SystemDescriptor, U_bar, phi: Callable[[float], np.ndarray],
                  V0, cfg: SimConfig) -> Trajectory:
    """Half-line run with boundary data B[U(t,0)] = phi(t)."""
    if sys.boundary_map is None:
        raise IllPosedBoundary("system has no boundary map")
    U_bar = np.atleast_1d(np.asarray(U_bar, dtype=float))
    J_bg = np.atleast_2d(sys.flux_jacobian(U_bar))
    w, R = np.linalg.eig(J_bg)
    w = w.real
    incoming = int(np.sum(w > 0))
    p = np.atleast_1d(sys.boundary_map(U_bar)).shape[0]
    if p != incoming:
        raise IllPosedBoundary(
            f"boundary rank {p} != incoming characteristic count {incoming}")
    Lrows = np.linalg.inv(R).real
    L_out = Lrows[w < 0, :]

    npts = int(round(cfg.L / cfg.h)) + 1
    x = np.linspace(0.0, cfg.L, npts)
    h = x[1] - x[0]
    V = _init_grid_data(x, V0, sys.n)
    interior = _Interior(sys, U_bar, 0.0, h)

    def close(Vg, t):
        U = U_bar + Vg
        U_ex = _extrapolate(U, "left")
        phi_val = np.atleast_1d(np.asarray(phi(t), dtype=float))
        U0 = _newton_boundary(sys, U_ex, U_ex, L_out, phi_val,
                              cfg.newton_tol, cfg.newton_maxiter)
        out = Vg.copy()
        out[0] = U0 - U_bar
        return out

    def rhs(Vg, t):
        Vc = close(Vg, t)
        return interior.rhs(U_bar + Vc, 0.0)

    def bound_fn(Vg):
        return _gershgorin(sys, U_bar + Vg, 0.0)

    traj = _march(sys, cfg, x, h, close(V, 0.0), rhs, bound_fn, geometry="half-line")
    # re-close reported snapshots so traces satisfy the boundary condition
    traj.snapshots = [close(S, tt) for S, tt in zip(traj.snapshots, traj.times)]
    traj.meta["boundary_rank"] = p
    return traj


# ---------------------------------------------------------------------------
# shock-fitted Riemann shock
# ---------------------------------------------------------------------------

class _ShockClosure:
    """Stage closure solving the Rankine-Hugoniot trace system."""

    def __init__(self, sys: SystemDescriptor, shock: ShockProfile,
                 cfg: SimConfig):
        self.sys = sys
        self.shock = shock
        self.cfg = cfg
        n = sys.n
        Jp = np.atleast_2d(sys.flux_jacobian(shock.u_plus))
        Jm = np.atleast_2d(sys.flux_jacobian(shock.u_minus))
        wp, Rp = np.linalg.eig(Jp)
        wm, Rm = np.linalg.eig(Jm)
        dp = wp.real - shock.sigma
        dm = wm.real - shock.sigma
        # entering the domains = leaving the shock
        self.enter_p = dp > 0
        self.enter_m = dm < 0
        self.R_p = Rp.real[:, self.enter_p]
        self.R_m = Rm.real[:, self.enter_m]
        self.m_p = int(self.enter_p.sum())
        self.m_m = int(self.enter_m.sum())
        if 1 + self.m_p + self.m_m != n:
            raise ShockDisintegration(
                "background trace system is not square: shock is not Lax-structured")
        self.z_prev = np.zeros(1 + self.m_p + self.m_m)

    def solve(self, U_ex_p: np.ndarray, U_ex_m: np.ndarray):
        sys = self.sys
        sigma = self.shock.sigma
        z = self.z_prev.copy()
        scale = 1.0 + max(np.abs(U_ex_p).max(), np.abs(U_ex_m).max())
        for it in range(self.cfg.newton_maxiter + 1):
            psi_p = z[0]
            Up = U_ex_p + self.R_p @ z[1:1 + self.m_p]
            Um = U_ex_m + self.R_m @ z[1 + self.m_p:]
            res = (-(sigma + psi_p) * (Up - Um)
                   + np.atleast_1d(sys.flux(Up)) - np.atleast_1d(sys.flux(Um)))
            # at least one update so warm starts cannot return stale traces
            if it > 0 and np.abs(res).max() < self.cfg.newton_tol * scale:
                self.z_prev = z
                self._check_structure(Up, Um, sigma + psi_p)
                return psi_p, Up, Um, float(np.abs(res).max())
            Jp = np.atleast_2d(sys.flux_jacobian(Up)) - (sigma + psi_p) * np.eye(sys.n)
            Jm = np.atleast_2d(sys.flux_jacobian(Um)) - (sigma + psi_p) * np.eye(sys.n)
            Jac = np.empty((sys.n, sys.n))
            Jac[:, 0] = -(Up - Um)
            Jac[:, 1:1 + self.m_p] = Jp @ self.R_p
            Jac[:, 1 + self.m_p:] = -(Jm @ self.R_m)
            z = z - np.linalg.solve(Jac, res)
        raise ShockTraceFailure(
            f"shock trace Newton stalled, residual {np.abs(res).max():.3e}")

    def _check_structure(self, Up: np.ndarray, Um: np.ndarray, shift: float):
        dp = np.linalg.eigvals(np.atleast_2d(self.sys.flux_jacobian(Up))).real - shift
        dm = np.linalg.eigvals(np.atleast_2d(self.sys.flux_jacobian(Um))).real - shift
        if (int(np.sum(dp > 0)) != self.m_p) or (int(np.sum(dm < 0)) != self.m_m):
            raise ShockDisintegration(
                "perturbed traces changed the characteristic sign pattern")


def simulate_shock(sys: SystemDescriptor, shock: ShockProfile, V0,
                   cfg: SimConfig, psi0: Optional[float] = None) -> Trajectory:
    """Shock-fitted run: two half grids in the co-moving frame, phase tracked
    through the Rankine-Hugoniot trace system at every stage."""
    psi0 = shock.psi0 if psi0 is None else psi0
    n = sys.n
    npts = int(round(cfg.L / cfg.h)) + 1
    x_p = np.linspace(0.0, cfg.L, npts)
    x_m = np.linspace(-cfg.L, 0.0, npts)
    h = x_p[1] - x_p[0]
    Vp = _init_grid_data(x_p, V0, n)
    Vm = _init_grid_data(x_m, V0, n)
    closure = _ShockClosure(sys, shock, cfg)
    int_p = _Interior(sys, shock.u_plus, shock.sigma, h)
    int_m = _Interior(sys, shock.u_minus, shock.sigma, h)
    sigma = shock.sigma

    state = {"rh_max": 0.0}

    def close(Vmg, Vpg):
        Up_ex = _extrapolate(shock.u_plus + Vpg, "left")
        Um_ex = _extrapolate(shock.u_minus + Vmg, "right")
        psi_p, Up0, Um0, rh = closure.solve(Up_ex, Um_ex)
        Vmg = Vmg.copy()
        Vpg = Vpg.copy()
        Vpg[0] = Up0 - shock.u_plus
        Vmg[-1] = Um0 - shock.u_minus
        state["rh_max"] = max(state["rh_max"], rh)
        return Vmg, Vpg, psi_p

    def rhs(Vmg, Vpg):
        Vmc, Vpc, psi_p = close(Vmg, Vpg)
        shift = sigma + psi_p
        rp = int_p.rhs(shock.u_plus + Vpc, shift)
        rm = int_m.rhs(shock.u_minus + Vmc, shift)
        return rm, rp, psi_p

    dt = cfg.cfl * h / max(_gershgorin(sys, shock.u_plus + Vp, sigma),
                           _gershgorin(sys, shock.u_minus + Vm, sigma), 1e-12)
    t = 0.0
    psi = psi0
    halvings = 0
    step_idx = 0
    times = [0.0]
    Vmc, Vpc, psi_p0 = close(Vm, Vp)
    Vm, Vp = Vmc, Vpc
    snaps = [(Vm.copy(), Vp.copy())]
    psi_series = [psi]
    psi_prime_series = [psi_p0]
    psi_ddot_series = [_psi_ddot(sys, shock, Vm, Vp, psi_p0, h)]
    norm_keys = ("L2", "Linf", "W1inf", "H2")

    def norms_of(Vmg, Vpg):
        return combine_norms(measure_norms(x_m, Vmg, h), measure_norms(x_p, Vpg, h))

    norms = {k: [norms_of(Vm, Vp)[k]] for k in norm_keys}
    events = []

    while t < cfg.T - 1e-12:
        dt_step = min(dt, cfg.T - t)
        bound = max(_gershgorin(sys, shock.u_plus + Vp, sigma),
                    _gershgorin(sys, shock.u_minus + Vm, sigma))
        if dt_step * bound / h > 0.9:
            halvings += 1
            if halvings > cfg.max_halvings:
                raise StepRejected("CFL halving budget exhausted", dt_new=dt / 2)
            dt /= 2.0
            events.append(f"t={t:.6g}: dt halved to {dt:.3e}")
            continue
        km1, kp1, ps1 = rhs(Vm, Vp)
        km2, kp2, ps2 = rhs(Vm + 0.5 * dt_step * km1, Vp + 0.5 * dt_step * kp1)
        km3, kp3, ps3 = rhs(Vm + 0.5 * dt_step * km2, Vp + 0.5 * dt_step * kp2)
        km4, kp4, ps4 = rhs(Vm + dt_step * km3, Vp + dt_step * kp3)
        Vm = Vm + dt_step / 6.0 * (km1 + 2 * km2 + 2 * km3 + km4)
        Vp = Vp + dt_step / 6.0 * (kp1 + 2 * kp2 + 2 * kp3 + kp4)
        psi += dt_step / 6.0 * (ps1 + 2 * ps2 + 2 * ps3 + ps4)
        t += dt_step
        step_idx += 1
        Vm, Vp, psi_p = close(Vm, Vp)
        nv = norms_of(Vm, Vp)
        psi_dd = _psi_ddot(sys, shock, Vm, Vp, psi_p, h)
        if nv["W1inf"] + abs(psi_p) + abs(psi_dd) > cfg.eps_run:
            raise AmplitudeEscape(
                f"amplitude guard tripped at t={t:.4g}: "
                f"W1inf={nv['W1inf']:.3g}, |psi'|={abs(psi_p):.3g}")
        if step_idx % cfg.snapshot_stride == 0 or t >= cfg.T - 1e-12:
            times.append(t)
            snaps.append((Vm.copy(), Vp.copy()))
            psi_series.append(psi)
            psi_prime_series.append(psi_p)
            psi_ddot_series.append(psi_dd)
            for k in norm_keys:
                norms[k].append(nv[k])

    psi_prime_series = np.array(psi_prime_series)
    psi_series = np.array(psi_series)
    # tail-corrected limit estimate of the phase; only trust a clean fit
    tail = 0.0
    if len(psi_prime_series) > 10 and abs(psi_prime_series[-1]) > 1e-12:
        try:
            rate, r2 = fit_decay_rate(np.array(times),
                                      np.abs(psi_prime_series) + 1e-300,
                                      (times[-1] * 0.6, times[-1]))
            if 0.01 < rate < 100.0 and r2 > 0.9:
                tail = psi_prime_series[-1] / rate
        except FitUnreliable:
            tail = 0.0
    return Trajectory(
        geometry="shock", times=np.array(times), snapshots=snaps,
        x_minus=x_m, x_plus=x_p, h=h,
        norms={k: np.array(v) for k, v in norms.items()},
        psi=psi_series, psi_prime=psi_prime_series,
        psi_ddot=np.array(psi_ddot_series),
        psi_inf=float(psi_series[-1] + tail),
        rh_residual_max=state["rh_max"], events=events,
        meta={"psi0": psi0, "sigma": sigma})


def _psi_ddot(sys: SystemDescriptor, shock: ShockProfile, Vm: np.ndarray,
              Vp: np.ndarray, psi_p: float, h: float) -> float:
    """Second phase derivative from the time-differentiated trace system.

    Least-squares projection of A[shift](dU/dt)+ - A[shift](dU/dt)- onto the
    trace jump; the full n-vector identity is overdetermined in psi''.
    """
    shift = shock.sigma + psi_p
    n = sys.n
    Up0 = shock.u_plus + Vp[0]
    Um0 = shock.u_minus + Vm[-1]
    dUp = (-11.0 * Vp[0] + 18.0 * Vp[1] - 9.0 * Vp[2] + 2.0 * Vp[3]) / (6.0 * h)
    dUm = (11.0 * Vm[-1] - 18.0 * Vm[-2] + 9.0 * Vm[-3] - 2.0 * Vm[-4]) / (6.0 * h)
    Ap = np.atleast_2d(sys.flux_jacobian(Up0)) - shift * np.eye(n)
    Am = np.atleast_2d(sys.flux_jacobian(Um0)) - shift * np.eye(n)
    dtUp = -(Ap @ dUp) + np.atleast_1d(sys.source(Up0))
    dtUm = -(Am @ dUm) + np.atleast_1d(sys.source(Um0))
    w = Ap @ dtUp - Am @ dtUm
    jump = Up0 - Um0
    return float(jump @ w) / float(jump @ jump)
