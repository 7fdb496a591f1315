"""Hypocoercive energy functionals and dissipation-inequality monitoring.

The compensated H^1-level functional
    E1(V) = 1/2 ||P(U) dV/dx||^2 + <Q P V, P dV/dx> + (vartheta/2) ||P V||^2
couples the natural characteristic-frame norm with the compensator cross
term; E2 repeats the structure one derivative up.  The boundary-split
variant weights the outgoing-characteristic block by theta' so boundary
terms become dissipative.  The monitor checks the integrated inequality
    E(t) <= e^{-2 a'(t-s)} E(s) + C int_s^t e^{-2 a'(t-r)} F(r) dr
over all snapshot pairs and reports the smallest feasible C.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InsufficientSampling, OutOfChart
from .numerics import derivative, second_derivative, trapezoid
from .spectral import SpectralDecomposition
from .systems import SystemDescriptor


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def default_vartheta(decomp: SpectralDecomposition) -> float:
    """1 + 2 ||Q||_op^2, which makes the quadratic form coercive."""
    return 1.0 + 2.0 * float(np.linalg.norm(decomp.Q, 2)) ** 2


def default_theta_prime(decomp: SpectralDecomposition, binv_norm: float,
                        b_norm: float) -> float:
    """Outgoing-block weight: ratio of the boundary coupling to the outgoing
    coercivity constant c = min_{j in J_u} |d_j|, then doubled."""
    J_u = decomp.J_u
    J_s = decomp.J_s
    if len(J_u) == 0 or len(J_s) == 0:
        return 1.0
    c = float(np.abs(decomp.d[J_u]).min())
    gain = float(np.abs(decomp.d[J_s]).max()) * (binv_norm * b_norm) ** 2
    return 2.0 * max(1.0, gain / c)


@dataclass
class EnergyConfig:
    vartheta: float
    theta_prime: float = 1.0
    alpha_prime: float = 0.1
    nonlinear: bool = False

    @classmethod
    def for_decomposition(cls, decomp: SpectralDecomposition,
                          alpha_prime: float = 0.1,
                          nonlinear: bool = False,
                          theta_prime: float = 1.0) -> "EnergyConfig":
        return cls(vartheta=default_vartheta(decomp), theta_prime=theta_prime,
                   alpha_prime=alpha_prime, nonlinear=nonlinear)


# ---------------------------------------------------------------------------
# diagonalizer field
# ---------------------------------------------------------------------------

def p_field(sys: SystemDescriptor, U_bar, sigma: float, V: np.ndarray,
            base: SpectralDecomposition) -> np.ndarray:
    """Pointwise diagonalizer P(U) of D_U A(U) - sigma I, aligned to base.P.

    Rows normalized to unit length with signs matched to the frozen P by
    maximal overlap, so the field is continuous near the background and
    P(U_bar) equals base.P.
    """
    U_bar = np.atleast_1d(np.asarray(U_bar, dtype=float))
    V = V[:, None] if V.ndim == 1 else V
    U = U_bar + V
    if np.abs(V).max() > sys.validity_radius:
        raise OutOfChart("state left the validity ball of the diagonalizer field")
    J = np.atleast_2d(sys.flux_jacobian(U)) - sigma * np.eye(sys.n)
    if J.ndim == 2:
        J = J[None, :, :]
    w, R = np.linalg.eig(J)
    if np.abs(w.imag).max() > 1e-9 * max(1.0, np.abs(w).max()):
        raise OutOfChart("complex characteristic speeds inside the field")
    order = np.argsort(w.real, axis=1)
    npts = J.shape[0]
    out = np.empty((npts, sys.n, sys.n))
    for i in range(npts):
        Ri = R[i][:, order[i]].real
        Pi = np.linalg.inv(Ri)
        Pi /= np.linalg.norm(Pi, axis=1)[:, None]
        for r in range(sys.n):
            if Pi[r] @ base.P[r] < 0:
                Pi[r] = -Pi[r]
        out[i] = Pi
    return out


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------

def _prep(V: np.ndarray) -> np.ndarray:
    return V[:, None] if V.ndim == 1 else V


def functional_e1(decomp: SpectralDecomposition, x: np.ndarray, V: np.ndarray,
                  cfg: EnergyConfig, pfield: Optional[np.ndarray] = None) -> float:
    """Compensated H^1 functional on one grid."""
    V = _prep(V)
    h = x[1] - x[0]
    dV = derivative(V, h)
    return _compensated_form(decomp, x, V, dV, cfg, pfield)


def functional_e2(decomp: SpectralDecomposition, x: np.ndarray, V: np.ndarray,
                  cfg: EnergyConfig, pfield: Optional[np.ndarray] = None) -> float:
    """Same structure one derivative up: (dV, d2V) in place of (V, dV)."""
    V = _prep(V)
    h = x[1] - x[0]
    dV = derivative(V, h)
    d2V = second_derivative(V, h)
    return _compensated_form(decomp, x, dV, d2V, cfg, pfield)


def _compensated_form(decomp, x, W, dW, cfg, pfield) -> float:
    h = x[1] - x[0]
    P = decomp.P
    PW = W @ P.T
    PdW = dW @ P.T
    if pfield is None:
        lead = PdW
    else:
        lead = np.einsum("xab,xb->xa", pfield, dW)
    cross = (PW @ decomp.Q.T) * PdW
    dens = 0.5 * (lead ** 2).sum(axis=1) + cross.sum(axis=1) \
        + 0.5 * cfg.vartheta * (PW ** 2).sum(axis=1)
    return float(trapezoid(dens, h))


def functional_boundary_split(decomp: SpectralDecomposition, x: np.ndarray,
                              V: np.ndarray, cfg: EnergyConfig,
                              outgoing: str = "auto",
                              pfield: Optional[np.ndarray] = None) -> float:
    """theta'-weighted outgoing block plus incoming block of E1.

    outgoing='left' marks the leftward families (d_j < 0) as outgoing (a
    domain with its boundary at the left end, like the half line x > 0);
    'right' marks rightward families (negative half line).  'auto' reads the
    grid: boundary at the smaller-|x| end.
    """
    V = _prep(V)
    h = x[1] - x[0]
    if outgoing == "auto":
        outgoing = "left" if abs(x[0]) < abs(x[-1]) else "right"
    mask_out = decomp.d < 0 if outgoing == "left" else decomp.d > 0
    dV = derivative(V, h)
    PV = V @ decomp.P.T
    PdV = dV @ decomp.P.T
    QPV = PV @ decomp.Q.T
    if pfield is None:
        lead = PdV
    else:
        # project the nonlinear leading term onto characteristic components
        lead = np.einsum("xab,xb->xa", pfield, dV)

    def block(mask):
        sel = mask.astype(float)
        dens = (0.5 * ((lead * sel) ** 2).sum(axis=1)
                + ((QPV * sel) * (PdV * sel)).sum(axis=1)
                + 0.5 * cfg.vartheta * ((PV * sel) ** 2).sum(axis=1))
        return float(trapezoid(dens, h))

    return cfg.theta_prime * block(mask_out) + block(~mask_out)


# ---------------------------------------------------------------------------
# monitoring
# ---------------------------------------------------------------------------

@dataclass
class SeriesVerdict:
    name: str
    C: float
    max_violation: float
    passed: bool
    max_residual: float


@dataclass
class EnergyReport:
    alpha_prime: float
    times: np.ndarray
    series: dict
    forcing: np.ndarray
    verdicts: list
    passed: bool

    def to_dict(self) -> dict:
        return {
            "alpha_prime": self.alpha_prime,
            "passed": self.passed,
            "verdicts": [{"name": v.name, "C": v.C,
                          "max_violation": v.max_violation,
                          "passed": v.passed,
                          "max_residual": v.max_residual}
                         for v in self.verdicts],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def write_csv(self, path):
        names = list(self.series)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t," + ",".join(names) + ",forcing\n")
            for i, t in enumerate(self.times):
                row = [f"{t:.17g}"]
                row += [f"{self.series[k][i]:.17g}" for k in names]
                row.append(f"{self.forcing[i]:.17g}")
                fh.write(",".join(row) + "\n")


def _pair_inequality(times: np.ndarray, E: np.ndarray, F: np.ndarray,
                     ap: float, floor: float) -> tuple[float, float]:
    """Smallest feasible C and max violation for the integrated inequality."""
    w = np.exp(2.0 * ap * times)
    # prefix integrals W(t) = int_0^t e^{2 ap r} F(r) dr (trapezoid)
    dW = 0.5 * np.diff(times) * (w[1:] * F[1:] + w[:-1] * F[:-1])
    W = np.concatenate([[0.0], np.cumsum(dW)])
    C = 0.0
    violation = 0.0
    m = len(times)
    for i in range(m - 1):
        decay = np.exp(-2.0 * ap * (times[i + 1:] - times[i]))
        N = E[i + 1:] - decay * E[i]
        D = (W[i + 1:] - W[i]) * np.exp(-2.0 * ap * times[i + 1:])
        pos = N > 0
        good = pos & (D > floor)
        if good.any():
            C = max(C, float((N[good] / D[good]).max()))
        bad = pos & (D <= floor)
        if bad.any():
            violation = max(violation, float(N[bad].max()))
    return C, violation


def dissipation_monitor(traj, cfg: EnergyConfig,
                        decomp: SpectralDecomposition,
                        decomp_minus: Optional[SpectralDecomposition] = None,
                        sys: Optional[SystemDescriptor] = None,
                        U_bar=None,
                        shock=None,
                        phi: Optional[Callable] = None,
                        max_points: int = 80,
                        rtol: float = 1e-8) -> EnergyReport:
    """Evaluate the energy series along a trajectory and check the
    integrated dissipation inequality at rate alpha_prime.

    For shock trajectories pass decomp (plus side), decomp_minus and shock;
    the forcing then includes |psi'|^2.  For half-line runs pass phi.
    """
    times = np.asarray(traj.times, dtype=float)
    m = len(times)
    if m < 8:
        raise InsufficientSampling("need at least 8 snapshots")
    stride = max(1, m // max_points)
    idx = np.arange(0, m, stride)
    if idx[-1] != m - 1:
        idx = np.append(idx, m - 1)
    tsel = times[idx]

    two_sided = traj.geometry == "shock"
    names = ["E_lin", "E1", "E2"]
    if traj.geometry != "whole-line":
        names.append("E_split")
    series = {k: np.zeros(len(idx)) for k in names}
    forcing = np.zeros(len(idx))

    for j, i in enumerate(idx):
        snap = traj.snapshots[i]
        l2sq = 0.0
        vals = dict.fromkeys(names, 0.0)
        sides = []
        if two_sided:
            Vm, Vp = snap
            sides = [(traj.x_plus, Vp, decomp, shock.u_plus if shock else None),
                     (traj.x_minus, Vm, decomp_minus, shock.u_minus if shock else None)]
        else:
            sides = [(traj.x, snap, decomp, U_bar)]
        for x, V, dec, ubar in sides:
            V = _prep(V)
            h = x[1] - x[0]
            pf = None
            if cfg.nonlinear and sys is not None and ubar is not None:
                sigma = getattr(shock, "sigma", 0.0) if two_sided else 0.0
                pf = p_field(sys, ubar, sigma, V, dec)
            lin_cfg = EnergyConfig(vartheta=cfg.vartheta,
                                   theta_prime=cfg.theta_prime,
                                   alpha_prime=cfg.alpha_prime, nonlinear=False)
            vals["E_lin"] += functional_e1(dec, x, V, lin_cfg)
            vals["E1"] += functional_e1(dec, x, V, cfg, pfield=pf)
            vals["E2"] += functional_e2(dec, x, V, cfg, pfield=pf)
            if "E_split" in vals:
                vals["E_split"] += functional_boundary_split(dec, x, V, cfg,
                                                             pfield=pf)
            l2sq += float(trapezoid((V ** 2).sum(axis=1), h))
        for k in names:
            series[k][j] = vals[k]
        f = l2sq
        if phi is not None:
            f += float(np.sum(np.atleast_1d(phi(times[i])) ** 2))
        if two_sided and traj.psi_prime is not None:
            f += float(traj.psi_prime[i]) ** 2
        forcing[j] = f

    scale = max(max(series[k].max() for k in names), 1e-300)
    floor = 1e-14 * max(forcing.max(), 1e-300)
    verdicts = []
    for k in names:
        E = series[k]
        C, violation = _pair_inequality(tsel, E, forcing, cfg.alpha_prime, floor)
        # pointwise residual with centered time differences
        dE = np.gradient(E, tsel)
        resid = dE + 2.0 * cfg.alpha_prime * E - C * forcing
        passed = violation <= rtol * scale
        verdicts.append(SeriesVerdict(name=k, C=C, max_violation=violation,
                                      passed=passed,
                                      max_residual=float(resid.max())))
    return EnergyReport(alpha_prime=cfg.alpha_prime, times=tsel, series=series,
                        forcing=forcing, verdicts=verdicts,
                        passed=all(v.passed for v in verdicts))
