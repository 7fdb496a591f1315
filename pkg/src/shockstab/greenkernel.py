"""Spectral Green kernels, their temporal singular parts, and propagators.

Geometries: whole line (constant equilibrium), half line (boundary map B at
x = 0), and shock (two half lines coupled through the jump map, with the
phase derivative as an extra output).  Spectral kernels are assembled from
eigen-decompositions of the spatial symbol L(lam) = A^-1 (G - lam I); modes
are only ever exponentiated in their decaying direction.

Temporal kernels split into an exactly-applied singular part (traveling
Dirac terms, boundary delays, echoes, the instantaneous phase response) and
an absolutely integrable remainder evaluated by trapezoid quadrature of the
inverse Laplace integral along Re lam = eta, with the analytically known
asymptotic model subtracted from the integrand so tails obey the
|lam|^-2 estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NoDichotomy, QuadratureFailure
from .numerics import (
    exp_cumulative_left,
    exp_cumulative_right,
    exp_integral,
    sample_at,
    sample_shifted,
)
from .spectral import SpectralDecomposition, decompose, hf_expansion
from .systems import ShockLinearization, SystemDescriptor

GEOMETRIES = ("whole-line", "half-line", "shock")


# ---------------------------------------------------------------------------
# linearization containers
# ---------------------------------------------------------------------------

class ConstantLin:
    """Constant-coefficient block (A, G) with cached decompositions."""

    def __init__(self, A, G, B=None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.G = np.atleast_2d(np.asarray(G, dtype=float))
        self.B = None if B is None else np.atleast_2d(np.asarray(B, dtype=float))
        self.n = self.A.shape[0]
        self.A_inv = np.linalg.inv(self.A)
        self.decomp: SpectralDecomposition = decompose(self.A, self.G)
        self._hf = None

    @property
    def hf(self):
        if self._hf is None:
            self._hf = hf_expansion(self.decomp, self.G)
        return self._hf

    @classmethod
    def from_system(cls, sys: SystemDescriptor, U0, sigma: float = 0.0,
                    with_boundary: bool = False) -> "ConstantLin":
        U0 = np.atleast_1d(np.asarray(U0, dtype=float))
        A = np.atleast_2d(sys.flux_jacobian(U0)) - sigma * np.eye(sys.n)
        G = np.atleast_2d(sys.source_jacobian(U0))
        B = np.atleast_2d(sys.boundary_jacobian(U0)) if with_boundary else None
        return cls(A, G, B)

    def modes(self, lam: complex, tol: float = 1e-8):
        """Eigen data of L(lam): (mu, columns R, rows L, stable mask)."""
        L = self.A_inv @ (self.G - lam * np.eye(self.n))
        mu, R = np.linalg.eig(L.astype(complex))
        if np.abs(mu.real).min() <= tol:
            raise NoDichotomy(f"no exponential dichotomy at lam={lam}")
        Lrows = np.linalg.inv(R)
        return mu, R, Lrows, mu.real < 0


def shock_sides(lin: ShockLinearization) -> tuple[ConstantLin, ConstantLin]:
    return ConstantLin(lin.A_plus, lin.G_plus), ConstantLin(lin.A_minus, lin.G_minus)


# ---------------------------------------------------------------------------
# time signals (boundary / jump forcing)
# ---------------------------------------------------------------------------

class TimeSignal:
    """Forcing signal phi(t), vectorized over t, with a Laplace hook."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], p: int,
                 laplace: Optional[Callable[[complex], np.ndarray]] = None,
                 horizon: float = 40.0):
        self._fn = fn
        self.p = p
        self._laplace = laplace
        self.horizon = horizon

    def __call__(self, t):
        return self._fn(np.asarray(t, dtype=float))

    def laplace(self, lam: complex) -> np.ndarray:
        if self._laplace is not None:
            return np.atleast_1d(self._laplace(lam))
        ts = np.linspace(0.0, self.horizon, 4001)
        vals = np.atleast_2d(self(ts).T).T
        return exp_integral(-lam, ts, vals)


def zero_signal(p: int) -> TimeSignal:
    return TimeSignal(lambda t: np.zeros(np.shape(t) + (p,)), p,
                      laplace=lambda lam: np.zeros(p, dtype=complex))


def exp_signal(phi0, beta: float) -> TimeSignal:
    phi0 = np.atleast_1d(np.asarray(phi0, dtype=float))

    def fn(t):
        t = np.asarray(t, dtype=float)
        return np.exp(-beta * t)[..., None] * phi0

    return TimeSignal(fn, phi0.shape[0], laplace=lambda lam: phi0 / (lam + beta))


# ---------------------------------------------------------------------------
# spectral kernels (exact, per lambda)
# ---------------------------------------------------------------------------

def whole_line_kernel(lin: ConstantLin, lam: complex, z: np.ndarray) -> np.ndarray:
    """K_lam on a grid of offsets z; jump at z = 0 evaluated as the midpoint."""
    z = np.asarray(z, dtype=float)
    mu, R, Lr, stable = lin.modes(lam)
    out = np.zeros((z.shape[0], lin.n, lin.n), dtype=complex)
    pos = z > 0
    neg = z < 0
    zero = z == 0
    for k in range(lin.n):
        W = np.outer(R[:, k], Lr[k, :]) @ lin.A_inv
        if stable[k]:
            out[pos] += np.exp(mu[k] * z[pos])[:, None, None] * W
            out[zero] += 0.5 * W
        else:
            out[neg] -= np.exp(mu[k] * z[neg])[:, None, None] * W
            out[zero] -= 0.5 * W
    return out


def whole_line_kernel_model(lin: ConstantLin, lam: complex, z: np.ndarray,
                            order: int = 1) -> np.ndarray:
    """Asymptotic kernel model: Dirac transforms plus 1/(lam+rho) correctors."""
    z = np.asarray(z, dtype=float)
    dec = lin.decomp
    hf = lin.hf
    out = np.zeros((z.shape[0], lin.n, lin.n), dtype=complex)
    Dinv = np.diag(1.0 / dec.d)
    for j in range(dec.n):
        d_j = dec.d[j]
        rho_j = dec.rho[j]
        sgn = 1.0 if d_j > 0 else -1.0
        mask = (z > 0) if d_j > 0 else (z < 0)
        W0 = dec.P_inv @ hf.pi0[j] @ Dinv @ dec.P
        grow = np.exp(-(lam + rho_j) * z[mask] / d_j)
        out[mask] += sgn * grow[:, None, None] * W0
        out[z == 0] += sgn * 0.5 * W0
        if order >= 1:
            W1 = dec.P_inv @ hf.pi1_kernel[j] @ Dinv @ dec.P
            term = (W1[None, :, :]
                    + hf.mu1[j] * z[mask, None, None] * W0[None, :, :])
            out[mask] += sgn * (grow / (lam + rho_j))[:, None, None] * term
            out[z == 0] += sgn * 0.5 / (lam + rho_j) * W1
    return out


def whole_line_model_temporal(lin: ConstantLin, t: float, z: np.ndarray) -> np.ndarray:
    """Exact inverse Laplace of the 1/(lam+rho) model terms (no Diracs):
    sum_j sign_j e^{-rho_j t} chi_{0<=z/d_j<=t} (W1_j + mu1_j z W0_j)."""
    z = np.asarray(z, dtype=float)
    dec = lin.decomp
    hf = lin.hf
    out = np.zeros((z.shape[0], lin.n, lin.n))
    Dinv = np.diag(1.0 / dec.d)
    for j in range(dec.n):
        d_j = dec.d[j]
        rho_j = dec.rho[j]
        sgn = 1.0 if d_j > 0 else -1.0
        s = z / d_j
        mask = (s >= 0) & (s <= t)
        if not mask.any():
            continue
        W0 = dec.P_inv @ hf.pi0[j] @ Dinv @ dec.P
        W1 = dec.P_inv @ hf.pi1_kernel[j] @ Dinv @ dec.P
        # half weights at the indicator endpoints keep the grid convolution
        # second-order accurate across the jumps
        w = np.where((s[mask] == 0) | (s[mask] == t), 0.5, 1.0)
        out[mask] += sgn * np.exp(-rho_j * t) * w[:, None, None] * (
            W1[None, :, :] + hf.mu1[j] * z[mask, None, None] * W0[None, :, :])
    return out


# ---------------------------------------------------------------------------
# singular parts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransportTerm:
    """d * delta_{d t} e^{-rho t} weight; weight stores P^-1 Pi0 D^-1 P."""
    speed: float
    rate: float
    weight: np.ndarray


@dataclass(frozen=True)
class BoundaryDelayTerm:
    """Response at x to forcing delayed by x/speed with transit decay."""
    speed: float
    rate: float
    weight: np.ndarray            # (n, p)


@dataclass(frozen=True)
class EchoTerm:
    """Source family sampled at sample_speed (t - x/speed_out), emitted on
    the outgoing family with delay x/speed_out."""
    speed_out: float
    rate_out: float
    sample_speed: float           # signed source sample position slope
    rate_src: float
    weight: np.ndarray            # (n, n), lemma matrix without |d| prefactor
    sign: float = 1.0


@dataclass(frozen=True)
class TrapTerm:
    """Phase response to interior data: sample at sample_speed * t."""
    sample_speed: float           # signed
    rate: float
    weight: np.ndarray            # (n,) row
    sign: float = 1.0


@dataclass
class SingularPart:
    geometry: str
    transport: list = field(default_factory=list)
    boundary: list = field(default_factory=list)
    echo: list = field(default_factory=list)
    transport_minus: list = field(default_factory=list)
    boundary_minus: list = field(default_factory=list)
    echo_list: dict = field(default_factory=dict)   # shock: keys '++','+-','-+','--'
    instant: Optional[np.ndarray] = None            # (n,) phase row I0 Bdag_inf
    trap: list = field(default_factory=list)

    def term_count(self) -> int:
        return (len(self.transport) + len(self.boundary) + len(self.echo)
                + len(self.transport_minus) + len(self.boundary_minus)
                + sum(len(v) for v in self.echo_list.values()) + len(self.trap)
                + (0 if self.instant is None else 1))


def _pi0(n: int, j: int) -> np.ndarray:
    p = np.zeros((n, n))
    p[j, j] = 1.0
    return p


def _transport_terms(dec: SpectralDecomposition) -> list[TransportTerm]:
    Dinv = np.diag(1.0 / dec.d)
    return [TransportTerm(speed=float(dec.d[j]), rate=float(dec.rho[j]),
                          weight=dec.P_inv @ _pi0(dec.n, j) @ Dinv @ dec.P)
            for j in range(dec.n)]


def _bc_terms(dec: SpectralDecomposition, binv: np.ndarray, families):
    return [BoundaryDelayTerm(speed=float(dec.d[j]), rate=float(dec.rho[j]),
                              weight=dec.P_inv @ _pi0(dec.n, j) @ dec.P @ binv)
            for j in families]


def _echo_terms(dec_out: SpectralDecomposition, out_families,
                dec_src: SpectralDecomposition, src_families,
                coupling: np.ndarray, sign: float) -> list[EchoTerm]:
    """coupling maps source boundary contributions into the response trace."""
    Dinv_src = np.diag(1.0 / dec_src.d)
    terms = []
    for j in out_families:
        out_w = dec_out.P_inv @ _pi0(dec_out.n, j) @ dec_out.P
        for ell in src_families:
            src_w = dec_src.P_inv @ _pi0(dec_src.n, ell) @ Dinv_src @ dec_src.P
            terms.append(EchoTerm(
                speed_out=float(dec_out.d[j]), rate_out=float(dec_out.rho[j]),
                sample_speed=float(-dec_src.d[ell]),
                rate_src=float(dec_src.rho[ell]),
                weight=out_w @ coupling @ src_w, sign=sign))
    return terms


def singular_part(lin, geometry: str) -> SingularPart:
    """Exact temporal singular parts of the Green kernels per geometry."""
    if geometry == "whole-line":
        return SingularPart(geometry=geometry, transport=_transport_terms(lin.decomp))

    if geometry == "half-line":
        from .lopatinskii import IBVPDeterminant

        dec = lin.decomp
        hf_smp = IBVPDeterminant(lin.A, lin.G, lin.B).hf_limit()
        binv = hf_smp.brestricted_inv
        return SingularPart(
            geometry=geometry, transport=_transport_terms(dec),
            boundary=_bc_terms(dec, binv, dec.J_s),
            echo=_echo_terms(dec, dec.J_s, dec, dec.J_u, binv @ lin.B, sign=1.0))

    if geometry == "shock":
        from .lopatinskii import ShockDeterminant

        plus, minus = shock_sides(lin)
        hf_smp = ShockDeterminant(lin).hf_limit()
        bdag = hf_smp.bdagger
        n = lin.n
        iphi = bdag[0, :].real            # I0 Bdag_inf, row (n,)
        ip = bdag[1:1 + n, :].real        # I+ Bdag_inf
        im = bdag[1 + n:, :].real         # I- Bdag_inf
        B_Iplus = lin.A_plus              # B o I^+ = A_+
        B_Iminus = -lin.A_minus           # B o I^- = -A_-

        dp, dm = plus.decomp, minus.decomp
        sp = SingularPart(geometry=geometry)
        sp.transport = _transport_terms(dp)
        sp.transport_minus = _transport_terms(dm)
        sp.boundary = _bc_terms(dp, ip, dp.J_s)
        sp.boundary_minus = _bc_terms(dm, im, dm.J_u)
        sp.echo_list = {
            "++": _echo_terms(dp, dp.J_s, dp, dp.J_u, ip @ B_Iplus, 1.0),
            "+-": _echo_terms(dp, dp.J_s, dm, dm.J_s, ip @ B_Iminus, -1.0),
            "-+": _echo_terms(dm, dm.J_u, dp, dp.J_u, im @ B_Iplus, 1.0),
            "--": _echo_terms(dm, dm.J_u, dm, dm.J_s, im @ B_Iminus, -1.0),
        }
        sp.instant = iphi
        trap = []
        Dinv_p = np.diag(1.0 / dp.d)
        for ell in dp.J_u:
            w = iphi @ B_Iplus @ (dp.P_inv @ _pi0(n, ell) @ Dinv_p @ dp.P)
            trap.append(TrapTerm(sample_speed=float(-dp.d[ell]),
                                 rate=float(dp.rho[ell]), weight=w, sign=1.0))
        Dinv_m = np.diag(1.0 / dm.d)
        for ell in dm.J_s:
            w = iphi @ B_Iminus @ (dm.P_inv @ _pi0(n, ell) @ Dinv_m @ dm.P)
            trap.append(TrapTerm(sample_speed=float(-dm.d[ell]),
                                 rate=float(dm.rho[ell]), weight=w, sign=-1.0))
        sp.trap = trap
        return sp

    raise ValueError(f"unknown geometry {geometry!r}; expected one of {GEOMETRIES}")


# ---------------------------------------------------------------------------
# inverse Laplace quadrature (streaming)
# ---------------------------------------------------------------------------

class LaplaceAccumulator:
    """Streaming trapezoid sums of (1/pi) Re int e^{lam t} g(lam) dtau for a
    batch of times, with node-halving error tracking."""

    def __init__(self, taus: np.ndarray, eta: float, times: Sequence[float],
                 shape: tuple):
        self.taus = taus
        self.eta = eta
        self.times = list(times)
        self.N = taus.shape[0] - 1
        self.I = np.zeros((len(self.times),) + shape)
        self.I2 = np.zeros_like(self.I)
        self.I4 = np.zeros_like(self.I)
        self.last_mod = 0.0
        h = taus[1] - taus[0]
        self.w1 = np.full(self.N + 1, h)
        self.w1[0] *= 0.5
        self.w1[-1] *= 0.5
        self.w2 = np.zeros(self.N + 1)
        self.w2[::2] = 2 * h
        self.w2[0] = h
        self.w2[-1] = h
        self.w4 = np.zeros(self.N + 1)
        self.w4[::4] = 4 * h
        self.w4[0] = 2 * h
        self.w4[-1] = 2 * h

    def add(self, i: int, g: np.ndarray):
        lam = complex(self.eta, self.taus[i])
        for k, t in enumerate(self.times):
            phase = np.exp(lam * t) / np.pi
            contrib = (phase * g).real
            self.I[k] += self.w1[i] * contrib
            if self.w2[i]:
                self.I2[k] += self.w2[i] * contrib
            if self.w4[i]:
                self.I4[k] += self.w4[i] * contrib
        if i == self.N:
            self.last_mod = float(np.max(np.abs(g)))

    def finish(self, check: bool = True):
        err = float(np.max(np.abs(self.I - self.I2)))
        err_prev = float(np.max(np.abs(self.I2 - self.I4)))
        scale = 1.0 + float(np.max(np.abs(self.I)))
        if check and self.N >= 8:
            if err > max(1.5 * err_prev, 1e-12 * scale) and err > 1e-9:
                raise QuadratureFailure(
                    f"node halving not converging: {err_prev:.3e} -> {err:.3e}")
        tail = self.last_mod * self.taus[-1] / np.pi
        return self.I, err, tail


@dataclass
class QuadratureResult:
    value: np.ndarray
    error_estimate: float
    tail_estimate: float


def invert_laplace_remainder(f: Callable[[complex], np.ndarray],
                             model: Optional[Callable[[complex], np.ndarray]],
                             t: float, eta: float, R: float, N: int,
                             check_convergence: bool = True) -> QuadratureResult:
    """(1/2 pi i) int e^{lam t} (f - model) dlam along Re lam = eta.

    Conjugate symmetry is assumed (real temporal kernels), so only the upper
    half segment [eta, eta + iR] is sampled with N trapezoid intervals.
    """
    taus = np.linspace(0.0, R, N + 1)
    acc = None
    for i, tau in enumerate(taus):
        lam = complex(eta, tau)
        g = np.asarray(f(lam), dtype=complex)
        if model is not None:
            g = g - np.asarray(model(lam), dtype=complex)
        if acc is None:
            acc = LaplaceAccumulator(taus, eta, [t], g.shape)
        acc.add(i, g)
    value, err, tail = acc.finish(check_convergence)
    return QuadratureResult(value=value[0], error_estimate=err,
                            tail_estimate=tail * np.exp(eta * t))


def kernel_remainder(lin: ConstantLin, t: float, z: np.ndarray, eta: float,
                     R: float = 200.0, N: int = 1600) -> QuadratureResult:
    """Whole-line temporal kernel minus its Dirac part, on the offset grid z."""
    res = invert_laplace_remainder(
        lambda lam: whole_line_kernel(lin, lam, z),
        lambda lam: whole_line_kernel_model(lin, lam, z),
        t, eta, R, N)
    res.value = res.value + whole_line_model_temporal(lin, t, z)
    return res


# ---------------------------------------------------------------------------
# singular-part actions
# ---------------------------------------------------------------------------

def _as_cols(V: np.ndarray) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    return V[:, None] if V.ndim == 1 else V


def _transport_action(terms, x, V0, t):
    V0 = _as_cols(V0)
    out = np.zeros((x.shape[0], V0.shape[1]))
    for term in terms:
        shifted = sample_shifted(x, V0, term.speed * t)
        out += np.exp(-term.rate * t) * term.speed * (shifted @ term.weight.T)
    return out


def _echo_action(terms, x, V0_src, x_src, t):
    V0_src = _as_cols(V0_src)
    if not terms:
        return 0.0
    out = np.zeros((x.shape[0], terms[0].weight.shape[0]))
    for term in terms:
        delay = x / term.speed_out
        active = (t - delay) > 0
        if not active.any():
            continue
        pts = term.sample_speed * (t - delay[active])
        vals = sample_at(x_src, V0_src, pts)
        amp = (np.abs(term.sample_speed) * term.sign
               * np.exp(-term.rate_out * delay[active])
               * np.exp(-term.rate_src * (t - delay[active])))
        out[active] += amp[:, None] * (vals @ term.weight.T)
    return out


def _bc_action(terms, x, phi: TimeSignal, t):
    if not terms:
        return 0.0
    out = np.zeros((x.shape[0], terms[0].weight.shape[0]))
    for term in terms:
        delay = x / term.speed
        active = (t - delay) >= 0
        if not active.any():
            continue
        vals = np.atleast_2d(phi(t - delay[active]))
        if vals.shape[0] != active.sum():
            vals = vals.T
        amp = np.exp(-term.rate * delay[active])
        out[active] += amp[:, None] * (vals @ term.weight.T)
    return out


def _trap_action(terms, x_plus, V0_plus, x_minus, V0_minus, t) -> float:
    psi = 0.0
    for term in terms:
        pt = np.array([term.sample_speed * t])
        if term.sample_speed > 0:
            val = sample_at(x_plus, _as_cols(V0_plus), pt)[0]
        else:
            val = sample_at(x_minus, _as_cols(V0_minus), pt)[0]
        psi += (term.sign * abs(term.sample_speed)
                * np.exp(-term.rate * t) * float(term.weight @ val))
    return psi


# ---------------------------------------------------------------------------
# resolvent actions (exact and asymptotic-model branches)
# ---------------------------------------------------------------------------

class _BranchSet:
    """Rank-one spatial branches (mu, column, row) of the symbol."""

    def __init__(self, mus, cols, rows):
        self.mus = list(mus)
        self.cols = list(cols)
        self.rows = list(rows)


def _exact_branches(lin: ConstantLin, lam: complex):
    mu, R, Lr, stable = lin.modes(lam)
    idx_s = [k for k in range(lin.n) if stable[k]]
    idx_u = [k for k in range(lin.n) if not stable[k]]
    s = _BranchSet([mu[k] for k in idx_s], [R[:, k] for k in idx_s],
                   [Lr[k, :] for k in idx_s])
    u = _BranchSet([mu[k] for k in idx_u], [R[:, k] for k in idx_u],
                   [Lr[k, :] for k in idx_u])
    return s, u


def _model_branches(lin: ConstantLin, lam: complex):
    dec = lin.decomp

    def mk(idx):
        mus, cols, rows = [], [], []
        for j in idx:
            mus.append(-(lam + dec.rho[j]) / dec.d[j])
            cols.append(dec.P_inv[:, j].astype(complex))
            rows.append(dec.P[j, :].astype(complex))
        return _BranchSet(mus, cols, rows)

    return mk(dec.J_s), mk(dec.J_u)


def _dir_action(branches_s: _BranchSet, branches_u: _BranchSet,
                x: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Direct-kernel action on A^-1-scaled data W; valid on any grid."""
    out = np.zeros((x.shape[0], W.shape[1]), dtype=complex)
    for mu, col, row in zip(branches_s.mus, branches_s.cols, branches_s.rows):
        out += np.outer(exp_cumulative_left(mu, x, W @ row), col)
    for mu, col, row in zip(branches_u.mus, branches_u.cols, branches_u.rows):
        out -= np.outer(exp_cumulative_right(mu, x, W @ row), col)
    return out


def _profile(branches: _BranchSet, coeffs, x: np.ndarray) -> np.ndarray:
    """sum_k c_k e^{mu_k x} col_k (decaying away from the trace at 0)."""
    if not branches.mus:
        return 0.0
    out = np.zeros((x.shape[0], branches.cols[0].shape[0]), dtype=complex)
    for mu, col, c in zip(branches.mus, branches.cols, coeffs):
        out += np.outer(np.exp(mu * x) * c, col)
    return out


def _half_line_hat(lin: ConstantLin, lam: complex, x: np.ndarray,
                   W: np.ndarray, phi_hat: np.ndarray, model: bool) -> np.ndarray:
    """Laplace-domain half-line solution at lam for A^-1-scaled data W."""
    bs, bu = _model_branches(lin, lam) if model else _exact_branches(lin, lam)
    out = _dir_action(bs, bu, x, W)
    p_u = np.zeros(lin.n, dtype=complex)
    for mu, col, row in zip(bu.mus, bu.cols, bu.rows):
        p_u -= exp_cumulative_right(mu, x, W @ row)[0] * col
    rhs = phi_hat - lin.B.astype(complex) @ p_u
    if bs.mus:
        M = lin.B.astype(complex) @ np.stack(bs.cols, axis=1)
        coeffs = np.linalg.solve(M, rhs)
        out += _profile(bs, coeffs, x)
    return out


def _shock_hat(lin: ShockLinearization, plus: ConstantLin, minus: ConstantLin,
               lam: complex, x_minus, x_plus, Wm, Wp, phi_hat, model: bool):
    """Laplace-domain shock solution: (V-hat minus, V-hat plus, lam psi-hat)."""
    if model:
        bsp, bup = _model_branches(plus, lam)
        bsm, bum = _model_branches(minus, lam)
    else:
        bsp, bup = _exact_branches(plus, lam)
        bsm, bum = _exact_branches(minus, lam)

    vp = _dir_action(bsp, bup, x_plus, Wp)
    vm = _dir_action(bsm, bum, x_minus, Wm)

    p_plus = np.zeros(lin.n, dtype=complex)       # Pi_{u,+} V+(0)
    for mu, col, row in zip(bup.mus, bup.cols, bup.rows):
        p_plus -= exp_cumulative_right(mu, x_plus, Wp @ row)[0] * col
    p_minus = np.zeros(lin.n, dtype=complex)      # Pi_{s,-} V-(0)
    for mu, col, row in zip(bsm.mus, bsm.cols, bsm.rows):
        p_minus += exp_cumulative_left(mu, x_minus, Wm @ row)[-1] * col

    k_p = len(bsp.mus)
    k_m = len(bum.mus)
    M = np.zeros((lin.n, 1 + k_p + k_m), dtype=complex)
    M[:, 0] = -lin.jump
    for i, col in enumerate(bsp.cols):
        M[:, 1 + i] = lin.A_plus @ col
    for i, col in enumerate(bum.cols):
        M[:, 1 + k_p + i] = -(lin.A_minus @ col)
    rhs = phi_hat - lin.A_plus @ p_plus + lin.A_minus @ p_minus
    zsol = np.linalg.solve(M, rhs)
    vp = vp + _profile(bsp, zsol[1:1 + k_p], x_plus)
    vm = vm + _profile(bum, zsol[1 + k_p:], x_minus)
    return vm, vp, zsol[0]


# ---------------------------------------------------------------------------
# propagators
# ---------------------------------------------------------------------------

@dataclass
class PropagatorConfig:
    eta: float
    R: float = 200.0
    N: int = 1600
    check_convergence: bool = True


@dataclass
class PropagatorResult:
    t: float
    V: Optional[np.ndarray] = None
    V_minus: Optional[np.ndarray] = None
    V_plus: Optional[np.ndarray] = None
    psi_prime: Optional[float] = None
    error_estimate: float = 0.0
    tail_estimate: float = 0.0


def propagate_whole_line(lin: ConstantLin, x: np.ndarray, V0: np.ndarray,
                         times: Sequence[float],
                         cfg: PropagatorConfig) -> list[PropagatorResult]:
    """Whole-line linear propagator: exact transport part plus the kernel
    remainder convolved with the data."""
    x = np.asarray(x, dtype=float)
    V0 = _as_cols(V0)
    npts = x.shape[0]
    h = x[1] - x[0]
    z = (np.arange(2 * npts - 1) - (npts - 1)) * h
    sp = singular_part(lin, "whole-line")

    taus = np.linspace(0.0, cfg.R, cfg.N + 1)
    acc = LaplaceAccumulator(taus, cfg.eta, times, (z.shape[0], lin.n, lin.n))
    for i, tau in enumerate(taus):
        lam = complex(cfg.eta, tau)
        acc.add(i, whole_line_kernel(lin, lam, z)
                - whole_line_kernel_model(lin, lam, z))
    Krems, err, tail = acc.finish(cfg.check_convergence)

    results = []
    for k, t in enumerate(times):
        V = _transport_action(sp.transport, x, V0, t)
        Krem = Krems[k] + whole_line_model_temporal(lin, t, z)
        V += _convolve_kernel(Krem, V0, h)
        results.append(PropagatorResult(t=t, V=V, error_estimate=err,
                                        tail_estimate=tail * np.exp(cfg.eta * t)))
    return results


def _convolve_kernel(K: np.ndarray, V0: np.ndarray, h: float) -> np.ndarray:
    """(K * V0)(x_i) = h sum_j K(x_i - y_j) V0(y_j) on matching grids."""
    npts = V0.shape[0]
    n = V0.shape[1]
    out = np.zeros((npts, n))
    for a in range(n):
        acc = np.zeros(3 * npts - 2)
        for b in range(n):
            acc += np.convolve(K[:, a, b], V0[:, b])
        out[:, a] = h * acc[npts - 1:2 * npts - 1]
    return out


def propagate_half_line(lin: ConstantLin, x: np.ndarray, V0: np.ndarray,
                        phi: TimeSignal, times: Sequence[float],
                        cfg: PropagatorConfig) -> list[PropagatorResult]:
    """Half-line linear propagator with boundary forcing phi."""
    x = np.asarray(x, dtype=float)
    V0 = _as_cols(V0)
    W = V0 @ lin.A_inv.T
    sp = singular_part(lin, "half-line")

    taus = np.linspace(0.0, cfg.R, cfg.N + 1)
    acc = LaplaceAccumulator(taus, cfg.eta, times, (x.shape[0], lin.n))
    for i, tau in enumerate(taus):
        lam = complex(cfg.eta, tau)
        ph = phi.laplace(lam)
        acc.add(i, _half_line_hat(lin, lam, x, W, ph, model=False)
                - _half_line_hat(lin, lam, x, W, ph, model=True))
    rems, err, tail = acc.finish(cfg.check_convergence)

    results = []
    for k, t in enumerate(times):
        V = _transport_action(sp.transport, x, V0, t)
        V += _bc_action(sp.boundary, x, phi, t)
        V += _echo_action(sp.echo, x, V0, x, t)
        results.append(PropagatorResult(t=t, V=V + rems[k], error_estimate=err,
                                        tail_estimate=tail * np.exp(cfg.eta * t)))
    return results


def propagate_shock(lin: ShockLinearization, x_minus: np.ndarray,
                    x_plus: np.ndarray, V0_minus: np.ndarray,
                    V0_plus: np.ndarray, phi: Optional[TimeSignal],
                    times: Sequence[float],
                    cfg: PropagatorConfig) -> list[PropagatorResult]:
    """Shock-geometry linear propagator; also returns the phase derivative."""
    x_minus = np.asarray(x_minus, dtype=float)
    x_plus = np.asarray(x_plus, dtype=float)
    V0m = _as_cols(V0_minus)
    V0p = _as_cols(V0_plus)
    plus, minus = shock_sides(lin)
    phi = phi or zero_signal(lin.n)
    Wp = V0p @ plus.A_inv.T
    Wm = V0m @ minus.A_inv.T
    sp = singular_part(lin, "shock")

    taus = np.linspace(0.0, cfg.R, cfg.N + 1)
    acc_m = LaplaceAccumulator(taus, cfg.eta, times, (x_minus.shape[0], lin.n))
    acc_p = LaplaceAccumulator(taus, cfg.eta, times, (x_plus.shape[0], lin.n))
    acc_psi = LaplaceAccumulator(taus, cfg.eta, times, (1,))
    for i, tau in enumerate(taus):
        lam = complex(cfg.eta, tau)
        ph = phi.laplace(lam)
        vm1, vp1, ps1 = _shock_hat(lin, plus, minus, lam, x_minus, x_plus,
                                   Wm, Wp, ph, model=False)
        vm0, vp0, ps0 = _shock_hat(lin, plus, minus, lam, x_minus, x_plus,
                                   Wm, Wp, ph, model=True)
        acc_m.add(i, vm1 - vm0)
        acc_p.add(i, vp1 - vp0)
        acc_psi.add(i, np.array([ps1 - ps0]))
    rem_m, e_m, _ = acc_m.finish(cfg.check_convergence)
    rem_p, e_p, _ = acc_p.finish(cfg.check_convergence)
    rem_psi, e_psi, _ = acc_psi.finish(cfg.check_convergence)

    results = []
    for k, t in enumerate(times):
        Vp = _transport_action(sp.transport, x_plus, V0p, t)
        Vp += _bc_action(sp.boundary, x_plus, phi, t)
        Vm = _transport_action(sp.transport_minus, x_minus, V0m, t)
        Vm += _bc_action(sp.boundary_minus, x_minus, phi, t)
        for key, x_r, src, xs in (("++", x_plus, V0p, x_plus),
                                  ("+-", x_plus, V0m, x_minus),
                                  ("-+", x_minus, V0p, x_plus),
                                  ("--", x_minus, V0m, x_minus)):
            act = _echo_action(sp.echo_list[key], x_r, src, xs, t)
            if key[0] == "+":
                Vp = Vp + act
            else:
                Vm = Vm + act
        psi = float(sp.instant @ np.atleast_1d(phi(t)))
        psi += _trap_action(sp.trap, x_plus, V0p, x_minus, V0m, t)
        results.append(PropagatorResult(
            t=t, V_minus=Vm + rem_m[k], V_plus=Vp + rem_p[k],
            psi_prime=psi + float(rem_psi[k][0]),
            error_estimate=max(e_m, e_p, e_psi)))
    return results


def apply_linear_propagator(lin, geometry: str, data: dict,
                            times: Sequence[float],
                            cfg: PropagatorConfig) -> list[PropagatorResult]:
    """Dispatch a linear propagation run.

    data keys: whole-line {x, V0}; half-line {x, V0, phi};
    shock {x_minus, x_plus, V0_minus, V0_plus, phi (optional)}.
    """
    if geometry == "whole-line":
        return propagate_whole_line(lin, data["x"], data["V0"], times, cfg)
    if geometry == "half-line":
        return propagate_half_line(lin, data["x"], data["V0"], data["phi"],
                                   times, cfg)
    if geometry == "shock":
        return propagate_shock(lin, data["x_minus"], data["x_plus"],
                               data["V0_minus"], data["V0_plus"],
                               data.get("phi"), times, cfg)
    raise ValueError(f"unknown geometry {geometry!r}")


# ---------------------------------------------------------------------------
# spectral-kernel evaluation and resolvent checks
# ---------------------------------------------------------------------------

def spectral_kernel(lin, geometry: str, lam: complex, **eval_points):
    """Evaluate spectral Green kernels of a geometry at one lam.

    whole-line: z=offsets -> {"K": (nz, n, n)}
    half-line: x=positions, optional y -> {"K_bc", "K_dir", "K_ref"}
    shock: -> {"bdagger", "K_bc0", "det"}
    """
    if geometry == "whole-line":
        return {"K": whole_line_kernel(lin, lam, eval_points["z"])}
    if geometry == "half-line":
        from .lopatinskii import IBVPDeterminant

        smp = IBVPDeterminant(lin.A, lin.G, lin.B).sample(lam)
        x = np.asarray(eval_points["x"], dtype=float)
        mu, R, Lr, stable = lin.modes(lam)
        bc = np.zeros((x.shape[0], lin.n, lin.B.shape[0]), dtype=complex)
        for k in range(lin.n):
            if stable[k]:
                coeff = np.outer(R[:, k], Lr[k, :] @ smp.brestricted_inv)
                bc += np.exp(mu[k] * x)[:, None, None] * coeff
        out = {"K_bc": bc, "K_dir": whole_line_kernel(lin, lam, x)}
        if "y" in eval_points:
            y = np.asarray(eval_points["y"], dtype=float)
            ref = np.zeros((x.shape[0], y.shape[0], lin.n, lin.n), dtype=complex)
            C = smp.brestricted_inv @ lin.B
            for k in range(lin.n):
                if stable[k]:
                    continue
                src = np.exp(-mu[k] * y)[:, None] * (Lr[k, :] @ lin.A_inv)[None, :]
                for j in range(lin.n):
                    if not stable[j]:
                        continue
                    resp = np.exp(mu[j] * x)[:, None] * R[:, j][None, :]
                    cjk = complex(Lr[j, :] @ C @ R[:, k])
                    ref += cjk * np.einsum("xa,yb->xyab", resp, src)
            out["K_ref"] = ref
        return out
    if geometry == "shock":
        from .lopatinskii import ShockDeterminant

        smp = ShockDeterminant(lin).sample(lam)
        return {"bdagger": smp.bdagger, "K_bc0": smp.bdagger[0, :], "det": smp.det}
    raise ValueError(f"unknown geometry {geometry!r}")


def resolve_whole_line(lin: ConstantLin, lam: complex, x: np.ndarray,
                       F: Callable[[np.ndarray], np.ndarray],
                       panels: int = 6) -> np.ndarray:
    """V-hat(x) = int K_lam(x - y) F(y) dy for a smooth compactly supported
    callable F, by per-interval Gauss panels fed into the stable cumulative
    recurrences (split at y = x, so each side is smooth)."""
    from scipy.signal import lfilter

    nodes, weights = np.polynomial.legendre.leggauss(panels)
    x = np.asarray(x, dtype=float)
    h = x[1] - x[0]
    mid = 0.5 * (x[:-1] + x[1:])
    yq = mid[:, None] + 0.5 * h * nodes[None, :]          # (m, q)
    Fq = np.asarray(F(yq.reshape(-1)))
    Fq = _as_cols(Fq).reshape(yq.shape + (-1,))           # (m, q, n)
    Wq = Fq @ lin.A_inv.T
    wq = 0.5 * h * weights

    mu, R, Lr, stable = lin.modes(lam)
    out = np.zeros((x.shape[0], lin.n), dtype=complex)
    for k in range(lin.n):
        wk = Wq @ Lr[k, :]                                # (m, q)
        if stable[k]:
            # c_m = int_{x_m}^{x_{m+1}} e^{mu (x_{m+1}-y)} w dy
            c = (np.exp(mu[k] * (x[1:, None] - yq)) * wk) @ wq
            q = np.exp(mu[k] * h)
            S = np.zeros(x.shape[0], dtype=complex)
            S[1:] = lfilter([1.0], [1.0, -q], c)
            out += np.outer(S, R[:, k])
        else:
            d = (np.exp(mu[k] * (x[:-1, None] - yq)) * wk) @ wq
            q = np.exp(-mu[k] * h)
            rev = lfilter([1.0], [1.0, -q], d[::-1])
            T = np.zeros(x.shape[0], dtype=complex)
            T[:-1] = rev[::-1]
            out -= np.outer(T, R[:, k])
    return out


def resolvent_residual_whole_line(lin: ConstantLin, lam: complex,
                                  x: np.ndarray,
                                  F: Callable[[np.ndarray], np.ndarray]) -> float:
    """Sup residual of (lam + A d/dx - G) V-hat = F with V-hat from the
    kernel and the derivative taken by high-order finite differences."""
    from .numerics import derivative

    Vh = resolve_whole_line(lin, lam, x, F)
    h = x[1] - x[0]
    dV = (derivative(Vh.real, h) + 1j * derivative(Vh.imag, h))
    Fv = _as_cols(np.asarray(F(x)))
    res = lam * Vh + dV @ lin.A.T - Vh @ lin.G.T - Fv
    interior = slice(4, -4)
    return float(np.abs(res[interior]).max())
