"""Balance-law system descriptors, candidate shocks, and jump residuals.

A system  dU/dt + d/dx A(U) = g(U)  is described by vectorized callbacks for
the flux, the source, their Jacobians, and (for half-line problems) a
boundary map.  Built-in examples cover the linear 3x3 stability/dissipativity
separation example, its eps-perturbed variant, 2x2 families, the scalar
bistable Burgers shock, and decoupled diagonal systems with exact solutions.

Config-file systems are polynomial (componentwise total degree <= 4) so that
Jacobians are exact without a symbolic engine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateJump, InvalidModel

MAX_POLY_DEGREE = 4


# ---------------------------------------------------------------------------
# descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemDescriptor:
    """A system of balance laws with exact Jacobian callbacks.

    All callbacks are vectorized over leading axes: states have shape
    (..., n), fluxes/sources (..., n), Jacobians (..., n, n).
    """

    n: int
    flux: Callable[[np.ndarray], np.ndarray]
    flux_jacobian: Callable[[np.ndarray], np.ndarray]
    source: Callable[[np.ndarray], np.ndarray]
    source_jacobian: Callable[[np.ndarray], np.ndarray]
    boundary_map: Optional[Callable[[np.ndarray], np.ndarray]] = None
    boundary_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    p: int = 0
    name: str = "system"
    validity_radius: float = np.inf

    def check_jacobians(self, states: np.ndarray, step: float = 1e-6) -> float:
        """Max relative mismatch of the Jacobian callbacks against centered
        finite differences at the given sample states."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        worst = 0.0
        for U in states:
            for fn, jac in ((self.flux, self.flux_jacobian),
                            (self.source, self.source_jacobian),
                            (self.boundary_map, self.boundary_jacobian)):
                if fn is None:
                    continue
                J = np.atleast_2d(jac(U))
                Jfd = np.empty_like(J, dtype=float)
                for k in range(self.n):
                    e = np.zeros(self.n)
                    e[k] = step
                    Jfd[:, k] = (np.atleast_1d(fn(U + e)) - np.atleast_1d(fn(U - e))) / (2 * step)
                scale = max(np.abs(J).max(), 1.0)
                worst = max(worst, float(np.abs(J - Jfd).max() / scale))
        return worst


@dataclass(frozen=True)
class ShockProfile:
    """Piecewise-constant candidate wave: left/right states and speed."""

    u_minus: np.ndarray
    u_plus: np.ndarray
    sigma: float
    psi0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "u_minus", np.atleast_1d(np.asarray(self.u_minus, dtype=float)))
        object.__setattr__(self, "u_plus", np.atleast_1d(np.asarray(self.u_plus, dtype=float)))

    @property
    def jump(self) -> np.ndarray:
        return self.u_plus - self.u_minus


class ShockBoundaryMap:
    """Jump map B(Phi, W+, W-) = -Phi (W+ - W-) + A(W+) - A(W-), its
    linearization at (sigma, u+, u-), and the canonical triplet projections.

    Triplet coordinates are stacked as z = (Phi, W+, W-) in R^(1+2n).
    """

    def __init__(self, sys: SystemDescriptor, shock: ShockProfile):
        self.sys = sys
        self.shock = shock
        self.n = sys.n
        A_plus = np.atleast_2d(sys.flux_jacobian(shock.u_plus)) - shock.sigma * np.eye(sys.n)
        A_minus = np.atleast_2d(sys.flux_jacobian(shock.u_minus)) - shock.sigma * np.eye(sys.n)
        self.jump = shock.jump
        # linearization as an n x (1+2n) matrix
        self.matrix = np.hstack([-self.jump[:, None], A_plus, -A_minus])

    def bhat(self, phi: float, w_plus: np.ndarray, w_minus: np.ndarray) -> np.ndarray:
        """Full nonlinear jump map at arbitrary trace states."""
        w_plus = np.atleast_1d(np.asarray(w_plus, dtype=float))
        w_minus = np.atleast_1d(np.asarray(w_minus, dtype=float))
        return (-phi * (w_plus - w_minus)
                + np.atleast_1d(self.sys.flux(w_plus))
                - np.atleast_1d(self.sys.flux(w_minus)))

    def bhat_jacobian(self, phi: float, w_plus: np.ndarray, w_minus: np.ndarray) -> np.ndarray:
        """Jacobian of bhat with respect to (Phi, W+, W-), n x (1+2n)."""
        w_plus = np.atleast_1d(np.asarray(w_plus, dtype=float))
        w_minus = np.atleast_1d(np.asarray(w_minus, dtype=float))
        n = self.n
        J = np.empty((n, 1 + 2 * n))
        J[:, 0] = -(w_plus - w_minus)
        J[:, 1:1 + n] = np.atleast_2d(self.sys.flux_jacobian(w_plus)) - phi * np.eye(n)
        J[:, 1 + n:] = -(np.atleast_2d(self.sys.flux_jacobian(w_minus)) - phi * np.eye(n))
        return J

    def apply_linear(self, phi: float, w_plus: np.ndarray, w_minus: np.ndarray) -> np.ndarray:
        z = np.concatenate([[phi], np.atleast_1d(w_plus), np.atleast_1d(w_minus)])
        return self.matrix @ z

    # canonical projections I_#: triplet -> component, and sections I^#
    def project_phi(self, z: np.ndarray) -> float:
        return z[0]

    def project_plus(self, z: np.ndarray) -> np.ndarray:
        return z[1:1 + self.n]

    def project_minus(self, z: np.ndarray) -> np.ndarray:
        return z[1 + self.n:]

    def section_phi(self, phi: float) -> np.ndarray:
        z = np.zeros(1 + 2 * self.n)
        z[0] = phi
        return z

    def section_plus(self, w: np.ndarray) -> np.ndarray:
        z = np.zeros(1 + 2 * self.n, dtype=np.result_type(w, float))
        z[1:1 + self.n] = w
        return z

    def section_minus(self, w: np.ndarray) -> np.ndarray:
        z = np.zeros(1 + 2 * self.n, dtype=np.result_type(w, float))
        z[1 + self.n:] = w
        return z


@dataclass(frozen=True)
class ShockLinearization:
    """Frozen linearization of the shock problem at the background wave."""

    n: int
    sigma: float
    A_plus: np.ndarray
    A_minus: np.ndarray
    G_plus: np.ndarray
    G_minus: np.ndarray
    jump: np.ndarray
    bmap: ShockBoundaryMap = field(repr=False, default=None)


def evaluate_linearization(sys: SystemDescriptor, shock: ShockProfile) -> ShockLinearization:
    """Co-moving-frame convection and source Jacobians plus the jump map."""
    for U in (shock.u_minus, shock.u_plus):
        if U.shape != (sys.n,):
            raise InvalidModel(
                f"state dimension mismatch: expected ({sys.n},), got {U.shape}")
    A_plus = np.atleast_2d(sys.flux_jacobian(shock.u_plus)) - shock.sigma * np.eye(sys.n)
    A_minus = np.atleast_2d(sys.flux_jacobian(shock.u_minus)) - shock.sigma * np.eye(sys.n)
    G_plus = np.atleast_2d(sys.source_jacobian(shock.u_plus))
    G_minus = np.atleast_2d(sys.source_jacobian(shock.u_minus))
    return ShockLinearization(
        n=sys.n, sigma=shock.sigma, A_plus=A_plus, A_minus=A_minus,
        G_plus=G_plus, G_minus=G_minus, jump=shock.jump,
        bmap=ShockBoundaryMap(sys, shock))


def rankine_hugoniot_residual(sys: SystemDescriptor, u_minus, u_plus, sigma: float) -> np.ndarray:
    """A(u+) - A(u-) - sigma (u+ - u-)."""
    u_minus = np.atleast_1d(np.asarray(u_minus, dtype=float))
    u_plus = np.atleast_1d(np.asarray(u_plus, dtype=float))
    return (np.atleast_1d(sys.flux(u_plus)) - np.atleast_1d(sys.flux(u_minus))
            - sigma * (u_plus - u_minus))


# ---------------------------------------------------------------------------
# compatibility of initial shape perturbations with the single-shock ansatz
# ---------------------------------------------------------------------------

@dataclass
class PiecewiseTraces:
    """One-sided traces and first derivatives of a perturbation at x = 0."""

    v_plus: np.ndarray
    v_minus: np.ndarray
    dv_plus: np.ndarray
    dv_minus: np.ndarray

    @classmethod
    def zero(cls, n: int) -> "PiecewiseTraces":
        z = np.zeros(n)
        return cls(z.copy(), z.copy(), z.copy(), z.copy())

    @classmethod
    def from_grids(cls, x_minus, v_minus, x_plus, v_plus) -> "PiecewiseTraces":
        from .numerics import one_sided_trace

        hm = x_minus[1] - x_minus[0]
        hp = x_plus[1] - x_plus[0]
        vm = np.atleast_2d(np.asarray(v_minus, dtype=float).T).T
        vp = np.atleast_2d(np.asarray(v_plus, dtype=float).T).T
        tm, dm = one_sided_trace(vm, hm, "right")
        tp, dp = one_sided_trace(vp, hp, "left")
        return cls(v_plus=tp, v_minus=tm, dv_plus=dp, dv_minus=dm)


@dataclass
class CompatibilityResult:
    psi1: float
    psi2: float
    r1: np.ndarray
    r2: np.ndarray


def compatibility_residuals(sys: SystemDescriptor, shock: ShockProfile,
                            v0: PiecewiseTraces) -> CompatibilityResult:
    """Least-squares phase rates and jump residuals of the shock ansatz.

    psi1 solves [A(U+V0)]_0 ~ (sigma + psi1) [U+V0]_0 in the least-squares
    sense; psi2 is the analogous second-order rate obtained from the
    time-derivative bracket.  Exactly compatible data give zero residuals.
    """
    up = shock.u_plus + v0.v_plus
    um = shock.u_minus + v0.v_minus
    jump0 = up - um
    scale = 1.0 + np.linalg.norm(shock.u_plus) + np.linalg.norm(shock.u_minus)
    if np.linalg.norm(jump0) <= 1e-10 * scale:
        raise DegenerateJump("perturbation erased the shock: [U+V0]_0 ~ 0")
    jj = float(jump0 @ jump0)

    bracket1 = np.atleast_1d(sys.flux(up)) - np.atleast_1d(sys.flux(um))
    psi1 = float(jump0 @ bracket1) / jj - shock.sigma
    r1 = bracket1 - (shock.sigma + psi1) * jump0

    def side_vector(u, dv):
        Ashift = np.atleast_2d(sys.flux_jacobian(u)) - (shock.sigma + psi1) * np.eye(sys.n)
        return Ashift @ (-(Ashift @ dv) + np.atleast_1d(sys.source(u)))

    bracket2 = side_vector(up, v0.dv_plus) - side_vector(um, v0.dv_minus)
    psi2 = float(jump0 @ bracket2) / jj
    r2 = bracket2 - psi2 * jump0
    return CompatibilityResult(psi1=psi1, psi2=psi2, r1=r1, r2=r2)


# ---------------------------------------------------------------------------
# built-in systems
# ---------------------------------------------------------------------------

def _broadcast_matrix(M: np.ndarray):
    def jac(U):
        U = np.asarray(U, dtype=float)
        if U.ndim == 1:
            return M.copy()
        return np.broadcast_to(M, U.shape[:-1] + M.shape).copy()
    return jac


def linear_system(A_mat, G_mat, name: str = "linear") -> SystemDescriptor:
    """Linear fluxes and sources: A(U) = A U, g(U) = G U."""
    A_mat = np.atleast_2d(np.asarray(A_mat, dtype=float))
    G_mat = np.atleast_2d(np.asarray(G_mat, dtype=float))
    n = A_mat.shape[0]
    if A_mat.shape != (n, n) or G_mat.shape != (n, n):
        raise InvalidModel("linear system matrices must be square and matching")
    return SystemDescriptor(
        n=n,
        flux=lambda U: np.asarray(U, dtype=float) @ A_mat.T,
        flux_jacobian=_broadcast_matrix(A_mat),
        source=lambda U: np.asarray(U, dtype=float) @ G_mat.T,
        source_jacobian=_broadcast_matrix(G_mat),
        name=name)


APPENDIX_A_MATRIX = np.diag([1.0, 3.0, 2.0])
APPENDIX_G_MATRIX = np.array([[-1.0, 1.0, 1.0],
                              [-1.0, -1.0, -1.0],
                              [1.0, 1.0, -1.0]])


def appendix_3x3() -> SystemDescriptor:
    """The 3x3 linear system separating stability from symmetrizability."""
    return linear_system(APPENDIX_A_MATRIX, APPENDIX_G_MATRIX, name="appendix-3x3")


def appendix_3x3_eps(eps: float) -> SystemDescriptor:
    """Variant with entry (3,1) of the source matrix perturbed to 1 + eps."""
    G = APPENDIX_G_MATRIX.copy()
    G[2, 0] = 1.0 + eps
    return linear_system(APPENDIX_A_MATRIX, G, name=f"appendix-3x3-eps={eps:g}")


def appendix_3x3_quadratic(delta: float = 0.1) -> SystemDescriptor:
    """Appendix 3x3 with a weak componentwise quadratic flux perturbation."""
    A_mat = APPENDIX_A_MATRIX
    G_mat = APPENDIX_G_MATRIX

    def flux(U):
        U = np.asarray(U, dtype=float)
        return U @ A_mat.T + 0.5 * delta * U ** 2

    def flux_jac(U):
        U = np.asarray(U, dtype=float)
        J = np.broadcast_to(A_mat, U.shape[:-1] + (3, 3)).copy()
        idx = np.arange(3)
        J[..., idx, idx] += delta * U
        return J

    return SystemDescriptor(
        n=3, flux=flux, flux_jacobian=flux_jac,
        source=lambda U: np.asarray(U, dtype=float) @ G_mat.T,
        source_jacobian=_broadcast_matrix(G_mat),
        name=f"appendix-3x3-quadratic={delta:g}", validity_radius=0.5)


def two_by_two(a: float, b: float, c: float, d: float,
               d1: float = -1.0, d2: float = 1.0) -> SystemDescriptor:
    """Linear 2x2 family with diagonal convection diag(d1, d2)."""
    return linear_system(np.diag([d1, d2]), np.array([[a, b], [c, d]]),
                         name="two-by-two")


def burgers_bistable(theta: float = 0.25) -> SystemDescriptor:
    """Scalar A(u) = u^2/2 with bistable source g(u) = u (1-u) (u-theta)."""
    if not 0.0 < theta < 1.0:
        raise InvalidModel("theta must lie in (0, 1)")

    def flux(U):
        U = np.asarray(U, dtype=float)
        return 0.5 * U ** 2

    def flux_jac(U):
        U = np.asarray(U, dtype=float)
        return U[..., None] * np.ones((1, 1))

    def source(U):
        U = np.asarray(U, dtype=float)
        return U * (1.0 - U) * (U - theta)

    def source_jac(U):
        U = np.asarray(U, dtype=float)
        g = -3.0 * U ** 2 + 2.0 * (1.0 + theta) * U - theta
        return g[..., None] * np.ones((1, 1))

    return SystemDescriptor(
        n=1, flux=flux, flux_jacobian=flux_jac, source=source,
        source_jacobian=source_jac, name=f"burgers-bistable-theta={theta:g}")


def burgers_bistable_shock(theta: float = 0.25) -> ShockProfile:
    """The standing-frame Lax shock u- = 1, u+ = 0, sigma = 1/2."""
    return ShockProfile(u_minus=np.array([1.0]), u_plus=np.array([0.0]), sigma=0.5)


def decoupled_diagonal(speeds, rates) -> SystemDescriptor:
    """n decoupled components: A_j(U) = d_j U_j, g_j(U) = -rho_j U_j."""
    speeds = np.asarray(speeds, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if speeds.shape != rates.shape:
        raise InvalidModel("speeds and rates must have matching length")
    return linear_system(np.diag(speeds), np.diag(-rates), name="decoupled-diagonal")


# ---------------------------------------------------------------------------
# polynomial (config-file) systems
# ---------------------------------------------------------------------------

class PolynomialMap:
    """Componentwise polynomial map R^n -> R^m with exact Jacobian.

    Terms per component are (coefficient, exponent-tuple) pairs; total
    degree is capped at MAX_POLY_DEGREE.
    """

    def __init__(self, n: int, components: list[list]):
        self.n = n
        self.m = len(components)
        self.terms = []
        for comp in components:
            rows = []
            for coef, exps in comp:
                exps = tuple(int(e) for e in exps)
                if len(exps) != n:
                    raise InvalidModel("exponent tuple length must equal n")
                if any(e < 0 for e in exps) or sum(exps) > MAX_POLY_DEGREE:
                    raise InvalidModel(
                        f"polynomial terms must have total degree <= {MAX_POLY_DEGREE}")
                rows.append((float(coef), exps))
            self.terms.append(rows)

    def __call__(self, U: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        out = np.zeros(U.shape[:-1] + (self.m,))
        for i, rows in enumerate(self.terms):
            for coef, exps in rows:
                term = np.full(U.shape[:-1], coef)
                for k, e in enumerate(exps):
                    if e:
                        term = term * U[..., k] ** e
                out[..., i] += term
        return out

    def jacobian(self, U: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        out = np.zeros(U.shape[:-1] + (self.m, self.n))
        for i, rows in enumerate(self.terms):
            for coef, exps in rows:
                for j, ej in enumerate(exps):
                    if ej == 0:
                        continue
                    term = np.full(U.shape[:-1], coef * ej)
                    for k, e in enumerate(exps):
                        pw = e - 1 if k == j else e
                        if pw:
                            term = term * U[..., k] ** pw
                    out[..., i, j] += term
        return out


def system_from_dict(data: dict) -> tuple[SystemDescriptor, Optional[ShockProfile]]:
    """Build a system (and optional shock) from the JSON file schema."""
    try:
        n = int(data["n"])
        flux = PolynomialMap(n, data["flux_poly"])
        source = PolynomialMap(n, data["source_poly"])
    except KeyError as exc:
        raise InvalidModel(f"missing system field: {exc}") from exc
    if flux.m != n or source.m != n:
        raise InvalidModel("flux/source component count must equal n")

    bmap = bjac = None
    p = 0
    if data.get("boundary") is not None:
        B = np.atleast_2d(np.asarray(data["boundary"], dtype=float))
        if B.shape[1] != n:
            raise InvalidModel("boundary matrix must have n columns")
        p = B.shape[0]
        bmap = lambda U: np.asarray(U, dtype=float) @ B.T
        bjac = _broadcast_matrix(B)

    sys = SystemDescriptor(
        n=n, flux=flux, flux_jacobian=flux.jacobian,
        source=source, source_jacobian=source.jacobian,
        boundary_map=bmap, boundary_jacobian=bjac, p=p,
        name=str(data.get("name", "config-system")))

    shock = None
    if data.get("shock") is not None:
        s = data["shock"]
        shock = ShockProfile(u_minus=np.asarray(s["u_minus"], dtype=float),
                             u_plus=np.asarray(s["u_plus"], dtype=float),
                             sigma=float(s["sigma"]),
                             psi0=float(s.get("psi0", 0.0)))
    return sys, shock


def load_system(path) -> tuple[SystemDescriptor, Optional[ShockProfile]]:
    with open(path, "r", encoding="utf-8") as fh:
        return system_from_dict(json.load(fh))
