"""Evans-Lopatinskii determinants, root counting, and gap certification.

The shock determinant at a spectral parameter stacks the phase column
-[U]_0 with the convection images of orthonormal bases of the decaying
spatial modes on each side.  Zeros of the determinant inside the dichotomy
region are eigenvalues of the linearized shock problem; the translational
eigenvalue at 0 is simple exactly when the determinant itself does not
vanish there.  Winding numbers over rectangles certify the absence of
spectrum right of a requested decay rate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    Characteristic,
    DimensionMismatch,
    EssentialSpectrumIntrusion,
    InvalidBoundaryMap,
    NoDichotomy,
    RefinementBudgetExceeded,
    SingularBoundaryMatrix,
    ZeroOnContour,
)
from .spectral import decompose, fourier_symbol_spectrum, spatial_projectors
from .systems import ShockLinearization

COND_LIMIT = 1e12


@dataclass
class LopatinskiiSample:
    """Determinant data at one spectral parameter."""

    lam: complex
    E: np.ndarray
    det: complex
    cond: float
    basis_plus: Optional[np.ndarray] = None    # shock: Ran Pi_{s,+}(lam)
    basis_minus: Optional[np.ndarray] = None   # shock: Ran Pi_{u,-}(lam)
    basis: Optional[np.ndarray] = None         # half line: Ran Pi_s(lam)
    bdagger: Optional[np.ndarray] = None       # (1+2n, n) triplet-valued inverse
    brestricted_inv: Optional[np.ndarray] = None  # half line: (n, p)


def _align(W: np.ndarray, W_ref: np.ndarray) -> np.ndarray:
    """Rotate the orthonormal frame W onto W_ref (orthogonal Procrustes)."""
    if W.shape[1] == 0 or W_ref is None:
        return W
    M = W.conj().T @ W_ref
    U, _, Vh = np.linalg.svd(M)
    return W @ (U @ Vh)


class ShockDeterminant:
    """Continuable Evans-Lopatinskii determinant of a Riemann shock.

    Caches samples and aligns each new basis to the nearest cached one so the
    determinant is trackable along contours regardless of insertion order.
    """

    def __init__(self, lin: ShockLinearization):
        self.lin = lin
        self.n = lin.n
        self._cache: dict[complex, LopatinskiiSample] = {}

    def clear(self):
        self._cache.clear()

    def _nearest(self, lam: complex) -> Optional[LopatinskiiSample]:
        if not self._cache:
            return None
        key = min(self._cache, key=lambda z: abs(z - lam))
        return self._cache[key]

    def sample(self, lam: complex) -> LopatinskiiSample:
        if lam in self._cache:
            return self._cache[lam]
        lin = self.lin
        ddp = spatial_projectors(lin.A_plus, lin.G_plus, lam)
        ddm = spatial_projectors(lin.A_minus, lin.G_minus, lam)
        Wp = ddp.vectors_s
        Wm = ddm.vectors_u
        if 1 + Wp.shape[1] + Wm.shape[1] != self.n:
            raise DimensionMismatch(
                f"column balance 1+{Wp.shape[1]}+{Wm.shape[1]} != {self.n} at lam={lam}")
        ref = self._nearest(lam)
        if ref is not None:
            Wp = _align(Wp, ref.basis_plus)
            Wm = _align(Wm, ref.basis_minus)
        E = np.empty((self.n, self.n), dtype=complex)
        E[:, 0] = -lin.jump
        E[:, 1:1 + Wp.shape[1]] = lin.A_plus @ Wp
        E[:, 1 + Wp.shape[1]:] = -(lin.A_minus @ Wm)
        det = complex(np.linalg.det(E))
        cond = float(np.linalg.cond(E)) if self.n > 0 else 1.0
        bdag = None
        if abs(det) > 0 and cond < COND_LIMIT:
            S = np.zeros((1 + 2 * self.n, self.n), dtype=complex)
            S[0, 0] = 1.0
            S[1:1 + self.n, 1:1 + Wp.shape[1]] = Wp
            S[1 + self.n:, 1 + Wp.shape[1]:] = Wm
            bdag = S @ np.linalg.inv(E)
        smp = LopatinskiiSample(lam=lam, E=E, det=det, cond=cond,
                                basis_plus=Wp, basis_minus=Wm, bdagger=bdag)
        self._cache[lam] = smp
        return smp

    def __call__(self, lam: complex) -> complex:
        return self.sample(lam).det

    def hf_limit(self) -> LopatinskiiSample:
        """Determinant of the jump map on the asymptotic mode spaces."""
        lin = self.lin
        dp = decompose(lin.A_plus, lin.G_plus)
        dm = decompose(lin.A_minus, lin.G_minus)
        Wp = _orth_cols(dp.P_inv[:, dp.J_s])
        Wm = _orth_cols(dm.P_inv[:, dm.J_u])
        if 1 + Wp.shape[1] + Wm.shape[1] != self.n:
            raise DimensionMismatch("asymptotic column balance violated")
        E = np.empty((self.n, self.n))
        E[:, 0] = -lin.jump
        E[:, 1:1 + Wp.shape[1]] = lin.A_plus @ Wp
        E[:, 1 + Wp.shape[1]:] = -(lin.A_minus @ Wm)
        det = complex(np.linalg.det(E))
        cond = float(np.linalg.cond(E))
        bdag = None
        if abs(det) > 0 and cond < COND_LIMIT:
            S = np.zeros((1 + 2 * self.n, self.n))
            S[0, 0] = 1.0
            S[1:1 + self.n, 1:1 + Wp.shape[1]] = Wp
            S[1 + self.n:, 1 + Wp.shape[1]:] = Wm
            bdag = S @ np.linalg.inv(E)
        return LopatinskiiSample(lam=np.inf, E=E, det=det, cond=cond,
                                 basis_plus=Wp, basis_minus=Wm, bdagger=bdag)


def _orth_cols(cols: np.ndarray) -> np.ndarray:
    if cols.shape[1] == 0:
        return cols
    q, _ = np.linalg.qr(cols)
    return q


def lopatinskii_det_shock(lin: ShockLinearization, lam: complex) -> LopatinskiiSample:
    """One-shot shock determinant sample (fresh continuation state)."""
    return ShockDeterminant(lin).sample(lam)


class IBVPDeterminant:
    """Continuable boundary determinant det(B | Ran Pi_s(lam))."""

    def __init__(self, A: np.ndarray, G: np.ndarray, B: np.ndarray):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.G = np.atleast_2d(np.asarray(G, dtype=float))
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        self.n = self.A.shape[0]
        self.p = self.B.shape[0]
        if np.linalg.matrix_rank(self.B) < self.p:
            raise InvalidBoundaryMap("boundary map is not onto")
        self._cache: dict[complex, LopatinskiiSample] = {}

    def _nearest(self, lam):
        if not self._cache:
            return None
        key = min(self._cache, key=lambda z: abs(z - lam))
        return self._cache[key]

    def sample(self, lam: complex) -> LopatinskiiSample:
        if lam in self._cache:
            return self._cache[lam]
        dd = spatial_projectors(self.A, self.G, lam)
        W = dd.vectors_s
        if W.shape[1] != self.p:
            raise DimensionMismatch(
                f"k_s={W.shape[1]} but boundary map has rank {self.p} at lam={lam}")
        ref = self._nearest(lam)
        if ref is not None:
            W = _align(W, ref.basis)
        E = self.B @ W
        det = complex(np.linalg.det(E))
        cond = float(np.linalg.cond(E))
        brinv = None
        if abs(det) > 0 and cond < COND_LIMIT:
            brinv = W @ np.linalg.inv(E)
        smp = LopatinskiiSample(lam=lam, E=E, det=det, cond=cond,
                                basis=W, brestricted_inv=brinv)
        self._cache[lam] = smp
        return smp

    def __call__(self, lam: complex) -> complex:
        return self.sample(lam).det

    def hf_limit(self) -> LopatinskiiSample:
        dec = decompose(self.A, self.G)
        W = _orth_cols(dec.P_inv[:, dec.J_s])
        if W.shape[1] != self.p:
            raise DimensionMismatch("asymptotic k_s does not match boundary rank")
        E = self.B @ W
        det = complex(np.linalg.det(E))
        brinv = W @ np.linalg.inv(E) if abs(det) > 0 else None
        return LopatinskiiSample(lam=np.inf, E=E, det=det,
                                 cond=float(np.linalg.cond(E)),
                                 basis=W, brestricted_inv=brinv)


def lopatinskii_det_ibvp(A, G, B, lam: complex) -> LopatinskiiSample:
    """One-shot half-line boundary determinant sample."""
    return IBVPDeterminant(A, G, B).sample(lam)


# ---------------------------------------------------------------------------
# argument-principle root counting
# ---------------------------------------------------------------------------

def rectangle_contour(re_min: float, re_max: float, im_max: float) -> list[complex]:
    """Counterclockwise rectangle corners [re_min, re_max] x [-im_max, im_max]."""
    return [complex(re_min, -im_max), complex(re_max, -im_max),
            complex(re_max, im_max), complex(re_min, im_max)]


def count_roots(f: Callable[[complex], complex], contour: list[complex],
                n_per_edge: int = 16, max_samples: int = 20000,
                min_mod: float = 1e-8, phase_cap: float = np.pi / 2) -> int:
    """Winding number of f around 0 along the closed polygon `contour`.

    Segments are bisected adaptively until consecutive phase increments fall
    below `phase_cap`.  Raises ZeroOnContour when |f| drops below `min_mod`
    and RefinementBudgetExceeded when the sample budget runs out.
    """
    pts: list[complex] = []
    corners = list(contour)
    m = len(corners)
    for i in range(m):
        a, b = corners[i], corners[(i + 1) % m]
        for k in range(n_per_edge):
            pts.append(a + (b - a) * k / n_per_edge)
    pts.append(corners[0])

    vals = [complex(f(z)) for z in pts]
    budget = max_samples - len(pts)

    def bad(i):
        v0, v1 = vals[i], vals[i + 1]
        if min(abs(v0), abs(v1)) <= min_mod:
            raise ZeroOnContour(f"|f| <= {min_mod:g} near {pts[i]}")
        return abs(np.angle(v1 / v0)) >= phase_cap

    i = 0
    while i < len(pts) - 1:
        if bad(i):
            if budget <= 0:
                raise RefinementBudgetExceeded("contour refinement budget exhausted")
            zm = 0.5 * (pts[i] + pts[i + 1])
            pts.insert(i + 1, zm)
            vals.insert(i + 1, complex(f(zm)))
            budget -= 1
        else:
            i += 1

    total = 0.0
    for i in range(len(pts) - 1):
        total += np.angle(vals[i + 1] / vals[i])
    winding = int(round(total / (2.0 * np.pi)))
    if abs(total / (2.0 * np.pi) - winding) > 0.2:
        raise RefinementBudgetExceeded(
            f"winding did not settle to an integer: {total / (2 * np.pi):.3f}")
    return winding


# ---------------------------------------------------------------------------
# Lax structure and gap certification
# ---------------------------------------------------------------------------

@dataclass
class LaxReport:
    """Raw characteristic counts at the shock.

    k_plus / k_minus count characteristics incoming into the shock from the
    right / left (d_{j,+} < 0 / d_{j,-} > 0).  `is_lax` holds exactly when
    the free trace modes balance the jump conditions, i.e. the phase column
    plus the outgoing mode counts fill the n columns:
    1 + (n - k_plus) + (n - k_minus) = n, equivalently k_plus + k_minus = n+1.
    """

    k_plus: int
    k_minus: int
    is_lax: bool
    labels: dict = field(default_factory=dict)


def lax_check(lin: ShockLinearization, tol: float = 1e-9) -> LaxReport:
    d_plus = np.linalg.eigvals(lin.A_plus)
    d_minus = np.linalg.eigvals(lin.A_minus)
    for d in (d_plus, d_minus):
        if np.abs(d.real).min() <= tol * max(np.abs(d).max(), 1.0):
            raise Characteristic("shock speed coincides with a characteristic speed")
    k_plus = int(np.sum(d_plus.real < 0))
    k_minus = int(np.sum(d_minus.real > 0))
    n = lin.n
    out_plus = n - k_plus
    out_minus = n - k_minus
    is_lax = (1 + out_plus + out_minus == n)
    family = k_plus if is_lax else None
    labels = {
        "incoming_right": k_plus,
        "incoming_left": k_minus,
        "outgoing_right": out_plus,
        "outgoing_left": out_minus,
        "column_balance": 1 + out_plus + out_minus == n,
        "outgoing_sum_is_n_minus_1": out_plus + out_minus == n - 1,
        "naive_incoming_sum_is_n_minus_1": k_plus + k_minus == n - 1,
        "family": family,
    }
    return LaxReport(k_plus=k_plus, k_minus=k_minus, is_lax=is_lax, labels=labels)


@dataclass
class RPolicy:
    """High-frequency radius search policy for gap certification."""

    initial: Optional[float] = None
    growth: float = 2.0
    max_doublings: int = 10
    dominance: float = 0.5
    probe_points: int = 9


@dataclass
class GapCertificate:
    alpha: float
    granted: bool
    margin_plus: float
    margin_minus: float
    winding: int
    R: float
    k_plus: int
    k_minus: int
    det_at_zero: complex
    contour: dict = field(default_factory=dict)
    lax: Optional[LaxReport] = None

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "granted": self.granted,
            "margins": {"plus": self.margin_plus, "minus": self.margin_minus},
            "winding": self.winding,
            "R": self.R,
            "k_plus": self.k_plus,
            "k_minus": self.k_minus,
            "det_at_zero": {"re": self.det_at_zero.real, "im": self.det_at_zero.imag,
                            "abs": abs(self.det_at_zero)},
            "contour": self.contour,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def certify_gap(lin: ShockLinearization, alpha: float,
                r_policy: Optional[RPolicy] = None,
                xi_grid: Optional[np.ndarray] = None) -> GapCertificate:
    """Certify that the shock spectrum right of -alpha is exactly {0}, simple.

    Steps: (i) Fourier-symbol margins on both sides (grid plus asymptotes),
    (ii) zero winding of the Evans-Lopatinskii determinant over the boundary
    of [-alpha, R] x [-R, R] with R fixed by high-frequency dominance,
    (iii) nonvanishing determinant at lam = 0 (simple translational mode).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    r_policy = r_policy or RPolicy()

    margins = []
    for A, G, side in ((lin.A_plus, lin.G_plus, "plus"),
                       (lin.A_minus, lin.G_minus, "minus")):
        fs = fourier_symbol_spectrum(A, G, xi_grid)
        if not fs.stable_below(alpha):
            raise EssentialSpectrumIntrusion(
                f"essential spectrum on side {side} reaches Re lam = "
                f"{max(fs.max_real, fs.gamma.max()):.6g} >= -alpha = {-alpha:.6g}")
        margins.append(fs.margin())

    walker = ShockDeterminant(lin)
    hf = walker.hf_limit()
    if abs(hf.det) <= 1e-12:
        raise SingularBoundaryMatrix("high-frequency jump map is singular")

    speeds = np.concatenate([np.linalg.eigvals(lin.A_plus).real,
                             np.linalg.eigvals(lin.A_minus).real])
    R = r_policy.initial or 10.0 * max(1.0, alpha,
                                       np.abs(lin.G_plus).max(), np.abs(lin.G_minus).max(),
                                       np.abs(speeds).max())
    target = abs(hf.det)
    for _ in range(r_policy.max_doublings + 1):
        probes = _hf_probes(alpha, R, r_policy.probe_points)
        if all(abs(abs(walker(z)) - target) < r_policy.dominance * target for z in probes):
            break
        R *= r_policy.growth
    else:
        raise RefinementBudgetExceeded("no high-frequency dominance radius found")

    contour = rectangle_contour(-alpha, R, R)
    winding = count_roots(walker, contour)

    det0 = walker(0.0 + 0.0j)
    lax = lax_check(lin)
    granted = (winding == 0) and (abs(det0) > 1e-8)
    return GapCertificate(
        alpha=alpha, granted=granted,
        margin_plus=margins[0], margin_minus=margins[1],
        winding=winding, R=R, k_plus=lax.k_plus, k_minus=lax.k_minus,
        det_at_zero=det0,
        contour={"re_min": -alpha, "re_max": R, "im_max": R},
        lax=lax)


def _hf_probes(alpha: float, R: float, m: int) -> list[complex]:
    """Contour points with |lam| >= R (right, top, bottom edges)."""
    probes = [complex(R, t) for t in np.linspace(-R, R, m)]
    probes += [complex(x, R) for x in np.linspace(-alpha, R, m // 2 + 2)[1:-1]]
    probes += [complex(x, -R) for x in np.linspace(-alpha, R, m // 2 + 2)[1:-1]]
    return probes
