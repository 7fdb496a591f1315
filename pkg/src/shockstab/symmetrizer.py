"""Spectral stability versus strict dissipative symmetrizability.

For 2x2 systems with distinct diagonal convection the two notions coincide
and both reduce to closed-form sign conditions.  For 3x3 systems the
transition analysis eliminates the imaginary-eigenvalue system to a single
even polynomial whose nonzero real roots mark neutral crossings; diagonal
symmetrizer feasibility reduces to three closed-form inequalities searched
over the positive octant.  The flagship 3x3 example is spectrally stable
while the (1,3) pairwise inequality degenerates to 0 > (alpha1-alpha3)^2/4,
so no strict dissipative symmetrizer exists.

Exact rational arithmetic is used for the eliminants; floating point with
explicit margins everywhere else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
import sympy as sp

from .errors import Degenerate, Precondition
from .spectral import fourier_symbol_spectrum

_X, _Z = sp.symbols("X Z", real=True)


# ---------------------------------------------------------------------------
# 2x2 closed forms
# ---------------------------------------------------------------------------

def stability_2x2(a: float, b: float, c: float, d: float) -> bool:
    """Exponential symbol stability for diag(d1,d2) convection, d1 != d2."""
    return (a < 0.0) and (d < 0.0) and (a * d - b * c > 0.0)


def symmetrizer_2x2(a: float, b: float, c: float, d: float) -> tuple[float, float]:
    """Diagonal symmetrizer weights (alpha1, alpha2) for a stable 2x2 source.

    Returns the closed-form witness (|c|, |b|) when bc != 0, or a one-small
    pair when bc = 0, and validates the two defining inequalities.
    """
    if not stability_2x2(a, b, c, d):
        raise Precondition("symmetrizer_2x2 called on unstable data")
    if b * c != 0.0:
        a1, a2 = abs(c), abs(b)
    elif b == 0.0 and c == 0.0:
        a1, a2 = 1.0, 1.0
    elif b == 0.0:
        a1, a2 = 1.0, 0.5 * min(1.0, 2.0 * abs(a * d) / c ** 2)
    else:
        a1, a2 = 0.5 * min(1.0, 2.0 * abs(a * d) / b ** 2), 1.0
    if not (a1 * a < 0.0 and a1 * a2 * a * d > 0.25 * (a1 * b + a2 * c) ** 2):
        raise Precondition("witness validation failed (boundary-degenerate data)")
    return a1, a2


# ---------------------------------------------------------------------------
# 3x3 transition analysis
# ---------------------------------------------------------------------------

def _rat(x) -> sp.Rational:
    return sp.Rational(Fraction(x).limit_denominator(10 ** 12)
                       if not isinstance(x, (int, Fraction)) else Fraction(x))


def _labels(G) -> dict:
    """Entry labels of the 3x3 source in the transition convention:
    rows [[a1, b3, c2], [c3, a2, b1], [b2, c1, a3]]."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    return {"a1": G[0, 0], "a2": G[1, 1], "a3": G[2, 2],
            "b1": G[1, 2], "b2": G[2, 0], "b3": G[0, 1],
            "c1": G[2, 1], "c2": G[0, 2], "c3": G[1, 0]}


def _normalize_poly(poly: sp.Poly) -> tuple[sp.Poly, int]:
    """Strip the X^{2k} factor and make the leading coefficient positive."""
    if poly.is_zero:
        raise Degenerate("eliminant is identically zero")
    coeffs = poly.all_coeffs()
    k = 0
    while coeffs[-1] == 0:
        coeffs = coeffs[:-1]
        k += 1
    p = sp.Poly(coeffs, _X)
    if p.LC() < 0:
        p = sp.Poly([-c for c in coeffs], _X)
    return p, k


@dataclass
class TransitionReport:
    has_transition: bool
    eliminant: sp.Poly                 # printed-convention, normalized
    eliminant_exact: sp.Poly           # determinant-split convention, normalized
    x2_coefficients: list              # Fractions, printed convention, asc in X^2
    x2_coefficients_exact: list
    x0_branch: dict
    details: dict = field(default_factory=dict)

    @property
    def all_positive_x2(self) -> bool:
        return all(c > 0 for c in self.x2_coefficients)


def _eliminant(th, lab, e1_const) -> tuple[sp.Poly, sp.Poly, sp.Poly]:
    """Resultant elimination of Z from the (X, Z) transition system.

    e1_const is the constant side of the first (real-part) equation written
    as a1 Y W + a2 X W + a3 X Y = -e1_const.
    """
    a1, a2, a3 = lab["a1"], lab["a2"], lab["a3"]
    W = (1 - th) * _X ** 2 + th * _Z
    p1 = sp.expand(_X ** 2 * e1_const + _X ** 2 * _Z * a3 + _X ** 2 * W * a2
                   + _Z * W * a1)
    p2 = sp.expand(_Z * W - _X ** 2 * (a2 * a3 - lab["b1"] * lab["c1"])
                   - _Z * (a1 * a3 - lab["b2"] * lab["c2"])
                   - W * (a1 * a2 - lab["b3"] * lab["c3"]))
    q = sp.expand(p1 - a1 * p2)        # linear in Z by construction
    qp = sp.Poly(q, _Z)
    if qp.degree() > 1:
        raise Degenerate("Z^2 terms did not cancel in the linear combination")
    A = qp.coeff_monomial(_Z) if qp.degree() >= 1 else sp.Integer(0)
    res = sp.Poly(sp.expand(sp.resultant(q, p2, _Z)), _X)
    return res, sp.Poly(sp.expand(A), _X), sp.Poly(p2, _Z)


def transition_check_3x3(ds, G) -> TransitionReport:
    """Decide real solvability of the neutral-eigenvalue system.

    ds = (d1, d2, d3) with d3 strictly between d1 and d2 (paper-style
    labeling of the distinct speeds); G is the 3x3 source matrix in the same
    labeling.  Two eliminants are produced: the one following the printed
    transition equations (whose constant side is -(a1 b1 c1 + a2 b2 c2 +
    a3 b3 c3)), and the exact determinant split (constant side -det G).
    The verdict uses the exact one; a cross-convention disagreement is
    recorded in details.
    """
    d1, d2, d3 = (_rat(v) for v in ds)
    if d1 == d2 or not (min(d1, d2) <= d3 <= max(d1, d2)):
        raise Precondition("labeling requires d3 to lie between d1 and d2")
    lab = {k: _rat(v) for k, v in _labels(G).items()}
    if not (lab["a1"] < 0 and lab["a2"] < 0 and lab["a3"] < 0):
        raise Precondition("high-frequency condition a1, a2, a3 < 0 violated")
    th = (d3 - d1) / (d2 - d1)

    K = lab["a1"] * lab["b1"] * lab["c1"] + lab["a2"] * lab["b2"] * lab["c2"] \
        + lab["a3"] * lab["b3"] * lab["c3"]
    detG = (lab["a1"] * lab["a2"] * lab["a3"] + lab["b1"] * lab["b2"] * lab["b3"]
            + lab["c1"] * lab["c2"] * lab["c3"] - K)

    res_print, A_print, _ = _eliminant(th, lab, K)
    res_exact, A_exact, p2 = _eliminant(th, lab, -detG)
    elim_print, _ = _normalize_poly(res_print)
    elim_exact, _ = _normalize_poly(res_exact)

    def x2_coeffs(p: sp.Poly) -> list:
        cs = p.all_coeffs()[::-1]      # ascending
        if any(cs[i] != 0 for i in range(1, len(cs), 2)):
            raise Degenerate("eliminant is not even in X")
        return [Fraction(int(sp.fraction(c)[0]), int(sp.fraction(c)[1]))
                for c in cs[::2]]

    def nonzero_real_roots(p: sp.Poly) -> int:
        Y = sp.Symbol("Y", positive=True)
        cs = p.all_coeffs()[::-1]
        q = sum(c * Y ** (i // 2) for i, c in enumerate(cs) if i % 2 == 0)
        qp = sp.Poly(sp.expand(q), Y)
        return qp.count_roots(0, sp.oo) - (1 if qp.eval(0) == 0 else 0)

    # X = 0 branch (exact convention): a1 th Y^2 = detG and
    # Y [(a1 a3 - b2 c2) + th (a1 a2 - b3 c3)] = 0
    bracket = (lab["a1"] * lab["a3"] - lab["b2"] * lab["c2"]
               + th * (lab["a1"] * lab["a2"] - lab["b3"] * lab["c3"]))
    x0_present = (detG == 0) or (detG < 0 and bracket == 0)
    x0 = {"detG": float(detG), "bracket": float(bracket), "present": x0_present,
          "printed_convention_present": (K == 0) or (K > 0 and bracket == 0)}

    nz_exact = nonzero_real_roots(elim_exact)
    nz_print = nonzero_real_roots(elim_print)
    # roots where the linear-in-Z combination degenerates need a second look
    g = sp.gcd(sp.Poly(A_exact, _X), elim_exact)
    degenerate_roots = sp.degree(g) > 0

    has = bool(x0_present or nz_exact > 0)
    details = {
        "nonzero_real_roots_exact": nz_exact,
        "nonzero_real_roots_printed": nz_print,
        "conventions_agree": (nz_exact > 0) == (nz_print > 0),
        "degenerate_linear_combination_roots": bool(degenerate_roots),
        "theta": float(th),
    }
    return TransitionReport(
        has_transition=has, eliminant=elim_print, eliminant_exact=elim_exact,
        x2_coefficients=x2_coeffs(elim_print),
        x2_coefficients_exact=x2_coeffs(elim_exact),
        x0_branch=x0, details=details)


# ---------------------------------------------------------------------------
# diagonal symmetrizer feasibility
# ---------------------------------------------------------------------------

@dataclass
class SymmetrizerVerdict:
    spectrally_stable: bool
    stability_margin: float
    symmetrizable: bool
    witness: Optional[np.ndarray]
    witness_margin: float
    infeasibility: Optional[dict]
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "spectrally_stable": self.spectrally_stable,
            "stability_margin": self.stability_margin,
            "symmetrizable": self.symmetrizable,
            "witness": None if self.witness is None else list(map(float, self.witness)),
            "witness_margin": self.witness_margin,
            "infeasibility": self.infeasibility,
        }


_PAIRS = (((0, 1), "b3", "c3"), ((0, 2), "c2", "b2"), ((1, 2), "b1", "c1"))


def _pair_obstruction(lab: dict) -> Optional[dict]:
    """Closed-form infeasibility of one pairwise 2x2 minor condition.

    The (i, j) condition  alpha_i alpha_j a_i a_j > (alpha_i u + alpha_j v)^2/4
    is satisfiable for some positive weights iff u v <= 0 or a_i a_j > u v.
    When a_i a_j == u v it collapses to 0 > (alpha_i u - alpha_j v)^2 / 4.
    """
    a = (lab["a1"], lab["a2"], lab["a3"])
    for (i, j), ku, kv in _PAIRS:
        u, v = lab[ku], lab[kv]
        uv = u * v
        aa = a[i] * a[j]
        if uv > 0 and aa <= uv:
            if aa == uv:
                reduced = (f"0 > (alpha{i + 1}*{u:g} - alpha{j + 1}*{v:g})^2 / 4"
                           if (u, v) != (1.0, 1.0) else
                           f"0 > (alpha{i + 1} - alpha{j + 1})^2 / 4")
            else:
                reduced = (f"alpha{i + 1} alpha{j + 1} ({aa:g} - {uv:g}) > "
                           f"(alpha{i + 1}*{u:g} - alpha{j + 1}*{v:g})^2 / 4")
            return {"pair": (i + 1, j + 1), "reduced": reduced,
                    "a_product": float(aa), "coupling_product": float(uv)}
    return None


def _sym_margin(alphas: np.ndarray, G: np.ndarray) -> float:
    S = np.diag(alphas)
    M = 0.5 * (S @ G + (S @ G).T)
    return -float(np.linalg.eigvalsh(M).max())


def diagonal_symmetrizer_search_3x3(A_diag, G,
                                    grid_points: int = 201) -> SymmetrizerVerdict:
    """Search diag(alpha) > 0 making sym(S G) negative definite.

    Scaling-normalized: alpha1 = 1, log grid over (alpha2, alpha3) in
    [1e-4, 1e4]^2 followed by local polish.  When the closed-form pairwise
    conditions are jointly infeasible the algebraic obstruction is returned
    instead of a search failure.
    """
    A_diag = np.atleast_2d(np.asarray(A_diag, dtype=float))
    ds = np.diag(A_diag)
    if not np.allclose(A_diag, np.diag(ds)):
        raise Precondition("convection must be diagonal for the diagonal search")
    if len(set(np.round(ds, 12))) != 3:
        raise Precondition("speeds must be distinct")
    G = np.atleast_2d(np.asarray(G, dtype=float))
    lab = _labels(G)

    from .spectral import symbol_stability_sweep

    abscissa = symbol_stability_sweep(A_diag, G)
    stable = abscissa < 0
    margin = -abscissa

    obstruction = _pair_obstruction(lab)
    details = {}

    logs = np.linspace(-4.0, 4.0, grid_points)
    a2, a3 = np.meshgrid(10.0 ** logs, 10.0 ** logs, indexing="ij")
    alphas = np.stack([np.ones_like(a2), a2, a3], axis=-1).reshape(-1, 3)
    S = alphas[:, :, None] * np.eye(3)[None, :, :]
    SG = S @ G
    M = 0.5 * (SG + np.swapaxes(SG, 1, 2))
    margins = -np.linalg.eigvalsh(M)[:, -1]
    best = int(np.argmax(margins))
    best_alpha = alphas[best]
    best_margin = float(margins[best])

    from scipy.optimize import minimize

    def neg_margin(logab):
        return -_sym_margin(np.array([1.0, 10.0 ** logab[0], 10.0 ** logab[1]]), G)

    res = minimize(neg_margin, np.log10(best_alpha[1:]), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
    polished = np.array([1.0, 10.0 ** res.x[0], 10.0 ** res.x[1]])
    polished_margin = _sym_margin(polished, G)
    if polished_margin > best_margin:
        best_alpha, best_margin = polished, polished_margin
    details["grid_best_margin"] = best_margin

    if obstruction is None and best_margin > 0:
        check = _sym_margin(best_alpha, G)   # re-verified off the search path
        return SymmetrizerVerdict(
            spectrally_stable=bool(stable), stability_margin=margin,
            symmetrizable=check > 0, witness=best_alpha,
            witness_margin=float(check), infeasibility=None, details=details)
    if obstruction is None:
        obstruction = {"pair": None,
                       "reduced": "numerical search: best margin <= 0"}
    return SymmetrizerVerdict(
        spectrally_stable=bool(stable), stability_margin=margin,
        symmetrizable=False, witness=best_alpha, witness_margin=best_margin,
        infeasibility=obstruction, details=details)


# ---------------------------------------------------------------------------
# end-to-end separation report
# ---------------------------------------------------------------------------

def separation_report(seed: int = 0, n_samples: int = 1000,
                      eps: float = 1e-2) -> dict:
    """Reproduce the stability-vs-symmetrizability separation end to end.

    2x2: closed-form criterion vs symbol sweep vs witness feasibility over
    random samples.  3x3: the flagship stable-but-not-symmetrizable example
    in exact arithmetic, its eps-perturbed variant, and the empirical
    stability threshold in eps.
    """
    rng = np.random.default_rng(seed)
    agree = 0
    checked = 0
    for _ in range(n_samples):
        a, b, c, d = rng.uniform(-5, 5, size=4)
        if min(abs(a), abs(d), abs(a * d - b * c)) < 1e-6:
            continue
        checked += 1
        verdict = stability_2x2(a, b, c, d)
        xi = np.linspace(-60, 60, 2401)
        fs = fourier_symbol_spectrum(np.diag([-1.0, 1.0]),
                                     np.array([[a, b], [c, d]]), xi)
        sweep = fs.max_real < 0 and np.all(fs.gamma < 0)
        feasible = True
        try:
            symmetrizer_2x2(a, b, c, d)
        except Precondition:
            feasible = False
        if verdict == sweep == feasible:
            agree += 1

    ds = (1.0, 3.0, 2.0)
    A3 = np.diag([1.0, 3.0, 2.0])
    G3 = np.array([[-1.0, 1.0, 1.0], [-1.0, -1.0, -1.0], [1.0, 1.0, -1.0]])
    trans = transition_check_3x3(ds, G3)
    search = diagonal_symmetrizer_search_3x3(A3, G3)

    Geps = G3.copy()
    Geps[2, 0] = 1.0 + eps
    trans_eps = transition_check_3x3(ds, Geps)
    search_eps = diagonal_symmetrizer_search_3x3(A3, Geps)

    # empirical stability threshold in eps (symbol sweep)
    eps_grid = np.concatenate([np.linspace(0.0, 2.0, 41)[1:]])
    threshold = None
    for e in eps_grid:
        Ge = G3.copy()
        Ge[2, 0] = 1.0 + e
        fs = fourier_symbol_spectrum(A3, Ge)
        if not (fs.max_real < 0):
            threshold = float(e)
            break

    return {
        "seed": seed,
        "two_by_two": {"samples": checked, "agreements": agree,
                       "all_agree": agree == checked},
        "three_by_three": {
            "eliminant_x2_coefficients":
                [str(c) for c in trans.x2_coefficients],
            "all_positive_x2": trans.all_positive_x2,
            "has_transition": trans.has_transition,
            "spectrally_stable": search.spectrally_stable,
            "symmetrizable": search.symmetrizable,
            "obstruction": search.infeasibility,
        },
        "eps_variant": {
            "eps": eps,
            "spectrally_stable": (not trans_eps.has_transition)
                                  and search_eps.spectrally_stable,
            "best_margin": search_eps.witness_margin,
            "best_sym_has_positive_eigenvalue": search_eps.witness_margin < 0,
            "empirical_instability_threshold": threshold,
        },
    }


def report_markdown(report: dict) -> str:
    t2 = report["two_by_two"]
    t3 = report["three_by_three"]
    ev = report["eps_variant"]
    lines = [
        "# Stability vs. dissipative symmetrizability",
        "",
        "## 2x2 equivalence",
        f"- samples checked: {t2['samples']}",
        f"- closed form / symbol sweep / witness all agree: "
        f"{t2['agreements']}/{t2['samples']}",
        "",
        "## 3x3 separation example",
        f"- eliminant coefficients in X^2 (ascending): "
        f"{', '.join(t3['eliminant_x2_coefficients'])}",
        f"- all positive (no neutral crossing): {t3['all_positive_x2']}",
        f"- spectrally stable: {t3['spectrally_stable']}",
        f"- diagonal symmetrizer exists: {t3['symmetrizable']}",
        f"- obstruction: {t3['obstruction']}",
        "",
        "## eps-perturbed variant",
        f"- eps = {ev['eps']:g}",
        f"- still spectrally stable: {ev['spectrally_stable']}",
        f"- best achievable sym(S G) margin: {ev['best_margin']:.6g}",
        f"- best symmetric part has a positive eigenvalue: "
        f"{ev['best_sym_has_positive_eigenvalue']}",
        f"- empirical instability threshold in eps: "
        f"{ev['empirical_instability_threshold']}",
        "",
    ]
    return "\n".join(lines)


def write_separation_report(out_dir, seed: int = 0, n_samples: int = 1000,
                            eps: float = 1e-2) -> dict:
    import os

    report = separation_report(seed=seed, n_samples=n_samples, eps=eps)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "report.md"), "w", encoding="utf-8") as fh:
        fh.write(report_markdown(report))
    return report
