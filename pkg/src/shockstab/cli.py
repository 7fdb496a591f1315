"""Command-line front end: config ingestion, run orchestration, reports.

Subcommands: analyze | simulate | green | symmetrizer | report.  All numerics
live in the library; this module only resolves configs, dispatches, and
serializes.  Outputs are deterministic for a fixed config and seed: JSON is
sorted-key, CSV floats use 17 significant digits, and no timestamps are
written.  The report path additionally renders matplotlib figures next to
the delimited output.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources

import numpy as np

from . import energy as en
from . import greenkernel as gk
from . import lopatinskii as lp
from . import simulate as sim
from . import spectral as spec
from . import symmetrizer as smz
from . import systems as sysm
from .errors import ShockStabError

log = logging.getLogger("shockstab")

FMT = "%.17g"


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def load_schema(name: str) -> dict:
    with resources.files("shockstab.schemas").joinpath(name).open("r") as fh:
        return json.load(fh)


def validate_config(cfg: dict) -> dict:
    import jsonschema

    jsonschema.validate(cfg, load_schema("run_config.schema.json"))
    return cfg


def validate_output(name: str, obj: dict):
    import jsonschema

    jsonschema.validate(obj, load_schema(name))


def resolve_system(cfg: dict):
    """Build (system, shock) from the config's system/shock sections."""
    s = cfg["system"]
    shock = None
    if "path" in s:
        system, shock = sysm.load_system(s["path"])
    else:
        name = s.get("builtin", "burgers-bistable")
        if name == "burgers-bistable":
            system = sysm.burgers_bistable(s.get("theta", 0.25))
            shock = sysm.burgers_bistable_shock(s.get("theta", 0.25))
        elif name == "appendix-3x3":
            system = sysm.appendix_3x3()
        elif name == "appendix-3x3-eps":
            system = sysm.appendix_3x3_eps(s.get("eps", 1e-2))
        elif name == "appendix-3x3-quadratic":
            system = sysm.appendix_3x3_quadratic(s.get("delta", 0.1))
        elif name == "two-by-two":
            a, b, c, d, *speeds = s["entries"]
            system = sysm.two_by_two(a, b, c, d, *(speeds or (-1.0, 1.0)))
        elif name == "decoupled":
            system = sysm.decoupled_diagonal(s["speeds"], s["rates"])
        else:
            raise ShockStabError(f"unknown builtin system {name!r}")
    sc = cfg.get("shock")
    if isinstance(sc, dict) and not sc.get("builtin", False):
        shock = sysm.ShockProfile(u_minus=np.asarray(sc["u_minus"], dtype=float),
                                  u_plus=np.asarray(sc["u_plus"], dtype=float),
                                  sigma=float(sc["sigma"]),
                                  psi0=float(sc.get("psi0", 0.0)))
    return system, shock


def bump_profile(x, center: float, half_width: float, flush: float = 1e-13):
    s = (np.asarray(x, dtype=float) - center) / half_width
    out = np.zeros_like(s)
    m = np.abs(s) < 1.0
    out[m] = np.exp(-1.0 / (1.0 - s[m] ** 2))
    out[out < flush * np.exp(-1.0)] = 0.0
    return out


def resolve_perturbation(cfg: dict, system) -> tuple:
    """Return (V0 callable, support description) scaled to the target H2 size."""
    p = cfg.get("perturbation", {})
    if p.get("kind", "bump") == "none":
        return (lambda x: np.zeros(np.shape(x) + (system.n,))), None
    center = p.get("center", 1.5)
    half = p.get("half_width", 0.5)
    target = p.get("amplitude_h2", 1e-2)
    flush = p.get("flush", 1e-13)
    direction = np.asarray(p.get("direction", [1.0] * system.n), dtype=float)
    direction = direction / np.linalg.norm(direction)
    xs = np.linspace(center - half, center + half, 4001)
    raw = sim.measure_norms(xs, bump_profile(xs, center, half, flush)[:, None]
                            * direction, xs[1] - xs[0])["H2"]
    amp = target / raw

    def V0(x):
        return amp * bump_profile(x, center, half, flush)[:, None] * direction

    return V0, {"center": center, "half_width": half, "amplitude": amp}


def write_json(path, obj: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, header: list[str], columns: list[np.ndarray]):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(FMT % v for v in row) + "\n")


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def cmd_analyze(cfg: dict, out: str, alpha: float | None) -> int:
    system, shock = resolve_system(cfg)
    alpha = alpha or cfg.get("alpha", 0.1)
    os.makedirs(out, exist_ok=True)
    rng = np.random.default_rng(cfg.get("seed", 0))
    states = rng.normal(scale=0.3, size=(20, system.n))
    jac_err = system.check_jacobians(states)

    if shock is not None:
        lin = sysm.evaluate_linearization(system, shock)
        rh = sysm.rankine_hugoniot_residual(system, shock.u_minus,
                                            shock.u_plus, shock.sigma)
        lax = lp.lax_check(lin)
        cert = lp.certify_gap(lin, alpha)
        doc = cert.to_dict()
        doc["kind"] = "shock"
        doc["lax"] = lax.labels
        doc["checks"] = {"jacobian_fd_error": jac_err,
                         "rh_residual": float(np.abs(rh).max())}
        _write_spectra(out, lin.A_plus, lin.G_plus, "plus")
        _write_spectra(out, lin.A_minus, lin.G_minus, "minus")
        granted = cert.granted
    else:
        U0 = np.asarray(cfg.get("equilibrium", [0.0] * system.n), dtype=float)
        clin = gk.ConstantLin.from_system(system, U0)
        abscissa = spec.symbol_stability_sweep(clin.A, clin.G)
        dec = clin.decomp
        doc = {
            "kind": "constant",
            "alpha": alpha,
            "granted": bool(abscissa < -alpha),
            "margins": {"plus": -abscissa, "minus": -abscissa},
            "checks": {"jacobian_fd_error": jac_err,
                       "compensator_residual": dec.compensator_residual(),
                       "gamma_max": float(dec.gamma.max())},
        }
        _write_spectra(out, clin.A, clin.G, "equilibrium")
        granted = doc["granted"]

    validate_output("certificate.schema.json", doc)
    write_json(os.path.join(out, "certificate.json"), doc)
    log.info("analyze: granted=%s (alpha=%g)", granted, alpha)
    return 0 if granted else 3


def _write_spectra(out: str, A, G, tag: str):
    fs = spec.fourier_symbol_spectrum(A, G)
    n = fs.eigenvalues.shape[1]
    cols = [fs.xi]
    header = ["xi"]
    order = np.argsort(fs.eigenvalues.real, axis=1)
    eig_sorted = np.take_along_axis(fs.eigenvalues, order, axis=1)
    for j in range(n):
        header += [f"re_{j}", f"im_{j}"]
        cols += [eig_sorted[:, j].real, eig_sorted[:, j].imag]
    write_csv(os.path.join(out, f"spectrum_{tag}.csv"), header, cols)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _grid_config(cfg: dict) -> sim.SimConfig:
    g = cfg.get("grid", {})
    return sim.SimConfig(L=g.get("L", 12.0), h=g.get("h", 1 / 160),
                         T=g.get("T", 10.0), cfl=g.get("cfl", 0.45),
                         snapshot_stride=g.get("snapshot_stride", 8),
                         eps_run=g.get("eps_run", 0.5))


def _forcing(cfg: dict, p: int):
    f = cfg.get("forcing")
    if not f or f.get("kind") == "zero":
        return lambda t: np.zeros(p)
    phi0 = np.asarray(f["phi0"], dtype=float)
    beta = float(f["beta"])
    return lambda t: phi0 * np.exp(-beta * t)


def cmd_simulate(cfg: dict, out: str, alpha: float | None) -> int:
    system, shock = resolve_system(cfg)
    geometry = cfg.get("geometry", "shock" if shock is not None else "whole-line")
    scfg = _grid_config(cfg)
    V0, _ = resolve_perturbation(cfg, system)
    os.makedirs(out, exist_ok=True)

    compat = None
    if geometry == "shock":
        traces = sysm.PiecewiseTraces.from_grids(
            np.linspace(-scfg.L, 0, 401), V0(np.linspace(-scfg.L, 0, 401)),
            np.linspace(0, scfg.L, 401), V0(np.linspace(0, scfg.L, 401)))
        res = sysm.compatibility_residuals(system, shock, traces)
        compat = {"psi1": res.psi1, "psi2": res.psi2,
                  "r1_norm": float(np.linalg.norm(res.r1)),
                  "r2_norm": float(np.linalg.norm(res.r2))}
        traj = sim.simulate_shock(system, shock, V0, scfg)
    elif geometry == "half-line":
        U0 = np.asarray(cfg.get("equilibrium", [0.0] * system.n), dtype=float)
        phi = _forcing(cfg, system.p)
        traj = sim.simulate_ibvp(system, U0, phi, V0, scfg)
    else:
        U0 = np.asarray(cfg.get("equilibrium", [0.0] * system.n), dtype=float)
        traj = sim.simulate_constant(system, U0, V0, scfg)

    window = tuple(cfg.get("fit_window", (0.2 * scfg.T, 0.9 * scfg.T)))
    try:
        alpha_fit, r2 = sim.fit_decay_rate(traj.times, traj.norm_series("H2"),
                                           window)
    except ShockStabError:
        alpha_fit, r2 = None, None

    summary = {
        "geometry": geometry,
        "alpha_fit": alpha_fit,
        "r2": r2,
        "psi_inf": traj.psi_inf,
        "max_W1inf": float(traj.norm_series("W1inf").max()),
        "rh_residual_max": traj.rh_residual_max,
        "fit_window": list(window),
        "final_norms": {k: float(traj.norms[k][-1]) for k in traj.norms},
        "compatibility": compat,
        "events": traj.events,
    }
    validate_output("trajectory_summary.schema.json", summary)
    write_json(os.path.join(out, "summary.json"), summary)
    _write_series(out, traj)

    if cfg.get("monitor"):
        mon = cfg["monitor"]
        report = _monitor(traj, system, shock, cfg, mon, alpha)
        validate_output("energy_report.schema.json", report.to_dict())
        write_json(os.path.join(out, "energy.json"), report.to_dict())
        report.write_csv(os.path.join(out, "energy.csv"))
    log.info("simulate: alpha_fit=%s", alpha_fit)
    return 0


def _write_series(out: str, traj: sim.Trajectory):
    header = ["t"] + list(traj.norms)
    cols = [traj.times] + [traj.norms[k] for k in traj.norms]
    if traj.psi is not None:
        header += ["psi", "psi_prime", "psi_ddot"]
        cols += [traj.psi, traj.psi_prime, traj.psi_ddot]
    write_csv(os.path.join(out, "series.csv"), header, cols)


def _monitor(traj, system, shock, cfg, mon, alpha):
    factor = mon.get("alpha_prime_factor", 0.8)
    nonlinear = mon.get("nonlinear", True)
    if traj.geometry == "shock":
        lin = sysm.evaluate_linearization(system, shock)
        dp = spec.decompose(lin.A_plus, lin.G_plus)
        dm = spec.decompose(lin.A_minus, lin.G_minus)
        base_alpha = alpha or cfg.get("alpha", 0.2)
        ecfg = en.EnergyConfig.for_decomposition(dp, alpha_prime=factor * base_alpha,
                                                 nonlinear=nonlinear)
        return en.dissipation_monitor(traj, ecfg, dp, decomp_minus=dm,
                                      sys=system, shock=shock)
    U0 = np.asarray(cfg.get("equilibrium", [0.0] * system.n), dtype=float)
    clin = gk.ConstantLin.from_system(system, U0)
    base_alpha = alpha or cfg.get("alpha", -spec.symbol_stability_sweep(clin.A, clin.G))
    ecfg = en.EnergyConfig.for_decomposition(clin.decomp,
                                             alpha_prime=factor * base_alpha,
                                             nonlinear=nonlinear)
    phi = _forcing(cfg, system.p) if traj.geometry == "half-line" else None
    return en.dissipation_monitor(traj, ecfg, clin.decomp, sys=system,
                                  U_bar=U0, phi=phi)


# ---------------------------------------------------------------------------
# green
# ---------------------------------------------------------------------------

def cmd_green(cfg: dict, out: str, alpha: float | None) -> int:
    system, shock = resolve_system(cfg)
    os.makedirs(out, exist_ok=True)
    lap = cfg.get("laplace", {})
    U0 = np.asarray(cfg.get("equilibrium", [0.0] * system.n), dtype=float)
    clin = gk.ConstantLin.from_system(system, U0)
    abscissa = spec.symbol_stability_sweep(clin.A, clin.G)
    alpha = alpha or cfg.get("alpha", 0.8 * (-abscissa))
    eta = lap.get("eta") or -alpha
    R = lap.get("R", 200.0)
    N = lap.get("N", 800)
    times = lap.get("times", [0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0])

    z = np.linspace(-12.0, 12.0, 961)
    l1 = []
    err = []
    for t in times:
        res = gk.kernel_remainder(clin, t, z, eta, R=R, N=N)
        l1.append(float(np.trapezoid(np.abs(res.value).max(axis=(1, 2)), z)))
        err.append(res.error_estimate)
    write_csv(os.path.join(out, "remainder.csv"),
              ["t", "remainder_L1", "quadrature_error"],
              [np.array(times), np.array(l1), np.array(err)])
    rate = None
    if len(times) >= 3 and min(l1) > 0:
        try:
            rate, _ = sim.fit_decay_rate(np.array(times), np.array(l1),
                                         (times[0], times[-1]))
        except ShockStabError:
            rate = None
    summary = {"eta": eta, "R": R, "N": N, "alpha": alpha,
               "remainder_rate": rate,
               "remainder_max": max(l1), "quadrature_error_max": max(err)}
    write_json(os.path.join(out, "green.json"), summary)
    log.info("green: remainder decay rate=%s", rate)
    return 0


# ---------------------------------------------------------------------------
# symmetrizer / report
# ---------------------------------------------------------------------------

def cmd_symmetrizer(cfg: dict, out: str) -> int:
    seed = cfg.get("seed", 0)
    n_samples = cfg.get("samples", 1000)
    eps = cfg["system"].get("eps", 1e-2) if "system" in cfg else 1e-2
    report = smz.write_separation_report(out, seed=seed, n_samples=n_samples,
                                         eps=eps)
    validate_output("symmetrizer_report.schema.json", report)
    ok = (report["two_by_two"]["all_agree"]
          and report["three_by_three"]["spectrally_stable"]
          and not report["three_by_three"]["symmetrizable"])
    log.info("symmetrizer: separation reproduced=%s", ok)
    return 0 if ok else 3


def cmd_report(cfg: dict, out: str, alpha: float | None, jobs: int) -> int:
    """Full pipeline: analyze + simulate + monitor + green + figures."""
    os.makedirs(out, exist_ok=True)
    rc = cmd_analyze(cfg, out, alpha)
    cfg_sim = dict(cfg)
    cfg_sim.setdefault("monitor", {"alpha_prime_factor": 0.8, "nonlinear": True})
    cmd_simulate(cfg_sim, out, alpha)
    system, shock = resolve_system(cfg)
    if shock is None:
        cmd_green(cfg, out, alpha)
    _render_figures(cfg, out)
    return rc


def _render_figures(cfg: dict, out: str):
    """Matplotlib renderings of the delimited outputs, written alongside."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    def load_csv(name):
        path = os.path.join(out, name)
        if not os.path.exists(path):
            return None, None
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        if data.ndim == 1:
            data = data[None, :]
        return header, data

    for tag in ("plus", "minus", "equilibrium"):
        header, data = load_csv(f"spectrum_{tag}.csv")
        if header is None:
            continue
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        nbranch = (len(header) - 1) // 2
        for j in range(nbranch):
            ax.plot(data[:, 0], data[:, 1 + 2 * j], lw=1.0, label=f"branch {j}")
        ax.set_xlabel(r"$\xi$")
        ax.set_ylabel(r"Re $\lambda_j(\xi)$")
        ax.axhline(0.0, color="k", lw=0.6)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(os.path.join(out, f"fig_spectrum_{tag}.png"), dpi=150)
        plt.close(fig)

    header, data = load_csv("series.csv")
    if header is not None:
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for name in ("L2", "H2"):
            if name in header:
                ax.semilogy(data[:, 0], np.maximum(data[:, header.index(name)],
                                                   1e-300), label=name)
        ax.set_xlabel("t")
        ax.set_ylabel("norm")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(os.path.join(out, "fig_decay.png"), dpi=150)
        plt.close(fig)
        if "psi" in header:
            fig, ax = plt.subplots(figsize=(5.0, 3.4))
            ax.plot(data[:, 0], data[:, header.index("psi")], label=r"$\psi$")
            ax.plot(data[:, 0], data[:, header.index("psi_prime")],
                    label=r"$\psi'$")
            ax.set_xlabel("t")
            ax.legend(fontsize=8)
            fig.tight_layout()
            fig.savefig(os.path.join(out, "fig_phase.png"), dpi=150)
            plt.close(fig)

    header, data = load_csv("energy.csv")
    if header is not None:
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for j, name in enumerate(header[1:], start=1):
            ax.semilogy(data[:, 0], np.maximum(data[:, j], 1e-300), label=name)
        ax.set_xlabel("t")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(os.path.join(out, "fig_energy.png"), dpi=150)
        plt.close(fig)

    header, data = load_csv("remainder.csv")
    if header is not None:
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        ax.semilogy(data[:, 0], np.maximum(data[:, 1], 1e-300), "o-")
        ax.set_xlabel("t")
        ax.set_ylabel(r"$L^1$ kernel remainder")
        fig.tight_layout()
        fig.savefig(os.path.join(out, "fig_remainder.png"), dpi=150)
        plt.close(fig)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="shockstab",
        description="Spectral stability certification and nonlinear decay "
                    "runs for Riemann shocks of 1-D balance laws")
    ap.add_argument("command",
                    choices=["analyze", "simulate", "green", "symmetrizer",
                             "report"])
    ap.add_argument("--config", required=False, help="JSON run configuration")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--alpha", type=float, default=None,
                    help="requested decay rate")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--jobs", type=int, default=1)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("SHOCKSTAB_LOG", "INFO").upper(),
        format="%(name)s %(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    cfg = {"system": {"builtin": "burgers-bistable"}}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    try:
        cfg = validate_config(cfg)
    except Exception as exc:
        _emit_error(args.out, "InvalidConfig", str(exc))
        return 2
    if args.seed is not None:
        cfg["seed"] = args.seed

    try:
        os.makedirs(args.out, exist_ok=True)
        write_json(os.path.join(args.out, "manifest.json"),
                   {"command": args.command, "config": cfg,
                    "alpha": args.alpha, "jobs": args.jobs})
        if args.command == "analyze":
            return cmd_analyze(cfg, args.out, args.alpha)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, args.alpha)
        if args.command == "green":
            return cmd_green(cfg, args.out, args.alpha)
        if args.command == "symmetrizer":
            return cmd_symmetrizer(cfg, args.out)
        if args.command == "report":
            return cmd_report(cfg, args.out, args.alpha, args.jobs)
    except ShockStabError as exc:
        _emit_error(args.out, type(exc).__name__, str(exc))
        return 1
    return 0


def _emit_error(out: str, kind: str, message: str):
    try:
        os.makedirs(out, exist_ok=True)
        write_json(os.path.join(out, "error.json"),
                   {"error": kind, "message": message})
    except OSError:
        pass
    log.error("%s: %s", kind, message)


if __name__ == "__main__":
    sys.exit(main())
