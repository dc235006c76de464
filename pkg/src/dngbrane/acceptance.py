"""The twelve acceptance criteria as runnable checks.

Each ``criterion_N`` returns a :class:`CriterionResult` with the measured
values and thresholds.  Expensive evolutions are cached per process;
:func:`clear_cache` drops them.
"""

from __future__ import annotations

import functools
import math
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import adm_dynamics as adm
from . import gauss_bonnet as gb
from . import symplectic as sy
from .background import minkowski
from .charges import conservation_monitor, total_momentum
from .grid_core import Grid
from .scenarios_cli import ScenarioConfig, build_initial_data, evolve_config
from .worldvolume_geometry import gauss_weingarten_residual


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict
    thresholds: dict
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        from .scenarios_cli import _clean
        return _clean({"number": self.number, "name": self.name, "passed": self.passed,
                       "measured": self.measured, "thresholds": self.thresholds,
                       "notes": list(self.notes)})

    def line(self) -> str:
        shown = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items()
                          if isinstance(v, (int, float, str, bool, np.floating)))
        return f"criterion {self.number:2d} [{'PASS' if self.passed else 'FAIL'}] {self.name}: {shown}"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.3e}"
    return str(v)


# --------------------------------------------------------------------------- shared runs

@functools.lru_cache(maxsize=None)
def collapse_run(n: int = 256, dtau: float = 1e-3, record_every: int = 10) -> adm.Trajectory:
    cfg = ScenarioConfig("collapsing_circle", n=(n,), dtau=dtau, record_every=record_every)
    return evolve_config(cfg)


@functools.lru_cache(maxsize=None)
def rotating_run(n: int = 256, dtau: float = 1e-3, record_every: int = 10) -> adm.Trajectory:
    cfg = ScenarioConfig("rotating_folded_string", n=(n,), dtau=dtau, record_every=record_every)
    return evolve_config(cfg)


@functools.lru_cache(maxsize=None)
def builtin_run(scenario: str, p: int = 1) -> adm.Trajectory:
    n = (128,) if p == 1 else (24, 24)
    cfg = ScenarioConfig(scenario, p=p, n=n, dtau=2e-3, tau_end=0.5, record_every=10)
    return evolve_config(cfg)


def shipped_trajectories() -> dict:
    return {
        "collapsing_circle": collapse_run(),
        "rotating_folded_string": rotating_run(),
        "flat_static_brane_p1": builtin_run("flat_static_brane", 1),
        "flat_static_brane_p2": builtin_run("flat_static_brane", 2),
        "wavy_flat_string": builtin_run("wavy_flat_string", 1),
    }


def clear_cache() -> None:
    for fn in (collapse_run, rotating_run, builtin_run, _circle_nearby):
        fn.cache_clear()


# --------------------------------------------------------------------------- criteria

def criterion_1(tol_scale=1.0, seed=0) -> CriterionResult:
    tol = 1e-8 * tol_scale
    worst = {name: max(d["mass_shell"] for d in t.diagnostics) for name, t in shipped_trajectories().items()}
    m = max(worst.values())
    return CriterionResult(1, "mass shell along every trajectory", m < tol,
                           {"max_mass_shell": m, **{f"mass_shell_{k}": v for k, v in worst.items()}},
                           {"mass_shell": tol})


def criterion_2(tol_scale=1.0, seed=0) -> CriterionResult:
    tol = 1e-6 * tol_scale
    t = collapse_run()
    f0 = max(d["F0"] for d in t.diagnostics)
    fa = max(d["FA"] for d in t.diagnostics)
    return CriterionResult(2, "constraint preservation (collapsing circle, 256 points)",
                           max(f0, fa) < tol, {"max_F0": f0, "max_FA": fa, "tau_final": float(t.taus[-1]),
                                               "truncated": t.truncated}, {"constraints": tol},
                           [t.truncation_reason] if t.truncated else [])


def _analytic_circle_rhs_residual(n: int, tau: float = 0.7) -> float:
    """Residual of the grid Hamilton equations on the exact collapsing circle."""
    grid = Grid((n,), dtau=1e-3)
    u = grid.axis(0)
    R, Rd = math.cos(tau), -math.sin(tau)
    X = np.stack([np.full(n, tau), R * np.cos(u), R * np.sin(u), 0 * u], -1)
    vel = np.stack([np.ones(n), Rd * np.cos(u), Rd * np.sin(u), 0 * u], -1)
    state = adm.state_from_velocity(X, vel, grid, minkowski(4), 1.0, tau)
    xdot, pdot = adm.hamilton_rhs(state, adm.GaugeChoice())
    # exact: phat = (1, sin τ cos u, sin τ sin u, 0), so d phat / dτ = (0, cos τ cos u, cos τ sin u, 0)
    pdot_exact = np.stack([0 * u, math.cos(tau) * np.cos(u), math.cos(tau) * np.sin(u), 0 * u], -1)
    return max(float(np.max(np.abs(pdot - pdot_exact))), float(np.max(np.abs(xdot - vel))))


def criterion_3(tol_scale=1.0, seed=0) -> CriterionResult:
    tol = 1e-4 * tol_scale
    t = collapse_run()
    u = t.grid.axis(0)
    R = np.cos(t.taus)
    err = max(float(np.max(np.abs(t.X[j][:, 1] - R[j] * np.cos(u))))
              for j in range(len(t))) if len(t) else math.inf
    err = max(err, max(float(np.max(np.abs(t.X[j][:, 2] - R[j] * np.sin(u)))) for j in range(len(t))))
    r128, r256 = _analytic_circle_rhs_residual(128), _analytic_circle_rhs_residual(256)
    ratio = r128 / r256
    ok = err < tol and 3.5 <= ratio <= 4.5
    return CriterionResult(3, "analytic collapse R(τ) = R0 cos(τ/R0)", ok,
                           {"max_abs_error": err, "tau_final": float(t.taus[-1]),
                            "oracle_residual_128": r128, "oracle_residual_256": r256,
                            "oracle_ratio": ratio},
                           {"abs_error": tol, "oracle_ratio": [3.5, 4.5]})


def _random_state(rng, n=32):
    grid = Grid((n,), dtau=1e-3)
    u = grid.axis(0)
    X = np.zeros((n, 4))
    R = 1.0 + 0.2 * sum(rng.normal() * np.cos(m * u + rng.uniform(0, 2 * np.pi)) / m for m in (2, 3))
    X[:, 0] = rng.normal() * 0.1
    X[:, 1], X[:, 2] = R * np.cos(u), R * np.sin(u)
    X[:, 3] = 0.1 * rng.normal() * np.sin(u + rng.uniform(0, 2 * np.pi))
    vel = np.zeros_like(X)
    vel[:, 0] = 1.0
    for mu in (1, 2, 3):
        vel[:, mu] = 0.3 * rng.normal() * np.cos(rng.integers(0, 3) * u + rng.uniform(0, 2 * np.pi))
    return adm.state_from_velocity(X, vel, grid, minkowski(4), float(rng.uniform(0.5, 2.0)))


def criterion_4(tol_scale=1.0, seed=0) -> CriterionResult:
    tol = 1e-12 * tol_scale
    rng = np.random.default_rng(seed)
    worst = 0.0
    kinds = ("temporal", "unit_lapse", "custom")
    for i in range(100):
        state = _random_state(rng)
        kind = kinds[i % 3]
        lapse = 1.0 + 0.5 * rng.uniform(size=state.grid.shape) if kind == "custom" else 1.0
        shift = 0.2 * rng.normal(size=state.grid.shape + (1,))
        gauge = adm.GaugeChoice(kind=kind, lapse=lapse, shift=shift)
        xdot, _ = adm.hamilton_rhs(state, gauge)
        _, sqrt_h = state.spatial_metric()
        eta = -state.phat_up() / (state.alpha * sqrt_h[..., None])
        _, _, N, NA = adm.multipliers_from_gauge(gauge, state)
        expected = N[..., None] * eta + np.einsum("...A,...Am->...m", NA, state.eps)
        worst = max(worst, float(np.max(np.abs(xdot - expected)) / max(1.0, np.max(np.abs(expected)))))
    return CriterionResult(4, "multiplier identity lambda = N/(2 alpha sqrt h), lambda^A = N^A",
                           worst < tol, {"max_deviation": worst, "states": 100}, {"deviation": tol})


def criterion_5(tol_scale=1.0, seed=0) -> CriterionResult:
    tol = 1e-8 * tol_scale
    worst = {}
    gauge = adm.GaugeChoice()
    for name, t in shipped_trajectories().items():
        w = 0.0
        for s in t.states():
            lam, lamA, _, _ = adm.multipliers_from_gauge(gauge, s)
            w = max(w, abs(adm.hamiltonian(s, lam, lamA)) / (s.alpha * s.grid.volume))
        worst[name] = w
    m = max(worst.values())
    return CriterionResult(5, "vanishing Hamiltonian on shell", m < tol,
                           {"max_H_rel": m, **{f"H_{k}": v for k, v in worst.items()}}, {"H_rel": tol})


def criterion_6(tol_scale=1.0, seed=0) -> CriterionResult:
    tp, tm, tr = 1e-6 * tol_scale, 1e-5 * tol_scale, 1e-10 * tol_scale
    measured, ok = {}, True
    for name, t in (("collapsing_circle", collapse_run()), ("rotating_folded_string", rotating_run())):
        mon = conservation_monitor(t)
        route = 0.0
        for s in t.states():
            _, routes = total_momentum(s, check_routes=False)
            scale = max(1.0, float(np.max(np.abs(routes["adm"]))))
            route = max(route, float(np.max(np.abs(routes["adm"] - routes["worldvolume"]))) / scale,
                        float(np.max(np.abs(routes["adm"] - routes["canonical"]))) / scale)
        measured[f"P_drift_rel_{name}"] = mon["P_drift_rel"]
        measured[f"M_drift_rel_{name}"] = mon["M_drift_rel"]
        measured[f"route_mismatch_{name}"] = route
        ok &= mon["P_drift_rel"] < tp and mon["M_drift_rel"] < tm and route < tr
    return CriterionResult(6, "charge conservation and momentum route equivalence", bool(ok), measured,
                           {"P_drift_rel": tp, "M_drift_rel": tm, "routes": tr})


def criterion_7(tol_scale=1.0, seed=0) -> CriterionResult:
    n = 8
    state = build_initial_data(ScenarioConfig("collapsing_circle", n=(n,)))
    grid, X, p = state.grid, state.X, state.phat
    B = sy.bracket_matrix(X, p, grid)
    expected = sy.canonical_bracket_realization(X.size, grid.measure)
    table_err = float(np.max(np.abs(B - expected)))
    # independent route: brackets of point functionals through their gradients
    point_err = 0.0
    for j in range(n):
        for k in range(n):
            for mu in range(4):
                for nu in range(4):
                    xp = sy.poisson_bracket(sy.point_X(mu, j), sy.point_phat(nu, k), X, p, grid)
                    xx = sy.poisson_bracket(sy.point_X(mu, j), sy.point_X(nu, k), X, p, grid)
                    pp = sy.poisson_bracket(sy.point_phat(mu, j), sy.point_phat(nu, k), X, p, grid)
                    want = (mu == nu) * (j == k) / grid.measure
                    point_err = max(point_err, abs(xp - want), abs(xx), abs(pp))
    tol = 4 * np.finfo(float).eps / grid.measure * tol_scale
    ok = table_err <= tol and point_err <= tol
    return CriterionResult(7, "canonical brackets equal the Kronecker/measure realization", ok,
                           {"table_max_error": table_err, "pointwise_max_error": point_err,
                            "entries": int(B.size)}, {"max_error": tol})


def criterion_8(tol_scale=1.0, seed=0) -> CriterionResult:
    tol = 1e-6 * tol_scale
    states = {"collapsing_circle": collapse_run().state(5),
              "rotating_folded_string": rotating_run().state(7)}
    measured, literal_ok, standard_ok = {}, True, True
    for name, s in states.items():
        r = sy.poincare_algebra_check(s.X, s.phat, s.grid, tol)
        measured[f"MM_literal_{name}"] = r["MM_literal"]
        measured[f"MM_standard_{name}"] = r["MM_standard"]
        measured[f"MP_{name}"] = r["MP"]
        measured[f"PP_{name}"] = r["PP"]
        common = max(r["MP"], r["PP"])
        literal_ok &= max(r["MM_literal"], common) < tol
        standard_ok &= max(r["MM_standard"], common) < tol
    measured["convention"] = ("both" if literal_ok and standard_ok else "literal" if literal_ok
                              else "standard" if standard_ok else "neither")
    return CriterionResult(8, "Poincaré algebra closure", bool(literal_ok or standard_ok), measured,
                           {"residual": tol},
                           ["passes when one sign convention holds on every state"])


@functools.lru_cache(maxsize=None)
def _circle_nearby(eps: float, n: int = 64, dtau: float = 2e-3, steps: int = 500, record_every: int = 50):
    """Nearby-solution perturbations of the collapsing circle: radius shift and radial kick."""
    cfg = ScenarioConfig("collapsing_circle", n=(n,), dtau=dtau, steps=steps, record_every=record_every)
    base = evolve_config(cfg)
    grid = base.grid
    u = grid.axis(0)
    radial = np.zeros(grid.shape + (4,))
    radial[:, 1], radial[:, 2] = np.cos(u), np.sin(u)
    shifted = evolve_config(cfg, build_initial_data(cfg, displacement=eps * radial))
    kicked = evolve_config(cfg, build_initial_data(cfg, velocity_kick=-eps * radial))
    return (sy.Perturbation.nearby(base, shifted, eps), sy.Perturbation.nearby(base, kicked, eps), grid)


def criterion_9(tol_scale=1.0, seed=0) -> CriterionResult:
    t_wave, t_near = 1e-8 * tol_scale, 1e-3 * tol_scale
    grid = Grid((64,), dtau=0.05)
    taus = np.arange(41) * 0.05
    rng = np.random.default_rng(seed)
    wave_dev = 0.0
    for k, direction in ((1, 2), (3, 3)):
        w1 = sy.transverse_wave(grid, taus, k, direction, phase=float(rng.uniform(0, 2 * np.pi)))
        w2 = sy.transverse_wave(grid, taus, k, direction, phase=float(rng.uniform(0, 2 * np.pi)))
        r = sy.slice_independence_check(w1, w2, grid)
        wave_dev = max(wave_dev, 0.0 if r["degenerate"] else r["deviation"])
    devs = {}
    for eps in (1e-4, 5e-5):
        d1, d2, g = _circle_nearby(eps)
        r = sy.slice_independence_check(d1, d2, g)
        devs[eps] = r["deviation"]
    ratio = devs[1e-4] / devs[5e-5]
    ok = wave_dev < t_wave and devs[1e-4] < t_near and 1.6 <= ratio <= 2.4
    return CriterionResult(9, "slice independence of the symplectic form", ok,
                           {"transverse_wave_deviation": wave_dev, "nearby_deviation_eps_1e-4": devs[1e-4],
                            "nearby_deviation_eps_5e-5": devs[5e-5], "halving_ratio": ratio},
                           {"transverse_wave": t_wave, "nearby": t_near, "halving_ratio": [1.6, 2.4]})


def analytic_circle_worldsheet(n: int, dtau: float, T: int, tau0: float = 0.6, R0: float = 1.0):
    """Exact collapsing-circle worldsheet in the X^0 = τ gauge."""
    grid = Grid((n,), dtau=dtau)
    u = grid.axis(0)
    taus = tau0 + (np.arange(T) - T // 2) * dtau
    R = R0 * np.cos(taus / R0)
    X = np.zeros((T, n, 4))
    X[..., 0] = taus[:, None]
    X[..., 1] = R[:, None] * np.cos(u)
    X[..., 2] = R[:, None] * np.sin(u)
    return X, grid, taus


def criterion_10(tol_scale=1.0, seed=0) -> CriterionResult:
    res = {}
    for n in (64, 128, 256):
        X, grid, _ = analytic_circle_worldsheet(n, 2 * np.pi / n, 7)
        res[n] = gauss_weingarten_residual(X, grid, minkowski(4), 3)
    measured = {}
    ok = True
    for key in ("gauss", "weingarten"):
        for a, b in ((64, 128), (128, 256)):
            ratio = res[a][key] / res[b][key]
            measured[f"{key}_ratio_{a}_{b}"] = ratio
            ok &= 3.5 <= ratio <= 4.5
        measured[f"{key}_residual_256"] = res[256][key]
    return CriterionResult(10, "Gauss-Weingarten residual converges at second order", bool(ok), measured,
                           {"ratio": [3.5, 4.5]})


def _flat_worldsheet(n=64, dtau=0.1, T=7, shift=None):
    grid = Grid((n,), dtau=dtau)
    u = grid.axis(0)
    taus = np.arange(T) * dtau
    X = np.zeros((T, n, 4))
    X[..., 0] = taus[:, None]
    X[..., 1] = u[None]
    if shift is not None:
        X = X + shift
    winding = np.zeros((1, 4))
    winding[0, 1] = grid.lengths[0]
    return X, grid, winding


def criterion_11(tol_scale=1.0, seed=0) -> CriterionResult:
    bg = minkowski(4)
    # round-off in coordinate differences is amplified by two grid derivatives (about 1/du^2)
    t_zero, t_round, t_gauge, t_route = 1e-12, 1e-13 * tol_scale, 1e-8 * tol_scale, 1e-3 * tol_scale
    # flat worldsheet and rigid translations
    X, grid, W = _flat_worldsheet()
    flat = gb.worldsheet_geometry(X, grid, bg, W)
    moved = [gb.worldsheet_geometry(_flat_worldsheet(shift=s)[0], grid, bg, W)
             for s in (np.array([0, 0.3, -0.2, 0.1]), np.array([0.5, 0, 0, 0.7]))]
    # rigid translations are exact symmetries, so a unit amplitude needs no small-ε limit
    da, db = (gb.Deformation(flat, m, 1.0) for m in moved)
    flat_zero = max(float(np.max(np.abs(flat.rho))), float(np.max(np.abs(gb.gb_potential_route_rho(da)))),
                    float(np.max(np.abs(gb.gb_potential_route_connection(da)))),
                    max(abs(gb.gb_symplectic_eval(da, db, j)) for j in range(len(X))))
    # collapsing-circle worldsheet and its radial deformation
    eps = 1e-4
    Xc, gc, taus = analytic_circle_worldsheet(64, 0.02, 50, tau0=0.7)
    base = gb.worldsheet_geometry(Xc, gc, bg)
    Xp, _, _ = analytic_circle_worldsheet(64, 0.02, 50, tau0=0.7, R0=1.0 + eps)
    radial = gb.Deformation(base, gb.worldsheet_geometry(Xp, gc, bg), eps)
    proj = gb.project_connection(base.connection, base.eps_mixed)
    round_trip = float(np.max(np.abs(gb.project_connection(proj, base.eps_mixed) - proj)))
    rho24 = gb.rho_from_connection(base.connection, base.eps_mixed)
    rho_consistency = float(np.max(np.abs(rho24 - base.rho)))
    # frame-gauge invariance
    u = gc.axis(0)
    theta = np.sin(u)[None] + 0.3 * np.cos(2 * u[None] + taus[:, None])
    gauge = gb.frame_gauge_deformation(base, theta, eps)
    inv = max(abs(gb.gb_symplectic_eval(radial, gauge, j)) for j in range(1, len(taus) - 1))
    psi_gauge = float(np.max(np.abs(gb.gb_potential_route_rho(gauge)[..., 0].sum(axis=-1) * gc.measure)))
    cmp = gb.route_comparison(radial)
    ok = (flat_zero <= t_zero and round_trip <= t_round and rho_consistency <= t_round
          and inv < t_gauge and cmp["relative_error_a"] < t_route)
    return CriterionResult(
        11, "Gauss-Bonnet pair: flat zero, round trip, gauge invariance, cross-route", bool(ok),
        {"flat_max_abs": flat_zero, "round_trip": round_trip, "rho_contracted_vs_spin_connection": rho_consistency,
         "gauge_invariance": inv, "pure_gauge_psi_tau_integral": psi_gauge,
         "route_rel_error_reading_a": cmp["relative_error_a"], "kappa_reading_a": cmp["kappa_a"],
         "route_rel_error_reading_b": cmp["relative_error_b"], "kappa_reading_b": cmp["kappa_b"],
         "beta": cmp["beta"]},
        {"flat": t_zero, "round_trip": t_round, "gauge": t_gauge, "cross_route": t_route},
        ["cross-route agreement is judged on reading a; reading b is reported only"])


DETERMINISM_CONFIG = """\
scenario = "collapsing_circle"
[grid]
n = 96
[evolution]
dtau = 2e-3
tau_end = 0.3
record_every = 10
[perturbation]
enabled = true
[checks]
acceptance = [4, 7]
"""


def criterion_12(tol_scale=1.0, seed=0) -> CriterionResult:
    from .scenarios_cli import parse_config, verify

    cfg = replace(parse_config(DETERMINISM_CONFIG), seed=seed)
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        for i in range(2):
            out = Path(tmp) / f"run{i}"
            verify(cfg, out, tol_scale)
            blobs.append({p.relative_to(out).as_posix(): p.read_bytes()
                          for p in sorted(out.rglob("*")) if p.is_file()})
    same = blobs[0] == blobs[1]
    differing = sorted(k for k in blobs[0] if blobs[0].get(k) != blobs[1].get(k))
    return CriterionResult(12, "determinism of verify outputs", same,
                           {"files_compared": len(blobs[0]), "identical": same},
                           {"identical": True}, [f"differs: {d}" for d in differing])


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 13)}


def run_criteria(numbers=None, tol_scale: float = 1.0, seed: int = 0) -> list:
    numbers = range(1, 13) if numbers is None else numbers
    return [CRITERIA[i](tol_scale=tol_scale, seed=seed) for i in numbers]
