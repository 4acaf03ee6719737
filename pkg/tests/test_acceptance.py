"""Acceptance criteria, one test per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL: ...`` line. The three
d = 3 trajectories are computed once per module and shared by criteria 4-8.
"""

import dataclasses
import math
import time
from pathlib import Path

import numpy as np
import pytest

from esbgk.entropy import KINDS, h_closed_form, h_functional
from esbgk.gaussians import build_gaussian
from esbgk.moments import corrected_tensor
from esbgk.phase_grid import DEFAULT_PROFILE, ModelParams, build_grid
from esbgk.scenario import load_scenario, mixture_state, parse_scenario
from esbgk.solver import decay_summary, run_homogeneous, run_transport, transport_step
from esbgk.sweeps import certify_sweep, refinement_study

SCENARIOS = Path(__file__).resolve().parent.parent / "examples" / "scenarios"

# Tolerances pinned by the acceptance criteria.
SWEEP_SAMPLES = 1000
SWEEP_GAP_FLOOR = -1e-12
SWEEP_RUNTIME = 5.0
EXPLICIT_RTOL = 1e-12
H_RTOL = 1e-3
REFINE_RATIO = (2.5, 6.0)
RUN_RUNTIME_D3 = 120.0
DECAY_MARGIN = 1.05
SLOPE_MARGIN = 0.95
L1_SLACK = 1e-3
TEMP_RTOL = 1e-6
CONS_RTOL = 1e-8
RUN_RUNTIME_D1 = 10.0
TRANSPORT_MASS_RTOL = 1e-10


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def _run(name, **overrides):
    sc = load_scenario(SCENARIOS / f"{name}.json")
    cfg = dataclasses.replace(sc.solver, track_entropy=True, **overrides)
    grid, f0 = sc.build()
    t0 = time.perf_counter()
    traj = run_homogeneous(f0, cfg, grid)
    return {"traj": traj, "params": sc.params, "cfg": cfg,
            "elapsed": time.perf_counter() - t0, "name": name}


@pytest.fixture(scope="module")
def run_a():
    return _run("bimodal_theta_pos")


@pytest.fixture(scope="module")
def run_b():
    return _run("bimodal_theta_zero")


@pytest.fixture(scope="module")
def run_c():
    return _run("bimodal_theta_zero_negative_nu")


# 1 -------------------------------------------------------------------------

def test_criterion_01_closed_form_certificate_sweep(capsys):
    pos = certify_sweep(SWEEP_SAMPLES, 2024, "theta_pos")
    zero = certify_sweep(SWEEP_SAMPLES, 2025, "theta_zero")
    elapsed = pos.elapsed + zero.elapsed
    ok = (pos.failures == 0 and zero.failures == 0
          and pos.min_gap >= SWEEP_GAP_FLOOR and zero.min_gap >= SWEEP_GAP_FLOOR
          and elapsed < SWEEP_RUNTIME)
    verdict(capsys, 1, ok,
            f"theta>0 min gap {pos.min_gap:.3e}, failures {pos.failures}; "
            f"theta=0 min gap {zero.min_gap:.3e}, failures {zero.failures}; {elapsed:.2f} s")


# 2 -------------------------------------------------------------------------

def test_criterion_02_explicit_theta_zero_difference(capsys):
    s = certify_sweep(SWEEP_SAMPLES, 2026, "theta_zero")
    ok = s.failures == 0 and s.explicit_mismatches == 0
    verdict(capsys, 2, ok,
            f"explicit vs generic H(M00)-H(M_nu0): {s.explicit_mismatches}/{s.n_samples} "
            f"states beyond {EXPLICIT_RTOL:g} relative, max relative difference "
            f"{s.max_explicit_rel_diff:.3e}")


# 3 -------------------------------------------------------------------------

def test_criterion_03_discrete_vs_closed_form_entropy(capsys):
    sc = load_scenario(SCENARIOS / "bimodal_theta_pos.json")
    p = sc.params
    state = mixture_state(sc.components(), p.delta)
    spec = sc.grid_spec()
    assert (spec.n_v, spec.n_I) == DEFAULT_PROFILE[3]
    grid = build_grid(spec, p)
    ct = corrected_tensor(state, p)
    worst = 0.0
    for kind in KINDS:
        H = h_closed_form(kind, state, ct, p)
        M = build_gaussian(kind, state, p, grid, ct=ct)
        worst = max(worst, abs(h_functional(M, grid) - H) / (1 + abs(H)))
    del M
    study = refinement_study(state, p, spec)
    ratios = study.ratios
    lo, hi = REFINE_RATIO
    ok = worst <= H_RTOL and all(lo <= r <= hi for r in ratios.values())
    verdict(capsys, 3, ok,
            f"max |H_disc - H_closed| / (1 + |H|) = {worst:.3e}; refinement ratios "
            + ", ".join(f"{k} {r:.3f}" for k, r in ratios.items()))


# 4 -------------------------------------------------------------------------

def _gap_summary(run):
    traj = run["traj"]
    margins = [r.theorem_gap + r.tolerances["tol_quad"] for r in traj.reports]
    return traj.failure is None and min(margins) >= 0, min(r.theorem_gap for r in traj.reports)


def test_criterion_04_theorem_along_trajectories(capsys, run_a, run_b, run_c):
    parts, ok = [], True
    for tag, run in (("a", run_a), ("b", run_b), ("c", run_c)):
        good, gmin = _gap_summary(run)
        good = good and run["elapsed"] <= RUN_RUNTIME_D3
        ok &= good
        parts.append(f"({tag}) min gap {gmin:.3e}, {len(run['traj'].times)} stamps, "
                     f"{run['elapsed']:.1f} s")
    verdict(capsys, 4, ok, "; ".join(parts))


# 5 -------------------------------------------------------------------------

def test_criterion_05_exponential_decay(capsys, run_a, run_b, run_c):
    p = run_a["params"]
    traj = run_a["traj"]
    t = np.array(traj.times)
    A0 = traj.reports[0].A
    rel = traj.column("rel_H01")
    ratio = float(np.max(rel / (np.exp(-p.theta * A0 * t) * rel[0])))
    slope = decay_summary(traj, p)["fitted_log_slope"]
    ok_a = ratio <= DECAY_MARGIN and slope <= -p.theta * A0 * SLOPE_MARGIN
    parts = [f"(a) max rel_H01 / envelope {ratio:.4f}, fitted slope {slope:.3f} "
             f"vs -theta A {-p.theta * A0:.3f}"]
    ok = ok_a
    for tag, run in (("b", run_b), ("c", run_c)):
        q, tr = run["params"], run["traj"]
        t = np.array(tr.times)
        A0 = tr.reports[0].A
        c = min(1 - q.nu, 1 + 2 * q.nu)
        bound = np.exp(-0.5 * A0 * c * t) * math.sqrt(2 * tr.reports[0].rel_H00) + L1_SLACK
        excess = float(np.max(tr.column("l1_to_target") - bound))
        ok &= excess <= 0
        parts.append(f"({tag}) max L1 - bound {excess:.3e}")
    verdict(capsys, 5, ok, "; ".join(parts))


# 6 -------------------------------------------------------------------------

def test_criterion_06_temperature_dichotomy(capsys, run_a, run_b, run_c):
    ok, parts = True, []
    for tag, run in (("b", run_b), ("c", run_c)):
        tr = run["traj"]
        T_tr, T_int = tr.column("T_tr"), tr.column("T_int")
        d_tr = float(np.max(np.abs(T_tr - T_tr[0])) / T_tr[0])
        d_int = float(np.max(np.abs(T_int - T_int[0])) / T_int[0])
        ok &= d_tr <= TEMP_RTOL and d_int <= TEMP_RTOL
        parts.append(f"({tag}) T_tr drift {d_tr:.2e}, T_int drift {d_int:.2e}")
    p, tr = run_a["params"], run_a["traj"]
    t = np.array(tr.times)
    A0 = tr.reports[0].A
    dev = np.abs(tr.column("T_tr") - tr.column("T_delta"))
    ratio = float(np.max(dev / (np.exp(-p.theta * A0 * t) * dev[0])))
    ok &= ratio <= DECAY_MARGIN
    parts.append(f"(a) max |T_tr - T_delta| / envelope {ratio:.4f}")
    verdict(capsys, 6, ok, "; ".join(parts))


# 7 -------------------------------------------------------------------------

def test_criterion_07_conservation(capsys, run_a):
    tr = run_a["traj"]
    n_steps = round(tr.times[-1] / run_a["cfg"].dt)
    worst = {k: max(d[k] for d in tr.drifts) for k in ("mass_drift", "mom_drift", "energy_drift")}
    ok = (n_steps >= 1000 and run_a["cfg"].scheme == "exponential"
          and all(v < CONS_RTOL for v in worst.values()))
    verdict(capsys, 7, ok, f"{n_steps} steps; " + ", ".join(f"{k} {v:.2e}" for k, v in worst.items()))


# 8 -------------------------------------------------------------------------

def test_criterion_08_h_theorem(capsys, run_a, run_b, run_c):
    ok, parts = True, []
    for tag, run in (("a", run_a), ("b", run_b), ("c", run_c)):
        tr = run["traj"]
        H = np.array(tr.step_entropy)
        tol = min(r.tolerances["tol_quad"] for r in tr.reports)
        rise = float(np.max(np.diff(H)))
        ok &= len(H) == len(set(tr.step_times)) and rise <= tol
        parts.append(f"({tag}) max step increase {rise:.2e} over {len(H) - 1} steps")
    verdict(capsys, 8, ok, "; ".join(parts))


# 9 -------------------------------------------------------------------------

def test_criterion_09_one_dimensional_velocity(capsys):
    doc = {
        "params": {"d": 1, "delta": 2, "nu": 0.5, "theta": 0.5, "mu": 1},
        "initial": {"family": "bimodal", "components": [
            {"rho": 0.5, "U": [0.8], "Theta": [0.6], "T_int": 0.7},
            {"rho": 0.5, "U": [-0.8], "Theta": [1.1], "T_int": 1.3}]},
        "solver": {"dt": 0.01, "t_end": 10.0, "report_every": 20},
    }
    sc = parse_scenario(doc)
    grid, f0 = sc.build()
    assert grid.shape == DEFAULT_PROFILE[1]
    t0 = time.perf_counter()
    tr = run_homogeneous(f0, sc.solver, grid)
    elapsed = time.perf_counter() - t0
    good, gmin = _gap_summary({"traj": tr})
    factor = tr.reports[0].theorem_factor
    ok = good and elapsed < RUN_RUNTIME_D1 and factor == 0.5
    verdict(capsys, 9, ok, f"d=1 min gap {gmin:.3e} over {len(tr.times)} stamps, {elapsed:.2f} s")


# 10 ------------------------------------------------------------------------

def test_criterion_10_transport_smoke(capsys):
    sc = load_scenario(SCENARIOS / "transport_1d.json")
    grid, F0 = sc.build()
    out = run_transport(F0, sc.solver, grid)
    m = np.array(out.total_mass)
    drift = float(np.max(np.abs(m - m[0])) / m[0])
    finite = all(np.all(np.isfinite(h)) for h in out.cell_H)
    uniform = np.stack([F0[0]] * sc.solver.transport.n_x)
    fixed = np.array_equal(transport_step(uniform, sc.solver, grid), uniform)
    ok = out.failure is None and drift <= TRANSPORT_MASS_RTOL and finite and fixed
    verdict(capsys, 10, ok, f"mass drift {drift:.2e} over {len(m) - 1} reports, "
            f"cell H finite {finite}, uniform fixed point {fixed}")
