"""Acceptance suite: one test per criterion, each printing a pass/fail line.

The heavy runs (criteria 5-8) use the grids and horizons stated with the
criteria, so the whole module takes tens of minutes on one core.
"""
import math
import time

import numpy as np
import pytest

from homlab import diag
from homlab.cli import parse_config, sweep
from homlab.cutoffs import build_cutoffs
from homlab.fields import VelocityHierarchy, exact_flow, taylor_error_series, taylor_flow, velocity
from homlab.grid import GridField2D, spectral
from homlab.homogen import stability_compare, two_scale_compare
from homlab.params import desk_preset
from homlab.pdesolver import SolverConfig, energy_identity_residual, sample_umax, solve

from conftest import record, sin_mode

DESK = desk_preset()
DESK_MU2 = VelocityHierarchy(DESK, 256, 2, min_ppw=3).gens[2].mu_q


def smooth_datum(N):
    x1, x2 = spectral(N).grid()
    return np.sin(2 * np.pi * x1) + np.cos(2 * np.pi * x2)


# -- 1 ------------------------------------------------------------------------------

def test_criterion_01_heat_oracle():
    N, kappa, T = 64, 1e-2, 1.0
    t0 = time.perf_counter()
    f, tr = solve(sin_mode(N), None, kappa, T, SolverConfig(N=N))
    wall = time.perf_counter() - t0
    err = float(np.max(np.abs(f.values - math.exp(-4 * math.pi ** 2 * kappa * T) * sin_mode(N))))
    derr = abs(tr.D - 0.25 * (1 - math.exp(-8 * math.pi ** 2 * kappa * T)))
    ok = err <= 1e-10 and derr <= 1e-8 and wall < 1.0
    record(1, ok, f"field err {err:.2e} (<=1e-10), dissipation err {derr:.2e} (<=1e-8), "
                  f"{wall:.2f}s (<1s)")
    assert ok


# -- 2 ------------------------------------------------------------------------------

def energy_run(N, T, cfl):
    hier = VelocityHierarchy(DESK, N, 2, min_ppw=3)
    vel = hier.velocity_field(2)
    cfg = SolverConfig(N=N, cfl=cfl, mu_active=hier.gens[2].mu_q,
                       u_scale=sample_umax(vel, 0.0, T))
    _, tr = solve(smooth_datum(N), vel, hier.gens[0].kappa_q, T, cfg)
    return energy_identity_residual(tr), tr.steps


def test_criterion_02_energy_identity():
    t0 = time.perf_counter()
    res, steps = energy_run(256, 0.5, 0.07)
    wall = time.perf_counter() - t0
    # order under simultaneous (N, dt) refinement on a horizon of half a mu_2 period
    T_short = 0.5 / DESK_MU2
    r1, _ = energy_run(256, T_short, 0.4)
    r2, _ = energy_run(512, T_short, 0.4)
    order = math.log2(r1 / r2)
    ok = res <= 1e-6 and order >= 2 and wall < 120
    record(2, ok, f"residual {res:.2e} (<=1e-6) in {steps} steps, order {order:.2f} (>=2), "
                  f"{wall:.0f}s (<120s)")
    assert ok



# -- 3 ------------------------------------------------------------------------------

def test_criterion_03_field_invariants():
    t0 = time.perf_counter()
    fam = build_cutoffs()
    hier = VelocityHierarchy(DESK, 256, 2, family=fam, min_ppw=3)
    div = 0.0
    for t in np.linspace(0.01, 0.99, 15):
        for q in (1, 2):
            for br in ("u", "v"):
                div = max(div, velocity(hier, q, br, float(t)).divergence_ratio())
    anchor = 0.0
    for q in (1, 2) if hier.gens[3] is not None else (1,):
        for iota in (1, 2, 5):
            ta = hier.anchor(q, iota)
            anchor = max(anchor, exact_flow(hier, q, iota, ta).sup_disp(),
                         taylor_flow(hier, q, iota, ta, 2).sup_disp())
    rng = np.random.default_rng(0)
    pou = max(abs(sum(w for _, w in fam.weights(tau)) - 1.0) for tau in rng.uniform(-10, 10, 2000))
    pou = max(pou, float(np.max(np.abs(fam.etaTilde.samples
                                        + np.roll(fam.etaTilde.samples, fam.M) - 1.0))))
    norm = max(abs(np.mean(e.samples ** 2) * 0.5 - 1.0) for e in (fam.eta1, fam.eta2))
    prod = float(np.max(np.abs(fam.eta1.samples * fam.eta2.samples)))
    wall = time.perf_counter() - t0
    ok = div <= 1e-10 and anchor == 0.0 and pou <= 1e-12 and norm <= 1e-8 and prod <= 1e-14 \
        and wall < 10
    record(3, ok, f"div {div:.1e}, anchor {anchor:.1e}, partition {pou:.1e}, "
                  f"normalization {norm:.1e}, eta1*eta2 {prod:.1e}, {wall:.1f}s (<10s)")
    assert ok


# -- 4 ------------------------------------------------------------------------------

def test_criterion_04_taylor_convergence():
    t0 = time.perf_counter()
    hier = VelocityHierarchy(DESK, 256, 1)
    g = hier.gens[1]
    bound = 2 * g.sqrt_delta * g.lambda_q / hier.mu_next(1)
    iota, t, errs = taylor_error_series(hier, 1, [1, 2, 3, 4])
    ratios = [b / a for a, b in zip(errs, errs[1:])]
    wall = time.perf_counter() - t0
    ok = all(r < 1 for r in ratios) and all(r <= bound for r in ratios) and wall < 60
    record(4, ok, f"errors {['%.2e' % e for e in errs]}, ratios {['%.3f' % r for r in ratios]} "
                  f"(<= {bound:.3f}), {wall:.1f}s (<60s)")
    assert ok


# -- 5 ------------------------------------------------------------------------------

def test_criterion_05_eddy_diffusivity():
    N = 512
    t0 = time.perf_counter()
    hier = VelocityHierarchy(DESK, N, 1)
    g = hier.gens[1]
    kappa = g.sqrt_delta / g.lambda_q
    kbar = 2 * kappa
    amps = []
    obs = lambda t, R: amps.append((t, abs(R[0][1, 0]), abs(R[0][0, 1])))
    cfg = SolverConfig(N=N, mu_active=g.mu_q, snapshot_every=1 / g.mu_q)
    solve(smooth_datum(N), hier.velocity_field(1), kappa, 4 / g.mu_q, cfg, observers=[obs])
    a = np.array(amps)
    pred = 4 * math.pi ** 2 * kbar
    rates = [-np.polyfit(a[:, 0], np.log(a[:, c]), 1)[0] for c in (1, 2)]
    rel = [r / pred - 1 for r in rates]
    wall = time.perf_counter() - t0
    ok = all(abs(x) <= 0.10 for x in rel) and wall < 300
    record(5, ok, f"rates {rates[0]:.4f}, {rates[1]:.4f} vs 4pi^2 kbar = {pred:.4f} "
                  f"({rel[0]:+.1%}, {rel[1]:+.1%}; <=10%), {wall:.0f}s (<300s)")
    assert ok


# -- 6 ------------------------------------------------------------------------------

def test_criterion_06_two_scale():
    N = 512
    t0 = time.perf_counter()
    rep = two_scale_compare(0, 0.02, smooth_datum(N), 0.25, [8, 16, 32, 64],
                            config=SolverConfig(N=N))
    wall = time.perf_counter() - t0
    rows = {r.lam: r for r in rep.rows}
    better = all(rows[l].e1 < rows[l].e0 for l in (16, 32, 64))
    gap = rows[64].gap
    ok = rep.order_e1 >= 0.7 and better and gap <= 0.15 and wall < 900
    table = ", ".join(f"lam={r.lam}: e0={r.e0:.3g} e1={r.e1:.3g} gap={r.gap:.1%}" for r in rep.rows)
    record(6, ok, f"order e1 {rep.order_e1:.2f} (>=0.7), e1<e0 for lam>=16: {better}, "
                  f"gap(64) {gap:.1%} (<=15%), {wall:.0f}s (<900s) [{table}]")
    assert ok


# -- 7, 8 ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def dissipation_runs():
    cfg = parse_config("[solver]\nN = 512\nu_scale = none\n"
                       "[experiment]\nqmax = 2\nT = 1.0\ndatum = random\nseed = 7\n"
                       "snapshot_every = 0.05\n")
    t0 = time.perf_counter()
    res = sweep(cfg)
    res["wall"] = time.perf_counter() - t0
    res["steps"] = res["rows"][0]["steps"]
    return res


def test_criterion_07_anomalous_dissipation(dissipation_runs):
    r = dissipation_runs
    drop = r["kappas"][0] / r["kappas"][-1]
    D = [row["D_over_l2in"] for row in r["rows"]]
    res = max(row["residual"] for row in r["rows"])
    ok = drop >= 8 and min(D) >= 0.05 and r["wall"] < 1200
    record(7, ok, f"kappa drop x{drop:.2f} (>=8), D_q/|rho_in|^2 = {['%.4f' % d for d in D]} "
                  f"(>=0.05), {r['steps']} steps, energy residual {res:.1e}, "
                  f"{r['wall']:.0f}s (<1200s)")
    assert ok


def test_criterion_08_holder_uniformity(dissipation_runs):
    m = [row["holder_max"] for row in dissipation_runs["rows"]]
    ratio = max(m) / min(m)
    ok = ratio <= 3
    record(8, ok, f"max_t C^alpha0 per q = {['%.3f' % x for x in m]}, ratio {ratio:.3f} (<=3)")
    assert ok


# -- 9 ------------------------------------------------------------------------------

def test_criterion_09_dissipative_stability():
    N, T = 256, 0.5
    t0 = time.perf_counter()
    hier = VelocityHierarchy(DESK, N, 2, min_ppw=3)
    # adaptive steps: the criterion compares two dissipations, not a residual
    cfg = SolverConfig(N=N, mu_active=hier.gens[2].mu_q)
    change, (d1, d2) = stability_compare(hier, 1, 2, 10 * hier.gens[1].kappa_q, smooth_datum(N),
                                         T, cfg)
    wall = time.perf_counter() - t0
    ok = change <= 0.1 and wall < 300
    record(9, ok, f"D(u_1) {d1:.5f}, D(u_2) {d2:.5f}, change {change:.2e} (<=0.1), "
                  f"{wall:.0f}s (<300s)")
    assert ok


# -- 10 -----------------------------------------------------------------------------

def test_criterion_10_diagnostics_algebra():
    t0 = time.perf_counter()
    N = 128
    sp = spectral(N)
    f = GridField2D(diag.random_datum(N, 0.65, 1).values + 0.4)
    dec = diag.lp_decompose(f)
    idem = max(float(np.max(np.abs(sp.ifft(diag.lp_decompose(dec.shell(j)).spectra[j])
                                   - dec.shell(j).values))) for j in range(dec.J + 1))
    recon = float(np.max(np.abs(dec.reconstruct().values - f.values)))
    a = diag.holder_norm(f, 0.3).value
    homog = abs(diag.holder_norm(GridField2D(-2.5 * f.values), 0.3).value - 2.5 * a) / (2.5 * a)
    x1, x2 = sp.grid()
    g = lambda X1, X2: np.sin(2 * np.pi * X1) + 0.5 * np.cos(2 * np.pi * (X1 + 2 * X2))
    base = diag.holder_norm(g(x1, x2), 0.3).value
    shift = max(abs(diag.holder_norm(g(2 ** m * x1, 2 ** m * x2), 0.3).value
                    / (2 ** (0.3 * m) * base) - 1) for m in (1, 2, 3, 4))
    wall = time.perf_counter() - t0
    ok = idem <= 1e-13 and recon <= 1e-12 and homog <= 1e-13 and shift <= 1e-13 and wall < 5
    record(10, ok, f"idempotence {idem:.1e} (<=1e-13), reconstruction {recon:.1e} (<=1e-12), "
                   f"homogeneity {homog:.1e}, shell shift {shift:.1e}, {wall:.2f}s (<5s)")
    assert ok
