"""Property tests for the invariants listed per module."""
import math

import numpy as np
from hypothesis import HealthCheck, given, settings, strategies as st

from homlab import cli, diag
from homlab.cutoffs import build_cutoffs
from homlab.grid import GridField2D, spectral
from homlab.homogen import eddy_diffusivity
from homlab.params import AbsoluteParams, derive_generation, validate_constraints
from homlab.pdesolver import SolverConfig, constant_velocity, solve

FAMILY = build_cutoffs()
FAST = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

betas = st.floats(0.05, 0.33)
bs = st.floats(1.01, 1.5)
lam0s = st.integers(2, 64)


@FAST
@given(beta=betas, b=bs, lam0=lam0s)
def test_generation_monotone(beta, b, lam0):
    p = AbsoluteParams(beta=beta, b=b, lambda0=lam0)
    g = [derive_generation(p, q) for q in range(3)]
    lams = [x.lambda_q for x in g]
    if lams[0] < lams[1] < lams[2]:
        assert g[0].kappa_q > g[1].kappa_q > g[2].kappa_q
        assert g[0].mu_q < g[1].mu_q < g[2].mu_q
    assert all(a <= c for a, c in zip(lams, lams[1:]))


@FAST
@given(beta=betas, b=bs, lam0=lam0s)
def test_ratio_identity_real_lambda(beta, b, lam0):
    rep = validate_constraints(AbsoluteParams(beta=beta, b=b, lambda0=lam0), 2)
    for row in rep.ratio_checks:
        assert row["rel_dev_real"] <= 1e-12
        assert row["rel_dev_ceiled"] <= 1e-12


@FAST
@given(beta=betas, b=bs, lam0=lam0s, q=st.integers(0, 3))
def test_derive_is_pure(beta, b, lam0, q):
    p = AbsoluteParams(beta=beta, b=b, lambda0=lam0)
    assert derive_generation(p, q) == derive_generation(p, q)


@FAST
@given(kappa=st.floats(1e-4, 1.0), delta=st.floats(1e-8, 1.0), lam=st.floats(1.0, 1e3))
def test_eddy_enhancement(kappa, delta, lam):
    kb = eddy_diffusivity(kappa, delta, lam)
    assert kb > kappa
    assert math.isclose(kb / kappa - 1, delta / (kappa ** 2 * lam ** 2), rel_tol=1e-9,
                        abs_tol=4e-16)


@FAST
@given(tau=st.floats(-50, 50))
def test_partition_and_disjointness(tau):
    assert abs(sum(w for _, w in FAMILY.weights(tau)) - 1.0) <= 1e-12
    e1, e2 = FAMILY.etas(tau)
    assert e1 * e2 == 0.0
    assert len(FAMILY.weights(tau)) <= 2


def random_field(seed, N=32, amp=1.0):
    rng = np.random.default_rng(seed)
    return GridField2D(amp * rng.standard_normal((N, N)))


seeds = st.integers(0, 2 ** 32 - 1)


@FAST
@given(seed=seeds)
def test_shells_are_projections(seed):
    f = random_field(seed)
    dec = diag.lp_decompose(f)
    sp = spectral(f.N)
    for j in range(dec.J + 1):
        s = dec.shell(j)
        twice = diag.lp_decompose(s).spectra[j]
        assert np.max(np.abs(sp.ifft(twice) - s.values)) <= 1e-13
    assert np.max(np.abs(dec.reconstruct().values - f.values)) <= 1e-12


@FAST
@given(seed=seeds, c=st.floats(-1e3, 1e3).filter(lambda x: abs(x) > 1e-6),
       alpha=st.floats(0.01, 0.99))
def test_holder_homogeneous_and_bounded(seed, c, alpha):
    f = random_field(seed)
    a = diag.holder_norm(f, alpha)
    b = diag.holder_norm(GridField2D(c * f.values), alpha)
    assert math.isclose(b.value, abs(c) * a.value, rel_tol=1e-12)
    assert a.value >= diag.lp_decompose(f).sup_norms()[0]


@FAST
@given(n1=st.integers(2, 10), n2=st.integers(0, 10), a1=st.floats(0.01, 0.5),
       da=st.floats(0.01, 0.4))
def test_holder_monotone_in_alpha_single_shell(n1, n2, a1, da):
    x1, x2 = spectral(32).grid()
    f = np.cos(2 * np.pi * (n1 * x1 + n2 * x2))
    assert diag.holder_norm(f, a1 + da).value > diag.holder_norm(f, a1).value


@FAST
@given(seed=seeds, s1=st.integers(-31, 31), s2=st.integers(-31, 31),
       ell=st.floats(0.01, 0.24), depth=st.sampled_from([1, 2, 3]))
def test_mollify_translation(seed, s1, s2, ell, depth):
    f = random_field(seed)
    a = np.roll(diag.mollify(f, ell, depth).values, (s1, s2), axis=(0, 1))
    b = diag.mollify(GridField2D(np.roll(f.values, (s1, s2), axis=(0, 1))), ell, depth).values
    assert np.max(np.abs(a - b)) <= 1e-13


@settings(max_examples=15, deadline=None)
@given(seed=seeds, c1=st.floats(-2, 2), c2=st.floats(-2, 2), kappa=st.floats(0.0, 0.05))
def test_solver_invariants(seed, c1, c2, kappa):
    N = 16
    f = diag.random_datum(N, 0.65, seed % 1000)
    g = GridField2D(f.values + 0.25)
    out, tr = solve(g, constant_velocity(N, (c1, c2)), kappa, 0.05, SolverConfig(N=N))
    t, l2, d, cd = tr.arrays()
    assert np.all(np.diff(l2) <= 1e-14)
    assert np.all(np.diff(cd) >= 0) and np.all(d >= 0)
    assert abs(out.mean - 0.25) <= 1e-14


@FAST
@given(beta=st.floats(0.05, 0.4), b=bs, N=st.sampled_from([16, 64, 256]),
       cfl=st.floats(0.05, 0.9), kappas=st.lists(st.floats(1e-4, 1.0), min_size=1, max_size=4),
       seed=st.integers(0, 10 ** 6), strict=st.booleans())
def test_config_roundtrip(beta, b, N, cfl, kappas, seed, strict):
    text = (f"[params]\nbeta = {beta!r}\nb = {b!r}\n[solver]\nN = {N}\ncfl = {cfl!r}\n"
            f"[experiment]\nkappa_list = {', '.join(repr(k) for k in kappas)}\nseed = {seed}\n"
            f"strict = {str(strict).lower()}\n")
    cfg = cli.parse_config(text)
    back = cli.parse_config(cfg.to_ini())
    assert back == cfg and back.hash == cfg.hash
    assert back.experiment["kappa_list"] == kappas
