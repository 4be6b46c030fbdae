"""First-order homogenization of one fast shear layer.

A layer  w = perp_grad[(delta^(1/2)/lambda) H12(lambda Phibar_q, mu t)]  on top
of u_q acts at large scales like the extra diffusivity

    kappa_bar = kappa (1 + delta / (kappa^2 lambda^2)),

and the solution of the full equation is approximated to first order by

    rho ~ rhobar + (1/lambda) (rhohat_1 + rhocheck_1),

where rhobar solves the homogenized equation (drift u_q, diffusivity
kappa_bar), rhohat_1 is the spatial corrector (cell problem of the shear)
and rhocheck_1 the temporal corrector that accounts for the cutoffs
switching the two shear directions on and off.  With h = delta^(1/2)/(kappa lambda),

    rhohat_1   = h [eta1(mu t) chi21(lambda Phibar) d2 rhobar - eta2(mu t) chi11(lambda Phibar) d1 rhobar],
    rhocheck_1 = (delta^(1/2)/mu) h <Pi_1 d chi21> [etacheck1(mu t) d22 rhobar + etacheck2(mu t) d11 rhobar]

with chi21 = cos(2 pi xi1)/(2 pi), chi11 = cos(2 pi xi2)/(2 pi),
<Pi_1 d chi21> = -1/2 and etacheck_i = -int (eta_i^2 - <eta_i^2>).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .cutoffs import CutoffFamily, PeriodicProfile, build_cutoffs, check_shear_pair
from .errors import ResolutionError
from .fields import VelocityHierarchy
from .grid import GridField2D, spectral
from .params import AbsoluteParams, desk_preset
from .pdesolver import SolverConfig, solve, zero_velocity

__all__ = ["eddy_diffusivity", "CorrectorSet", "first_order_correctors",
           "homogenized_solve", "two_scale_compare", "stability_compare",
           "ComparisonReport", "ComparisonRow", "pairing_constant"]

TWO_PI = 2.0 * np.pi


def eddy_diffusivity(kappa, delta_next, lambda_next):
    """kappa (1 + delta / (kappa^2 lambda^2))."""
    if kappa <= 0 or lambda_next <= 0 or delta_next < 0:
        raise ValueError("kappa and lambda must be positive, delta non-negative")
    return kappa * (1.0 + delta_next / (kappa ** 2 * lambda_next ** 2))


def chi21(xi1):
    """Zero-mean antiderivative of -sin(2 pi xi1)."""
    return np.cos(TWO_PI * np.asarray(xi1)) / TWO_PI


def chi11(xi2):
    return np.cos(TWO_PI * np.asarray(xi2)) / TWO_PI


def pairing_constant(M: int = 256) -> float:
    """<Pi_1 d_xi1 chi21>_xi by midpoint quadrature, Pi_1 = sin(2 pi xi1).

    The rule is exact for trigonometric polynomials of degree < M.
    """
    xi = (np.arange(M) + 0.5) / M
    dchi = -np.sin(TWO_PI * xi)
    return float(np.mean(np.sin(TWO_PI * xi) * dchi))


@dataclass
class CorrectorSet:
    """First-order correctors of one layer (lambda, mu, delta) over diffusivity kappa.

    ``etacheck1`` / ``etacheck2`` are the mean-free profiles
    -int(eta_i^2 - <eta_i^2>) sampled in tau.
    """

    q: int
    kappa: float
    kappaBar: float
    lam: float
    mu: float
    sqrt_delta: float
    h: float
    pairing: float
    etacheck1: PeriodicProfile
    etacheck2: PeriodicProfile

    @property
    def hhat(self):
        """Coefficients pairing with (d2 rhobar, -d1 rhobar)."""
        return self.h, -self.h

    @property
    def hcheck(self):
        return self.sqrt_delta / self.mu * self.h * self.pairing

    def spatial(self, Rbar, X, tau, family: CutoffFamily):
        """(1/lambda) rhohat_1 on the grid from the spectrum of rhobar.

        X are the fast positions Phibar(x, t) (shape (2, N, N)) before scaling
        by lambda.
        """
        N = X.shape[-1]
        sp = spectral(N)
        e1, e2 = family.etas(tau)
        out = np.zeros((N, N))
        if e1 != 0.0:
            out += e1 * chi21(self.lam * X[0]) * sp.ifft(sp.d2 * Rbar)
        if e2 != 0.0:
            out -= e2 * chi11(self.lam * X[1]) * sp.ifft(sp.d1 * Rbar)
        return (self.h / self.lam) * out

    def temporal(self, Rbar, tau):
        """(1/lambda) rhocheck_1 on the grid."""
        N = Rbar.shape[0]
        sp = spectral(N)
        c1 = float(self.etacheck1.interp(tau % 1.0))
        c2 = float(self.etacheck2.interp(tau % 1.0))
        F = c1 * (sp.d2 ** 2) * Rbar + c2 * (sp.d1 ** 2) * Rbar
        return (self.hcheck / self.lam) * sp.ifft(F)

    def shear_ok(self, family: CutoffFamily):
        return (check_shear_pair("xi1-only", family.eta1, family)
                and check_shear_pair("xi2-only", family.eta2, family))


def first_order_correctors(gen, kappa, family: Optional[CutoffFamily] = None,
                           q: int = 0) -> CorrectorSet:
    """Correctors for the layer with scales ``gen`` (lambda_q, mu_q, delta_q).

    Parameters
    ----------
    gen : GenerationParams or mapping with keys lambda_q, mu_q, delta_q
        Scales of the fast layer (generation q+1 of a schedule, or free dials).
    kappa : float
    family : CutoffFamily, optional
    q : int
        Generation of the slow drift, kept for reporting.
    """
    family = family or build_cutoffs()
    get = (lambda k: gen[k]) if isinstance(gen, dict) else (lambda k: getattr(gen, k))
    lam, mu, delta = float(get("lambda_q")), float(get("mu_q")), float(get("delta_q"))
    sd = math.sqrt(delta)
    checks = []
    for eta in (family.eta1, family.eta2):
        sq = eta.square()
        anti = PeriodicProfile(sq.samples - sq.mean, 1.0, None, None).antiderivative()
        checks.append(PeriodicProfile(-anti.samples, 1.0, None, None,
                                      f"etacheck[{eta.name}]"))
    return CorrectorSet(q=q, kappa=kappa, kappaBar=eddy_diffusivity(kappa, delta, lam),
                        lam=lam, mu=mu, sqrt_delta=sd, h=sd / (kappa * lam),
                        pairing=pairing_constant(), etacheck1=checks[0],
                        etacheck2=checks[1])


def _drift(hier: Optional[VelocityHierarchy], q, N):
    if hier is None or q == 0:
        return zero_velocity(N)
    return hier.velocity_field(q, "u")


def homogenized_solve(rho_in, hier: Optional[VelocityHierarchy], q: int, kappaBar: float,
                      T: float, config: SolverConfig, observers=()):
    """Solve d_t rhobar + u_q . grad rhobar = kappa_bar Lap rhobar.

    ``hier`` may be None when q = 0 (no slow drift).
    """
    return solve(rho_in, _drift(hier, q, config.N), kappaBar, T, config, observers)


@dataclass
class ComparisonRow:
    lam: float
    mu: float
    sqrt_delta: float
    kappa: float
    kappa_bar: float
    D_full: float
    D_hom: float
    gap: float
    e0: float
    e1: float
    steps: int


@dataclass
class ComparisonReport:
    """Per-lambda errors of the homogenized and corrected approximations."""

    q: int
    T: float
    N: int
    rows: List[ComparisonRow] = field(default_factory=list)
    order_e0: float = float("nan")
    order_e1: float = float("nan")
    threshold: Optional[float] = None

    @property
    def lams(self):
        return [r.lam for r in self.rows]

    def fit(self):
        rows = [r for r in self.rows if r.e0 > 0 and r.e1 > 0]
        if len(rows) >= 2:
            x = np.log([1.0 / r.lam for r in rows])
            self.order_e0 = float(np.polyfit(x, np.log([r.e0 for r in rows]), 1)[0])
            self.order_e1 = float(np.polyfit(x, np.log([r.e1 for r in rows]), 1)[0])
        # smallest lambda from which the corrector helps at every larger lambda
        self.threshold = None
        for i, r in enumerate(self.rows):
            if all(s.e1 < s.e0 for s in self.rows[i:]):
                self.threshold = r.lam
                break
        return self

    def to_dict(self):
        return {"q": self.q, "T": self.T, "N": self.N,
                "order_e0": self.order_e0, "order_e1": self.order_e1,
                "threshold": self.threshold, "rows": [asdict(r) for r in self.rows]}

    def to_json(self, path=None, extra=None):
        d = self.to_dict()
        if extra:
            d.update(extra)
        text = json.dumps(d, indent=2, sort_keys=True)
        if path:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def to_csv(self, path, header_lines=()):
        names = list(ComparisonRow.__dataclass_fields__)
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(names)
            for r in self.rows:
                w.writerow([repr(getattr(r, k)) for k in names])


def _layer_hierarchy(q, lam, mu, delta, N, params: AbsoluteParams, family):
    """Hierarchy whose generation q+1 is the free layer (lam, mu, delta)."""
    over = {q + 1: dict(lambda_q=int(round(lam)), mu_q=float(mu), delta_q=float(delta))}
    return VelocityHierarchy(params, N, q + 1, family=family, min_ppw=8.0,
                             overrides=over)


def two_scale_compare(q: int, kappa: float, rho_in, T: float, lambdas: Sequence[float],
                      mu_factor: float = 0.125, sqrt_delta: Optional[float] = None,
                      config: Optional[SolverConfig] = None,
                      params: Optional[AbsoluteParams] = None,
                      family: Optional[CutoffFamily] = None,
                      n_snap: int = 16) -> ComparisonReport:
    """Full vs homogenized solves for a sweep of layer frequencies.

    Parameters
    ----------
    q : int
        Generation of the slow drift u_q (0 means no drift).
    kappa : float
        Molecular diffusivity, held fixed across the sweep.
    lambdas : sequence of int
        Layer frequencies; mu = mu_factor * lambda.
    sqrt_delta : float, optional
        Layer amplitude delta^(1/2).  The default is the balanced choice
        kappa * lambda (h = 1, kappa_bar = 2 kappa); pass 0 to switch the layer
        off.
    n_snap : int
        Number of comparison times in (0, T].

    Notes
    -----
    The homogenized solve starts from rho_in - rhocheck_1(0)/lambda, so the
    corrected approximation agrees with the datum at t = 0 (the spatial
    corrector vanishes there as long as mu * 0 lies outside both cutoff
    supports, which holds at t = 0).
    """
    config = config or SolverConfig(N=512)
    N = config.N
    params = params or desk_preset()
    family = family or build_cutoffs()
    sp = spectral(N)
    vals = rho_in.values if isinstance(rho_in, GridField2D) else np.asarray(rho_in, float)
    report = ComparisonReport(q=q, T=T, N=N)
    cfg = SolverConfig(**{**asdict(config), "snapshot_every": T / n_snap,
                          "keep_snapshots": True})
    for lam in lambdas:
        if lam * 8 > N:
            raise ResolutionError(f"lambda={lam} needs N >= {8 * lam}, have {N}")
        mu = mu_factor * lam
        sd = kappa * lam if sqrt_delta is None else float(sqrt_delta)
        hier = _layer_hierarchy(q, lam, mu, sd * sd, N, params, family)
        corr = first_order_correctors(dict(lambda_q=lam, mu_q=mu, delta_q=sd * sd),
                                      kappa, family, q)
        R0 = sp.fft(vals)
        rho_bar0 = vals - corr.temporal(R0, 0.0)
        _, trh = homogenized_solve(rho_bar0, hier, q, corr.kappaBar, T, cfg)
        bars = {round(t, 12): R for t, R in trh.snapshots}
        errs = []

        def observe(t, spectra, bars=bars, hier=hier, corr=corr, errs=errs):
            Rb = bars.get(round(t, 12))
            if Rb is None or t == 0.0:
                return
            rho = sp.ifft(spectra[0])
            rbar = sp.ifft(Rb)
            if q == 0:
                X = np.stack(sp.grid())
            else:
                X = hier.flow(q, t, "u").positions()
            tau = mu * t
            fast = corr.spatial(Rb, X, tau, family) + corr.temporal(Rb, tau)
            e0 = math.sqrt(np.mean((rho - rbar) ** 2))
            e1 = math.sqrt(np.mean((rho - rbar - fast) ** 2))
            errs.append((t, e0, e1))

        cfg_full = SolverConfig(**{**asdict(cfg), "keep_snapshots": False})
        _, trf = solve(vals, hier.velocity_field(q + 1, "u"), kappa, T, cfg_full,
                       observers=[observe])
        e0 = max(e[1] for e in errs)
        e1 = max(e[2] for e in errs)
        D_full, D_hom = trf.D, trh.D
        gap = abs(D_full - D_hom) / D_full if D_full > 0 else 0.0
        report.rows.append(ComparisonRow(float(lam), float(mu), float(sd), float(kappa),
                                         float(corr.kappaBar), float(D_full), float(D_hom),
                                         float(gap), float(e0), float(e1), int(trf.steps)))
    return report.fit()


def stability_compare(hier: VelocityHierarchy, qLow: int, qHigh: int, kappa: float,
                      rho_in, T: float, config: SolverConfig, branch: str = "u"):
    """|D_high - D_low| / D_low for solves under u_qLow and u_qHigh at one kappa.

    Returns
    -------
    change : float
    (D_low, D_high) : tuple of float
    """
    N = config.N
    _, tl = solve(rho_in, _drift(hier, qLow, N) if branch == "u" or qLow == 0
                  else hier.velocity_field(qLow, branch), kappa, T, config)
    if qHigh == qLow:
        return 0.0, (tl.D, tl.D)
    _, th = solve(rho_in, _drift(hier, qHigh, N) if branch == "u" or qHigh == 0
                  else hier.velocity_field(qHigh, branch), kappa, T, config)
    return abs(th.D - tl.D) / tl.D, (tl.D, th.D)
