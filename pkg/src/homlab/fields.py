"""Multi-scale velocity hierarchy: flow maps, stream functions, velocities.

Generation q+1 adds a stream function built from the flow of the velocity
accumulated so far,

    psibar_{q+1}(x,t) = delta^(1/2)/lambda * H12(lambda * Phibar_q(x,t), mu t),
    psi_{q+1}(x,t)    = delta^(1/2)/lambda * det(grad Phi_q) * H12(lambda * Phi_q, mu t),

with (delta, lambda, mu) those of generation q+1, and
u_{q+1} = u_q + perp_grad(psibar_{q+1}).  Phibar_q is glued from exact
backward flows of u_q anchored at t_iota = iota/mu_{q+1}; Phi_q from their
Taylor surrogates.

Level 1 is special: Phibar_0 = x, so u_1 is an alternating pair of shears,
u_1 = 2 pi delta_1^(1/2) (eta2(mu_1 t) cos(2 pi lambda_1 x2), -eta1(mu_1 t) cos(2 pi lambda_1 x1)).
During an eta1 phase only x2 moves and during an eta2 phase only x1 moves,
so the flow of u_1 is an exact composition of shear maps.  That closed form
is the default for q=1; the general path integrates characteristics with
fixed-step RK4 and interpolated velocities.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
from scipy import ndimage

from .cutoffs import CutoffFamily, build_cutoffs
from .errors import (MissingFlowError, ResolutionError, StepSizeError,
                     StiffnessError)
from .grid import GridField2D, spectral
from .params import AbsoluteParams, GenerationParams, derive_generation

__all__ = [
    "FlowMap",
    "StreamLevel",
    "VelocityHierarchy",
    "VelocityField",
    "exact_flow",
    "taylor_flow",
    "glue_flow",
    "stream_next",
    "velocity",
    "material_derivative",
    "check_gradPhi_identity",
    "pick_window",
    "taylor_error_series",
]

TWO_PI = 2.0 * np.pi


@dataclass
class FlowMap:
    """A flow map stored as its periodic displacement Phi(x) - x.

    ``anchor`` is the anchor time t_{q,iota}, or the string "glued".
    """

    disp: np.ndarray
    t: float
    anchor: object
    q: int = 0
    iota: Optional[int] = None
    _grad: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def N(self):
        return self.disp.shape[-1]

    def positions(self):
        x1, x2 = spectral(self.N).grid()
        return np.stack([x1 + self.disp[0], x2 + self.disp[1]])

    @property
    def grad(self):
        """grad Phi as an array (2, 2, N, N), entry [i, j] = d_j Phi_i."""
        if self._grad is None:
            sp = spectral(self.N)
            G = np.empty((2, 2) + self.disp.shape[1:])
            for i in range(2):
                D = sp.fft(self.disp[i])
                G[i, 0] = sp.ifft(sp.d1 * D)
                G[i, 1] = sp.ifft(sp.d2 * D)
            G[0, 0] += 1.0
            G[1, 1] += 1.0
            self._grad = G
        return self._grad

    @property
    def det(self):
        G = self.grad
        return G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]

    def adj(self):
        """Adjugate of grad Phi (inverse times determinant)."""
        G = self.grad
        return np.array([[G[1, 1], -G[0, 1]], [-G[1, 0], G[0, 0]]])

    def displacement_fields(self):
        return (GridField2D(self.disp[0], self.t, f"disp1 q={self.q}"),
                GridField2D(self.disp[1], self.t, f"disp2 q={self.q}"))

    def detGrad(self):
        return GridField2D(self.det, self.t, f"det q={self.q}")

    def sup_disp(self):
        return float(np.max(np.abs(self.disp)))


def _identity_flow(N, t, anchor, q, iota):
    return FlowMap(np.zeros((2, N, N)), t, anchor, q, iota)


def glue_flow(local: Dict[int, FlowMap], family: CutoffFamily, t: float, mu_next: float,
              q: int = 0) -> FlowMap:
    """Blend local flows with the partition of unity eta_tilde(mu_next t - iota).

    Displacements are blended linearly; each local displacement is the
    continuous lift produced by its characteristics.
    """
    weights = family.weights(mu_next * t)
    if not weights:
        raise MissingFlowError(f"no active window at t={t}")
    disp = None
    for iota, w in weights:
        if iota not in local:
            raise MissingFlowError(f"local flow for iota={iota} missing at t={t}")
        d = local[iota].disp
        disp = w * d if disp is None else disp + w * d
    return FlowMap(disp, t, "glued", q, None)


class VelocityField:
    """Callable t -> velocity samples (2, N, N) built from a stream spectrum.

    ``band_limited`` tells the solver the output is already confined to the
    two-thirds band, so it can skip its own filtering.
    """

    def __init__(self, stream_hat: Callable[[float], Optional[np.ndarray]], N: int,
                 dealias: bool = True):
        self.stream_hat = stream_hat
        self.N = N
        self.sp = spectral(N)
        self.band_limited = dealias
        keep = self.sp.mask if dealias else self.sp.nonyq
        self._m1 = self.sp.d2 * keep
        self._m2 = -self.sp.d1 * keep
        self._zero = np.zeros((2, N, N))

    def __call__(self, t):
        P = self.stream_hat(t)
        if P is None:
            return self._zero
        out = np.empty((2, self.N, self.N))
        out[0] = self.sp.ifft(self._m1 * P)
        out[1] = self.sp.ifft(self._m2 * P)
        return out


@dataclass
class StreamLevel:
    """Stream functions of generation q >= 1 (built on the flow of level q-1)."""

    q: int
    gen: GenerationParams
    hier: "VelocityHierarchy"

    @property
    def amplitude(self):
        return self.gen.sqrt_delta / self.gen.lambda_q

    def H12(self, xi1, xi2, tau):
        e1, e2 = self.hier.family.etas(tau)
        out = 0.0
        if e1 != 0.0:
            out = out + e1 * np.sin(TWO_PI * xi1)
        if e2 != 0.0:
            out = out + e2 * np.sin(TWO_PI * xi2)
        return out

    def psi_bar(self, t) -> GridField2D:
        P = self.hier._psibar_hat(self.q, t)
        sp = self.hier.sp
        if P is None:
            return GridField2D(np.zeros((sp.N, sp.N)), t, f"psibar_{self.q}")
        return GridField2D.from_hat(P, sp.N, t, f"psibar_{self.q}")

    def psi(self, t) -> GridField2D:
        P = self.hier._psi_hat(self.q, t)
        sp = self.hier.sp
        if P is None:
            return GridField2D(np.zeros((sp.N, sp.N)), t, f"psi_{self.q}")
        return GridField2D.from_hat(P, sp.N, t, f"psi_{self.q}")


class VelocityHierarchy:
    """Velocity fields u_q (exact-flow branch) and v_q (Taylor branch) up to qmax.

    Parameters
    ----------
    params : AbsoluteParams
    N : int
        Grid size.
    qmax : int
        Highest generation built.
    family : CutoffFamily, optional
    Nstar : int, optional
        Taylor order for the v-branch flows; defaults to ``params.Nstar``.
    min_ppw : float
        Minimum grid points per wavelength 1/lambda_qmax.
    flow_method : {"auto", "rk4"}
        "auto" uses the closed-form shear composition for the flow of u_1.
    overrides : dict, optional
        Per-generation replacement values, e.g. ``{1: dict(lambda_q=8)}``.
    """

    def __init__(self, params: AbsoluteParams, N: int, qmax: int,
                 family: Optional[CutoffFamily] = None, Nstar: Optional[int] = None,
                 min_ppw: float = 6.0, flow_method: str = "auto",
                 rk_steps_per_period: int = 32, ht_factor: float = 1.0 / 64.0,
                 overrides: Optional[dict] = None, cache_size: int = 8):
        if qmax < 0:
            raise ValueError("qmax must be >= 0")
        if flow_method not in ("auto", "rk4"):
            raise ValueError("flow_method must be 'auto' or 'rk4'")
        self.params = params
        self.N = N
        self.qmax = qmax
        self.family = family if family is not None else build_cutoffs()
        self.Nstar = params.Nstar if Nstar is None else int(Nstar)
        self.flow_method = flow_method
        self.rk_steps_per_period = rk_steps_per_period
        self.ht_factor = ht_factor
        self.min_ppw = min_ppw
        self.sp = spectral(N)
        gens = []
        overrides = overrides or {}
        for q in range(qmax + 2):
            try:
                g = derive_generation(params, q)
            except Exception:
                if q <= qmax:
                    raise
                g = None
            if g is not None and q in overrides:
                g = _override(g, overrides[q])
            gens.append(g)
        self.gens = gens
        lam_top = gens[qmax].lambda_q if qmax >= 1 else 1
        if qmax >= 1 and N / lam_top < min_ppw:
            raise ResolutionError(
                f"N={N} gives {N / lam_top:.2f} points per wavelength of lambda_{qmax}="
                f"{lam_top}; need >= {min_ppw}")
        self.levels = {q: StreamLevel(q, gens[q], self) for q in range(1, qmax + 1)}
        self._x1, self._x2 = self.sp.grid()
        self._cache = OrderedDict()
        self._cache_size = cache_size
        if qmax >= 1:
            g1 = gens[1]
            a = g1.sqrt_delta / g1.lambda_q
            lam = g1.lambda_q
            self._s1_hat = a * self.sp.fft(np.sin(TWO_PI * lam * self._x1))
            self._s2_hat = a * self.sp.fft(np.sin(TWO_PI * lam * self._x2))

    # -- bookkeeping -------------------------------------------------------

    def gen(self, q) -> GenerationParams:
        return self.gens[q]

    def mu_next(self, q):
        """mu_{q+1}: the time frequency that sets the windows of Phibar_q."""
        g = self.gens[q + 1]
        if g is None:
            raise ResolutionError(f"generation {q + 1} is not available")
        return g.mu_q

    def anchor(self, q, iota):
        return iota / self.mu_next(q)

    def _memo(self, key, fn):
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        val = fn()
        self._cache[key] = val
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return val

    # -- velocities at arbitrary points -------------------------------------

    def _u1_points(self, X, s):
        g = self.gens[1]
        e1, e2 = self.family.etas(g.mu_q * s)
        A = TWO_PI * g.sqrt_delta
        lam = g.lambda_q
        out = np.zeros_like(X)
        if e2 != 0.0:
            out[0] = A * e2 * np.cos(TWO_PI * lam * X[1])
        if e1 != 0.0:
            out[1] = -A * e1 * np.cos(TWO_PI * lam * X[0])
        return out

    def point_velocity(self, q, X, s):
        """u_q at points X (shape (2, ...)) and time s.

        Level 1 is evaluated in closed form; levels >= 2 by periodic cubic
        spline interpolation of their grid velocity.
        """
        X = np.asarray(X, dtype=float)
        if q == 0:
            return np.zeros_like(X)
        out = self._u1_points(X, s)
        if q >= 2:
            P = None
            for j in range(2, q + 1):
                Pj = self._psibar_hat(j, s)
                if Pj is not None:
                    P = Pj if P is None else P + Pj
            if P is not None:
                sp = self.sp
                P = P * sp.nonyq
                U = np.stack([sp.ifft(sp.d2 * P), sp.ifft(-sp.d1 * P)])
                coords = np.mod(X, 1.0) * self.N
                flat = coords.reshape(2, -1)
                for c in range(2):
                    out[c] += ndimage.map_coordinates(
                        U[c], flat, order=3, mode="grid-wrap").reshape(X.shape[1:])
        return out

    # -- flows ---------------------------------------------------------------

    def _check_window(self, q, iota, t):
        mu = self.mu_next(q)
        if abs(mu * t - iota) > 0.625 + 1e-12:
            raise ValueError(
                f"t={t} lies outside the window of iota={iota} at q={q}")

    def exact_flow(self, q, iota, t) -> FlowMap:
        """Backward flow Phibar_{q,iota}(., t) of u_q anchored at t_{q,iota}."""
        self._check_window(q, iota, t)
        t_a = self.anchor(q, iota)
        if q == 0 or t == t_a:
            return _identity_flow(self.N, t, t_a, q, iota)
        if q == 1 and self.flow_method == "auto":
            return self._memo(("shear", iota, t), lambda: self._shear_flow(iota, t))
        return self._memo(("rk4", q, iota, t), lambda: self._rk4_flow(q, iota, t))

    def _phase_integral(self, which, ta, tb):
        """Integral of eta_which(mu_1 s) ds from ta to tb inside one half period."""
        g = self.gens[1]
        mu = g.mu_q
        lo, hi = sorted((mu * ta, mu * tb))
        k = math.floor(0.5 * (lo + hi))
        off = 0.0 if which == 1 else 0.5
        a = max(lo, k + off + 0.125)
        b = min(hi, k + off + 0.375)
        if b <= a:
            return 0.0
        eta = self.family.eta1 if which == 1 else self.family.eta2
        val = float(eta.cumulative(b) - eta.cumulative(a)) / mu
        return val if tb >= ta else -val

    def _shear_flow(self, iota, t):
        g = self.gens[1]
        mu = g.mu_q
        A = TWO_PI * g.sqrt_delta
        lam = g.lambda_q
        t_a = self.anchor(1, iota)
        X1 = self._x1.copy()
        X2 = self._x2.copy()
        # walk from t to the anchor, splitting at half periods of mu_1
        direction = 1.0 if t_a > t else -1.0
        s = t
        while (t_a - s) * direction > 0:
            h = 2.0 * mu * s
            nxt = (math.floor(h) + 1) / (2 * mu) if direction > 0 else (math.ceil(h) - 1) / (2 * mu)
            if abs(nxt - s) < 1e-15:
                nxt += direction / (2 * mu)
            end = min(nxt, t_a) if direction > 0 else max(nxt, t_a)
            mid = 0.5 * (s + end)
            phase = math.floor(2.0 * mu * mid) % 2
            if phase == 0:
                I = self._phase_integral(1, s, end)
                if I != 0.0:
                    X2 = X2 - A * I * np.cos(TWO_PI * lam * X1)
            else:
                I = self._phase_integral(2, s, end)
                if I != 0.0:
                    X1 = X1 + A * I * np.cos(TWO_PI * lam * X2)
            s = end
        disp = np.stack([X1 - self._x1, X2 - self._x2])
        return FlowMap(disp, t, t_a, 1, iota)

    def _rk4_flow(self, q, iota, t):
        t_a = self.anchor(q, iota)
        span = t_a - t
        h_nom = 1.0 / (self.rk_steps_per_period * self.mu_next(q))
        n = max(1, int(math.ceil(abs(span) / h_nom - 1e-12)))
        h = span / n
        if abs(h) < 1e-12:
            raise StiffnessError(q, iota, t, f"step {h:.3g} below 1e-12")
        X = np.stack([self._x1.copy(), self._x2.copy()])
        s = t
        f = self.point_velocity
        for _ in range(n):
            k1 = f(q, X, s)
            k2 = f(q, X + 0.5 * h * k1, s + 0.5 * h)
            k3 = f(q, X + 0.5 * h * k2, s + 0.5 * h)
            k4 = f(q, X + h * k3, s + h)
            X = X + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            s += h
            if not np.all(np.isfinite(X)):
                raise StiffnessError(q, iota, t, "non-finite characteristic")
        disp = X - np.stack([self._x1, self._x2])
        return FlowMap(disp, t, t_a, q, iota)

    def taylor_flow(self, q, iota, t, Nstar=None, exact_dt=False) -> FlowMap:
        """Taylor surrogate x + sum_m (t_iota - t)^m / m! D^(m-1) u_q."""
        Nstar = self.Nstar if Nstar is None else int(Nstar)
        if Nstar < 1:
            raise ValueError("Nstar must be >= 1")
        self._check_window(q, iota, t)
        t_a = self.anchor(q, iota)
        if q == 0 or t == t_a:
            return _identity_flow(self.N, t, t_a, q, iota)
        dt = t_a - t
        disp = np.zeros((2, self.N, self.N))
        if exact_dt and q == 1:
            derivs = [self._u1_time_derivative(m, t) for m in range(Nstar)]
        else:
            ht = self.ht_factor / self.mu_next(q)
            derivs = material_derivatives(self, q, lambda s: self.velocity_grid(q, "u", s),
                                          Nstar - 1, t, ht)
        fact = 1.0
        for m in range(1, Nstar + 1):
            fact *= m
            disp += (dt ** m / fact) * derivs[m - 1]
        return FlowMap(disp, t, t_a, q, iota)

    def _u1_time_derivative(self, m, t):
        """d^m/dt^m u_1 on the grid, from spectral derivatives of the cutoffs."""
        g = self.gens[1]
        mu = g.mu_q
        A = TWO_PI * g.sqrt_delta
        lam = g.lambda_q
        d1 = self.family.eta1.derivative(m) if m else self.family.eta1
        d2 = self.family.eta2.derivative(m) if m else self.family.eta2
        e1 = float(d1(mu * t)) * mu ** m
        e2 = float(d2(mu * t)) * mu ** m
        return np.stack([A * e2 * np.cos(TWO_PI * lam * self._x2),
                         -A * e1 * np.cos(TWO_PI * lam * self._x1)])

    def flow(self, q, t, branch="u", Nstar=None) -> FlowMap:
        """Glued global flow Phibar_q (branch "u") or Phi_q (branch "v")."""
        if q == 0:
            return _identity_flow(self.N, t, "glued", 0, None)
        mu = self.mu_next(q)
        key = ("glue", q, branch, Nstar, t)

        def build():
            local = {}
            for iota, _ in self.family.weights(mu * t):
                if branch == "u":
                    local[iota] = self.exact_flow(q, iota, t)
                else:
                    local[iota] = self.taylor_flow(q, iota, t, Nstar)
            return glue_flow(local, self.family, t, mu, q)

        return self._memo(key, build)

    # -- stream functions ----------------------------------------------------

    def _check_resolution(self, q):
        lam = self.gens[q].lambda_q
        if self.N / lam < self.min_ppw:
            raise ResolutionError(
                f"N={self.N} gives {self.N / lam:.2f} points per wavelength at q={q}")

    def _layer_hat(self, q, t, Phi: Optional[FlowMap], weight=None):
        """Spectrum of delta^(1/2)/lambda * weight * H12(lambda Phi, mu t), mean removed."""
        g = self.gens[q]
        e1, e2 = self.family.etas(g.mu_q * t)
        if e1 == 0.0 and e2 == 0.0:
            return None
        if q == 1 and Phi is None and weight is None:
            return e1 * self._s1_hat + e2 * self._s2_hat
        lam = g.lambda_q
        a = g.sqrt_delta / lam
        X = Phi.positions() if Phi is not None else np.stack([self._x1, self._x2])
        f = 0.0
        if e1 != 0.0:
            f = f + e1 * np.sin(TWO_PI * lam * X[0])
        if e2 != 0.0:
            f = f + e2 * np.sin(TWO_PI * lam * X[1])
        if weight is not None:
            f = f * weight
        F = self.sp.fft(a * f)
        F[0, 0] = 0.0
        return F

    def _psibar_hat(self, q, t):
        if q < 1 or q > self.qmax:
            raise ValueError(f"generation {q} not in hierarchy (qmax={self.qmax})")
        self._check_resolution(q)
        if self.family.etas(self.gens[q].mu_q * t) == (0.0, 0.0):
            return None

        def build():
            Phi = None if q == 1 else self.flow(q - 1, t, "u")
            return self._layer_hat(q, t, Phi)

        return self._memo(("psibar", q, t), build)

    def _psi_hat(self, q, t, Nstar=None):
        if q < 1 or q > self.qmax:
            raise ValueError(f"generation {q} not in hierarchy (qmax={self.qmax})")
        self._check_resolution(q)
        if self.family.etas(self.gens[q].mu_q * t) == (0.0, 0.0):
            return None
        if q == 1:
            return self._psibar_hat(1, t)
        Phi = self.flow(q - 1, t, "v", Nstar)
        return self._layer_hat(q, t, Phi, weight=Phi.det)

    def stream_hat(self, q, t, branch="u"):
        """Spectrum of the total stream function generating u_q or v_q."""
        P = None
        top = q if branch == "u" else q - 1
        for j in range(1, top + 1):
            Pj = self._psibar_hat(j, t)
            if Pj is not None:
                P = Pj if P is None else P + Pj
        if branch == "v" and q >= 1:
            Pq = self._psi_hat(q, t)
            if Pq is not None:
                P = Pq if P is None else P + Pq
        return P

    def velocity_field(self, q, branch="u", dealias=True) -> VelocityField:
        """Solver-ready evaluator t -> u_q(., t) (or v_q)."""
        if branch not in ("u", "v"):
            raise ValueError("branch must be 'u' or 'v'")
        return VelocityField(lambda t: self.stream_hat(q, t, branch), self.N, dealias)

    def velocity_grid(self, q, branch, t):
        return VelocityField(lambda s: self.stream_hat(q, s, branch), self.N, False)(t)


def _override(g: GenerationParams, changes: dict) -> GenerationParams:
    from dataclasses import replace
    return replace(g, **changes)


# -- module-level operations ---------------------------------------------------

def exact_flow(hier: VelocityHierarchy, q, iota, t) -> FlowMap:
    return hier.exact_flow(q, iota, t)


def taylor_flow(hier: VelocityHierarchy, q, iota, t, Nstar) -> FlowMap:
    return hier.taylor_flow(q, iota, t, Nstar)


def stream_next(hier: VelocityHierarchy, q, t):
    """(psibar_{q+1}, psi_{q+1}) at time t as mean-zero grid fields."""
    lvl = hier.levels.get(q + 1)
    if lvl is None:
        raise ValueError(f"generation {q + 1} not in hierarchy")
    return lvl.psi_bar(t), lvl.psi(t)


def velocity(hier: VelocityHierarchy, q, branch, t) -> GridField2D:
    if q == 0:
        return GridField2D(np.zeros((2, hier.N, hier.N)), t, "u_0")
    return GridField2D(hier.velocity_grid(q, branch, t), t, f"{branch}_{q}")


def material_derivatives(hier: VelocityHierarchy, q, F, m, t, ht):
    """[D^0 F, D^1 F, ..., D^m F] at time t with D = d_t + u_q . grad.

    d_t is a centred difference of half-width ``ht``; u_q . grad is spectral.
    F maps a time to an array (..., N, N).
    """
    if m < 0:
        raise ValueError("order must be >= 0")
    if q >= 1 or m > 0:
        if not (1e-10 <= ht <= 0.25 / hier.mu_next(q)):
            raise StepSizeError(
                f"ht={ht:.3g} outside [1e-10, 1/(4 mu_(q+1))={0.25 / hier.mu_next(q):.3g}]")
    sp = hier.sp
    offs = list(range(-m, m + 1))
    shape = (hier.N, hier.N)

    def ev(s):
        v = np.asarray(F(s), dtype=float)
        return np.broadcast_to(v, shape).copy() if v.ndim < 2 else v

    level = {k: ev(t + k * ht) for k in offs}
    vel = {}

    def u_at(k):
        if k not in vel:
            vel[k] = hier.velocity_grid(q, "u", t + k * ht) if q >= 1 else None
        return vel[k]

    out = [level[0]]
    for order in range(1, m + 1):
        new = {}
        for k in range(-(m - order), m - order + 1):
            dt_part = (level[k + 1] - level[k - 1]) / (2.0 * ht)
            u = u_at(k)
            if u is None:
                new[k] = dt_part
                continue
            f = level[k]
            Fh = sp.fft(f)
            adv = u[0] * sp.ifft(sp.d1 * Fh) + u[1] * sp.ifft(sp.d2 * Fh)
            new[k] = dt_part + adv
        level = new
        out.append(level[0])
    return out


def material_derivative(hier: VelocityHierarchy, q, F, m, t, ht=None) -> GridField2D:
    """D_q^m F at time t (see ``material_derivatives``)."""
    if ht is None:
        ht = hier.ht_factor / hier.mu_next(q)
    vals = material_derivatives(hier, q, F, m, t, ht)[m]
    if np.ndim(vals) == 0:
        vals = np.full((hier.N, hier.N), float(vals))
    return GridField2D(vals, t, f"D^{m}")


def check_gradPhi_identity(hier: VelocityHierarchy, q, t, branch="v") -> float:
    """r = ||grad Phi_q - Id||_inf / eps_q at time t (0 at q=0)."""
    if q == 0:
        return 0.0
    Phi = hier.flow(q, t, branch)
    G = Phi.grad.copy()
    G[0, 0] -= 1.0
    G[1, 1] -= 1.0
    return float(np.max(np.abs(G)) / hier.gens[q].eps_q)


def pick_window(hier: VelocityHierarchy, q, target_phase=0.25):
    """Window index iota whose anchor sees the level-q cutoff phase closest to
    ``target_phase`` (0.25 is the eta1 peak), among the first few periods."""
    mu_q = hier.gens[q].mu_q
    mu = hier.mu_next(q)
    best, best_d = 0, 2.0
    for iota in range(1, int(4 * mu / mu_q) + 2):
        ph = (mu_q * iota / mu) % 1.0
        d = abs(ph - target_phase)
        if d < best_d:
            best, best_d = iota, d
    return best


def taylor_error_series(hier: VelocityHierarchy, q, Nstars, iota=None, t=None,
                        exact_dt=False):
    """sup_x |Phi^Taylor_{N*} - Phibar| for each N* at one (iota, t).

    Defaults: the window from ``pick_window`` and t = t_iota - 1/(16 mu_(q+1)).
    Returns (iota, t, errors).
    """
    iota = pick_window(hier, q) if iota is None else iota
    t_a = hier.anchor(q, iota)
    t = t_a - 0.0625 / hier.mu_next(q) if t is None else t
    ref = hier.exact_flow(q, iota, t).disp
    errs = []
    for n in Nstars:
        d = hier.taylor_flow(q, iota, t, n, exact_dt=exact_dt).disp
        errs.append(float(np.max(np.abs(d - ref))))
    return iota, t, errs
