"""Pseudo-spectral solver for d_t rho + u . grad rho = kappa Lap rho on the unit torus.

Diffusion is treated exactly with an integrating factor; advection is
stepped with the three-stage SSP Runge-Kutta scheme of Shu and Osher.  The
scalar and the velocity are both confined to the two-thirds band, so the
semi-discrete advection conserves the L2 norm exactly and the residual of the
energy identity measures only time-stepping and quadrature error.

Several scalars that share a velocity (e.g. the same drift at several
diffusivities) can be advanced together as a batch.
"""
from __future__ import annotations

import csv
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import BlowUpError
from .grid import GridField2D, spectral

__all__ = ["SolverConfig", "SolveTrace", "advance", "solve", "solve_batch",
           "energy_identity_residual", "sample_umax", "zero_velocity", "constant_velocity"]


@dataclass
class SolverConfig:
    """Time-stepping controls.

    Parameters
    ----------
    N : int
        Grid size (power of two).
    cfl : float
        Advective Courant number, dt <= cfl * (1/N) / max|u|.
    mu_active : float, optional
        Fastest time frequency of the drift; caps dt at mu_fraction / mu_active.
    dt_max : float
        Absolute cap on dt (matters when u = 0).
    dt_fixed : float, optional
        Use this step size throughout (clipped only to land on T and snapshots).
    snapshot_every : float, optional
        Time cadence of observer calls and stored snapshots.
    keep_snapshots : bool
        Store spectra at snapshot times in the trace.
    u_scale : float, optional
        Floor on the max|u| used in the Courant limit.  Drifts that switch on
        and off (cutoffs in time) are otherwise stepped coarsely while they
        ramp up; passing their peak amplitude keeps dt uniform.
    diff_number : float, optional
        Caps dt at diff_number / (2 kappa k_eff^2) with k_eff^2 the
        energy-weighted |2 pi n|^2 of the current scalar, so the trapezoid
        rule for the dissipation integral resolves the diffusive decay.
    """

    N: int = 256
    cfl: float = 0.4
    mu_active: Optional[float] = None
    mu_fraction: float = 1.0 / 16.0
    dt_max: float = 2.5e-4
    dt_fixed: Optional[float] = None
    snapshot_every: Optional[float] = None
    keep_snapshots: bool = False
    u_scale: Optional[float] = None
    diff_number: Optional[float] = None
    dealias: str = "two-thirds"
    integrator: str = "if-ssprk3"

    def __post_init__(self):
        if self.N < 4 or (self.N & (self.N - 1)) != 0:
            raise ValueError("N must be a power of two")
        if self.dealias != "two-thirds":
            raise ValueError("only the two-thirds rule is implemented")
        if self.integrator != "if-ssprk3":
            raise ValueError("only the integrating-factor SSP-RK3 scheme is implemented")
        if not self.cfl > 0 or not self.dt_max > 0:
            raise ValueError("cfl and dt_max must be positive")
        if self.dt_fixed is not None and not self.dt_fixed > 0:
            raise ValueError("dt_fixed must be positive")


@dataclass
class SolveTrace:
    """Energy and dissipation history of one solve.

    ``l2sq`` is the spatial mean of rho^2 (unit-area torus), ``inst_diss`` is
    kappa * mean |grad rho|^2 and ``cum_diss`` its trapezoid time integral.
    """

    kappa: float
    t: List[float] = field(default_factory=list)
    l2sq: List[float] = field(default_factory=list)
    inst_diss: List[float] = field(default_factory=list)
    cum_diss: List[float] = field(default_factory=list)
    mean: float = 0.0
    snapshots: list = field(default_factory=list)
    steps: int = 0

    def record(self, t, l2, d):
        if self.t:
            dt = t - self.t[-1]
            self.cum_diss.append(self.cum_diss[-1] + 0.5 * dt * (d + self.inst_diss[-1]))
        else:
            self.cum_diss.append(0.0)
        self.t.append(float(t))
        self.l2sq.append(float(l2))
        self.inst_diss.append(float(d))

    @property
    def D(self):
        return self.cum_diss[-1]

    def arrays(self):
        return (np.array(self.t), np.array(self.l2sq), np.array(self.inst_diss),
                np.array(self.cum_diss))

    def to_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["t", "l2sq", "inst_diss", "cum_diss"])
            for row in zip(self.t, self.l2sq, self.inst_diss, self.cum_diss):
                w.writerow([repr(v) for v in row])


def zero_velocity(N):
    z = np.zeros((2, N, N))

    def u(t):
        return z

    u.band_limited = True
    u.is_zero = True
    return u


def constant_velocity(N, c):
    f = np.empty((2, N, N))
    f[0] = c[0]
    f[1] = c[1]

    def u(t):
        return f

    u.band_limited = True
    return u


class _Stepper:
    """Shared state for stepping a batch of scalars under one velocity."""

    def __init__(self, N, kappas, velocity):
        self.sp = spectral(N)
        self.N = N
        self.kappas = np.asarray(kappas, dtype=float).reshape(-1, 1, 1)
        self.velocity = velocity
        self.band_limited = getattr(velocity, "band_limited", False)
        self.is_zero = getattr(velocity, "is_zero", False)
        self._ucache = OrderedDict()
        self.mask = self.sp.mask
        # -kappa * 4 pi^2 |n|^2 per batch member
        self.L = self.kappas * self.sp.lap[None]

    def u(self, t):
        hit = self._ucache.get(t)
        if hit is not None:
            return hit
        u = np.asarray(self.velocity(t), dtype=float)
        if not self.band_limited:
            U = self.sp.fft(u) * self.mask
            u = self.sp.ifft(U)
        umax = float(np.max(np.abs(u))) if not self.is_zero else 0.0
        self._ucache[t] = (u, umax)
        if len(self._ucache) > 6:
            self._ucache.popitem(last=False)
        return u, umax

    def recent_umax(self):
        return max((v[1] for v in self._ucache.values()), default=0.0)

    def rhs(self, R, t):
        """-P(u . grad rho) for the batch of spectra R.

        Written as -P div(u rho): identical for a divergence-free u, and one
        transform cheaper.  Products of two band-limited fields alias only
        outside the kept band, so the projection is exact.
        """
        u, umax = self.u(t)
        if self.is_zero or umax == 0.0:
            return None
        sp = self.sp
        rho = sp.ifft(R)
        F1 = sp.fft(u[0] * rho)
        F2 = sp.fft(u[1] * rho)
        return -(sp.d1 * F1 + sp.d2 * F2) * self.mask

    def step(self, R, t, dt):
        E = np.exp(self.L * (0.5 * dt))
        E2 = E * E
        N0 = self.rhs(R, t)
        if N0 is None and self.u(t + dt)[1] == 0.0 and self.u(t + 0.5 * dt)[1] == 0.0:
            return E2 * R
        # stage 1 at t, stage 2 at t + dt, stage 3 at t + dt/2
        R1 = E2 * (R if N0 is None else R + dt * N0)
        N1 = self.rhs(R1, t + dt)
        R2 = 0.75 * E * R + 0.25 * E * (R if N0 is None else R + dt * N0)
        if N1 is not None:
            with np.errstate(over="ignore"):
                Einv = np.where(E > 0, 1.0 / np.where(E > 0, E, 1.0), 0.0)
            R2 = R2 + 0.25 * dt * Einv * N1
        N2 = self.rhs(R2, t + 0.5 * dt)
        R3 = (1.0 / 3.0) * E2 * R + (2.0 / 3.0) * E * (R2 if N2 is None else R2 + dt * N2)
        return R3


def _energy(sp, R, kappas):
    l2 = sp.mean_sq(R)
    g = sp.grad_sq(R)
    return l2, kappas.reshape(-1) * g


def advance(rho: GridField2D, u_t, kappa, dt, t=0.0, u_next=None, u_mid=None) -> GridField2D:
    """One integrating-factor SSP-RK3 step.

    Parameters
    ----------
    rho : GridField2D
    u_t : array (2, N, N) or callable
        Velocity at the stage times.  An array is treated as frozen over the step.
    kappa, dt : float
    """
    N = rho.N
    if callable(u_t):
        vel = u_t
    else:
        arr = np.asarray(u_t, dtype=float)
        vel = {t: arr, t + dt: arr if u_next is None else u_next,
               t + 0.5 * dt: arr if u_mid is None else u_mid}.__getitem__
    st = _Stepper(N, [kappa], vel)
    R = (spectral(N).fft(rho.values) * st.mask)[None]
    R = st.step(R, t, dt)
    if not np.all(np.isfinite(R)):
        raise BlowUpError(1, t, dt)
    return GridField2D.from_hat(R[0], N, t + dt, rho.tag)


def solve_batch(rho_in, velocity, kappas: Sequence[float], T: float, config: SolverConfig,
                observers: Sequence[Callable] = (), t0: float = 0.0):
    """Advance several initial data / diffusivities under one velocity.

    Parameters
    ----------
    rho_in : GridField2D or array (N, N) or (B, N, N)
        Initial data; one field is broadcast over the diffusivities.
    velocity : callable t -> array (2, N, N)
    kappas : sequence of float
    observers : callables ``f(t, spectra)`` invoked at snapshot times
        (and at t0 and T), with spectra of shape (B, N, N//2+1).

    Returns
    -------
    finals : list of GridField2D
    traces : list of SolveTrace
    """
    N = config.N
    sp = spectral(N)
    vals = rho_in.values if isinstance(rho_in, GridField2D) else np.asarray(rho_in, float)
    if vals.shape[-1] != N:
        raise ValueError(f"datum has N={vals.shape[-1]}, config has N={N}")
    kappas = np.asarray(kappas, dtype=float).reshape(-1)
    B = kappas.size
    if vals.ndim == 2:
        vals = np.broadcast_to(vals, (B, N, N))
    if vals.shape[0] != B:
        raise ValueError("batch size of datum and kappas differ")
    st = _Stepper(N, kappas, velocity)
    R = sp.fft(vals) * st.mask
    means = R[:, 0, 0].real / N ** 2
    R[:, 0, 0] = 0.0
    traces = [SolveTrace(kappa=float(k), mean=float(m)) for k, m in zip(kappas, means)]
    l2, d = _energy(sp, R, kappas)
    for b, tr in enumerate(traces):
        tr.record(t0, l2[b], d[b])

    h = 1.0 / N
    t = t0
    t_end = t0 + T
    snaps = []
    if config.snapshot_every:
        n_snap = int(math.floor(T / config.snapshot_every + 1e-9))
        snaps = [t0 + k * config.snapshot_every for k in range(1, n_snap + 1)]
    snap_i = 0

    def notify(tt, RR):
        for f in observers:
            f(tt, RR)
        if config.keep_snapshots:
            for b, tr in enumerate(traces):
                tr.snapshots.append((tt, RR[b].copy()))

    notify(t, R)
    cap = config.dt_max
    if config.mu_active:
        cap = min(cap, config.mu_fraction / config.mu_active)
    step = 0
    while t < t_end - 1e-14 * max(1.0, abs(t_end)):
        target = t_end
        if snap_i < len(snaps):
            target = min(target, snaps[snap_i])
        if config.dt_fixed is not None:
            dt = config.dt_fixed
        else:
            # sup of |u| at t and at the stage times of the previous step
            umax = max(st.u(t)[1], st.recent_umax(), config.u_scale or 0.0)
            dt = cap if umax == 0.0 else min(cap, config.cfl * h / umax)
            if config.diff_number:
                rate = float(np.max(2.0 * d / np.maximum(l2, 1e-300)))
                if rate > 0.0:
                    dt = min(dt, config.diff_number / rate)
        if t + dt >= target - 1e-14:
            dt = target - t
        if config.dt_fixed is None:
            # the velocity is known at t + dt before the step is taken
            _, umax2 = st.u(t + dt)
            while umax2 > 0 and dt > config.cfl * h / umax2 * (1 + 1e-12):
                dt = 0.9 * config.cfl * h / umax2
                _, umax2 = st.u(t + dt)
        R = st.step(R, t, dt)
        step += 1
        if not np.all(np.isfinite(R)):
            raise BlowUpError(step, t, dt)
        t = target if abs((t + dt) - target) < 1e-13 else t + dt
        l2, d = _energy(sp, R, kappas)
        for b, tr in enumerate(traces):
            tr.record(t, l2[b], d[b])
        if snap_i < len(snaps) and abs(t - snaps[snap_i]) < 1e-13:
            snap_i += 1
            if t < t_end - 1e-13:
                notify(t, R)
    notify(t, R)
    finals = []
    for b, tr in enumerate(traces):
        tr.steps = step
        Rb = R[b].copy()
        Rb[0, 0] = tr.mean * N ** 2
        finals.append(GridField2D.from_hat(Rb, N, t, "rho"))
    return finals, traces


def sample_umax(velocity, t0: float, T: float, n: int = 97) -> float:
    """max over n equispaced times in [t0, t0 + T] of max|u|; a u_scale estimate."""
    best = 0.0
    for t in np.linspace(t0, t0 + T, n):
        best = max(best, float(np.max(np.abs(velocity(float(t))))))
    return best


def solve(rho_in, velocity, kappa: float, T: float, config: SolverConfig,
          observers: Sequence[Callable] = ()):
    """Single solve; returns (final field, SolveTrace).

    A nonzero mean is recorded in the trace and carried unchanged; the energy
    quantities refer to the mean-free part.
    """
    if velocity is None:
        velocity = zero_velocity(config.N)
    finals, traces = solve_batch(rho_in, velocity, [kappa], T, config, observers)
    return finals[0], traces[0]


def energy_identity_residual(trace: SolveTrace) -> float:
    """|1/2 ||rho(T)||^2 + D(T) - 1/2 ||rho_in||^2| / (1/2 ||rho_in||^2)."""
    e0 = 0.5 * trace.l2sq[0]
    if e0 == 0.0:
        return 0.0
    return abs(0.5 * trace.l2sq[-1] + trace.cum_diss[-1] - e0) / e0
