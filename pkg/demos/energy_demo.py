"""Energy balance of one scalar under the desk velocity u_2.

Prints 1/2 ||rho(T)||^2 + kappa int ||grad rho||^2 against 1/2 ||rho_in||^2.
"""
import numpy as np

from homlab.fields import VelocityHierarchy
from homlab.grid import spectral
from homlab.params import desk_preset
from homlab.pdesolver import SolverConfig, energy_identity_residual, sample_umax, solve

N, T = 256, 0.1
hier = VelocityHierarchy(desk_preset(), N, 1)
vel = hier.velocity_field(1)
x1, x2 = spectral(N).grid()
rho = np.sin(2 * np.pi * x1) + np.cos(2 * np.pi * x2)
cfg = SolverConfig(N=N, mu_active=hier.gens[1].mu_q, u_scale=sample_umax(vel, 0.0, T))
_, tr = solve(rho, vel, hier.gens[0].kappa_q, T, cfg)
print(f"steps {tr.steps}, D = {tr.D:.6f}, 1/2|rho(T)|^2 = {0.5 * tr.l2sq[-1]:.6f}, "
      f"1/2|rho_in|^2 = {0.5 * tr.l2sq[0]:.6f}, residual {energy_identity_residual(tr):.2e}")
