"""Second variation vs a Richardson-extrapolated energy second difference,
and the remainder identity at criticality."""
import numpy as np

from trijunction import (bent_arm_config, trilobe_config, generate_crack_mesh,
                         mark_admissible_subdomain, solve_equilibrium,
                         SectorConstants, VectorField, VelocityPair,
                         radial_bump, rk4_flow, ms_energy, second_variation,
                         second_variation_remainder, build_test_field,
                         SmoothJunctionScalar)
from trijunction.flows import energy_at_map

cfg = bent_arm_config(bend=0.12)
mesh = mark_admissible_subdomain(generate_crack_mesh(cfg, 0.05), cfg, cfg.mu)
u = solve_equilibrium(cfg, mesh, lambda P: P[:, 0])
c = cfg.arms[0].point(0.45)
X = VectorField(lambda P: radial_bump(P, c, 0.02, 0.75 * cfg.mu)[:, None]
                * np.array([0.13, 0.07]))
V = VelocityPair.autonomous(X)
rep = second_variation(cfg, u, V)
print(rep.text())

g0 = ms_energy(u, cfg, "U")[0]
g = lambda t: energy_at_map(cfg, u, mesh, lambda P: rk4_flow(X, P, t))[0]
dt = 2e-2
D1 = (g(dt) - 2 * g0 + g(-dt)) / dt ** 2
D2 = (g(dt / 2) - 2 * g0 + g(-dt / 2)) / (dt / 2) ** 2
fd = (4 * D2 - D1) / 3
print("\nRichardson second difference: %.8f (formula %.8f, rel gap %.2e)"
      % (fd, rep.second_variation, abs(fd - rep.second_variation) / abs(fd)))

print("\n-- remainder at criticality --")
cfg2 = trilobe_config()
mesh2 = mark_admissible_subdomain(generate_crack_mesh(cfg2, 0.05), cfg2, cfg2.mu)
u2 = solve_equilibrium(cfg2, mesh2, SectorConstants([1.0, 2.0, 3.0]))
phi = SmoothJunctionScalar(
    [lambda s: 0.05 * np.sin(np.pi * s) ** 2, lambda s: 0 * s, lambda s: 0 * s],
    dfns=[lambda s: 0.05 * np.pi * np.sin(2 * np.pi * s), lambda s: 0 * s,
          lambda s: 0 * s])
Vt = build_test_field(cfg2, phi)
R, rep2, qf = second_variation_remainder(cfg2, u2, Vt)
print("second variation %.10f,  quadratic form %.10f,  |R| = %.2e"
      % (rep2.second_variation, qf, abs(R)))
