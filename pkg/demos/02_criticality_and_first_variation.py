"""Criticality of the symmetric configurations and the first variation.

The symmetric disk and the three-lobe domain are both critical with
sector-constant data; a bent arm breaks criticality and the first variation
then matches a finite difference of the energy along a flow.
"""
import numpy as np

from trijunction import (disk_config, trilobe_config, bent_arm_config,
                         generate_crack_mesh, mark_admissible_subdomain,
                         solve_equilibrium, SectorConstants, VectorField,
                         VelocityPair, radial_bump, rk4_flow,
                         criticality_residual, first_variation)
from trijunction.flows import energy_at_map

for name, cfg in (("disk", disk_config()), ("trilobe", trilobe_config())):
    mesh = mark_admissible_subdomain(generate_crack_mesh(cfg, 0.05), cfg, cfg.mu)
    u = solve_equilibrium(cfg, mesh, SectorConstants([1.0, 2.0, 3.0]))
    res = criticality_residual(cfg, u)
    print("%s criticality residuals: f %.1e, angle %.1e, contact %.1e"
          % (name, *res))

print("\n-- non-critical configuration: first variation vs finite difference --")
cfg = bent_arm_config(bend=0.12)
mesh = mark_admissible_subdomain(generate_crack_mesh(cfg, 0.04), cfg, cfg.mu)
u = solve_equilibrium(cfg, mesh, lambda P: P[:, 0])
c = cfg.arms[0].point(0.45)
X = VectorField(lambda P: radial_bump(P, c, 0.02, 0.75 * cfg.mu)[:, None]
                * np.array([0.13, 0.07]))
V = VelocityPair.autonomous(X)
fv = first_variation(cfg, u, V)
dt = 1e-3
gp = energy_at_map(cfg, u, mesh, lambda P: rk4_flow(X, P, dt))[0]
gm = energy_at_map(cfg, u, mesh, lambda P: rk4_flow(X, P, -dt))[0]
fd = (gp - gm) / (2 * dt)
print("formula  %.8f" % fv)
print("FD       %.8f   (relative gap %.2e)" % (fd, abs(fv - fd) / abs(fd)))
