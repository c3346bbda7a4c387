"""Desk-scale local-minimality check on the strictly stable configuration.

Every cataloged admissible perturbation (normal bumps, junction shifts, arm
rotations, random sliding fields) increases the energy, and the direct
energy difference matches the Taylor remainder integral of g''(t).
"""
import numpy as np

from trijunction import (trilobe_config, generate_crack_mesh,
                         mark_admissible_subdomain, solve_equilibrium,
                         SectorConstants, analyze_stability,
                         perturbation_catalog, energy_comparison_sweep,
                         flow_from_field, energy_taylor_check)

cfg = trilobe_config()
mesh = mark_admissible_subdomain(generate_crack_mesh(cfg, 0.05), cfg, cfg.mu)
u = solve_equilibrium(cfg, mesh, SectorConstants([1.0, 2.0, 3.0]))
print("verdict:", analyze_stability(cfg, u, n=32).verdict)

catalog = perturbation_catalog(cfg, np.random.default_rng(0))
sweep = energy_comparison_sweep(cfg, u, mesh, catalog, amplitudes=(0.1, 0.01))
for r in sweep["records"]:
    print("  %-22s a=%.2f  dMS = %+.3e" % (r["case"], r["amplitude"],
                                           r.get("delta", np.nan)))
print("minimum energy difference over the catalog: %+.3e" % sweep["min_delta"])

V = catalog[0][1]
fam = flow_from_field(V.X * 0.01, cfg, t_grid=np.linspace(0, 1, 33))
et = energy_taylor_check(cfg, u, mesh, fam, t_subsample=4)
print("energy-Taylor identity: direct %.6e vs integral %.6e (gap %.2f%%)"
      % (et["delta_direct"], et["delta_integral"], 100 * et["relative_gap"]))
