"""The near-identity connecting construction and its estimates.

Two targets: a pure-normal bump away from the junction (the far-field
normal flow suffices) and the worst case, a tangential translation of the
junction neighborhood along one arm (the graph-reparametrization branch).
"""
import numpy as np

from trijunction import (trilobe_config, ParamCurve,
                         construct_connecting_family, verify_flow_estimates)
from trijunction.flows import chi

cfg = trilobe_config()
ss = np.linspace(0, 1, 400)

amp = 5e-4
tgts = []
for i, arm in enumerate(cfg.arms):
    pts = arm.point(ss)
    if i == 0:
        prof = amp * np.sin(np.pi * np.clip((ss - 0.3) / 0.5, 0, 1)) ** 2
        pts = pts + prof[:, None] * arm.normal(ss)
    tgts.append(ParamCurve.from_samples(pts, flag=arm.flag))
fam = construct_connecting_family(cfg, tgts, eps=0.5)
est = verify_flow_estimates(fam)
print("normal bump: C1 = %.4f, C2 = %.3g, final Hausdorff gap %.1e"
      % (est["C1"], est["C2"], fam.diag["hausdorff_final"]))

sh = 1e-5 * cfg.arms[0].tangent(0.0)
tgts = [ParamCurve.from_samples(
    arm.point(ss) + chi(np.linalg.norm(arm.point(ss) - cfg.junction, axis=1) ** 2
                        / 0.15 ** 2)[:, None] * sh, flag=arm.flag)
    for arm in cfg.arms]
fam = construct_connecting_family(cfg, tgts, eps=0.5)
est = verify_flow_estimates(fam)
print("worst case (tangential junction shift): cone arm %d, G_L level %d"
      % (fam.diag["cone_arm"], fam.diag["G_L_level"]))
print("   C1 = %.4f, C2 = %.3g, Hausdorff %.1e, max C2-norm %.4f"
      % (est["C1"], est["C2"], fam.diag["hausdorff_final"],
         max(fam.c2_norm(t) for t in fam.times)))
