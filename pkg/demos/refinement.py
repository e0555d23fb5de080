"""Depth-order supervision fixing absolute poses that per-person data
terms cannot see.

Four people stand at similar depths; Gaussian noise on the root depths
scrambles their order. A baseline anchored to the noisy input has no
restoring force. Refining under the ordinal losses restores the
ordering and recovers most of the absolute error that remains outside
the common depth shift of the whole group (which no pairwise order can
observe).
"""

import numpy as np

import hmor


def scene_abs_mpjpe(pred, gt):
    vals = [hmor.mpjpe(hmor.assemble_absolute(p, pred.camera),
                       hmor.assemble_absolute(g, gt.camera), "none")
            for p, g in zip(pred.persons, gt.persons)]
    return float(np.mean(vals))


def main():
    spec = hmor.GenSpec(seed=23, n_persons=4, depth_range=(4000.0, 4400.0),
                        perturbation=hmor.GaussNoise(sigma_z=300.0))
    gt = hmor.generate_scene(spec)
    noisy = hmor.perturb(gt, spec)

    view = [gt.camera.normal]
    print("root depth errors (mm):",
          [round(n.root_depth - g.root_depth, 1)
           for n, g in zip(noisy.persons, gt.persons)])
    print(f"noisy ABS-MPJPE: {scene_abs_mpjpe(noisy, gt):.1f} mm, "
          f"violations {hmor.ordinal_violations(noisy, gt, view).total}")

    cfg = hmor.SolverConfig(
        steps=500, step_size=5e-2,
        w_pose=0.0, w_init=0.0, w_refine=0.0, w_hmor=1.0, w_abs=0.0)
    refined, trace = hmor.refine(noisy, gt, cfg)

    print(f"\nobjective: {trace[0].value:.4f} -> {trace[-1].value:.2e} "
          f"over {trace[-1].step} steps")
    for entry in trace[:: max(1, len(trace) // 8)]:
        print(f"  step {entry.step:4d}  value {entry.value:10.6f}  "
              f"violations {entry.violations}")

    print(f"\nrefined root depth errors (mm):",
          [round(r.root_depth - g.root_depth, 1)
           for r, g in zip(refined.persons, gt.persons)])
    print(f"refined ABS-MPJPE: {scene_abs_mpjpe(refined, gt):.1f} mm, "
          f"violations {hmor.ordinal_violations(refined, gt, view).total}")

    # the anchored baseline: nothing pulls it anywhere
    base_cfg = hmor.SolverConfig(steps=50, w_pose=0.0, w_init=0.0, w_refine=0.0,
                                 w_hmor=0.0, w_abs=1.0, anchor="input")
    baseline, _ = hmor.refine(noisy, gt, base_cfg)
    print(f"\nanchored baseline ABS-MPJPE: {scene_abs_mpjpe(baseline, gt):.1f} mm "
          f"(unchanged, no restoring force)")


if __name__ == "__main__":
    main()
