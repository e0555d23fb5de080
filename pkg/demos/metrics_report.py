"""Scoring a noisy prediction against ground truth.

Shows matching, the MPJPE family under its three alignments, PCK/AUC,
and the ordinal-violation audit, plus a slice of the PCK curve.
"""

import numpy as np

import hmor


def main():
    spec = hmor.GenSpec(seed=19, n_persons=3,
                        perturbation=hmor.GaussNoise(sigma_xy=25.0, sigma_z=250.0))
    gt = hmor.generate_scene(spec)
    pred = hmor.perturb(gt, spec)

    rng = np.random.default_rng(1)
    views = [gt.camera.normal] + [hmor.sample_view(rng=rng).direction for _ in range(7)]
    report = hmor.evaluate(pred, gt, views=views)

    print("matched pairs (pred -> gt):", report.matched_pairs)
    print(f"MPJPE (root aligned):   {report.mpjpe:8.2f} mm")
    print(f"PA-MPJPE (similarity):  {report.pa_mpjpe:8.2f} mm")
    print(f"ABS-MPJPE (no align):   {report.abs_mpjpe:8.2f} mm")
    print(f"PCK_rel @150mm:         {report.pck_rel:8.2f} %")
    print(f"PCK_abs @150mm:         {report.pck_abs:8.2f} %")
    print(f"AUC_rel (1..150mm):     {report.auc_rel:8.2f} %")
    v = report.ordinal_violations
    print(f"ordinal violations over {len(views)} views: "
          f"instance={v.instance} part={v.part} joint={v.joint}")

    print("\nPCK curve (every 25 mm):")
    print("  threshold   rel      abs")
    for t, rel, ab in report.pck_curve[24::25]:
        print(f"  {t:6.0f} mm {rel:7.2f}% {ab:7.2f}%")


if __name__ == "__main__":
    main()
