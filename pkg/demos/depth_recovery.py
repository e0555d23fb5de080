"""The human-depth normalization chain, step by step.

An absolute root depth is divided by the focal lengths so the regression
target no longer depends on the camera, rescaled to the equivalent depth
of the resized person crop, corrected by a residual, and finally
inverted back to millimeters. With the true residual the chain inverts
exactly.
"""

import numpy as np

import hmor


def main():
    cam = hmor.Camera(fx=1150.0, fy=1080.0, cx=640.0, cy=360.0)
    z_true = 5230.0       # mm
    a_box = 48000.0       # person box area, px^2
    a_roi = 12000.0       # resized crop area, px^2

    z_norm = hmor.normalize_depth(z_true, cam)
    z_eq = hmor.equivalent_depth(z_norm, a_box, a_roi)
    print(f"absolute depth        z      = {z_true:10.3f} mm")
    print(f"focal-normalized      z_norm = {z_norm:10.6f}  (z / sqrt(fx*fy))")
    print(f"equivalent (resized)  z_eq   = {z_eq:10.6f}  (* sqrt(a_box/a_roi))")

    # a coarse initial estimate, off by 6 percent, plus the residual that
    # a refinement head would have to learn
    z_init = 0.94 * z_norm
    z_eq_init = hmor.equivalent_depth(z_init, a_box, a_roi)
    residual = z_eq - z_eq_init
    print(f"\ninitial estimate      z_init = {z_init:10.6f}")
    print(f"needed residual       delta  = {residual:10.6f}")

    recovered = hmor.recover_absolute_depth(residual, z_eq_init, cam, a_box, a_roi)
    print(f"recovered depth              = {recovered:10.3f} mm "
          f"(error {abs(recovered - z_true):.2e})")

    # the losses that supervise each stage
    est = hmor.DepthEstimate(z_init, z_eq_init, residual, a_box, a_roi)
    print(f"\ninit loss   (coarse stage):  {hmor.loss_init([z_init], [z_true], cam):.6f}")
    print(f"refine loss (with residual): {hmor.loss_refine([est], [z_true], cam):.6f}")
    bad = hmor.DepthEstimate(z_init, z_eq_init, 0.0, a_box, a_roi)
    print(f"refine loss (residual = 0):  {hmor.loss_refine([bad], [z_true], cam):.6f}")


if __name__ == "__main__":
    main()
