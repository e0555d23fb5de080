"""Multi-person 3D pose evaluation.

Predictions are matched to ground truth with an optimal (not greedy)
one-to-one assignment, then scored with the MPJPE family (no alignment,
root alignment, similarity alignment), distance-threshold PCK with its
area-under-curve summary, and ordinal-violation audits of the relation
levels.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError
from .geometry import project
from .ordinal import HmorConfig, count_violations, enumerate_pairs
from .skeleton import AbsolutePose, Scene, assemble_absolute

DEFAULT_PCK_THRESHOLD_MM = 150.0
DEFAULT_AUC_THRESHOLDS_MM = np.arange(1.0, 151.0)


@dataclass(frozen=True)
class Matching:
    """One-to-one assignment between predicted and ground-truth persons."""

    pairs: tuple[tuple[int, int], ...]
    unmatched_pred: tuple[int, ...]
    unmatched_gt: tuple[int, ...]


@dataclass(frozen=True)
class ViolationCounts:
    """Ordinal disagreements per relation level, summed over audit views."""

    instance: int
    part: int
    joint: int

    @property
    def total(self) -> int:
        return self.instance + self.part + self.joint


@dataclass(frozen=True)
class MetricReport:
    mpjpe: float
    pa_mpjpe: float
    abs_mpjpe: float
    pck_rel: float
    pck_abs: float
    auc_rel: float
    ordinal_violations: ViolationCounts
    matched_pairs: tuple[tuple[int, int], ...]
    pck_curve: tuple[tuple[float, float, float], ...] = ()


def similarity_align(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Align source points to target with the least-squares similarity
    transform (rotation, translation, uniform scale)."""
    x = np.asarray(source, dtype=float)
    y = np.asarray(target, dtype=float)
    if x.shape != y.shape or x.ndim != 2:
        raise InvalidInputError(f"point sets must share shape, got {x.shape} vs {y.shape}")
    n = x.shape[0]
    mu_x = x.mean(axis=0)
    mu_y = y.mean(axis=0)
    xc = x - mu_x
    yc = y - mu_y
    var_x = (xc ** 2).sum() / n
    if var_x < 1e-18:
        return x - mu_x + mu_y
    cov = yc.T @ xc / n
    U, d, Vt = np.linalg.svd(cov)
    s = np.ones_like(d)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        s[-1] = -1.0
    R = U @ np.diag(s) @ Vt
    c = (d * s).sum() / var_x
    return c * x @ R.T + (mu_y - c * R @ mu_x)


def joint_distances(pred: AbsolutePose, gt: AbsolutePose,
                    alignment: str = "root", root_index: int = 0) -> np.ndarray:
    """Per-joint Euclidean distances under the requested alignment."""
    p = pred.joints
    g = gt.joints
    if p.shape != g.shape:
        raise InvalidInputError(f"joint count mismatch: {p.shape} vs {g.shape}")
    if alignment == "none":
        pass
    elif alignment == "root":
        p = p - p[root_index]
        g = g - g[root_index]
    elif alignment == "procrustes":
        p = similarity_align(p, g)
    else:
        raise InvalidInputError(f"unknown alignment {alignment!r}")
    return np.linalg.norm(p - g, axis=1)


def mpjpe(pred: AbsolutePose, gt: AbsolutePose, alignment: str = "root",
          root_index: int = 0) -> float:
    """Mean per-joint position error in millimeters.

    alignment "none" scores absolute camera-frame coordinates, "root"
    translates both roots to the origin first, and "procrustes" applies
    the optimal similarity alignment before measuring.
    """
    return float(joint_distances(pred, gt, alignment, root_index).mean())


def _match_cost(pred: Scene, gt: Scene, cost: str) -> np.ndarray:
    root = gt.topology.root_index
    pred_poses = [assemble_absolute(p, pred.camera) for p in pred.persons]
    gt_poses = [assemble_absolute(p, gt.camera) for p in gt.persons]
    out = np.empty((len(pred_poses), len(gt_poses)))
    if cost == "root_aligned_3d":
        for i, pp in enumerate(pred_poses):
            for j, gp in enumerate(gt_poses):
                out[i, j] = mpjpe(pp, gp, "root", root)
    elif cost == "projected_2d":
        for i, pp in enumerate(pred_poses):
            pu = np.array([project(pred.camera, k) for k in pp.joints])
            for j, gp in enumerate(gt_poses):
                gu = np.array([project(gt.camera, k) for k in gp.joints])
                out[i, j] = float(np.linalg.norm(pu - gu, axis=1).mean())
    else:
        raise InvalidInputError(f"unknown matching cost {cost!r}")
    return out


def optimal_assignment(cost_matrix: np.ndarray):
    """Row and column indices of the minimum-total-cost one-to-one
    assignment of a (possibly rectangular) cost matrix."""
    return linear_sum_assignment(np.asarray(cost_matrix, dtype=float))


def match_persons(pred: Scene, gt: Scene, cost: str = "root_aligned_3d") -> Matching:
    """Minimum-total-cost one-to-one assignment of predictions to ground truth.

    The assignment is globally optimal, not greedy. Persons left over on
    either side (when counts differ) are reported unmatched.
    """
    if pred.topology.joint_count != gt.topology.joint_count:
        raise InvalidInputError("scenes use different joint counts")
    cost_matrix = _match_cost(pred, gt, cost)
    rows, cols = optimal_assignment(cost_matrix)
    pairs = tuple((int(r), int(c)) for r, c in zip(rows, cols))
    unmatched_pred = tuple(i for i in range(pred.person_count) if i not in set(rows))
    unmatched_gt = tuple(j for j in range(gt.person_count) if j not in set(cols))
    return Matching(pairs, unmatched_pred, unmatched_gt)


def _matched_distance_rows(pred: Scene, gt: Scene, alignment: str,
                           matching: Matching) -> tuple[np.ndarray, int]:
    """Distances for every matched gt joint plus the unmatched-gt count."""
    root = gt.topology.root_index
    rows = []
    for i, j in matching.pairs:
        rows.append(joint_distances(assemble_absolute(pred.persons[i], pred.camera),
                                    assemble_absolute(gt.persons[j], gt.camera),
                                    alignment, root))
    dists = np.concatenate(rows) if rows else np.empty(0)
    return dists, len(matching.unmatched_gt) * gt.topology.joint_count


def pck(pred: Scene, gt: Scene, alignment: str = "root",
        threshold_mm: float = DEFAULT_PCK_THRESHOLD_MM,
        matching: Matching | None = None) -> float:
    """Percentage of ground-truth joints predicted within the threshold.

    A joint exactly at the threshold counts as correct. Every joint of an
    unmatched ground-truth person counts as incorrect.
    """
    if threshold_mm <= 0:
        raise InvalidInputError(f"threshold must be positive, got {threshold_mm}")
    if matching is None:
        matching = match_persons(pred, gt)
    dists, n_missed = _matched_distance_rows(pred, gt, alignment, matching)
    total = len(dists) + n_missed
    return 100.0 * int(np.count_nonzero(dists <= threshold_mm)) / total


def auc(pred: Scene, gt: Scene, alignment: str = "root",
        thresholds_mm: np.ndarray | None = None,
        matching: Matching | None = None) -> float:
    """Mean PCK over a threshold grid (default 1..150 mm, 1 mm step)."""
    if thresholds_mm is None:
        thresholds_mm = DEFAULT_AUC_THRESHOLDS_MM
    if matching is None:
        matching = match_persons(pred, gt)
    dists, n_missed = _matched_distance_rows(pred, gt, alignment, matching)
    total = len(dists) + n_missed
    curve = np.array([100.0 * int(np.count_nonzero(dists <= t)) / total
                      for t in thresholds_mm])
    return float(curve.mean())


def ordinal_violations(pred: Scene, gt: Scene, views,
                       config: HmorConfig | None = None) -> ViolationCounts:
    """Pairs per relation level whose predicted order disagrees with the
    ground truth, summed over the audit views. Scenes must already be
    matched person-for-person (same count, same order)."""
    if pred.person_count != gt.person_count:
        raise InvalidInputError("scenes must contain the same persons in the same order")
    cfg = config or HmorConfig()
    counts = np.zeros(3, dtype=int)
    for view in views:
        pairs = enumerate_pairs(gt, view, cfg)
        counts += np.array(count_violations(pred, pairs, cfg))
    return ViolationCounts(int(counts[0]), int(counts[1]), int(counts[2]))


def _reordered_matched(pred: Scene, gt: Scene, matching: Matching):
    """Sub-scenes containing only matched persons, in gt order."""
    order = sorted(matching.pairs, key=lambda ij: ij[1])
    pred_sub = dataclasses.replace(pred, persons=tuple(pred.persons[i] for i, _ in order))
    gt_sub = dataclasses.replace(gt, persons=tuple(gt.persons[j] for _, j in order))
    return pred_sub, gt_sub


def evaluate(pred: Scene, gt: Scene,
             pck_threshold_mm: float = DEFAULT_PCK_THRESHOLD_MM,
             auc_thresholds_mm: np.ndarray | None = None,
             views=None,
             config: HmorConfig | None = None) -> MetricReport:
    """Full metric report for one scene pair.

    MPJPE-family numbers average over matched persons; PCK-style numbers
    additionally penalize unmatched ground-truth persons. Ordinal
    violations are audited under ``views`` (default: the camera normal).
    """
    if auc_thresholds_mm is None:
        auc_thresholds_mm = DEFAULT_AUC_THRESHOLDS_MM
    matching = match_persons(pred, gt)
    root = gt.topology.root_index

    per_alignment = {}
    for alignment in ("root", "procrustes", "none"):
        vals = []
        for i, j in matching.pairs:
            vals.append(mpjpe(assemble_absolute(pred.persons[i], pred.camera),
                              assemble_absolute(gt.persons[j], gt.camera),
                              alignment, root))
        per_alignment[alignment] = float(np.mean(vals))

    curve = tuple(
        (float(t),
         pck(pred, gt, "root", float(t), matching),
         pck(pred, gt, "none", float(t), matching))
        for t in auc_thresholds_mm
    )

    if views is None:
        views = [gt.camera.normal]
    pred_sub, gt_sub = _reordered_matched(pred, gt, matching)
    violations = ordinal_violations(pred_sub, gt_sub, views, config)

    return MetricReport(
        mpjpe=per_alignment["root"],
        pa_mpjpe=per_alignment["procrustes"],
        abs_mpjpe=per_alignment["none"],
        pck_rel=pck(pred, gt, "root", pck_threshold_mm, matching),
        pck_abs=pck(pred, gt, "none", pck_threshold_mm, matching),
        auc_rel=auc(pred, gt, "root", auc_thresholds_mm, matching),
        ordinal_violations=violations,
        matched_pairs=matching.pairs,
        pck_curve=curve,
    )
