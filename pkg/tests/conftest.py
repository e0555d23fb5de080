import numpy as np
import pytest

from hmor import (BoundingBox, Camera, Person, RelativePose, Scene,
                  SkeletonTopology)


@pytest.fixture
def camera():
    return Camera(1000.0, 1000.0, 500.0, 500.0)


def make_person(rel_joints, root_depth, box=(400.0, 400.0, 200.0, 200.0),
                root_index=0, roi_area=0.0):
    return Person(
        box=BoundingBox(*box),
        rel_pose=RelativePose(np.asarray(rel_joints, dtype=float), root_index),
        root_depth=root_depth,
        roi_area=roi_area,
    )


def two_person_depth_fixture(camera, z1=4000.0, z2=4600.0):
    """Two persons with identical relative poses at different depths.

    With identical z_rel profiles the mean-depth gap equals the root
    depth gap, which makes the instance error hand-computable.
    """
    topology = SkeletonTopology(joint_count=4, root_index=0,
                                parts=((0, 1), (1, 2), (2, 3)))
    rel = [
        [100.0, 100.0, 0.0],
        [120.0, 60.0, -40.0],
        [80.0, 140.0, 60.0],
        [60.0, 40.0, -20.0],
    ]
    p1 = make_person(rel, z1, box=(300.0, 400.0, 200.0, 200.0))
    p2 = make_person(rel, z2, box=(600.0, 420.0, 200.0, 200.0))
    return Scene(camera=camera, persons=(p1, p2), topology=topology)


def swap_root_depths(scene):
    import dataclasses
    a, b = scene.persons
    return dataclasses.replace(scene, persons=(
        dataclasses.replace(a, root_depth=b.root_depth),
        dataclasses.replace(b, root_depth=a.root_depth),
    ))
