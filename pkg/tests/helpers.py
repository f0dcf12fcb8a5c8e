import numpy as np

from asknav.env import EpisodeSpec, ObjectInstance, Pose
from asknav.geometry import GridMap


def open_arena(h=7, w=7):
    occ = np.zeros((h, w), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    return GridMap(occ)


def make_spec(grid, objects, target_class, cell, heading=0, **kw):
    """Hand-built episode; ``objects`` is a list of (class_id, (row, col))."""
    objs = tuple(ObjectInstance(c, tuple(p)) for c, p in objects)
    kw.setdefault("vocab_size", 12)
    return EpisodeSpec(grid=grid, objects=objs, target_class=target_class,
                       start_pose=Pose(tuple(cell), heading), **kw)


def rotate_spec(spec, k=1):
    """Rotate the whole world 90 degrees clockwise ``k`` times (heading +k)."""
    for _ in range(k):
        h = spec.grid.height
        occ = np.rot90(spec.grid.occupied, -1)

        def rot(cell):
            r, c = cell
            return (c, h - 1 - r)

        objs = [(o.class_id, rot(o.cell)) for o in spec.objects]
        pose = spec.start_pose
        spec = make_spec(GridMap(occ, spec.grid.cell_size_m), objs, spec.target_class, rot(pose.cell),
                         (pose.heading + 1) % 4, teacher_present=spec.teacher_present,
                         feedback_enabled=spec.feedback_enabled, vocab_size=spec.vocab_size,
                         view_k=spec.view_k, max_steps=spec.max_steps, success_radius_m=spec.success_radius_m,
                         require_visible_at_stop=spec.require_visible_at_stop)
    return spec
