"""
Asking the teacher
==================

An Ask action costs one step. If a teacher is around for this episode the
next observation carries a mask of the target cells in view; otherwise the
mask stays empty.
"""

import dataclasses

import numpy as np

from asknav.actions import Action
from asknav.env import EnvConfig, generate_episode, reset, step

cfg = EnvConfig()
rng = np.random.default_rng(3)

# find an episode where the target is in view right at the start
while True:
    spec = generate_episode(rng, cfg, pool=range(8))
    spec = dataclasses.replace(spec, teacher_present=True, feedback_enabled=True)
    state = reset(spec)
    out = step(spec, state, Action.ASK)
    if out.next_view.window[..., -1].any():
        break

mask = out.next_view.window[..., -1]
target = out.next_view.window[..., 2 + spec.target_class]
print("feedback mask after Ask:")
print(mask.astype(int))
print("mask is a subset of the target class channel:", bool(np.all(target[mask > 0] == 1)))

# one step later the mask is gone again
after = step(spec, state, Action.PASS)
print("mask after a further Pass:", int(after.next_view.window[..., -1].sum()), "cells")

# same episode without a teacher: asking returns nothing
absent = dataclasses.replace(spec, teacher_present=False)
state = reset(absent)
print("mask without teacher:", int(step(absent, state, Action.ASK).next_view.window[..., -1].sum()), "cells")
print("presence bit in the aux vector:", out.next_view.aux[cfg.vocab_size])
