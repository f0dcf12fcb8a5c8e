"""
A tour of the grid world
========================

Generate one episode, look at the map from above, then look at what the
agent sees from its own point of view.
"""

import numpy as np

from asknav.actions import Action
from asknav.env import EnvConfig, generate_episode, render_egoview, reset, step
from asknav.geometry import FORWARD

cfg = EnvConfig()
spec = generate_episode(np.random.default_rng(7), cfg, pool=range(8))

# Top-down map: '#' wall, digits are object classes, '^>v<' the agent,
# '*' marks cells close enough to the target to stop successfully.
arrows = "^>v<"
rows = []
for r in range(spec.grid.height):
    line = ""
    for c in range(spec.grid.width):
        ch = "#" if spec.grid.occupied[r, c] else "."
        if (r, c) in spec.success_region:
            ch = "*"
        for obj in spec.objects:
            if obj.cell == (r, c):
                ch = "abcdefghijkl"[obj.class_id]
        if spec.start_pose.cell == (r, c):
            ch = arrows[spec.start_pose.heading]
        line += ch
    rows.append(line)
print("\n".join(rows))
print("target class:", "abcdefghijkl"[spec.target_class])
print("shortest path to success region:", spec.shortest_path_length(), "cells")

# The egocentric window: agent sits below the bottom-centre cell, facing up.
state = reset(spec)
view = render_egoview(spec, state)
occ, vis = view.window[..., 0], view.window[..., 1]
print("\noccupied (only where visible) / visible:")
for a, b in zip(occ, vis):
    print("".join("#" if x else "." for x in a), "  ", "".join("o" if x else " " for x in b))
print("observation length:", view.flat().size)

# Walk greedily down the distance field and stop.
dist = spec.distance_to_success
while not state.done:
    r, c = state.pose.cell
    if dist[r, c] == 0:
        action = Action.STOP
    else:
        want = next(d for d, (dr, dc) in enumerate(FORWARD)
                    if dist[r + dr, c + dc] == dist[r, c] - 1)
        turn = (want - state.pose.heading) % 4
        action = {0: Action.MOVE_AHEAD, 1: Action.ROTATE_RIGHT, 2: Action.MOVE_BACK, 3: Action.ROTATE_LEFT}[turn]
    out = step(spec, state, action)
print(f"\nscripted walk: success={out.success} steps={state.steps} cells moved={state.path_length}")
