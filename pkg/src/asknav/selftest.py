"""Fast built-in oracle checks, runnable without the test suite
(``asknav selftest``)."""
from __future__ import annotations

import time

import numpy as np

from . import oracles
from .curriculum import compute_spl, compute_sr
from .geometry import GridMap, geodesic_distance, line_of_sight
from .policy import Architecture, backward, forward, init_params
from .ppo import AdamState, adam_step, compute_gae


def check_gradients(n_instances: int = 20, seed: int = 0) -> float:
    """Max relative error of backprop vs central differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        arch = Architecture(int(rng.integers(2, 7)), tuple(int(h) for h in rng.integers(2, 6, rng.integers(1, 3))),
                            int(rng.integers(2, 5)))
        params = init_params(rng, arch)
        params.flat += rng.normal(0, 0.1, params.flat.size)
        x = rng.normal(size=(int(rng.integers(1, 5)), arch.input_dim))
        gl = rng.normal(size=(len(x), arch.action_dim))
        gv = rng.normal(size=len(x))

        def objective(flat):
            p = type(params)(arch, flat)
            out = forward(p, x)
            return float(np.mean((out.logits * gl).sum(1) + out.value * gv))

        analytic = backward(params, forward(params, x), gl, gv)
        numeric = oracles.finite_difference_grad(objective, params.flat.copy())
        scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-7)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / scale)))
    return worst


def check_gae(n: int = 200, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        T = int(rng.integers(1, 13))
        r, v = rng.normal(size=T), rng.normal(size=T)
        d = rng.random(T) < 0.2
        last = float(rng.normal())
        g, lam = float(rng.random()), float(rng.random())
        adv, _ = compute_gae(r, v, d, last, g, lam)
        worst = max(worst, float(np.max(np.abs(adv - oracles.brute_gae(r, v, d, last, g, lam)))))
    return worst


def check_metrics() -> bool:
    eps = [(1, 10, 12), (0, 5, 3), (1, 8, 8)]
    ok = abs(compute_spl(eps) - 100 * (10 / 12 + 1) / 3) < 1e-12
    ok &= abs(compute_spl(eps) - oracles.spl_by_hand(eps)) < 1e-12
    ok &= compute_sr([(1, 1, 1)] * 13 + [(0, 1, 1)] * 87) == 13.0
    return bool(ok)


def check_geodesic() -> bool:
    grid = GridMap.from_ascii([
        "#######",
        "#.....#",
        "#.###.#",
        "#.#.#.#",
        "#.#.#.#",
        "#...#.#",
        "#######",
    ])
    for start in grid.free_cells():
        for goal in grid.free_cells():
            if geodesic_distance(grid, start, [goal]) != oracles.enumerate_shortest_path(grid.occupied, start, [goal]):
                return False
    return True


def check_line_of_sight(seed: int = 0) -> bool:
    rng = np.random.default_rng(seed)
    occ = rng.random((6, 6)) < 0.3
    grid = GridMap(occ)
    cells = [(r, c) for r in range(6) for c in range(6)]
    return all(line_of_sight(grid, a, b) == oracles.brute_line_of_sight(occ, a, b) for a in cells for b in cells)


def check_adam() -> bool:
    x = np.zeros(1)
    state = AdamState.zeros(1)
    traj = []
    for _ in range(3):
        x = adam_step(x, np.ones(1), state, 0.1)
        traj.append(float(x[0]))
    return bool(np.allclose(traj, oracles.adam_recurrence([1.0] * 3, 0.1), atol=1e-15, rtol=0))


def run_selftest(echo=print) -> bool:
    checks = [
        ("gradient vs finite differences", lambda: check_gradients() < 1e-6, "max rel err < 1e-6"),
        ("GAE vs brute-force sum", lambda: check_gae() < 1e-12, "max abs err < 1e-12"),
        ("SR / SPL worked examples", check_metrics, "exact"),
        ("BFS vs path enumeration", check_geodesic, "exact"),
        ("line of sight vs brute force", check_line_of_sight, "exact"),
        ("Adam vs scalar recurrence", check_adam, "exact"),
    ]
    all_ok = True
    for name, fn, tol in checks:
        t0 = time.perf_counter()
        ok = bool(fn())
        all_ok &= ok
        echo(f"{'PASS' if ok else 'FAIL'}  {name} ({tol}, {time.perf_counter() - t0:.2f}s)")
    return all_ok
