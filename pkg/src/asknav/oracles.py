"""Slow, independent reference computations used to cross-check the fast paths.

None of these share code with the implementations they check.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

import numpy as np


def enumerate_shortest_path(occupied: np.ndarray, start, goals: Iterable, limit: int = 10**6) -> Optional[int]:
    """Shortest 4-connected path by depth-first enumeration of all simple paths."""
    goals = set(map(tuple, goals))
    h, w = occupied.shape
    best = [None]
    visited = {tuple(start)}
    budget = [limit]

    def dfs(cell, depth):
        budget[0] -= 1
        if budget[0] < 0:
            raise RuntimeError("path enumeration budget exhausted")
        if best[0] is not None and depth >= best[0]:
            return
        if cell in goals:
            best[0] = depth
            return
        r, c = cell
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < h and 0 <= nc < w and not occupied[nr, nc] and (nr, nc) not in visited:
                visited.add((nr, nc))
                dfs((nr, nc), depth + 1)
                visited.discard((nr, nc))

    if occupied[tuple(start)]:
        return None
    dfs(tuple(start), 0)
    return best[0]


def segment_touches_cell(a, b, cell) -> bool:
    """Closed unit square around ``cell`` meets segment a-b (cell centres), by
    dense exact sampling at every square-edge crossing plus the endpoints."""
    (ar, ac), (br, bc) = a, b
    r, c = cell
    ts = {Fraction(0), Fraction(1)}
    for start, delta, lo in ((ar, br - ar, r), (ac, bc - ac, c)):
        if delta:
            for edge in (Fraction(2 * lo - 1, 2), Fraction(2 * lo + 1, 2)):
                t = (edge - start) / delta
                if 0 <= t <= 1:
                    ts.add(t)
    ts = sorted(ts)
    # include midpoints between consecutive breakpoints
    ts += [(x + y) / 2 for x, y in zip(ts, ts[1:])]
    half = Fraction(1, 2)
    for t in ts:
        pr, pc = ar + t * (br - ar), ac + t * (bc - ac)
        if abs(pr - r) <= half and abs(pc - c) <= half:
            return True
    return False


def brute_line_of_sight(occupied: np.ndarray, a, b) -> bool:
    h, w = occupied.shape
    for r in range(h):
        for c in range(w):
            if (r, c) in (tuple(a), tuple(b)) or not occupied[r, c]:
                continue
            if segment_touches_cell(a, b, (r, c)):
                return False
    return True


def brute_gae(rewards: Sequence[float], values: Sequence[float], dones: Sequence[bool],
              last_value: float, gamma: float, lam: float) -> np.ndarray:
    """A_t = sum_k (gamma*lam)^k delta_{t+k}, truncated after the first done."""
    n = len(rewards)
    nxt = list(values[1:]) + [last_value]
    deltas = [rewards[t] + gamma * nxt[t] * (0.0 if dones[t] else 1.0) - values[t] for t in range(n)]
    out = np.zeros(n)
    for t in range(n):
        total, coef = 0.0, 1.0
        for k in range(t, n):
            total += coef * deltas[k]
            if dones[k]:
                break
            coef *= gamma * lam
        out[t] = total
    return out


def finite_difference_grad(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f`` at ``x``."""
    g = np.zeros_like(x)
    for i in range(x.size):
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def dense_mlp(weights: Sequence[np.ndarray], biases: Sequence[np.ndarray], x: np.ndarray):
    """Explicit loop-based forward pass of a ReLU trunk with two linear heads:
    the last two (weight, bias) pairs are the logits and value heads."""
    h = [float(v) for v in x]
    for W, b in zip(weights[:-2], biases[:-2]):
        h = [max(0.0, sum(h[i] * W[i][j] for i in range(len(h))) + b[j]) for j in range(len(b))]
    heads = []
    for W, b in zip(weights[-2:], biases[-2:]):
        heads.append([sum(h[i] * W[i][j] for i in range(len(h))) + b[j] for j in range(len(b))])
    return heads[0], heads[1][0]


def adam_recurrence(grads: Sequence[float], lr: float, beta1=0.9, beta2=0.999, eps=1e-8, x0=0.0) -> list[float]:
    """Scalar Adam trajectory written out term by term."""
    x, m, v, out = x0, 0.0, 0.0, []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        x = x - lr * (m / (1 - beta1 ** t)) / ((v / (1 - beta2 ** t)) ** 0.5 + eps)
        out.append(x)
    return out


def spl_by_hand(episodes) -> float:
    total = 0.0
    for s, l, p in episodes:
        if s:
            total += l / (p if p > l else l)
    return 100.0 * total / len(episodes)
