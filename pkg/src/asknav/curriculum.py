"""Seen/unseen class splits, the semi-present teacher training stream, and
SR/SPL evaluation with a presence x method comparison document."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Callable, Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from .env import EnvConfig, EpisodeSpec, EpisodeState, generate_episode, render_egoview, reset, step
from .policy import PolicyParams, action_distribution, forward
from .ppo import FrameStack, sample_actions
from .teacher import PresencePolicy, sample_presence

METHODS = ("baseline", "feedback", "semi")


@dataclass(frozen=True)
class SplitSpec:
    seen: tuple[int, ...]
    unseen: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.seen:
            raise ValueError("seen split must be nonempty")
        if set(self.seen) & set(self.unseen):
            raise ValueError("seen and unseen classes overlap")

    def pool(self, split: str) -> tuple[int, ...]:
        if split not in ("seen", "unseen"):
            raise ValueError(f"split must be 'seen' or 'unseen', got {split!r}")
        return self.seen if split == "seen" else self.unseen


def build_split(vocab_size: int, n_seen: int, rng: np.random.Generator) -> SplitSpec:
    if not 0 < n_seen < vocab_size:
        raise ValueError(f"need 0 < n_seen < vocab_size, got n_seen={n_seen}, vocab_size={vocab_size}")
    perm = rng.permutation(vocab_size)
    return SplitSpec(tuple(sorted(int(c) for c in perm[:n_seen])),
                     tuple(sorted(int(c) for c in perm[n_seen:])))


@dataclass(frozen=True)
class CurriculumConfig:
    method: str = "semi"
    eta_percent: float = 75.0

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        PresencePolicy(self.eta_percent)

    @property
    def feedback_enabled(self) -> bool:
        return self.method != "baseline"

    @property
    def effective_eta(self) -> float:
        return {"baseline": 0.0, "feedback": 100.0}.get(self.method, self.eta_percent)

    @property
    def label(self) -> str:
        if self.method == "semi":
            return f"Semi-{self.eta_percent:g}"
        return self.method.capitalize()


def training_stream(
    curriculum: CurriculumConfig,
    split: SplitSpec,
    rng: np.random.Generator,
    env_cfg: Optional[EnvConfig] = None,
) -> Iterator[EpisodeSpec]:
    """Endless stream of seen-class episodes with per-episode teacher presence."""
    env_cfg = env_cfg or EnvConfig()
    presence = PresencePolicy(curriculum.effective_eta)
    while True:
        spec = generate_episode(rng, env_cfg, split.seen)
        present = sample_presence(rng, presence) and curriculum.feedback_enabled
        yield replace(spec, teacher_present=present, feedback_enabled=curriculum.feedback_enabled)


# ---------------------------------------------------------------- metrics

@dataclass(frozen=True)
class EpisodeRecord:
    success: bool
    shortest: int  # l_i: geodesic steps from start to the success region
    path: int  # p_i: executed cell translations
    length: int = 0
    asks: int = 0


def _triples(episodes) -> list[tuple[float, int, int]]:
    out = []
    for e in episodes:
        if isinstance(e, EpisodeRecord):
            out.append((float(e.success), e.shortest, e.path))
        else:
            s, l, p = e
            out.append((float(s), int(l), int(p)))
    if not out:
        raise ValueError("metrics need at least one episode")
    return out


def spl_term(success: float, shortest: int, path: int) -> float:
    return success * shortest / max(path, shortest)


def compute_spl(episodes) -> float:
    """Success weighted by path length, in percent."""
    rows = _triples(episodes)
    for _, l, p in rows:
        if l <= 0 or p < 0:
            raise ValueError(f"SPL needs shortest > 0 and path >= 0, got l={l}, p={p}")
    return 100.0 * sum(spl_term(*r) for r in rows) / len(rows)


def compute_sr(episodes) -> float:
    rows = _triples(episodes)
    return 100.0 * sum(s for s, _, _ in rows) / len(rows)


# ---------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class EvalRow:
    method: str
    presence: bool
    split: str
    sr: float
    spl: float
    n_episodes: int
    mean_len: float
    mean_asks: float

    CSV_HEADER = ("method", "presence", "split", "sr", "spl", "n_episodes", "mean_len", "mean_asks")

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "presence": "present" if self.presence else "absent",
            "split": self.split,
            "sr": round(self.sr, 4),
            "spl": round(self.spl, 4),
            "n_episodes": self.n_episodes,
            "mean_len": round(self.mean_len, 4),
            "mean_asks": round(self.mean_asks, 4),
        }

    @classmethod
    def from_records(cls, method: str, presence: bool, split: str, records: Sequence[EpisodeRecord]) -> "EvalRow":
        return cls(
            method, presence, split,
            compute_sr(records), compute_spl(records), len(records),
            float(np.mean([r.length for r in records])),
            float(np.mean([r.asks for r in records])),
        )


def to_csv(rows: Sequence[EvalRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=EvalRow.CSV_HEADER, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.as_dict())
    return buf.getvalue()


ScriptedAgent = Callable[[EpisodeSpec, EpisodeState, np.random.Generator], int]


def episode_seed(root: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(root, spawn_key=(index,))


def eval_episodes(
    env_cfg: EnvConfig,
    split: SplitSpec,
    split_name: str,
    teacher_present: bool,
    feedback_enabled: bool,
    n_episodes: int,
    seed: int,
) -> list[tuple[EpisodeSpec, np.random.Generator]]:
    """Episode ``i`` and its action generator depend only on ``(seed, i)``."""
    out = []
    pool = split.pool(split_name)
    for i in range(n_episodes):
        env_ss, act_ss = episode_seed(seed, i).spawn(2)
        spec = generate_episode(np.random.default_rng(env_ss), env_cfg, pool)
        spec = replace(spec, teacher_present=teacher_present and feedback_enabled,
                       feedback_enabled=feedback_enabled)
        out.append((spec, np.random.default_rng(act_ss)))
    return out


def evaluate(
    agent: Union[PolicyParams, ScriptedAgent],
    split: SplitSpec,
    teacher_present: bool,
    n_episodes: int,
    seed: int,
    *,
    split_name: str = "seen",
    env_cfg: Optional[EnvConfig] = None,
    feedback_enabled: Optional[bool] = None,
    method: str = "",
    greedy: bool = False,
    batch_size: int = 64,
) -> EvalRow:
    """Run ``n_episodes`` fresh episodes with teacher presence forced.

    ``agent`` is either trained parameters (actions sampled from the policy,
    or argmax when ``greedy``) or a scripted callable. Presence is forced off
    for agents without the Ask action.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    env_cfg = env_cfg or EnvConfig()
    if feedback_enabled is None:
        feedback_enabled = isinstance(agent, PolicyParams) and agent.arch.action_dim == 7
    episodes = eval_episodes(env_cfg, split, split_name, teacher_present, feedback_enabled, n_episodes, seed)
    if isinstance(agent, PolicyParams):
        records = []
        for start in range(0, n_episodes, batch_size):
            records += _run_batch(agent, episodes[start:start + batch_size], greedy)
    else:
        records = [_run_scripted(agent, spec, rng) for spec, rng in episodes]
    return EvalRow.from_records(method, teacher_present and feedback_enabled, split_name, records)


def _record(spec: EpisodeSpec, state: EpisodeState) -> EpisodeRecord:
    return EpisodeRecord(state.success, spec.shortest_path_length(), state.path_length, state.steps, state.asks)


def _run_scripted(agent: ScriptedAgent, spec: EpisodeSpec, rng: np.random.Generator) -> EpisodeRecord:
    state = reset(spec)
    while not state.done:
        step(spec, state, agent(spec, state, rng), render=False)
    return _record(spec, state)


def _run_batch(params: PolicyParams, episodes, greedy: bool) -> list[EpisodeRecord]:
    a_dim = params.arch.action_dim
    states = [reset(spec) for spec, _ in episodes]
    first = [render_egoview(spec, st).flat() for (spec, _), st in zip(episodes, states)]
    n_stack = params.arch.input_dim // first[0].size if first else 1
    stacks = [FrameStack(n_stack, v.size) for v in first]
    obs = [s.push(v) for s, v in zip(stacks, first)]
    live = list(range(len(episodes)))
    while live:
        x = np.stack([obs[i] for i in live])
        legal = np.zeros((len(live), a_dim), dtype=bool)
        for row, i in enumerate(live):
            legal[row, : episodes[i][0].num_actions] = True
        probs = action_distribution(forward(params, x).logits, legal)
        still = []
        for row, i in enumerate(live):
            spec, rng = episodes[i]
            if greedy:
                a = int(np.argmax(probs[row]))
            else:
                a = int(sample_actions(rng, probs[row:row + 1])[0])
            outcome = step(spec, states[i], a)
            if not outcome.done:
                obs[i] = stacks[i].push(outcome.next_view.flat())
                still.append(i)
        live = still
    return [_record(spec, st) for (spec, _), st in zip(episodes, states)]


# ---------------------------------------------------------------- comparison table

METHOD_ORDER = ("Baseline", "Feedback", "Semi-25", "Semi-75")
BLANK = "--"


def _method_key(m: str):
    return (METHOD_ORDER.index(m), m) if m in METHOD_ORDER else (len(METHOD_ORDER), m)


@dataclass(frozen=True)
class TableDocument:
    rows: tuple[tuple[str, ...], ...]
    header: tuple[str, ...] = ("presence", "method", "sr_seen", "sr_unseen", "spl_seen", "spl_unseen")

    @property
    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()

    @property
    def text(self) -> str:
        top = ("Teacher", "Method", "SR seen", "SR unseen", "SPL seen", "SPL unseen")
        table = [top] + [tuple(r) for r in self.rows]
        widths = [max(len(row[i]) for row in table) for i in range(len(top))]
        lines = ["  ".join(cell.rjust(w) if i > 1 else cell.ljust(w) for i, (cell, w) in enumerate(zip(row, widths)))
                 for row in table]
        lines.insert(1, "-" * len(lines[0]))
        return "\n".join(lines) + "\n"


def comparison_table(
    reports: Mapping[tuple[str, bool, str], EvalRow],
    include_all: bool = False,
) -> TableDocument:
    """Pivot eval rows into presence x method rows with SR/SPL x seen/unseen
    columns. A row exists for each (method, presence) with at least one
    report; by default Baseline appears only without a teacher and Feedback
    only with one. Missing splits are rendered as ``--``."""
    methods = sorted({m for m, _, _ in reports}, key=_method_key)
    rows = []
    for presence in (False, True):
        for m in methods:
            if not include_all and ((m == "Baseline" and presence) or (m == "Feedback" and not presence)):
                continue
            if not any((m, presence, s) in reports for s in ("seen", "unseen")):
                continue
            cells = []
            for metric in ("sr", "spl"):
                for s in ("seen", "unseen"):
                    r = reports.get((m, presence, s))
                    cells.append(BLANK if r is None else f"{getattr(r, metric):.1f}")
            rows.append(("True" if presence else "False", m, *cells))
    return TableDocument(tuple(rows))
