"""Synchronous averaging dynamics: stepping, simulation, and trajectory
diagnostics (topology epochs, fixed states, per-step factors,
pseudo-stability)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from opinion_lab.graph import ProximityDigraph, build_digraph, classify
from opinion_lab.matrix import adjacency_matrix, canonical_decomposition, fvct_canonical
from opinion_lab.state import Model, OpinionState


def digraph_hash(g: ProximityDigraph) -> str:
    """Stable 64-bit hash of the sorted edge list, as hex."""
    h = hashlib.sha256()
    h.update(g.n.to_bytes(8, "little"))
    for i in range(g.n):
        for j in g.out_neighbors[i]:
            h.update(i.to_bytes(4, "little"))
            h.update(j.to_bytes(4, "little"))
    return h.hexdigest()[:16]


class Termination(str, Enum):
    FIXED_STATE = "fixed_state"
    TOLERANCE_REACHED = "tolerance_reached"
    MAX_STEPS = "max_steps"

    def __str__(self) -> str:
        return self.value


@dataclass
class Trajectory:
    """Recorded opinion vectors with topology-change and fixed-point events.

    ``times[k]`` is the step at which ``states[k]`` was recorded; recording
    is dense when ``record_every=1``.  ``topology_epochs`` holds
    ``(start_time, hash)`` for every digraph change, recorded exactly even
    when states are downsampled.
    """

    bounds: np.ndarray
    kind: Model
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    topology_epochs: list = field(default_factory=list)
    fixed_at: Optional[int] = None
    termination: Termination = Termination.MAX_STEPS

    @property
    def n(self) -> int:
        return len(self.bounds)

    def final_state(self) -> OpinionState:
        return OpinionState(self.states[-1], self.bounds, self.kind)

    def state_at_index(self, k: int) -> OpinionState:
        return OpinionState(self.states[k], self.bounds, self.kind)

    def is_dense(self) -> bool:
        times = self.times
        return all(b - a == 1 for a, b in zip(times, times[1:]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            header = ",".join(["t"] + [f"x_{i}" for i in range(self.n)])
            fh.write(header + "\n")
            for t, x in zip(self.times, self.states):
                row = ",".join([str(t)] + [format(v, ".17g") for v in x])
                fh.write(row + "\n")

    def events_json(self) -> dict:
        return {
            "epochs": [{"t": t, "hash": h} for t, h in self.topology_epochs],
            "fixed_at": self.fixed_at,
            "termination": str(self.termination),
        }

    def events_to_json_file(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.events_json(), fh, indent=2)
            fh.write("\n")


def step(state: OpinionState) -> np.ndarray:
    """One synchronous update: each agent averages its out-neighbors."""
    g = build_digraph(state)
    return adjacency_matrix(g) @ state.opinions


def simulate(
    state: OpinionState,
    max_steps: int = 100_000,
    fixed_tol: float = 0.0,
    record_every: int = 1,
    limit_tol: float = 1e-12,
) -> Trajectory:
    """Iterate the averaging rule, tracking topology epochs and termination.

    Stops on an exactly fixed state (bitwise, or within ``fixed_tol`` if
    set above zero), or when the topology is constant and the state is
    within ``limit_tol`` of its final value at constant topology
    (``limit_tol=0`` disables that check), or after ``max_steps``.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")

    x = np.array(state.opinions, dtype=float)
    traj = Trajectory(bounds=state.bounds, kind=state.kind)
    current_hash = None
    cached_fvct = None

    for t in range(max_steps):
        g = build_digraph(state.with_opinions(x))
        h = digraph_hash(g)
        if h != current_hash:
            traj.topology_epochs.append((t, h))
            current_hash = h
            cached_fvct = None

        if t % record_every == 0:
            traj.times.append(t)
            traj.states.append(x.copy())

        if limit_tol > 0.0 and t > traj.topology_epochs[-1][0]:
            # fvct is constant within a topology epoch; compute it once.
            if cached_fvct is None:
                c = classify(g)
                decomp = canonical_decomposition(adjacency_matrix(g), c)
                cached_fvct = fvct_canonical(decomp, x)
            if np.max(np.abs(x - cached_fvct)) < limit_tol:
                traj.termination = Termination.TOLERANCE_REACHED
                _record_final(traj, t, x, record_every)
                return traj

        x_next = adjacency_matrix(g) @ x
        if fixed_tol > 0.0:
            fixed = bool(np.max(np.abs(x_next - x)) <= fixed_tol)
        else:
            fixed = bool(np.array_equal(x_next, x))
        if fixed:
            traj.fixed_at = t + 1
            traj.termination = Termination.FIXED_STATE
            _record_final(traj, t + 1, x_next, record_every)
            return traj
        x = x_next

    traj.termination = Termination.MAX_STEPS
    _record_final(traj, max_steps, x, record_every)
    return traj


def _record_final(traj: Trajectory, t: int, x: np.ndarray, record_every: int) -> None:
    if traj.times and traj.times[-1] == t:
        return
    traj.times.append(t)
    traj.states.append(np.array(x, dtype=float))


def per_step_factor(
    x_t: np.ndarray,
    x_next: np.ndarray,
    f: np.ndarray,
    tiny: float = 1e-13,
) -> list:
    """Ratio of successive residuals to the constant-topology limit.

    Entry i is ``(x_next_i - f_i) / (x_t_i - f_i)`` when the denominator
    exceeds ``tiny`` in magnitude, else None (the factor is undefined for
    agents already at their limit).
    """
    x_t = np.asarray(x_t, dtype=float)
    x_next = np.asarray(x_next, dtype=float)
    f = np.asarray(f, dtype=float)
    if not (len(x_t) == len(x_next) == len(f)):
        raise ValueError("vectors must share a length")
    out = []
    for a, b, fi in zip(x_t, x_next, f):
        denom = a - fi
        out.append((b - fi) / denom if abs(denom) > tiny else None)
    return out


@dataclass(frozen=True)
class PseudoStableVerdict:
    """Earliest recorded time from which every agent is either exactly at
    the limit or strictly monotonically approaching it."""

    holds_from: Optional[int]
    fixed_set: frozenset
    converging_set: frozenset


def pseudo_stable_check(
    traj: Trajectory, limit: np.ndarray, fixed_tol: float = 0.0
) -> PseudoStableVerdict:
    """Check the two-clause stationarity/monotonicity pattern on a densely
    recorded trajectory against the supplied limit vector.

    ``fixed_tol`` relaxes the fixed clause's equality check; the default is
    exact, but a tolerance around 1e-12 absorbs the one-ulp difference
    between the trajectory's own averaging and a separately computed limit.
    """
    if len(traj.times) < 2:
        raise ValueError("need at least 2 recorded steps")
    if not traj.is_dense():
        raise ValueError("trajectory must be recorded densely (record_every=1)")
    limit = np.asarray(limit, dtype=float)
    states = traj.states
    n = traj.n
    npairs = len(states) - 1

    holds = 0
    fixed: set = set()
    converging: set = set()
    for i in range(n):
        li = limit[i]
        fixed_from = 0
        conv_from = 0
        # Earliest pair index from which each clause holds through the end.
        for k in range(npairs - 1, -1, -1):
            a, b = states[k][i], states[k + 1][i]
            if not (abs(a - li) <= fixed_tol and abs(b - li) <= fixed_tol):
                fixed_from = k + 1
                break
        for k in range(npairs - 1, -1, -1):
            a, b = states[k][i], states[k + 1][i]
            if not (a < b < li or a > b > li):
                conv_from = k + 1
                break
        if fixed_from == npairs and abs(states[-1][i] - li) > fixed_tol:
            # Not even the final state sits at the limit.
            fixed_from = npairs + 1
        # The converging clause needs at least one verifiable pair.
        if conv_from >= npairs:
            conv_from = npairs + 1
        best = min(fixed_from, conv_from)
        if best > npairs:
            return PseudoStableVerdict(None, frozenset(), frozenset())
        best = min(best, npairs)
        holds = max(holds, best)
        if fixed_from <= conv_from:
            fixed.add(i)
        else:
            converging.add(i)
    return PseudoStableVerdict(
        traj.times[holds], frozenset(fixed), frozenset(converging)
    )
