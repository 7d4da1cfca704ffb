"""Leader SCC identification and rate/direction-of-convergence checks for
constant-topology tails."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from opinion_lab.dynamics import Trajectory, per_step_factor
from opinion_lab.graph import Classification, build_digraph, classify
from opinion_lab.matrix import (
    CanonicalDecomposition,
    adjacency_matrix,
    canonical_decomposition,
    fvct_canonical,
    spectral_radius,
)

RESIDUAL_FLOOR = 1e-13


@dataclass(frozen=True)
class LeaderAssignment:
    """Per open SCC: its open successor set, spectral radius, and leader.

    All SCC ids index the classification's SCC list.  The successor set
    includes the SCC itself; the leader is the member with the largest
    spectral radius, ties resolved toward the SCC itself when it attains
    the maximum, else toward the SCC with the smallest member index.
    """

    open_sccs: tuple
    successor_sets: dict
    radii: dict
    leaders: dict

    def leader_radius(self, scc_id: int) -> float:
        return self.radii[self.leaders[scc_id]]

    def to_json(self, classification: Classification) -> dict:
        return {
            "open_sccs": [
                {
                    "id": k,
                    "members": list(classification.sccs[k]),
                    "radius": self.radii[k],
                    "successors": sorted(self.successor_sets[k]),
                    "leader_id": self.leaders[k],
                    "leader_radius": self.leader_radius(k),
                }
                for k in self.open_sccs
            ]
        }


def leader_assignment(
    c: Classification, d: CanonicalDecomposition
) -> LeaderAssignment:
    """Compute open-successor sets by condensation reachability and pick
    each SCC's leader by largest spectral radius."""
    radii = {}
    for k, sl in d.open_block_slices():
        radii[k] = spectral_radius(d.Theta[sl, sl])

    open_set = set(d.open_sccs)
    successor_sets = {}
    for k in d.open_sccs:
        reach = {k}
        frontier = [k]
        while frontier:
            v = frontier.pop()
            for m in c.condensation[v]:
                if m in open_set and m not in reach:
                    reach.add(m)
                    frontier.append(m)
        successor_sets[k] = reach

    leaders = {}
    for k in d.open_sccs:
        best = max(radii[m] for m in successor_sets[k])
        if radii[k] == best:
            leaders[k] = k
        else:
            candidates = [m for m in successor_sets[k] if radii[m] == best]
            leaders[k] = min(candidates, key=lambda m: c.sccs[m][0])
    return LeaderAssignment(
        open_sccs=tuple(d.open_sccs),
        successor_sets=successor_sets,
        radii=radii,
        leaders=leaders,
    )


def analyze_final_topology(traj: Trajectory):
    """Classification, decomposition, fvct, and leaders at the final epoch."""
    final = traj.final_state()
    g = build_digraph(final)
    c = classify(g)
    d = canonical_decomposition(adjacency_matrix(g), c)
    f = fvct_canonical(d, final.opinions)
    la = leader_assignment(c, d)
    return g, c, d, f, la


def _constant_topology_indices(traj: Trajectory, window: int) -> list:
    """Indices of the last `window` recorded states, all in one epoch."""
    if window < 2:
        raise ValueError("window must cover at least 2 recorded steps")
    if len(traj.times) < window:
        raise ValueError(
            f"trajectory has {len(traj.times)} recorded steps, window={window}"
        )
    if not traj.is_dense():
        raise ValueError("rate analysis needs densely recorded trajectories")
    idx = list(range(len(traj.times) - window, len(traj.times)))
    tail_start = traj.topology_epochs[-1][0]
    if traj.times[idx[0]] < tail_start:
        raise ValueError("topology changed inside the analysis window")
    return idx


@dataclass(frozen=True)
class RateVerdict:
    agent: int
    scc_id: int
    leader_id: int
    leader_radius: float
    factor: Optional[float]
    deviation: Optional[float]
    excluded: bool


def verify_rate_prediction(
    traj: Trajectory, la: LeaderAssignment, window: int = 10
) -> list:
    """Compare end-of-window per-step factors of open-minded agents against
    their leader's spectral radius.

    Agents whose residual to the constant-topology limit has fallen below
    the tracking floor are flagged excluded rather than scored.
    """
    if window < 10:
        raise ValueError("window must be >= 10 steps")
    idx = _constant_topology_indices(traj, window)
    _, c, _, f, _ = analyze_final_topology(traj)

    x_prev = traj.states[idx[-2]]
    x_last = traj.states[idx[-1]]
    factors = per_step_factor(x_prev, x_last, f, tiny=RESIDUAL_FLOOR)

    out = []
    for k in la.open_sccs:
        lead = la.leaders[k]
        lam = la.radii[lead]
        for i in c.sccs[k]:
            fac = factors[i]
            if fac is None:
                out.append(RateVerdict(i, k, lead, lam, None, None, True))
            else:
                out.append(
                    RateVerdict(i, k, lead, lam, fac, abs(fac - lam), False)
                )
    return out


@dataclass(frozen=True)
class DirectionVerdict:
    follower_id: int
    leader_id: int
    applicable: bool
    matches_from: Optional[int]


def verify_direction_prediction(
    traj: Trajectory, la: LeaderAssignment
) -> list:
    """For followers with strictly smaller radius than their leader, find
    the earliest recorded time after which the followers' residual signs
    agree with the leader's.

    Pairs with equal spectral radii are reported as not applicable.
    """
    if not traj.is_dense():
        raise ValueError("direction analysis needs densely recorded trajectories")
    _, c, _, f, _ = analyze_final_topology(traj)
    tail_start = traj.topology_epochs[-1][0]
    start_idx = next(
        k for k, t in enumerate(traj.times) if t >= tail_start
    )

    out = []
    for k in la.open_sccs:
        lead = la.leaders[k]
        if lead == k:
            continue
        if la.radii[k] == la.radii[lead]:
            out.append(DirectionVerdict(k, lead, False, None))
            continue
        leader_nodes = list(c.sccs[lead])
        follower_nodes = list(c.sccs[k])
        matches_from = None
        # Earliest t1 such that the implication pair holds for all t >= t1.
        for k0 in range(start_idx, len(traj.times)):
            sign = _uniform_sign(traj.states[k0], f, leader_nodes)
            if sign is None:
                continue
            ok = all(
                _follows(traj.states[kk], f, follower_nodes, sign)
                for kk in range(k0, len(traj.times))
            )
            if ok:
                matches_from = traj.times[k0]
                break
        out.append(DirectionVerdict(k, lead, True, matches_from))
    return out


def _uniform_sign(x, f, nodes) -> Optional[int]:
    signs = {int(np.sign(x[i] - f[i])) for i in nodes}
    signs.discard(0)
    if len(signs) != 1:
        return None
    return signs.pop()


def _follows(x, f, nodes, sign: int) -> bool:
    if sign < 0:
        return all(x[i] <= f[i] for i in nodes)
    return all(x[i] >= f[i] for i in nodes)
