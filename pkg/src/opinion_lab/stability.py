"""Equi-topology distances and neighborhoods, equilibrium and agreement
checks, and the topology-freeze / finite-time sufficient conditions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from opinion_lab.dynamics import Termination, Trajectory, digraph_hash
from opinion_lab.graph import build_digraph, proximity_mask
from opinion_lab.matrix import adjacency_matrix, fvct
from opinion_lab.state import Model, OpinionState


def equi_topology_distance(state: OpinionState) -> np.ndarray:
    """Half the smallest slack between any pairwise distance and either
    agent's bound.

    With a single agent the minimum runs over an empty set; +inf is
    returned as a sentinel.
    """
    z = state.opinions
    r = state.bounds
    n = state.n
    if n == 1:
        return np.array([math.inf])
    dist = np.abs(z[:, None] - z[None, :])
    slack = np.minimum(np.abs(dist - r[:, None]), np.abs(dist - r[None, :]))
    np.fill_diagonal(slack, math.inf)
    return 0.5 * slack.min(axis=1)


def invariant_equi_topology_distance(
    state: OpinionState, eps: np.ndarray
) -> np.ndarray:
    """Per-agent minimum of eps over its digraph predecessors (self
    included), via a boolean transitive closure."""
    reach = proximity_mask(state)
    for _ in range(int(state.n).bit_length() + 1):
        closed = reach | (reach @ reach)
        if np.array_equal(closed, reach):
            break
        reach = closed
    eps = np.asarray(eps, dtype=float)
    # Column i of the closure marks everyone who can reach agent i.
    return np.where(reach, eps[:, None], math.inf).min(axis=0)


def in_neighborhood(
    y: np.ndarray,
    z_state: OpinionState,
    radii: np.ndarray,
    zero_tol: float = 0.0,
) -> bool:
    """Strict per-coordinate box membership; zero radius forces equality.

    Coordinates with a positive radius must satisfy |y_i - z_i| < radius;
    coordinates with radius zero must match exactly (within ``zero_tol``).
    """
    y = np.asarray(y, dtype=float)
    z = z_state.opinions
    radii = np.asarray(radii, dtype=float)
    if not (len(y) == len(z) == len(radii)):
        raise ValueError("vectors must share a length")
    diff = np.abs(y - z)
    positive = radii > 0.0
    if not np.all(diff[positive] < radii[positive]):
        return False
    return bool(np.all(diff[~positive] <= zero_tol))


def check_equal_topology(y: np.ndarray, z_state: OpinionState) -> bool:
    """Direct edge-set comparison of the digraphs at y and at z."""
    gy = build_digraph(z_state.with_opinions(y))
    gz = build_digraph(z_state)
    return gy.out_neighbors == gz.out_neighbors


def is_equilibrium(state: OpinionState, tol: float = 0.0) -> bool:
    """Fixed point of the averaging map within tol (inf-norm)."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    g = build_digraph(state)
    y = state.opinions
    return bool(np.max(np.abs(adjacency_matrix(g) @ y - y)) <= tol)


def is_agreement_vector(state: OpinionState) -> bool:
    """Every pair of agents is either disconnected or in consensus."""
    g = build_digraph(state)
    y = state.opinions
    for i in range(state.n):
        for j in g.out_neighbors[i]:
            if j != i and y[i] != y[j]:
                return False
    return True


def _weak_components(state: OpinionState) -> list:
    """WCCs of the full proximity digraph, sorted by smallest member."""
    g = build_digraph(state)
    parent = list(range(state.n))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for i in range(state.n):
        for j in g.out_neighbors[i]:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    groups: dict = {}
    for v in range(state.n):
        groups.setdefault(find(v), []).append(v)
    return [sorted(m) for _, m in sorted(groups.items())]


@dataclass(frozen=True)
class WccVerdict:
    members: tuple
    interval: tuple
    separated: bool
    bound_condition: bool


@dataclass(frozen=True)
class AgreementSufficiency:
    """Per-WCC verdicts for the finite-time agreement sufficient condition."""

    per_wcc: tuple
    separation_ok: bool
    bounds_ok: bool

    @property
    def predicted_finite_time(self) -> bool:
        return self.separation_ok and self.bounds_ok

    def to_json(self) -> dict:
        return {
            "per_wcc": [
                {
                    "members": list(v.members),
                    "interval": list(v.interval),
                    "separated": v.separated,
                    "bound_condition": v.bound_condition,
                }
                for v in self.per_wcc
            ],
            "separation_ok": self.separation_ok,
            "bounds_ok": self.bounds_ok,
            "predicted_finite_time": self.predicted_finite_time,
        }


def check_agreement_sufficient(state: OpinionState) -> AgreementSufficiency:
    """Evaluate both finite-time agreement conditions per WCC.

    (i) opinion intervals of any two WCCs are separated by strictly more
    than the largest bound among their agents; (ii) SBC needs m-1 of the m
    agents in a WCC to have bounds larger than the WCC's interval length,
    SBI needs just one such agent.
    """
    y = state.opinions
    r = state.bounds
    wccs = _weak_components(state)
    intervals = [(float(y[m].min()), float(y[m].max())) for m in (np.array(w) for w in wccs)]
    max_bound = [float(r[np.array(w)].max()) for w in wccs]

    separated = [True] * len(wccs)
    for a in range(len(wccs)):
        for b in range(a + 1, len(wccs)):
            lo_a, hi_a = intervals[a]
            lo_b, hi_b = intervals[b]
            gap = max(lo_b - hi_a, lo_a - hi_b)
            if gap <= max(max_bound[a], max_bound[b]):
                separated[a] = separated[b] = False

    verdicts = []
    for w, (lo, hi), sep in zip(wccs, intervals, separated):
        length = hi - lo
        big = sum(1 for i in w if r[i] > length)
        if state.kind is Model.SBC:
            ok = big >= len(w) - 1
        else:
            ok = big >= 1
        verdicts.append(
            WccVerdict(tuple(w), (lo, hi), sep, ok)
        )
    return AgreementSufficiency(
        per_wcc=tuple(verdicts),
        separation_ok=all(v.separated for v in verdicts),
        bounds_ok=all(v.bound_condition for v in verdicts),
    )


@dataclass(frozen=True)
class LimitEquilibriumVerdict:
    """Outcome of checking the limit of a converged trajectory."""

    x_infinity: np.ndarray
    min_epsilon: float
    premise_holds: bool
    topology_matches_tail: Optional[bool]
    limit_is_equilibrium: Optional[bool]


def check_limit_equilibrium(
    traj: Trajectory,
    residual_tol: float = 1e-8,
    equilibrium_tol: float = 1e-10,
) -> LimitEquilibriumVerdict:
    """Take the final-epoch fvct as the limit and, when its minimum
    equi-topology distance is positive, confirm the tail topology matches
    and the limit is an equilibrium."""
    final = traj.final_state()
    x_inf = fvct(final)
    if traj.termination is Termination.MAX_STEPS:
        residual = float(np.max(np.abs(final.opinions - x_inf)))
        if residual > residual_tol:
            raise ValueError(
                f"trajectory not converged: residual {residual:.3e} "
                f"exceeds {residual_tol:.3e}"
            )
    inf_state = OpinionState(x_inf, traj.bounds, traj.kind)
    eps = equi_topology_distance(inf_state)
    min_eps = float(eps.min())
    if min_eps <= 0.0:
        return LimitEquilibriumVerdict(x_inf, min_eps, False, None, None)

    tail_start = traj.topology_epochs[-1][0]
    g_inf_hash = digraph_hash(build_digraph(inf_state))
    topo_ok = all(
        digraph_hash(build_digraph(traj.state_at_index(k))) == g_inf_hash
        for k, t in enumerate(traj.times)
        if t >= tail_start
    )
    eq_ok = is_equilibrium(inf_state, tol=equilibrium_tol)
    return LimitEquilibriumVerdict(x_inf, min_eps, True, topo_ok, eq_ok)


@dataclass(frozen=True)
class StabilityReport:
    """Distances, neighborhood memberships, and condition verdicts for one
    state."""

    epsilon: np.ndarray
    delta: np.ndarray
    is_equilibrium: bool
    is_agreement: bool
    in_et_of_fvct: bool
    in_iet_of_fvct: bool
    agreement_condition: AgreementSufficiency

    def to_json(self) -> dict:
        return {
            "epsilon": [_json_float(v) for v in self.epsilon],
            "delta": [_json_float(v) for v in self.delta],
            "is_equilibrium": self.is_equilibrium,
            "is_agreement": self.is_agreement,
            "in_et_of_fvct": self.in_et_of_fvct,
            "in_iet_of_fvct": self.in_iet_of_fvct,
            "agreement_condition": self.agreement_condition.to_json(),
        }


def _json_float(v: float):
    return "inf" if math.isinf(v) else float(v)


def stability_report(state: OpinionState, equilibrium_tol: float = 1e-10) -> StabilityReport:
    """Full condition evaluation for one opinion state."""
    eps = equi_topology_distance(state)
    delta = invariant_equi_topology_distance(state, eps)
    f = fvct(state)
    f_state = OpinionState(f, state.bounds, state.kind)
    eps_f = equi_topology_distance(f_state)
    delta_f = invariant_equi_topology_distance(f_state, eps_f)
    return StabilityReport(
        epsilon=eps,
        delta=delta,
        is_equilibrium=is_equilibrium(state, tol=equilibrium_tol),
        is_agreement=is_agreement_vector(state),
        in_et_of_fvct=in_neighborhood(state.opinions, f_state, eps_f),
        in_iet_of_fvct=in_neighborhood(state.opinions, f_state, delta_f),
        agreement_condition=check_agreement_sufficient(state),
    )
