import numpy as np
import pytest

from opinion_lab import Model, OpinionState


@pytest.fixture
def fig41_state():
    # 3-agent system: two stubborn extremists and one open middle agent.
    return OpinionState([0.0, 0.6, 1.0], [0.25, 1.0, 0.25], Model.SBC)


@pytest.fixture
def fig62_state():
    return OpinionState(
        [0.0, 1.5, 3.5, 5.0, 1.0, 1.0, 4.0, 2.1],
        [0.01, 0.01, 0.01, 0.01, 1.0, 1.0, 1.0, 3.0],
        Model.SBC,
    )


@pytest.fixture
def finite_fix_state():
    # Reaches an exact fixed state in finite time while keeping
    # open-minded agents in the digraph of the limit.
    return OpinionState(
        [0.0, 2.0, 3.0, 4.5, 7.0], [0.01, 3.0, 0.01, 3.0, 0.01], Model.SBC
    )


@pytest.fixture
def seventeen_agent_state():
    x = [0.1, 0.24, 0.27, 0.3, 0.34, 0.37, 0.39, 0.4, 0.5, 0.6, 0.67,
         0.68, 0.75, 0.85, 0.86, 0.87, 1.0]
    r = [0.5, 0.04, 0.04, 0.04, 0.031, 0.021, 0.011, 0.061, 0.25, 0.01,
         0.04, 0.03, 0.3, 0.07, 0.07, 0.07, 0.135]
    return OpinionState(x, r, Model.SBC)


def random_state(rng, n=None, kind=None, max_n=12, bounds_hi=0.5):
    if n is None:
        n = int(rng.integers(1, max_n + 1))
    if kind is None:
        kind = Model.SBC if rng.random() < 0.5 else Model.SBI
    y = rng.uniform(0.0, 1.0, n)
    r = rng.uniform(0.01, bounds_hi, n)
    return OpinionState(y, r, kind)


def digraph_oracle(state):
    """Direct double-loop evaluation of the neighbor inequality."""
    y, r = state.opinions, state.bounds
    out = []
    for i in range(state.n):
        nbrs = []
        for j in range(state.n):
            bound = r[i] if state.kind is Model.SBC else r[j]
            if abs(y[i] - y[j]) <= bound:
                nbrs.append(j)
        out.append(tuple(nbrs))
    return tuple(out)


def reachability_oracle(g):
    """Transitive closure by repeated boolean matrix squaring."""
    n = g.n
    reach = np.zeros((n, n), dtype=bool)
    for i in range(n):
        reach[i, list(g.out_neighbors[i])] = True
    for _ in range(n.bit_length() + 1):
        reach = reach | (reach @ reach)
    return reach
