import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sbcnkit.dataset import BernoulliMatrix, Variable, load_and_binarize
from sbcnkit.datasets import berkeley_csv, builtin_schema
from sbcnkit.sbcn import HillClimbConfig, Node, Sbcn, learn


@pytest.fixture(scope="session")
def berkeley_matrix():
    return load_and_binarize(berkeley_csv(), builtin_schema("berkeley"))


@pytest.fixture(scope="session")
def berkeley_sbcn(berkeley_matrix):
    return learn(berkeley_matrix, HillClimbConfig(rng_seed=7), berkeley_matrix.schema)


def matrix_of(cols, levels=None):
    cols = np.asarray(cols, dtype=np.uint8)
    levels = levels or list(range(len(cols)))
    variables = [Variable(f"c{i}", "1", lvl) for i, lvl in enumerate(levels)]
    return BernoulliMatrix.from_binary(variables, cols)


def random_matrix(seed, m, s):
    """Samples of a random CPT network over m ordered binary nodes."""
    rng = np.random.default_rng(seed)
    data = np.zeros((m, s), dtype=np.uint8)
    for v in range(m):
        pa = [u for u in range(v) if rng.random() < 0.5]
        probs = rng.uniform(0.1, 0.9, 2 ** len(pa))
        cfg = sum(data[p].astype(int) << b for b, p in enumerate(pa)) if pa else np.zeros(s, int)
        data[v] = rng.random(s) < probs[cfg]
    return data


def random_sbcn(seed, m, density=0.35, dangling=True):
    """Random weighted DAG whose last two nodes are the decisions.

    Nodes are topologically ordered by index. With ``dangling`` some
    non-decision nodes may end up without out-arcs (restart sinks).
    """
    rng = np.random.default_rng(seed)
    neg, pos = m - 2, m - 1
    arcs = {}
    for u in range(m - 2):
        for v in range(u + 1, m):
            if rng.random() < density:
                arcs[(u, v)] = float(rng.uniform(0.05, 1.0))
        if not dangling and not any(a == u for a, _ in arcs):
            arcs[(u, int(rng.integers(u + 1, m)))] = float(rng.uniform(0.05, 1.0))
    nodes = [Node(f"x{i}_1", f"x{i}", "1", i) for i in range(m - 2)]
    nodes.append(Node("d_neg", "d", "neg", m, "delta_minus"))
    nodes.append(Node("d_pos", "d", "pos", m, "delta_plus"))
    return Sbcn(tuple(nodes), arcs, neg, pos)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


ACCEPTANCE: list[str] = []


def report(criterion: str, status: str, detail: str = "") -> str:
    """Record one acceptance verdict; all verdicts are echoed in the summary."""
    line = f"{status:<10} {criterion}" + (f"  [{detail}]" if detail else "")
    ACCEPTANCE.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
