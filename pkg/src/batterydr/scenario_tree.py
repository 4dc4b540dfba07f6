"""Hybrid scenario trees: full binary branching for ``n`` days, then one sampled path per leaf."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class TreeNode:
    id: int
    day_offset: int
    event_flag: int
    parent: int | None
    children: list = field(default_factory=list)
    probability: float = 1.0  # probability mass of all leaves below this node


@dataclass
class ScenarioTree:
    nodes: list
    n: int
    N: int
    leaves: list
    leaf_paths: list  # node ids, root first
    branch_probabilities: list

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def path_flags(self, leaf_index: int) -> tuple:
        return tuple(self.nodes[i].event_flag for i in self.leaf_paths[leaf_index])

    def render(self) -> str:
        """Indented text dump: one line per node with id, day offset, flag and probability."""
        lines = []

        def walk(node_id, depth):
            node = self.nodes[node_id]
            lines.append(f"{'  ' * depth}#{node.id} day+{node.day_offset} w={node.event_flag} p={node.probability:.6g}")
            for child in node.children:
                walk(child, depth + 1)

        walk(0, 0)
        return "\n".join(lines)


def clamp_to_final_day(n: int, N: int, t: int, T: int) -> tuple[int, int]:
    if t > T:
        raise ValueError(f"day {t} is past the final day {T}")
    N2 = min(N, T - t + 1)
    return min(n, N2), N2


def variable_count(n: int, N: int) -> int:
    """Charge plus discharge variables over all tree nodes (24 hours each)."""
    if not 1 <= n <= N:
        raise ValueError(f"need 1 <= n <= N, got n={n}, N={N}")
    return 48 * (2 ** (n - 1) * (N - n + 2) - 1)


def build_tree(omega_today: int, probabilities: Sequence[float], n: int, N: int, rng_seed=0) -> ScenarioTree:
    """Build the tree rooted at today's known event flag.

    ``probabilities[k]`` is the event probability of day offset ``k + 1``.
    Days at offsets ``1..n-1`` branch on both outcomes; offsets ``n..N-1`` hang
    one Bernoulli-sampled continuation below each leaf of the binary prefix.
    ``rng_seed`` may be an int or a sequence of ints (fed to ``numpy.random.default_rng``).
    """
    if not 1 <= n <= N:
        raise ValueError(f"need 1 <= n <= N, got n={n}, N={N}")
    probs = np.asarray(probabilities, dtype=float)[: N - 1]
    if len(probs) < N - 1:
        raise ValueError(f"need {N - 1} future-day probabilities, got {len(probs)}")
    if np.any(probs < 0) or np.any(probs > 1):
        raise ValueError("event probabilities must lie in [0, 1]")

    nodes = [TreeNode(0, 0, int(omega_today), None)]
    weight = [1.0]
    frontier = [0]
    for k in range(1, n):
        p = probs[k - 1]
        nxt = []
        for parent in frontier:
            for flag, w in ((0, 1.0 - p), (1, p)):
                node = TreeNode(len(nodes), k, flag, parent)
                nodes.append(node)
                weight.append(weight[parent] * w)
                nodes[parent].children.append(node.id)
                nxt.append(node.id)
        frontier = nxt

    rng = np.random.default_rng(rng_seed)
    leaves, paths, branch_p = [], [], []
    for prefix_leaf in frontier:
        draws = rng.random(N - n)
        last = prefix_leaf
        for k, u in zip(range(n, N), draws):
            node = TreeNode(len(nodes), k, int(u < probs[k - 1]), last)
            nodes.append(node)
            nodes[last].children.append(node.id)
            last = node.id
        path = []
        cur = last
        while cur is not None:
            path.append(cur)
            cur = nodes[cur].parent
        leaves.append(last)
        paths.append(path[::-1])
        branch_p.append(weight[prefix_leaf])

    for node in nodes:
        node.probability = 0.0
    for path, p in zip(paths, branch_p):
        for node_id in path:
            nodes[node_id].probability += p
    return ScenarioTree(nodes, n, N, leaves, paths, branch_p)


def enumerate_scenarios(tree: ScenarioTree) -> list[tuple[tuple, float]]:
    return [(tree.path_flags(i), p) for i, p in enumerate(tree.branch_probabilities)]
