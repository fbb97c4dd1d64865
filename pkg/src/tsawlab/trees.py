"""Rooted trees with polynomial growth, cutset functionals, and tree flows.

Vertices are integers in BFS order with root 0; every non-root vertex ``v``
identifies the edge {parent(v), v}, whose level is ``level[v]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GrowthSpec",
    "RootedTree",
    "FlowAssignment",
    "BranchingRuinReport",
    "build_spherical_tree",
    "validate_cutset",
    "cutset_value",
    "level_cutset",
    "max_flow_with_capacity",
    "min_cutset_value",
    "brute_force_min_cutset",
    "estimate_branching_ruin",
    "load_growth_spec",
    "save_growth_spec",
]


@dataclass(frozen=True)
class GrowthSpec:
    """Target level sizes for a spherically symmetric tree truncation.

    Either ``mode="exponent"`` with growth exponent ``b >= 0`` and ``depth``,
    giving level-n size max(1, floor((n+1)**b)), or ``mode="explicit"`` with
    the full size list (level 0 included, so sizes[0] must be 1).
    """

    mode: str
    b: float = 0.0
    depth: int = 0
    sizes: tuple[int, ...] = ()

    def __post_init__(self):
        if self.mode not in ("exponent", "explicit"):
            raise ValueError(f"unknown growth mode {self.mode!r}")
        if self.mode == "exponent":
            if self.b < 0:
                raise ValueError("growth exponent must be >= 0")
            if self.depth < 1:
                raise ValueError("depth must be >= 1")
        else:
            sizes = self.sizes
            if len(sizes) < 2:
                raise ValueError("explicit sizes need at least levels 0 and 1")
            if sizes[0] != 1:
                raise ValueError("level 0 must have size 1 (the root)")
            if any(s < 1 for s in sizes):
                raise ValueError("level sizes must be positive")
            if any(b < a for a, b in zip(sizes, sizes[1:])):
                raise ValueError("level sizes must be non-decreasing")

    def level_sizes(self) -> list[int]:
        if self.mode == "explicit":
            return list(self.sizes)
        return [max(1, math.floor((n + 1) ** self.b)) for n in range(self.depth + 1)]


@dataclass(frozen=True)
class RootedTree:
    """Finite truncation of a locally finite rooted tree.

    parent[v] is -1 at the root; children are stored in CSR form
    (child_ptr, child_ids) and are ordered by vertex id, which makes every
    construction and traversal deterministic.
    """

    parent: np.ndarray
    level: np.ndarray
    child_ptr: np.ndarray
    child_ids: np.ndarray
    depth: int

    @property
    def n_vertices(self) -> int:
        return len(self.parent)

    @property
    def root(self) -> int:
        return 0

    def children(self, v: int) -> np.ndarray:
        return self.child_ids[self.child_ptr[v]:self.child_ptr[v + 1]]

    def n_children(self, v: int) -> int:
        return int(self.child_ptr[v + 1] - self.child_ptr[v])

    def edges(self) -> np.ndarray:
        """All edge ids (child endpoints), i.e. vertices 1..V-1."""
        return np.arange(1, self.n_vertices)

    def edges_at_level(self, n: int) -> np.ndarray:
        return np.nonzero(self.level == n)[0]

    def leaves(self) -> np.ndarray:
        counts = np.diff(self.child_ptr)
        return np.nonzero(counts == 0)[0]

    def path_to_root(self, v: int) -> list[int]:
        """Vertices from the root to v along the geodesic."""
        path = []
        while v != -1:
            path.append(v)
            v = int(self.parent[v])
        return path[::-1]

    def level_sizes(self) -> np.ndarray:
        return np.bincount(self.level, minlength=self.depth + 1)

    def validate(self) -> None:
        lv = self.level
        if lv[0] != 0 or self.parent[0] != -1:
            raise ValueError("root must be vertex 0 at level 0")
        pa = self.parent[1:]
        if np.any(lv[1:] != lv[pa] + 1):
            raise ValueError("level must increase by 1 along every edge")
        for v in range(self.n_vertices):
            ch = self.children(v)
            if np.any(self.parent[ch] != v):
                raise ValueError("children/parent maps disagree")


def build_spherical_tree(spec: GrowthSpec) -> RootedTree:
    """Build the spherically symmetric truncation realizing spec's level sizes.

    Children are allocated evenly; when level sizes do not divide, the extra
    children go to the lowest vertex ids first, so sibling counts at any
    level differ by at most one and the construction is reproducible.
    """
    sizes = spec.level_sizes()
    depth = len(sizes) - 1
    if depth < 1:
        raise ValueError("tree must have depth >= 1")
    n_vertices = sum(sizes)
    parent = np.full(n_vertices, -1, dtype=np.int64)
    level = np.zeros(n_vertices, dtype=np.int64)
    counts = np.zeros(n_vertices, dtype=np.int64)

    level_start = [0]
    for s in sizes:
        level_start.append(level_start[-1] + s)

    for n in range(depth):
        m, m_next = sizes[n], sizes[n + 1]
        base, extra = divmod(m_next, m)
        child = level_start[n + 1]
        for i in range(m):
            p = level_start[n] + i
            k = base + (1 if i < extra else 0)
            counts[p] = k
            for _ in range(k):
                parent[child] = p
                level[child] = n + 1
                child += 1

    child_ptr = np.zeros(n_vertices + 1, dtype=np.int64)
    np.cumsum(counts, out=child_ptr[1:])
    # BFS ids make each vertex's children a contiguous ascending range.
    child_ids = np.nonzero(parent >= 0)[0].astype(np.int64)
    order = np.argsort(parent[child_ids], kind="stable")
    child_ids = child_ids[order]

    tree = RootedTree(parent=parent, level=level, child_ptr=child_ptr,
                      child_ids=child_ids, depth=depth)
    tree.validate()
    return tree


def validate_cutset(tree: RootedTree, cut: set[int] | frozenset[int]) -> None:
    """Check that every root-to-leaf path crosses exactly one cut edge."""
    cut = set(int(e) for e in cut)
    for e in cut:
        if not 1 <= e < tree.n_vertices:
            raise ValueError(f"edge id {e} out of range")
    crossings = np.zeros(tree.n_vertices, dtype=np.int64)
    for v in range(1, tree.n_vertices):
        crossings[v] = crossings[tree.parent[v]] + (1 if v in cut else 0)
    bad = crossings[tree.leaves()] != 1
    if np.any(bad):
        raise ValueError("not a cutset: some root-to-leaf path crosses "
                         f"{int(crossings[tree.leaves()][bad][0])} members")


def cutset_value(tree: RootedTree, cut: set[int] | frozenset[int], gamma: float) -> float:
    """Sum of |e|**-gamma over the cutset."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    validate_cutset(tree, cut)
    levels = tree.level[np.fromiter((int(e) for e in cut), dtype=np.int64)]
    return float(np.sum(levels.astype(float) ** (-gamma)))


def level_cutset(tree: RootedTree, n: int) -> frozenset[int]:
    if not 1 <= n <= tree.depth:
        raise ValueError("level outside truncation")
    return frozenset(int(v) for v in tree.edges_at_level(n))


@dataclass
class FlowAssignment:
    """A feasible flow from the root to the max-depth leaves."""

    theta: np.ndarray        # flow on edge v, indexed by child vertex id
    strength: float          # total flow out of the root

    def conservation_residual(self, tree: RootedTree) -> float:
        res = 0.0
        for v in range(1, tree.n_vertices):
            ch = tree.children(v)
            if len(ch):
                res = max(res, abs(self.theta[v] - self.theta[ch].sum()))
        return res


def max_flow_with_capacity(tree: RootedTree, capacity: np.ndarray) -> FlowAssignment:
    """Maximum root-to-leaves flow subject to theta(e) <= capacity(e).

    On a tree the max flow has a closed form: the subtree throughput is
    u(v) = min(capacity(v), sum of children throughputs), computed bottom-up.
    The returned flow splits each vertex's inflow across children in
    proportion to their throughputs, which keeps symmetric instances
    symmetric (this matters for energy functionals downstream).
    """
    capacity = np.asarray(capacity, dtype=float)
    if capacity.shape != (tree.n_vertices,):
        raise ValueError("capacity must be indexed by child vertex id")
    if np.any(capacity[1:] < 0):
        raise ValueError("capacities must be non-negative")

    u = np.zeros(tree.n_vertices)
    for v in range(tree.n_vertices - 1, 0, -1):
        ch = tree.children(v)
        through = u[ch].sum() if len(ch) else np.inf
        u[v] = min(capacity[v], through)

    theta = np.zeros(tree.n_vertices)
    root_children = tree.children(0)
    theta[root_children] = u[root_children]
    strength = float(u[root_children].sum())
    for v in range(1, tree.n_vertices):
        ch = tree.children(v)
        if not len(ch):
            continue
        total = u[ch].sum()
        if total > 0:
            theta[ch] = theta[v] * u[ch] / total
    return FlowAssignment(theta=theta, strength=strength)


def min_cutset_value(tree: RootedTree, gamma: float) -> tuple[float, frozenset[int]]:
    """Minimum of cutset_value over all cutsets, with a cut achieving it.

    Capacities |e|**-gamma; the value equals the max-flow strength, and the
    cut is read off the bottleneck recursion (prefer the edge itself on
    ties, giving the shallowest minimal cut).
    """
    if tree.depth < 1:
        raise ValueError("tree must have depth >= 1")
    capacity = np.zeros(tree.n_vertices)
    capacity[1:] = tree.level[1:].astype(float) ** (-gamma)

    u = np.zeros(tree.n_vertices)
    for v in range(tree.n_vertices - 1, 0, -1):
        ch = tree.children(v)
        through = u[ch].sum() if len(ch) else np.inf
        u[v] = min(capacity[v], through)

    cut: list[int] = []
    stack = list(tree.children(0))
    while stack:
        v = stack.pop()
        ch = tree.children(v)
        through = u[ch].sum() if len(ch) else np.inf
        if capacity[v] <= through:
            cut.append(int(v))
        else:
            stack.extend(ch)
    value = float(u[tree.children(0)].sum())
    return value, frozenset(cut)


def brute_force_min_cutset(tree: RootedTree, gamma: float,
                           max_cutsets: int = 2_000_000) -> tuple[float, frozenset[int]]:
    """Exhaustive minimum over all cutsets; oracle for small truncations."""
    weight = np.zeros(tree.n_vertices)
    weight[1:] = tree.level[1:].astype(float) ** (-gamma)
    counter = [0]

    def enumerate_cuts(v: int):
        """All cutsets of the subtree hanging below edge v, as (value, set)."""
        counter[0] += 1
        if counter[0] > max_cutsets:
            raise RuntimeError("cutset enumeration budget exceeded")
        yield weight[v], frozenset([v])
        ch = tree.children(v)
        if len(ch):
            yield from combine(list(ch))

    def combine(vs: list[int]):
        if len(vs) == 1:
            yield from enumerate_cuts(vs[0])
            return
        head, tail = vs[0], vs[1:]
        for val_h, cut_h in enumerate_cuts(head):
            for val_t, cut_t in combine(tail):
                yield val_h + val_t, cut_h | cut_t

    best_val, best_cut = min(combine(list(tree.children(0))), key=lambda t: t[0])
    return float(best_val), best_cut


@dataclass
class BranchingRuinReport:
    """Grid classification used to bracket the branching-ruin number."""

    gamma_grid: list[float]
    depths: list[int]
    values: dict[float, list[float]] = field(default_factory=dict)
    classification: dict[float, str] = field(default_factory=dict)
    gamma_lo: float | None = None
    gamma_hi: float | None = None


def estimate_branching_ruin(spec: GrowthSpec, depths: list[int],
                            gamma_grid: list[float],
                            stability_floor: float = 0.5) -> BranchingRuinReport:
    """Classify each grid gamma from the min-cut trend across depths.

    "positive": value at the deepest depth stays above stability_floor times
    the value at the shallowest. "zero": values at least halve for every
    consecutive depth doubling present in the list. Anything else is
    "inconclusive". gamma_lo / gamma_hi are the largest positive and smallest
    zero grid points; at desk scale this brackets loosely (the grid trend
    detects the sign of the growth-minus-gamma exponent, not its location).
    """
    if sorted(depths) != list(depths) or len(depths) < 2:
        raise ValueError("depths must be increasing, at least two")
    if sorted(gamma_grid) != list(gamma_grid):
        raise ValueError("gamma grid must be sorted")

    report = BranchingRuinReport(gamma_grid=list(gamma_grid), depths=list(depths))
    trees = {d: build_spherical_tree(GrowthSpec(spec.mode, spec.b, d, spec.sizes[:d + 1]
                                                if spec.mode == "explicit" else ()))
             for d in depths}
    doublings = [(a, b) for a, b in zip(depths, depths[1:]) if b == 2 * a]

    for g in gamma_grid:
        vals = [min_cutset_value(trees[d], g)[0] for d in depths]
        report.values[g] = vals
        positive = vals[-1] >= stability_floor * vals[0]
        halving = bool(doublings) and all(
            vals[depths.index(b)] <= 0.5 * vals[depths.index(a)] for a, b in doublings)
        if positive:
            report.classification[g] = "positive"
        elif halving:
            report.classification[g] = "zero"
        else:
            report.classification[g] = "inconclusive"

    pos = [g for g in gamma_grid if report.classification[g] == "positive"]
    zer = [g for g in gamma_grid if report.classification[g] == "zero"]
    report.gamma_lo = max(pos) if pos else None
    report.gamma_hi = min(zer) if zer else None
    return report


def save_growth_spec(spec: GrowthSpec, path) -> None:
    payload = {"mode": spec.mode, "b": spec.b, "depth": spec.depth,
               "sizes": list(spec.sizes)}
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_growth_spec(path) -> GrowthSpec:
    with open(path) as fh:
        payload = json.load(fh)
    mode = payload.get("mode")
    if mode == "exponent":
        return GrowthSpec(mode="exponent", b=float(payload["b"]),
                          depth=int(payload["depth"]))
    if mode == "explicit":
        return GrowthSpec(mode="explicit", sizes=tuple(int(s) for s in payload["sizes"]))
    raise ValueError(f"unknown growth mode {mode!r}")
