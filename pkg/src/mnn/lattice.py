"""Two-dimensional spring networks: construction, validation and pruning.

A :class:`Network` stores node positions, per-axis support flags and the
bond list as numpy arrays. Networks are immutable; every mutation returns a
new object.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

AXES = {"x": 0, "y": 1, 0: 0, 1: 1}

# k band relative to the reference stiffness (bond widths 1.5 .. 2.5 mm)
K_BAND = (0.6, 1.0)


class LatticeError(ValueError):
    """Invalid lattice specification or network edit."""


class Node(NamedTuple):
    id: int
    position: tuple[float, float]
    fixed: bool


class Bond(NamedTuple):
    id: int
    i: int
    j: int
    k: float
    rest_length: float


def axis_index(axis) -> int:
    try:
        return AXES[axis]
    except (KeyError, TypeError):
        raise ValueError(f"unknown axis {axis!r}, expected 'x' or 'y'") from None


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Network:
    """Spring network over ``n`` nodes and ``m`` bonds.

    Parameters
    ----------
    positions : (n, 2) float array, meters
    fixed : (n,) or (n, 2) bool array
        Support flags. A 1-D array pins whole nodes; a 2-D array allows
        roller supports (one axis constrained).
    edges : (m, 2) int array of node ids
    k : (m,) float array, spring constants in N/m
    rest_length : (m,) float array, meters. Defaults to the endpoint
        distances at construction.
    k_bounds : (k_min, k_max) in N/m
    """

    positions: np.ndarray
    fixed: np.ndarray
    edges: np.ndarray
    k: np.ndarray
    rest_length: np.ndarray | None = None
    k_bounds: tuple[float, float] = (0.0, np.inf)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        fixed = np.asarray(self.fixed, dtype=bool)
        if fixed.ndim == 1:
            fixed = np.repeat(fixed[:, None], 2, axis=1)
        if fixed.shape != pos.shape:
            raise LatticeError("fixed flags must have one entry per node (or per node and axis)")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        k = np.asarray(self.k, dtype=float).reshape(-1)
        if k.shape[0] != edges.shape[0]:
            raise LatticeError(f"{edges.shape[0]} bonds but {k.shape[0]} spring constants")
        if edges.size and (edges.min() < 0 or edges.max() >= pos.shape[0]):
            raise LatticeError("bond references a node id outside 0..n-1")
        if self.rest_length is None:
            rest = np.linalg.norm(pos[edges[:, 1]] - pos[edges[:, 0]], axis=1)
        else:
            rest = np.asarray(self.rest_length, dtype=float).reshape(-1)
            if rest.shape != k.shape:
                raise LatticeError("rest_length must have one entry per bond")
        object.__setattr__(self, "positions", _frozen(pos, float))
        object.__setattr__(self, "fixed", _frozen(fixed, bool))
        object.__setattr__(self, "edges", _frozen(edges, np.int64))
        object.__setattr__(self, "k", _frozen(k, float))
        object.__setattr__(self, "rest_length", _frozen(rest, float))
        object.__setattr__(self, "k_bounds", (float(self.k_bounds[0]), float(self.k_bounds[1])))

    @property
    def n_nodes(self) -> int:
        return self.positions.shape[0]

    @property
    def n_bonds(self) -> int:
        return self.edges.shape[0]

    @property
    def pinned(self) -> np.ndarray:
        """Nodes with both axes constrained."""
        return self.fixed.all(axis=1)

    @property
    def nodes(self) -> list[Node]:
        return [Node(i, (float(p[0]), float(p[1])), bool(f))
                for i, (p, f) in enumerate(zip(self.positions, self.pinned))]

    @property
    def bonds(self) -> list[Bond]:
        return [Bond(b, int(i), int(j), float(kb), float(r))
                for b, ((i, j), kb, r) in enumerate(zip(self.edges, self.k, self.rest_length))]

    def with_k(self, k) -> "Network":
        """Copy of the network with new spring constants."""
        return Network(self.positions, self.fixed, self.edges, k,
                       self.rest_length, self.k_bounds, dict(self.meta))

    def with_fixed(self, fixed) -> "Network":
        return Network(self.positions, fixed, self.edges, self.k,
                       self.rest_length, self.k_bounds, dict(self.meta))

    def node(self, selector) -> int:
        return select_node(self, selector)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (np.array_equal(self.positions, other.positions)
                and np.array_equal(self.fixed, other.fixed)
                and np.array_equal(self.edges, other.edges)
                and np.array_equal(self.k, other.k)
                and np.array_equal(self.rest_length, other.rest_length)
                and self.k_bounds == other.k_bounds)

    __hash__ = None


@dataclass(frozen=True)
class LatticeSpec:
    """Parameters of a triangular lattice.

    ``symmetric=True`` gives the shifted rows one node fewer so the whole
    lattice is mirror-symmetric about its vertical centre line. The default
    stacks equal-length rows into a parallelogram.

    ``k_bounds`` defaults to ``(0.75, 1.25) * default_k``.
    """

    rows: int
    cols: int
    spacing: float = 0.02
    default_k: float = 1.0
    fixed_nodes: tuple = ("top-left", "top-right")
    symmetric: bool = False
    k_bounds: tuple[float, float] | None = None

    def __post_init__(self):
        if int(self.rows) != self.rows or self.rows < 2:
            raise LatticeError("rows ≥ 2")
        if int(self.cols) != self.cols or self.cols < 2:
            raise LatticeError("cols ≥ 2")
        if self.symmetric and self.cols < 3:
            raise LatticeError("cols ≥ 3 for a symmetric lattice")
        if not self.spacing > 0:
            raise LatticeError("spacing > 0")
        if not self.default_k > 0:
            raise LatticeError("default_k > 0")

    @property
    def bounds(self) -> tuple[float, float]:
        if self.k_bounds is not None:
            return tuple(map(float, self.k_bounds))
        ref = self.default_k / (0.5 * (K_BAND[0] + K_BAND[1]))
        return (K_BAND[0] * ref, K_BAND[1] * ref)


def build_triangular_lattice(spec: LatticeSpec) -> Network:
    """Nearest-neighbour triangular lattice, row 0 at the bottom (y = 0)."""
    s = float(spec.spacing)
    pitch = s * np.sqrt(3.0) / 2.0
    pts = []
    for r in range(spec.rows):
        shifted = r % 2 == 1
        ncol = spec.cols - 1 if (shifted and spec.symmetric) else spec.cols
        x0 = 0.5 * s if shifted else 0.0
        pts.extend((x0 + c * s, r * pitch) for c in range(ncol))
    pos = np.array(pts)

    pairs = cKDTree(pos).query_pairs(r=s * (1 + 1e-6), output_type="ndarray")
    pairs = np.sort(pairs, axis=1)
    pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]

    lo, hi = spec.bounds
    net = Network(pos, np.zeros(len(pos), bool), pairs,
                  np.full(len(pairs), float(spec.default_k)), k_bounds=(lo, hi))
    fixed = np.zeros(len(pos), bool)
    for sel in spec.fixed_nodes:
        fixed[select_node(net, sel)] = True
    return net.with_fixed(fixed)


def _row_layout(net: Network) -> list[np.ndarray]:
    """Node ids grouped by height (bottom row first), each sorted by x."""
    y = net.positions[:, 1]
    scale = max(np.ptp(net.positions), 1.0)
    keys = np.round(y / scale, 9)
    rows = []
    for level in np.unique(keys):
        ids = np.flatnonzero(keys == level)
        rows.append(ids[np.argsort(net.positions[ids, 0], kind="stable")])
    return rows


_NAMED = {
    "bottom-left": (0, 0), "bottom-right": (0, -1),
    "top-left": (-1, 0), "top-right": (-1, -1),
}


def select_node(net: Network, selector) -> int:
    """Resolve a node selector to a node id.

    Accepted forms: an integer id; ``"top-left"``, ``"top-right"``,
    ``"bottom-left"``, ``"bottom-right"``, ``"bottom-center"``,
    ``"top-center"``; ``"row,col"`` strings, ``[row, col]`` pairs or
    ``{"row": r, "col": c}`` mappings, with rows counted from the bottom
    and negative indices counting from the top/right.
    """
    if isinstance(selector, (int, np.integer)) and not isinstance(selector, bool):
        if not 0 <= selector < net.n_nodes:
            raise LatticeError(f"node id {selector} out of range")
        return int(selector)
    rows = _row_layout(net)
    if isinstance(selector, str):
        name = selector.strip().lower()
        if name in _NAMED:
            r, c = _NAMED[name]
        elif name in ("bottom-center", "top-center"):
            row = rows[0] if name.startswith("bottom") else rows[-1]
            return int(row[len(row) // 2])
        elif "," in name:
            r, c = (int(t) for t in name.split(","))
        else:
            raise LatticeError(f"unknown node selector {selector!r}")
    elif isinstance(selector, dict):
        r, c = int(selector["row"]), int(selector["col"])
    else:
        r, c = (int(t) for t in selector)
    try:
        return int(rows[r][c])
    except IndexError:
        raise LatticeError(f"node selector {selector!r} outside the lattice") from None


def validate(net: Network) -> list[str]:
    """Check network invariants. Returns a list of violations, empty when valid."""
    out = []
    if not np.all(np.isfinite(net.positions)):
        bad = np.flatnonzero(~np.isfinite(net.positions).all(axis=1))
        out.extend(f"non-finite position (node {i})" for i in bad)
    k_min, k_max = net.k_bounds
    if not k_min > 0:
        out.append(f"k_min must be positive (got {k_min})")
    if k_max < k_min:
        out.append(f"k_max below k_min ({k_max} < {k_min})")

    seen = {}
    for b, (i, j) in enumerate(net.edges):
        i, j = int(i), int(j)
        if i == j:
            out.append(f"self bond (bond {b}, node {i})")
            continue
        key = (min(i, j), max(i, j))
        if key in seen:
            out.append(f"duplicate bond {key} (bonds {seen[key]} and {b})")
        else:
            seen[key] = b
    for b in np.flatnonzero(net.k < k_min):
        out.append(f"stiffness below k_min (bond {b}: {net.k[b]} < {k_min})")
    for b in np.flatnonzero(net.k > k_max):
        out.append(f"stiffness above k_max (bond {b}: {net.k[b]} > {k_max})")
    for b in np.flatnonzero(~(net.rest_length > 0)):
        out.append(f"non-positive rest length (bond {b})")

    if net.pinned.sum() < 2:
        out.append(f"fewer than 2 fixed nodes ({int(net.pinned.sum())})")
    n = net.n_nodes
    if n and net.fixed.any():
        adj = coo_matrix((np.ones(net.n_bonds), (net.edges[:, 0], net.edges[:, 1])), shape=(n, n))
        _, labels = connected_components(adj, directed=False)
        anchored = np.isin(labels, labels[net.fixed.any(axis=1)])
        out.extend(f"node {i} not connected to a fixed node" for i in np.flatnonzero(~anchored))
    return out


def prune_bond(net: Network, bond_id: int) -> tuple[Network, np.ndarray]:
    """Remove one bond.

    Returns the pruned network and an ``old -> new`` id map of length ``m``
    holding ``-1`` for the removed bond. Connectivity is not checked here;
    call :func:`validate` on the result.
    """
    if isinstance(bond_id, bool) or not 0 <= int(bond_id) < net.n_bonds or int(bond_id) != bond_id:
        raise LatticeError(f"unknown bond id {bond_id}")
    keep = np.ones(net.n_bonds, bool)
    keep[int(bond_id)] = False
    mapping = np.full(net.n_bonds, -1, dtype=np.int64)
    mapping[keep] = np.arange(net.n_bonds - 1)
    pruned = Network(net.positions, net.fixed, net.edges[keep], net.k[keep],
                     net.rest_length[keep], net.k_bounds, dict(net.meta))
    return pruned, mapping


def find_bond(net: Network, i: int, j: int) -> int:
    """Bond id joining nodes ``i`` and ``j``."""
    e = net.edges
    hit = np.flatnonzero(((e[:, 0] == i) & (e[:, 1] == j)) | ((e[:, 0] == j) & (e[:, 1] == i)))
    if hit.size == 0:
        raise LatticeError(f"no bond between nodes {i} and {j}")
    return int(hit[0])


def add_bond(net: Network, i: int, j: int, k: float | None = None) -> Network:
    """Append a bond (no duplicate check; see :func:`validate`)."""
    k = float(np.mean(net.k)) if k is None else float(k)
    rest = float(np.linalg.norm(net.positions[j] - net.positions[i]))
    return Network(net.positions, net.fixed, np.vstack([net.edges, [[i, j]]]),
                   np.append(net.k, k), np.append(net.rest_length, rest),
                   net.k_bounds, dict(net.meta))


def from_arrays(positions: Sequence, edges: Sequence, k, fixed, k_bounds=(1e-12, np.inf)) -> Network:
    """Convenience constructor for hand-built networks."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    k = np.broadcast_to(np.asarray(k, dtype=float), (edges.shape[0],))
    return Network(positions, fixed, edges, k, k_bounds=k_bounds)
