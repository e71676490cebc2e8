"""Scattered 2-D node sets, neighbour stencils and the node-file format.

Two domain kinds are supported: a doubly periodic rectangle and a disc
centred on the origin whose boundary carries Dirichlet nodes.  Node sets are
immutable once built; stencils are stored as padded arrays so that weight
computations can be vectorised over nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy.spatial import Delaunay, cKDTree

__all__ = [
    "DomainSpec",
    "NodeSet",
    "Stencil",
    "StencilSet",
    "SizingError",
    "StencilError",
    "generate_nodes",
    "uniform_grid",
    "build_stencils",
    "save_nodes",
    "load_nodes",
]

PERIODIC = "periodic-rectangle"
DISC = "disc"

INTERIOR = 0
DIRICHLET = 1

# node-generation tunables
JITTER = 0.3
SHIFT_ITERATIONS = 10
SHIFT_RELAX = 0.5
SHIFT_CLIP = 0.2


class SizingError(ValueError):
    """Spacing is too coarse for the requested domain."""


class StencilError(ValueError):
    """A stencil request cannot be satisfied."""


@dataclass(frozen=True)
class DomainSpec:
    """Geometry of the computational domain.

    A periodic rectangle covers ``[x0, x0 + width] x [y0, y0 + height]``;
    use :meth:`from_half_widths` for the ``[-pi Lx, pi Lx] x [-pi Ly, pi Ly]``
    convention.  A disc is centred on the origin.
    """

    kind: str
    width: float = 1.0
    height: float = 1.0
    x0: float = 0.0
    y0: float = 0.0
    radius: float = 1.0

    def __post_init__(self):
        if self.kind == PERIODIC:
            if not (self.width > 0 and self.height > 0):
                raise ValueError("rectangle extents must be positive")
        elif self.kind == DISC:
            if not self.radius > 0:
                raise ValueError("disc radius must be positive")
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def periodic(cls, width=1.0, height=None, x0=0.0, y0=0.0) -> "DomainSpec":
        return cls(PERIODIC, width=width, height=width if height is None else height, x0=x0, y0=y0)

    @classmethod
    def from_half_widths(cls, lx: float, ly: float) -> "DomainSpec":
        return cls(PERIODIC, width=2 * math.pi * lx, height=2 * math.pi * ly,
                   x0=-math.pi * lx, y0=-math.pi * ly)

    @classmethod
    def disc(cls, radius=1.0) -> "DomainSpec":
        return cls(DISC, radius=radius)

    @property
    def is_periodic(self) -> bool:
        return self.kind == PERIODIC

    @property
    def area(self) -> float:
        if self.is_periodic:
            return self.width * self.height
        return math.pi * self.radius ** 2

    @property
    def box(self) -> np.ndarray:
        return np.array([self.width, self.height])

    def wrap(self, points: np.ndarray) -> np.ndarray:
        """Map points back into the periodic cell (no-op on a disc)."""
        if not self.is_periodic:
            return points
        origin = np.array([self.x0, self.y0])
        p = origin + np.mod(points - origin, self.box)
        # np.mod can return exactly the box length for tiny negatives
        p = np.where(p >= origin + self.box, origin, p)
        return p

    def min_image(self, d: np.ndarray) -> np.ndarray:
        if not self.is_periodic:
            return d
        box = self.box
        return d - box * np.round(d / box)

    def contains(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        if self.is_periodic:
            lo = np.array([self.x0, self.y0]) - tol
            hi = lo + self.box + 2 * tol
            return np.all((points >= lo) & (points <= hi), axis=-1)
        return np.hypot(points[..., 0], points[..., 1]) <= self.radius * (1 + tol)


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Collocation points with their mean spacing and boundary flags."""

    positions: np.ndarray
    s: float
    domain: DomainSpec
    flags: np.ndarray
    seed: int = 0

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=float)
        flags = np.ascontiguousarray(self.flags, dtype=np.int8)
        if pos.ndim != 2 or pos.shape[1] != 2 or len(pos) < 1:
            raise ValueError("positions must be an (N, 2) array with N >= 1")
        if flags.shape != (len(pos),):
            raise ValueError("one boundary flag per node required")
        if not self.s > 0:
            raise ValueError("spacing must be positive")
        pos.setflags(write=False)
        flags.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "flags", flags)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def x(self) -> np.ndarray:
        return self.positions[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.positions[:, 1]

    @property
    def k_nyquist(self) -> float:
        return math.pi / self.s

    @property
    def interior(self) -> np.ndarray:
        return self.flags == INTERIOR

    @property
    def boundary(self) -> np.ndarray:
        return self.flags == DIRICHLET

    def tree(self) -> cKDTree:
        if self.domain.is_periodic:
            origin = np.array([self.domain.x0, self.domain.y0])
            shifted = np.mod(self.positions - origin, self.domain.box)
            shifted = np.where(shifted >= self.domain.box, 0.0, shifted)
            return cKDTree(shifted, boxsize=self.domain.box)
        return cKDTree(self.positions)

    def _query_points(self) -> np.ndarray:
        if self.domain.is_periodic:
            origin = np.array([self.domain.x0, self.domain.y0])
            shifted = np.mod(self.positions - origin, self.domain.box)
            return np.where(shifted >= self.domain.box, 0.0, shifted)
        return self.positions

    def nearest_distances(self) -> np.ndarray:
        """Distance from every node to its nearest neighbour."""
        d, _ = self.tree().query(self._query_points(), k=2)
        return d[:, 1]


@dataclass(frozen=True)
class Stencil:
    """Neighbours of one centre node (centre excluded)."""

    center: int
    neighbours: np.ndarray
    offsets: np.ndarray

    def __len__(self) -> int:
        return len(self.neighbours)


@dataclass(eq=False)
class StencilSet(Sequence):
    """All stencils of a node set in padded form.

    ``indices[i, k]`` is the k-th neighbour of node i; padding slots point at
    the centre itself with a zero offset and ``mask`` False, so any
    difference-form sum over a padded row is unaffected by the padding.
    """

    indices: np.ndarray
    offsets: np.ndarray
    mask: np.ndarray
    radius: np.ndarray = field(default=None)
    centers: np.ndarray = field(default=None)

    def __post_init__(self):
        self.counts = self.mask.sum(axis=1)
        if self.centers is None:
            self.centers = np.arange(len(self.indices))
        if self.radius is None:
            r = np.hypot(self.offsets[..., 0], self.offsets[..., 1])
            self.radius = np.where(self.mask, r, 0.0).max(axis=1)

    def __len__(self) -> int:
        return len(self.indices)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        m = self.mask[i]
        return Stencil(int(self.centers[i]), self.indices[i][m].copy(), self.offsets[i][m].copy())

    def __iter__(self) -> Iterator[Stencil]:
        for i in range(len(self)):
            yield self[i]

    @property
    def width(self) -> int:
        return self.indices.shape[1]

    @property
    def distances(self) -> np.ndarray:
        return np.hypot(self.offsets[..., 0], self.offsets[..., 1])

    def subset(self, rows: np.ndarray) -> "StencilSet":
        rows = np.asarray(rows)
        return StencilSet(self.indices[rows], self.offsets[rows], self.mask[rows], self.radius[rows],
                          self.centers[rows])

    @classmethod
    def from_lists(cls, centers, neighbour_lists, offset_lists, radius=None) -> "StencilSet":
        n = len(neighbour_lists)
        width = max(1, max(len(nb) for nb in neighbour_lists))
        idx = np.repeat(np.asarray(centers, dtype=np.int64)[:, None], width, axis=1)
        off = np.zeros((n, width, 2))
        mask = np.zeros((n, width), dtype=bool)
        for i, (nb, of) in enumerate(zip(neighbour_lists, offset_lists)):
            k = len(nb)
            idx[i, :k] = nb
            off[i, :k] = of
            mask[i, :k] = True
        return cls(idx, off, mask, None if radius is None else np.asarray(radius, dtype=float),
                   np.asarray(centers, dtype=np.int64))


# --------------------------------------------------------------------------
# node generation


def _periodic_seed(domain: DomainSpec, s: float, rng: np.random.Generator) -> np.ndarray:
    nx = int(round(domain.width / s))
    ny = int(round(domain.height / s))
    if nx * ny < 9 or nx < 3 or ny < 3:
        raise SizingError(f"spacing {s} too coarse for a {domain.width} x {domain.height} domain")
    dx, dy = domain.width / nx, domain.height / ny
    pts = []
    # rows are laid down one front at a time, each with a random phase
    for r in range(ny):
        phase = rng.uniform(0.0, 1.0)
        xs = (np.arange(nx) + phase) * dx
        ys = np.full(nx, (r + 0.5) * dy)
        pts.append(np.column_stack([xs, ys]))
    pts = np.vstack(pts)
    pts += rng.uniform(-JITTER, JITTER, size=pts.shape) * np.array([dx, dy])
    return domain.wrap(pts + np.array([domain.x0, domain.y0]))


def _disc_seed(domain: DomainSpec, s: float, rng: np.random.Generator):
    radius = domain.radius
    n_ring = int(math.ceil(2 * math.pi * radius / s))
    if math.pi * radius ** 2 / s ** 2 < 9 or n_ring < 3:
        raise SizingError(f"spacing {s} too coarse for a disc of radius {radius}")
    theta = 2 * math.pi * np.arange(n_ring) / n_ring
    boundary = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    pts = []
    # fronts advance inward from the boundary, one ring per spacing
    r = radius - s
    while r > 0.5 * s:
        n = max(1, int(round(2 * math.pi * r / s)))
        t = 2 * math.pi * (np.arange(n) + rng.uniform()) / n
        pts.append(r * np.column_stack([np.cos(t), np.sin(t)]))
        r -= s
    if r > -0.25 * s:
        pts.append(np.zeros((1, 2)))
    interior = np.vstack(pts)
    interior += rng.uniform(-JITTER, JITTER, size=interior.shape) * s
    # keep jittered nodes a safe distance inside the circle
    rr = np.hypot(interior[:, 0], interior[:, 1])
    lim = radius - 0.6 * s
    scale = np.where(rr > lim, lim / np.maximum(rr, 1e-300), 1.0)
    interior *= scale[:, None]
    return boundary, interior


def _natural_neighbours(points: np.ndarray, domain: DomainSpec, s: float):
    """Delaunay neighbours of every point, with minimum-image offsets."""
    n = len(points)
    if domain.is_periodic:
        # ghost layer of periodic images three spacings deep
        box = domain.box
        origin = np.array([domain.x0, domain.y0])
        rel = points - origin
        ghosts, owners = [points], [np.arange(n)]
        pad = 3 * s
        for sx in (-1, 0, 1):
            for sy in (-1, 0, 1):
                if sx == 0 and sy == 0:
                    continue
                img = rel + np.array([sx, sy]) * box
                keep = np.all((img > -pad) & (img < box + pad), axis=1)
                ghosts.append(img[keep] + origin)
                owners.append(np.nonzero(keep)[0])
        allpts = np.vstack(ghosts)
        owner = np.concatenate(owners)
    else:
        allpts = points
        owner = np.arange(n)
    tri = Delaunay(allpts)
    indptr, nbrs = tri.vertex_neighbor_vertices
    out = []
    for i in range(n):
        nb = nbrs[indptr[i]:indptr[i + 1]]
        out.append((owner[nb], allpts[nb] - points[i]))
    return out


def _shift(points: np.ndarray, fixed: np.ndarray, domain: DomainSpec, s: float) -> np.ndarray:
    """One relaxation sweep: move free nodes toward their neighbourhood centroid."""
    moved = points.copy()
    for i, (_, off) in enumerate(_natural_neighbours(points, domain, s)):
        if fixed[i] or len(off) == 0:
            continue
        step = SHIFT_RELAX * off.mean(axis=0)
        norm = math.hypot(*step)
        if norm > SHIFT_CLIP * s:
            step *= SHIFT_CLIP * s / norm
        moved[i] += step
    if domain.is_periodic:
        return domain.wrap(moved)
    rr = np.hypot(moved[:, 0], moved[:, 1])
    lim = domain.radius - 0.5 * s
    over = (~fixed) & (rr > lim)
    moved[over] *= (lim / rr[over])[:, None]
    return moved


def generate_nodes(domain: DomainSpec, s: float, seed: int = 0) -> NodeSet:
    """Quasi-uniform isotropic node set with mean spacing close to ``s``.

    Nodes are seeded front by front (rows on a periodic rectangle, rings
    marching inward on a disc) with random phase and jitter, then relaxed by
    ten shifting sweeps.  Disc boundary nodes sit exactly on the circle and
    never move.
    """
    if not s > 0:
        raise SizingError("spacing must be positive")
    rng = np.random.default_rng(seed)
    if domain.is_periodic:
        pts = _periodic_seed(domain, s, rng)
        fixed = np.zeros(len(pts), dtype=bool)
        flags = np.full(len(pts), INTERIOR, dtype=np.int8)
    else:
        boundary, interior = _disc_seed(domain, s, rng)
        pts = np.vstack([boundary, interior])
        fixed = np.zeros(len(pts), dtype=bool)
        fixed[: len(boundary)] = True
        flags = np.where(fixed, DIRICHLET, INTERIOR).astype(np.int8)
    for _ in range(SHIFT_ITERATIONS):
        pts = _shift(pts, fixed, domain, s)
    mean_s = math.sqrt(domain.area / len(pts))
    return NodeSet(pts, mean_s, domain, flags, seed)


def uniform_grid(domain: DomainSpec, n_per_side: int) -> NodeSet:
    """Cartesian lattice with ``n_per_side`` nodes along each side."""
    if n_per_side < 2:
        raise SizingError("a lattice needs at least two nodes per side")
    if not domain.is_periodic:
        raise ValueError("uniform grids are only defined on periodic rectangles")
    dx = domain.width / n_per_side
    dy = domain.height / n_per_side
    gx, gy = np.meshgrid(domain.x0 + dx * np.arange(n_per_side),
                         domain.y0 + dy * np.arange(n_per_side), indexing="xy")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    flags = np.full(len(pts), INTERIOR, dtype=np.int8)
    return NodeSet(pts, math.sqrt(dx * dy), domain, flags, 0)


# --------------------------------------------------------------------------
# stencils


def _assemble(nodes: NodeSet, neighbour_lists, radius) -> StencilSet:
    pos = nodes.positions
    centers = np.arange(len(nodes))
    offsets = []
    for i, nb in enumerate(neighbour_lists):
        offsets.append(nodes.domain.min_image(pos[nb] - pos[i]))
    return StencilSet.from_lists(centers, neighbour_lists, offsets, radius)


def _order_neighbours(nodes: NodeSet, i: int, cand: np.ndarray) -> np.ndarray:
    cand = cand[cand != i]
    d = nodes.domain.min_image(nodes.positions[cand] - nodes.positions[i])
    r = np.hypot(d[:, 0], d[:, 1])
    return cand[np.lexsort((cand, r))]


def build_stencils(nodes: NodeSet, radius=None, count=None, rows=None) -> StencilSet:
    """Neighbour stencils by radius or by nearest count.

    ``radius`` may be a scalar or a per-node array.  Neighbours are ordered
    by distance with ties broken by index.  ``rows`` restricts the build to
    a subset of centre nodes.
    """
    if (radius is None) == (count is None):
        raise StencilError("give exactly one of radius or count")
    n = len(nodes)
    centers = np.arange(n) if rows is None else np.asarray(rows)
    tree = nodes.tree()
    q = nodes._query_points()
    if count is not None:
        count = int(count)
        if count >= n:
            raise StencilError(f"count {count} must be smaller than the node count {n}")
        if count < 1:
            raise StencilError("count must be positive")
        k = min(n, count + 1)
        d, idx = tree.query(q[centers], k=k)
        lists = []
        for row, i in enumerate(centers):
            cand = idx[row]
            # extend the candidate set so ties at the cut-off resolve by index
            cut = d[row, -1]
            extra = tree.query_ball_point(q[i], cut * (1 + 1e-12))
            cand = np.union1d(cand, extra)
            lists.append(_order_neighbours(nodes, i, cand)[:count])
        rad = None
    else:
        rad = np.broadcast_to(np.asarray(radius, dtype=float), (n,))
        if np.any(rad <= 0):
            raise StencilError("radius must be positive")
        if nodes.domain.is_periodic:
            half = 0.5 * min(nodes.domain.width, nodes.domain.height)
            if np.any(rad[centers] > half):
                raise StencilError("stencil radius exceeds half the periodic extent")
        lists = []
        for i in centers:
            cand = np.asarray(tree.query_ball_point(q[i], rad[i]), dtype=np.int64)
            nb = _order_neighbours(nodes, i, cand)
            if len(nb) == 0:
                raise StencilError(f"empty stencil at node {i}")
            lists.append(nb)
        rad = rad[centers]
    pos = nodes.positions
    offsets = [nodes.domain.min_image(pos[nb] - pos[i]) for i, nb in zip(centers, lists)]
    return StencilSet.from_lists(centers, lists, offsets, rad)


# --------------------------------------------------------------------------
# file format


def save_nodes(nodes: NodeSet, path) -> None:
    d = nodes.domain
    lines = [
        "# mkmesh nodeset v1",
        f"domain {d.kind}",
        f"extents {d.width!r} {d.height!r} {d.x0!r} {d.y0!r} {d.radius!r}",
        f"spacing {nodes.s!r}",
        f"seed {nodes.seed}",
        f"count {len(nodes)}",
    ]
    for (x, y), f in zip(nodes.positions, nodes.flags):
        lines.append(f"{x:.17g} {y:.17g} {int(f)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_nodes(path) -> NodeSet:
    header = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] in ("domain", "extents", "spacing", "seed", "count"):
            header[parts[0]] = parts[1:]
        else:
            rows.append((float(parts[0]), float(parts[1]), int(parts[2])))
    w, h, x0, y0, r = (float(v) for v in header["extents"])
    domain = DomainSpec(header["domain"][0], width=w, height=h, x0=x0, y0=y0, radius=r)
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    if len(arr) != int(header["count"][0]):
        raise ValueError("node count does not match header")
    return NodeSet(arr[:, :2], float(header["spacing"][0]), domain,
                   arr[:, 2].astype(np.int8), int(header["seed"][0]))
