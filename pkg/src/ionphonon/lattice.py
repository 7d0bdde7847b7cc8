"""Honeycomb microtrap lattices and the dimensionless Coulomb coupling tensor.

All lengths are measured in units of the Bravais lattice constant d (the
spacing of each triangular sublattice), so the nearest-neighbor bond length
is ``1/sqrt(3)``.  Three boundary geometries are supported: torus (periodic
in both Bravais directions), cylinder (periodic along direction 1 only) and
plane (open).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# Nearest-neighbor bond length in units of the lattice constant d.
NN_DISTANCE = 1.0 / math.sqrt(3.0)

_DIST_TOL = 1e-9


class Geometry(str, Enum):
    TORUS = "torus"
    CYLINDER = "cylinder"
    PLANE = "plane"


class Orientation(str, Enum):
    """Which edge termination the periodic (x-aligned) direction produces.

    ZIGZAG (default): Bravais direction 1 along x, zigzag boundary rows.
    ARMCHAIR: direction 1 along x with armchair boundary rows.
    """

    ZIGZAG = "zigzag"
    ARMCHAIR = "armchair"


_SQ3 = math.sqrt(3.0)

# (a1, a2, B-sublattice offset) per orientation, lattice constant 1.
_FRAMES = {
    Orientation.ZIGZAG: (
        np.array([1.0, 0.0]),
        np.array([0.5, _SQ3 / 2]),
        np.array([0.5, 0.5 / _SQ3]),
    ),
    Orientation.ARMCHAIR: (
        np.array([_SQ3, 0.0]),
        np.array([_SQ3 / 2, 0.5]),
        np.array([1.0 / _SQ3, 0.0]),
    ),
}

MAX_SITES = 20_000


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class Site:
    index: int
    position: np.ndarray
    sublattice: str          # "A" or "B"
    cell: tuple[int, int]
    is_boundary: bool


@dataclass
class Lattice:
    """A finite honeycomb lattice under one of the three boundary geometries.

    Site index layout is ``2 * (m * n2 + n) + s`` for cell ``(m, n)`` and
    sublattice ``s`` (0 = A, 1 = B), so the sites of a fixed-``m`` column
    strip are contiguous.
    """

    geometry: Geometry
    n1: int
    n2: int
    orientation: Orientation
    bravais_vectors: np.ndarray      # (2, 2), rows a1, a2
    positions: np.ndarray            # (N, 2)
    sublattices: np.ndarray          # (N,) int, 0 = A, 1 = B
    cells: np.ndarray                # (N, 2) int
    is_boundary: np.ndarray          # (N,) bool
    d: float = 1.0
    sites: list[Site] = field(default_factory=list, repr=False)

    @property
    def n_sites(self) -> int:
        return self.positions.shape[0]

    @property
    def periods(self) -> list[np.ndarray]:
        """Periodicity vectors of the geometry (possibly empty)."""
        a1, a2 = self.bravais_vectors
        if self.geometry is Geometry.TORUS:
            return [self.n1 * a1, self.n2 * a2]
        if self.geometry is Geometry.CYLINDER:
            return [self.n1 * a1]
        return []

    @property
    def reciprocal_vectors(self) -> np.ndarray:
        """Rows b1, b2 with a_i . b_j = 2 pi delta_ij."""
        return 2.0 * np.pi * np.linalg.inv(self.bravais_vectors).T

    def site_index(self, m: int, n: int, s: int) -> int:
        return 2 * (m % self.n1 * self.n2 + n % self.n2) + s

    def strip_indices(self, m: int = 0) -> np.ndarray:
        """Site indices of the column strip at cell coordinate ``m``."""
        base = 2 * (m % self.n1) * self.n2
        return np.arange(base, base + 2 * self.n2)

    def to_json(self) -> str:
        """Plot-ready JSON site list."""
        rows = [
            {
                "index": int(i),
                "position": [float(self.positions[i, 0]), float(self.positions[i, 1])],
                "sublattice": "A" if self.sublattices[i] == 0 else "B",
                "is_boundary": bool(self.is_boundary[i]),
            }
            for i in range(self.n_sites)
        ]
        return json.dumps(
            {
                "geometry": self.geometry.value,
                "orientation": self.orientation.value,
                "n1": self.n1,
                "n2": self.n2,
                "sites": rows,
            },
            indent=1,
        )


def _image_shifts(periods: list[np.ndarray], reach: float) -> np.ndarray:
    """All periodic-image shift vectors with |shift| potentially within reach."""
    if not periods:
        return np.zeros((1, 2))
    ranges = []
    for T in periods:
        ranges.append(int(math.ceil(reach / np.linalg.norm(T))) + 1)
    if len(periods) == 1:
        ms = np.arange(-ranges[0], ranges[0] + 1)
        return ms[:, None] * periods[0][None, :]
    m1 = np.arange(-ranges[0], ranges[0] + 1)
    m2 = np.arange(-ranges[1], ranges[1] + 1)
    g1, g2 = np.meshgrid(m1, m2, indexing="ij")
    return (g1.reshape(-1, 1) * periods[0][None, :]
            + g2.reshape(-1, 1) * periods[1][None, :])


def build_lattice(
    geometry: Geometry | str,
    n1: int,
    n2: int,
    orientation: Orientation | str = Orientation.ZIGZAG,
) -> Lattice:
    """Generate a honeycomb lattice with ``2 * n1 * n2`` sites.

    Parameters
    ----------
    geometry : {"torus", "cylinder", "plane"}
        Boundary geometry.  Direction 1 (cells indexed by ``n1``) lies along
        x and is the periodic one on the cylinder.
    n1, n2 : int
        Unit-cell counts along the two Bravais directions.
    orientation : {"zigzag", "armchair"}
        Edge termination of the x-aligned direction (see :class:`Orientation`).
    """
    geometry = Geometry(geometry)
    orientation = Orientation(orientation)
    if n1 < 1 or n2 < 1:
        raise LatticeError(f"cell counts must be >= 1, got ({n1}, {n2})")
    n_sites = 2 * n1 * n2
    if n_sites > MAX_SITES:
        raise LatticeError(f"{n_sites} sites exceeds the size limit {MAX_SITES}")

    a1, a2, delta_b = _FRAMES[orientation]
    positions = np.empty((n_sites, 2))
    sublattices = np.empty(n_sites, dtype=np.int64)
    cells = np.empty((n_sites, 2), dtype=np.int64)
    for m in range(n1):
        for n in range(n2):
            base = m * a1 + n * a2
            i = 2 * (m * n2 + n)
            positions[i] = base
            positions[i + 1] = base + delta_b
            sublattices[i] = 0
            sublattices[i + 1] = 1
            cells[i] = cells[i + 1] = (m, n)

    lat = Lattice(
        geometry=geometry,
        n1=n1,
        n2=n2,
        orientation=orientation,
        bravais_vectors=np.array([a1, a2]),
        positions=positions,
        sublattices=sublattices,
        cells=cells,
        is_boundary=np.zeros(n_sites, dtype=bool),
    )
    lat.is_boundary = _nn_counts(lat) < 3
    lat.sites = [
        Site(
            index=i,
            position=positions[i].copy(),
            sublattice="A" if sublattices[i] == 0 else "B",
            cell=(int(cells[i, 0]), int(cells[i, 1])),
            is_boundary=bool(lat.is_boundary[i]),
        )
        for i in range(n_sites)
    ]
    return lat


def _nn_counts(lat: Lattice) -> np.ndarray:
    """Number of nearest neighbors (distance NN_DISTANCE) per site, images included."""
    shifts = _image_shifts(lat.periods, NN_DISTANCE + 1.0)
    pos = lat.positions
    counts = np.zeros(lat.n_sites, dtype=np.int64)
    base = pos[None, :, :] - pos[:, None, :]          # base[i, j] = r_j - r_i
    for sh in shifts:
        dist = np.linalg.norm(base + sh, axis=-1)
        counts += np.count_nonzero(
            np.abs(dist - NN_DISTANCE) < _DIST_TOL, axis=1
        )
    return counts


def neighbor_pairs(lat: Lattice) -> np.ndarray:
    """Directed nearest-neighbor pairs (i, j), one row per periodic image."""
    shifts = _image_shifts(lat.periods, NN_DISTANCE + 1.0)
    base = lat.positions[None, :, :] - lat.positions[:, None, :]
    out = []
    for sh in shifts:
        dist = np.linalg.norm(base + sh, axis=-1)
        ii, jj = np.nonzero(np.abs(dist - NN_DISTANCE) < _DIST_TOL)
        out.append(np.stack([ii, jj], axis=1))
    return np.concatenate(out, axis=0)


def boundary_shell(lat: Lattice, shell_width: int = 2) -> np.ndarray:
    """Site indices within graph distance ``shell_width - 1`` of the boundary.

    Graph distance is hop count on the nearest-neighbor bond graph; the
    boundary sites themselves are at distance 0.
    """
    if shell_width < 1:
        return np.array([], dtype=np.int64)
    pairs = neighbor_pairs(lat)
    adj: list[list[int]] = [[] for _ in range(lat.n_sites)]
    for i, j in pairs:
        adj[i].append(int(j))
    dist = np.full(lat.n_sites, -1, dtype=np.int64)
    frontier = [int(i) for i in np.nonzero(lat.is_boundary)[0]]
    for i in frontier:
        dist[i] = 0
    depth = 0
    while frontier and depth < shell_width - 1:
        depth += 1
        nxt = []
        for i in frontier:
            for j in adj[i]:
                if dist[j] < 0:
                    dist[j] = depth
                    nxt.append(j)
        frontier = nxt
    return np.nonzero((dist >= 0) & (dist < shell_width))[0]


@dataclass
class CouplingMatrix:
    """Dimensionless Coulomb coupling tensor ``U^{i,j}_{ab}`` of a lattice.

    The table is stored pair-image resolved and directed: one row per ordered
    pair (i, j) and periodic image with ``0 < |R| <= cutoff_radius``, where
    ``R`` is the displacement vector from site i to that image of site j.
    Self-interaction blocks (the paper-absorbed on-site terms) are kept
    separately in ``onsite_blocks`` and only enter assembled Hamiltonians on
    explicit request.
    """

    lattice: Lattice
    cutoff_radius: float
    nn_only: bool
    i_index: np.ndarray              # (P,) int
    j_index: np.ndarray              # (P,) int
    displacements: np.ndarray        # (P, 2)
    blocks: np.ndarray               # (P, 2, 2) real
    onsite_blocks: np.ndarray        # (N, 2, 2) real

    @property
    def n_entries(self) -> int:
        return self.i_index.shape[0]

    def dense_blocks(self) -> np.ndarray:
        """(N, N, 2, 2) array of image-summed coupling blocks (i != j)."""
        N = self.lattice.n_sites
        out = np.zeros((N, N, 2, 2))
        np.add.at(out, (self.i_index, self.j_index), self.blocks)
        return out

    def entry(self, i: int, alpha: int, j: int, beta: int) -> float:
        """Image-summed coupling U^{i,j}_{alpha,beta}; 0 when out of range."""
        if i == j:
            return float(self.onsite_blocks[i, alpha, beta])
        sel = (self.i_index == i) & (self.j_index == j)
        return float(self.blocks[sel, alpha, beta].sum())

    def reference_table(self, ref_sites: np.ndarray):
        """Table rows whose source site is in ``ref_sites``.

        Returns (row_pos, col_pos, displacements, blocks) where row_pos /
        col_pos index into ``ref_sites`` / the full strip labeling used by
        Bloch-type builders.
        """
        sel = np.isin(self.i_index, ref_sites)
        return (
            self.i_index[sel],
            self.j_index[sel],
            self.displacements[sel],
            self.blocks[sel],
        )


def coupling_block(displacements: np.ndarray) -> np.ndarray:
    """Coulomb blocks (1/|R|^3) [delta_ab - 3 Rhat_a Rhat_b] for rows of R."""
    R = np.atleast_2d(displacements)
    r2 = np.einsum("pa,pa->p", R, R)
    r = np.sqrt(r2)
    rhat = R / r[:, None]
    outer = rhat[:, :, None] * rhat[:, None, :]
    return (np.eye(2)[None, :, :] - 3.0 * outer) / r[:, None, None] ** 3


def coulomb_coupling(
    lat: Lattice, cutoff_radius: float = 12.0, nn_only: bool = False
) -> CouplingMatrix:
    """Compute the coupling tensor of Eq.-(6) form for all pairs in range.

    On periodic geometries the table contains every periodic image with
    ``|R| <= cutoff_radius`` (several images of the same pair may
    contribute).  With ``nn_only`` the table is restricted to the
    nearest-neighbor distance regardless of the cutoff.
    """
    if cutoff_radius < NN_DISTANCE:
        raise LatticeError(
            f"cutoff_radius must be >= {NN_DISTANCE:.6f} (one bond length)"
        )
    pos = lat.positions
    N = lat.n_sites
    shifts = _image_shifts(lat.periods, cutoff_radius + _DIST_TOL)
    base = pos[None, :, :] - pos[:, None, :]
    ii_all, jj_all, disp_all = [], [], []
    for sh in shifts:
        disp = base + sh
        dist = np.linalg.norm(disp, axis=-1)
        if nn_only:
            mask = np.abs(dist - NN_DISTANCE) < _DIST_TOL
        else:
            mask = (dist > _DIST_TOL) & (dist <= cutoff_radius + _DIST_TOL)
        ii, jj = np.nonzero(mask)
        ii_all.append(ii)
        jj_all.append(jj)
        disp_all.append(disp[ii, jj])
    i_index = np.concatenate(ii_all)
    j_index = np.concatenate(jj_all)
    displacements = np.concatenate(disp_all, axis=0)
    blocks = coupling_block(displacements) if len(i_index) else np.zeros((0, 2, 2))

    # Paper's i = j entry is minus the sum of the i != j blocks over the
    # same truncated neighbor set.
    onsite = np.zeros((N, 2, 2))
    np.add.at(onsite, i_index, -blocks)

    return CouplingMatrix(
        lattice=lat,
        cutoff_radius=float(cutoff_radius),
        nn_only=bool(nn_only),
        i_index=i_index,
        j_index=j_index,
        displacements=displacements,
        blocks=blocks,
        onsite_blocks=onsite,
    )
