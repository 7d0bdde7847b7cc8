"""Eigensolving, band structures over k grids, gap windows and flatness maps.

Bands are grouped by indirect (whole-BZ) gap windows: two consecutive bands
belong to the same group when the window between them is below the grouping
tolerance, i.e. when they overlap or nearly overlap somewhere in energy.
A band group is what appears as "one band" in a projected spectrum.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import NumericalError
from .hamiltonian import (
    HamiltonianMatrix,
    ModelParams,
    bloch_matrices,
    cylinder_matrices,
)
from .lattice import (
    CouplingMatrix,
    Geometry,
    Lattice,
    Orientation,
    build_lattice,
    coulomb_coupling,
)

#: Default indirect-gap tolerance separating band groups (units of omega_tilde_x).
GROUPING_TOL = 0.015

#: Default eigensolver residual bound.
RESIDUAL_TOL = 1e-9


@dataclass
class Spectrum:
    """Full eigendecomposition of one Hamiltonian.

    ``modes[:, l]`` is the l-th eigenvector; the global phase of each mode is
    fixed deterministically (largest-magnitude component real positive).
    """

    energies: np.ndarray
    modes: np.ndarray
    source: str
    lattice: Lattice | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.energies.shape[0]

    def residuals(self, h: HamiltonianMatrix) -> np.ndarray:
        r = h.matrix @ self.modes - self.modes * self.energies[None, :]
        return np.linalg.norm(r, axis=0)


def _fix_phases(v: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(v), axis=0)
    lead = v[idx, np.arange(v.shape[1])]
    phases = lead / np.abs(lead)
    return v / phases[None, :]


def eigensolve(h: HamiltonianMatrix) -> Spectrum:
    """Dense Hermitian eigendecomposition with deterministic mode phases."""
    m = h.matrix
    dev = float(np.abs(m - m.conj().T).max())
    if dev > 1e-10 * max(1.0, float(np.abs(m).max())):
        raise NumericalError(f"matrix not hermitian (deviation {dev:.3e})")
    w, v = np.linalg.eigh(m)
    return Spectrum(
        energies=w,
        modes=_fix_phases(v),
        source=h.representation,
        lattice=h.lattice,
    )


def group_bands(energies: np.ndarray, tol: float = GROUPING_TOL) -> list[tuple[int, int]]:
    """Group band indices into runs separated by everywhere-open gap windows.

    ``energies`` has shape (n_k, n_bands), ascending along the band axis.
    Returns inclusive (first, last) index pairs.
    """
    nb = energies.shape[1]
    groups = [[0, 0]]
    for s in range(1, nb):
        window = energies[:, s].min() - energies[:, s - 1].max()
        if window < tol:
            groups[-1][1] = s
        else:
            groups.append([s, s])
    return [(a, b) for a, b in groups]


@dataclass
class Bands:
    """Band energies (and optionally eigenvectors) over a quasimomentum grid."""

    geometry: Geometry
    k_points: np.ndarray            # (K, 2) cartesian, or (K,) k_x (cylinder)
    energies: np.ndarray            # (K, n_bands), ascending per k
    eigenvectors: np.ndarray | None = field(default=None, repr=False)
    grouping_tol: float = GROUPING_TOL
    k_frac: np.ndarray | None = None
    lattice: Lattice | None = field(default=None, repr=False)

    @property
    def n_bands(self) -> int:
        return self.energies.shape[1]

    @property
    def band_groups(self) -> list[tuple[int, int]]:
        return group_bands(self.energies, self.grouping_tol)

    def group_range(self, group_index: int) -> tuple[float, float]:
        lo, hi = self.band_groups[group_index]
        block = self.energies[:, lo:hi + 1]
        return float(block.min()), float(block.max())

    def to_csv(self, path) -> None:
        """Columns k1, k2 (torus, fractional) or kx (cylinder), band, energy."""
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            if self.geometry is Geometry.CYLINDER:
                wr.writerow(["kx", "band_index", "energy"])
                for i, kx in enumerate(np.atleast_1d(self.k_points)):
                    for s in range(self.n_bands):
                        wr.writerow([f"{kx:.12g}", s, f"{self.energies[i, s]:.12g}"])
            else:
                kf = self.k_frac if self.k_frac is not None else self.k_points
                wr.writerow(["k1", "k2", "band_index", "energy"])
                for i in range(len(kf)):
                    for s in range(self.n_bands):
                        wr.writerow([
                            f"{kf[i, 0]:.12g}", f"{kf[i, 1]:.12g}",
                            s, f"{self.energies[i, s]:.12g}",
                        ])


def bz_grid(lat: Lattice, grid_n: int, offset: float = 0.5):
    """Uniform fractional grid over the Brillouin zone and its cartesian image."""
    B = lat.reciprocal_vectors
    ij = np.indices((grid_n, grid_n)).reshape(2, -1).T
    frac = (ij + offset) / grid_n
    return frac, frac @ B


def band_structure(
    lat: Lattice,
    p: ModelParams,
    u: CouplingMatrix,
    grid_n: int = 40,
    offset: float = 0.5,
    keep_vectors: bool = False,
    grouping_tol: float = GROUPING_TOL,
    include_onsite_coulomb: bool = False,
) -> Bands:
    """Eigensolve on a BZ grid (torus) or a k_x line (cylinder).

    For the torus the grid has ``grid_n x grid_n`` points offset from the
    zone origin by ``offset`` grid cells; for the cylinder, ``grid_n``
    equally spaced k_x values across one period.
    """
    if lat.geometry is Geometry.TORUS:
        frac, kpts = bz_grid(lat, grid_n, offset)
        H = bloch_matrices(lat, p, u, kpts,
                           include_onsite_coulomb=include_onsite_coulomb)
        w, v = backend.eigh_grid(H)
        return Bands(
            geometry=lat.geometry,
            k_points=kpts,
            k_frac=frac,
            energies=w,
            eigenvectors=v if keep_vectors else None,
            grouping_tol=grouping_tol,
            lattice=lat,
        )
    if lat.geometry is Geometry.CYLINDER:
        a1x = lat.bravais_vectors[0, 0]
        kxs = np.linspace(0.0, 2.0 * np.pi / a1x, grid_n, endpoint=False)
        H = cylinder_matrices(lat, p, u, kxs,
                              include_onsite_coulomb=include_onsite_coulomb)
        w, v = backend.eigh_grid(H)
        return Bands(
            geometry=lat.geometry,
            k_points=kxs,
            energies=w,
            eigenvectors=v if keep_vectors else None,
            grouping_tol=grouping_tol,
            lattice=lat,
        )
    raise NumericalError("band structure requires a torus or cylinder lattice")


@dataclass
class GapWindow:
    """Indirect gap between band group ``below_group`` and the next one."""

    below_group: int
    low: float      # max over k of the lower group's top band
    high: float     # min over k of the upper group's bottom band

    @property
    def width(self) -> float:
        return self.high - self.low

    @property
    def is_open(self) -> bool:
        return self.width > 0.0


def band_gaps(b: Bands) -> list[GapWindow]:
    """Gap windows between consecutive band groups (possibly empty windows)."""
    groups = b.band_groups
    out = []
    for gi in range(len(groups) - 1):
        _, top = b.group_range(gi)
        bot, _ = b.group_range(gi + 1)
        out.append(GapWindow(below_group=gi, low=top, high=bot))
    return out


@dataclass
class FlatnessResult:
    group_index: int
    bandwidth: float
    gap: float
    flatness: float          # gap / bandwidth; inf for flat bands; nan if closed
    gap_closed: bool = False


def flatness(b: Bands, group_index: int = 0) -> FlatnessResult:
    """Gap-to-bandwidth ratio of a band group (its gap to the next group)."""
    groups = b.band_groups
    if group_index >= len(groups) - 1:
        raise ValueError(
            f"group {group_index} has no group above it (got {len(groups)} groups)"
        )
    lo, hi = b.group_range(group_index)
    bandwidth = hi - lo
    window = band_gaps(b)[group_index]
    if not window.is_open:
        return FlatnessResult(group_index, bandwidth, 0.0, float("nan"),
                              gap_closed=True)
    if bandwidth < 1e-12:
        return FlatnessResult(group_index, bandwidth, window.width, float("inf"))
    return FlatnessResult(group_index, bandwidth, window.width,
                          window.width / bandwidth)


@dataclass
class FlatnessMap:
    v_b_values: np.ndarray
    beta_values: np.ndarray
    bandwidth: np.ndarray    # (n_beta, n_vb)
    gap: np.ndarray
    flatness: np.ndarray
    nn_only: bool

    @property
    def max_flatness(self) -> float:
        vals = self.flatness[np.isfinite(self.flatness)]
        return float(vals.max()) if vals.size else float("nan")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["v_b", "beta_x", "bandwidth", "gap", "flatness"])
            for i, beta in enumerate(self.beta_values):
                for j, vb in enumerate(self.v_b_values):
                    wr.writerow([
                        f"{vb:.12g}", f"{beta:.12g}",
                        f"{self.bandwidth[i, j]:.12g}",
                        f"{self.gap[i, j]:.12g}",
                        f"{self.flatness[i, j]:.12g}",
                    ])


def flatness_map(
    v_b_range: tuple[float, float],
    beta_range: tuple[float, float],
    resolution: int = 20,
    nn_only: bool = False,
    grid_n: int = 40,
    cutoff_radius: float = 12.0,
    orientation: Orientation | str = Orientation.ZIGZAG,
    gamma_y: float = 1.0,
    grouping_tol: float = GROUPING_TOL,
    threads: int = 1,
) -> FlatnessMap:
    """Flatness of the lowest band group over a (v_b, beta_x) parameter grid.

    The band structure at each point is computed on the infinite lattice
    (1 x 1 torus with periodic-image summation) on a ``grid_n`` BZ grid.
    """
    lat = build_lattice(Geometry.TORUS, 1, 1, orientation)
    u = coulomb_coupling(lat, cutoff_radius=cutoff_radius, nn_only=nn_only)
    vbs = np.linspace(v_b_range[0], v_b_range[1], resolution)
    betas = np.linspace(beta_range[0], beta_range[1], resolution)

    # H(k; beta, v_b) is affine in beta, so the k structure is assembled once.
    from .hamiltonian import _bloch_tables

    unit = ModelParams(beta_x=1.0, v_b=0.0, gamma_y=gamma_y)
    blocks, rows, cols, disps, _ = _bloch_tables(lat, unit, u, False)
    _, kpts = bz_grid(lat, grid_n)
    C = backend.assemble_bloch_grid(
        blocks, rows, cols, disps, 2, np.zeros((2, 2, 2), complex), kpts
    )

    def one(args):
        beta, vb = args
        H = beta * C
        ons = np.array([[1.0, -1j * vb], [1j * vb, gamma_y**2]])
        H[:, 0:2, 0:2] += ons
        H[:, 2:4, 2:4] += ons
        w = np.linalg.eigvalsh(H)
        groups = group_bands(w, grouping_tol)
        lo0, hi0 = groups[0]
        bandwidth = float(w[:, lo0:hi0 + 1].max() - w[:, lo0:hi0 + 1].min())
        if len(groups) < 2:
            return bandwidth, 0.0, float("nan")
        gap = float(w[:, groups[1][0]].min() - w[:, lo0:hi0 + 1].max())
        if gap <= 0:
            return bandwidth, 0.0, float("nan")
        if bandwidth < 1e-12:
            return bandwidth, gap, float("inf")
        return bandwidth, gap, gap / bandwidth

    tasks = [(beta, vb) for beta in betas for vb in vbs]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, tasks))
    else:
        results = [one(t) for t in tasks]

    arr = np.array(results).reshape(len(betas), len(vbs), 3)
    return FlatnessMap(
        v_b_values=vbs,
        beta_values=betas,
        bandwidth=arr[:, :, 0],
        gap=arr[:, :, 1],
        flatness=arr[:, :, 2],
        nn_only=nn_only,
    )
