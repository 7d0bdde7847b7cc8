"""Chern numbers of the phonon bands, by two independent methods.

Cumulative Chern numbers (occupied set = the lowest ``n_occ`` bands) are
computed (i) as a Riemann sum of the velocity-matrix-element curvature
formula with analytic k derivatives, and (ii) by the discrete link-variable
(plaquette field strength) method, which is integer by construction.  The
integer from (ii) is the reported value; the raw sum from (i) is the
convergence diagnostic.

Sign convention: curvature is oriented so that the lowest band carries
C = -1 for v_b < 0 (the convention in which the Berry connection is
``-i <u| d/dk |u>``).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import GapClosedError, RefineGridError
from .hamiltonian import ModelParams, bloch_matrices
from .lattice import CouplingMatrix, Lattice
from .spectra import GROUPING_TOL, band_structure, bz_grid

#: |raw sum - integer| accepted without grid refinement.
RESIDUAL_TARGET = 0.05

#: Smallest allowed direct spacing between occupied and empty sets.
DEGENERACY_TOL = 1e-6

#: Link overlaps with |det| below this trigger a refine-grid error.
SINGULAR_LINK_TOL = 1e-12

MAX_GRID = 160


def _bz_cell_area(lat: Lattice) -> float:
    B = lat.reciprocal_vectors
    return abs(B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0])


def chern_tknn(
    lat: Lattice,
    p: ModelParams,
    u: CouplingMatrix,
    n_occ: int,
    grid_n: int = 40,
    offset: float = 0.5,
) -> float:
    """Raw cumulative Chern number of the lowest ``n_occ`` bands.

    Riemann sum over a ``grid_n x grid_n`` BZ grid of
    Im <o|dH/dkx|e><e|dH/dky|o> / (E_o - E_e)^2 summed over occupied o and
    empty e, with analytic derivative matrices.  Raises
    :class:`GapClosedError` when the occupied/empty sets touch on the grid.
    """
    vals = _tknn_raw(lat, p, u, [n_occ], grid_n, offset)
    return vals[0]


def _tknn_raw(lat, p, u, n_occ_list, grid_n, offset=0.5) -> list[float]:
    _, kpts = bz_grid(lat, grid_n, offset)
    H, dHx, dHy = bloch_matrices(lat, p, u, kpts, derivs=True)
    w, v = backend.eigh_grid(H)
    dA = _bz_cell_area(lat) / grid_n**2
    out = []
    for n_occ in n_occ_list:
        if not 1 <= n_occ < w.shape[1]:
            raise ValueError(f"n_occ must be in [1, {w.shape[1] - 1}]")
        spacing = float((w[:, n_occ] - w[:, n_occ - 1]).min())
        if spacing < DEGENERACY_TOL:
            raise GapClosedError(
                f"gap above band {n_occ} closes on the grid "
                f"(min spacing {spacing:.2e})"
            )
        vo = v[:, :, :n_occ]
        ve = v[:, :, n_occ:]
        X = np.einsum("kim,kij,kjn->kmn", vo.conj(), dHx, ve)
        Y = np.einsum("kim,kij,kjn->kmn", ve.conj(), dHy, vo)
        dE = w[:, :n_occ, None] - w[:, None, n_occ:]
        total = float(np.imag(np.einsum("kmn,knm->", X / dE**2, Y)))
        out.append(-total * dA / np.pi)
    return out


def chern_fhs(
    lat: Lattice,
    p: ModelParams,
    u: CouplingMatrix,
    n_occ: int,
    grid_n: int = 40,
) -> int:
    """Integer cumulative Chern number from link-variable field strengths.

    Eigenvectors are evaluated on the closed ``(grid_n + 1)^2`` grid
    including the zone edge; each plaquette's field strength is the phase of
    the product of the four occupied-set overlap determinants, which makes
    the total manifestly integer.
    """
    B = lat.reciprocal_vectors
    ij = np.indices((grid_n + 1, grid_n + 1)).reshape(2, -1).T
    kpts = (ij / grid_n) @ B
    H = bloch_matrices(lat, p, u, kpts)
    w, v = backend.eigh_grid(H)
    spacing = float((w[:, n_occ] - w[:, n_occ - 1]).min())
    if spacing < DEGENERACY_TOL:
        raise GapClosedError(
            f"gap above band {n_occ} closes on the grid (min {spacing:.2e})"
        )
    V = v[:, :, :n_occ].reshape(grid_n + 1, grid_n + 1, v.shape[1], n_occ)

    def link(Pa, Pb):
        d = np.linalg.det(np.einsum("xyim,xyin->xymn", Pa.conj(), Pb))
        if np.abs(d).min() < SINGULAR_LINK_TOL:
            raise RefineGridError(
                "singular link overlap; refine the BZ grid"
            )
        return d

    u1 = link(V[:-1, :-1], V[1:, :-1])
    u2 = link(V[1:, :-1], V[1:, 1:])
    u3 = link(V[1:, 1:], V[:-1, 1:])
    u4 = link(V[:-1, 1:], V[:-1, :-1])
    total = float(np.angle(u1 * u2 * u3 * u4).sum()) / (2.0 * np.pi)
    c = -total
    if abs(c - round(c)) > 0.1:
        raise RefineGridError(
            f"plaquette sum {c:.4f} is not integer-like; refine the grid"
        )
    return int(round(c))


@dataclass
class ChernResult:
    """Per-group Chern numbers with convergence diagnostics.

    Band groups are the indirect-gap groups of the torus band structure;
    gaps that close merge their neighbors into one group, so every group
    boundary in this result is an open gap.
    """

    grid_n: int
    groups: list[tuple[int, int]]
    cumulative_raw: list[float]      # TKNN sums, one per group boundary
    cumulative_int: list[int]        # link-variable integers
    per_group: list[int]
    residuals: list[float]
    method_agreement: bool

    def to_json(self, params: ModelParams | None = None) -> str:
        doc = {
            "grid_n": self.grid_n,
            "groups": [list(g) for g in self.groups],
            "cumulative_raw": self.cumulative_raw,
            "per_group": self.per_group,
            "residuals": self.residuals,
            "method_agreement": self.method_agreement,
        }
        if params is not None:
            doc["params"] = {
                "beta_x": params.beta_x,
                "v_b": params.v_b,
                "gamma_y": params.gamma_y,
            }
        return json.dumps(doc, indent=1)


def band_chern_numbers(
    lat: Lattice,
    p: ModelParams,
    u: CouplingMatrix,
    grid_n: int = 40,
    grouping_tol: float = GROUPING_TOL,
) -> ChernResult:
    """Chern number of every band group, cross-checked between both methods.

    Per-group values are differences of consecutive link-variable integers
    (rounding applied after differencing the raw sums would give the same
    integers whenever ``method_agreement`` holds).  The BZ grid is refined
    x2 (up to ``MAX_GRID``) until every raw TKNN sum is within
    ``RESIDUAL_TARGET`` of its integer.
    """
    bands = band_structure(lat, p, u, grid_n=grid_n, grouping_tol=grouping_tol)
    groups = bands.band_groups
    boundaries = [hi + 1 for _, hi in groups[:-1]]

    n = grid_n
    while True:
        raw = _tknn_raw(lat, p, u, boundaries, n)
        ints = [chern_fhs(lat, p, u, b, n) for b in boundaries]
        residuals = [abs(r - i) for r, i in zip(raw, ints)]
        if all(res < RESIDUAL_TARGET for res in residuals) or n >= MAX_GRID:
            break
        n *= 2

    per_group = []
    prev = 0
    for c in ints:
        per_group.append(c - prev)
        prev = c
    per_group.append(-prev)          # total curvature of the full set is zero

    agreement = all(round(r) == i for r, i in zip(raw, ints))
    return ChernResult(
        grid_n=n,
        groups=groups,
        cumulative_raw=raw,
        cumulative_int=ints,
        per_group=per_group,
        residuals=residuals,
        method_agreement=agreement,
    )
