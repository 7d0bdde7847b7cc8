"""Edge-mode identification, localization measures, dispersion slopes, and
disorder-robustness experiments on cylinder and plane geometries.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericalError
from .hamiltonian import (
    DisorderSpec,
    ModelParams,
    apply_disorder,
    assemble_real_space,
)
from .lattice import CouplingMatrix, Geometry, Lattice, boundary_shell
from .spectra import (
    GROUPING_TOL,
    Bands,
    GapWindow,
    Spectrum,
    band_gaps,
    band_structure,
    eigensolve,
)

#: Fraction of the window width shaved off each side of a bulk gap.
GAP_MARGIN = 0.02

DEFAULT_SHELL_WIDTH = 2
DEFAULT_THRESHOLD = 0.5


def bulk_gap_windows(
    p: ModelParams,
    u: CouplingMatrix,
    grid_n: int = 40,
    margin: float = GAP_MARGIN,
    grouping_tol: float = GROUPING_TOL,
) -> list[tuple[float, float]]:
    """Open bulk gap windows of the torus band structure, margin-shrunk.

    ``u`` must be built on a torus lattice; each open window is narrowed by
    ``margin`` times its width on both sides to keep finite-size band tails
    out of the in-gap classification.
    """
    lat = u.lattice
    if lat.geometry is not Geometry.TORUS:
        raise NumericalError("bulk gap windows require a torus coupling matrix")
    bands = band_structure(lat, p, u, grid_n=grid_n, grouping_tol=grouping_tol)
    out = []
    for w in band_gaps(bands):
        if w.is_open:
            pad = margin * w.width
            out.append((w.low + pad, w.high - pad))
    return out


@dataclass
class EdgeMode:
    mode_index: int
    energy: float
    edge_weight: float
    side: str              # "top" | "bottom" | "mixed" | "perimeter"


@dataclass
class EdgeModeSet:
    gap_window: tuple[float, float]
    shell_width: int
    threshold: float
    modes: list[EdgeMode]
    in_gap_count: int      # all in-window modes, edge-localized or not

    def to_csv_rows(self, window_id: int):
        for m in self.modes:
            yield [window_id, m.mode_index, f"{m.energy:.12g}",
                   f"{m.edge_weight:.12g}", m.side]


def _shell_flat_indices(lat: Lattice, spec: Spectrum, shell_width: int):
    """Flat (site, direction) indices of the boundary shell, and y positions.

    Handles both full real-space spectra and mixed cylinder spectra (modes
    on the reference strip).
    """
    shell_sites = boundary_shell(lat, shell_width)
    if spec.dim == 2 * lat.n_sites:
        sites = np.arange(lat.n_sites)
        shell = shell_sites
    elif spec.dim == 4 * lat.n2:
        strip = lat.strip_indices(0)
        shell = np.nonzero(np.isin(strip, shell_sites))[0]
        sites = strip
    else:
        raise NumericalError(
            f"spectrum dimension {spec.dim} does not match the lattice"
        )
    flat = np.concatenate([2 * shell, 2 * shell + 1])
    return flat, lat.positions[sites][:, 1]


def find_edge_modes(
    spec: Spectrum,
    windows: list[tuple[float, float]],
    shell_width: int = DEFAULT_SHELL_WIDTH,
    threshold: float = DEFAULT_THRESHOLD,
) -> list[EdgeModeSet]:
    """Select in-gap modes whose boundary-shell weight reaches the threshold.

    The edge weight of mode l is sum over shell sites i (both directions) of
    |u^l_{i,alpha}|^2; it is invariant under the mode's global phase.
    """
    lat = spec.lattice
    if lat is None:
        raise NumericalError("spectrum carries no lattice reference")
    flat, ys = _shell_flat_indices(lat, spec, shell_width)
    weights = (np.abs(spec.modes[flat, :]) ** 2).sum(axis=0)

    y_mid = 0.5 * (ys.min() + ys.max())
    # per-site densities, used for side classification
    dens = (np.abs(spec.modes[0::2, :]) ** 2 + np.abs(spec.modes[1::2, :]) ** 2)

    out = []
    for lo, hi in windows:
        idx = np.nonzero((spec.energies > lo) & (spec.energies < hi))[0]
        modes = []
        for l in idx:
            if weights[l] < threshold:
                continue
            if lat.geometry is Geometry.PLANE:
                side = "perimeter"
            else:
                top = float(dens[ys > y_mid, l].sum())
                bot = float(dens[ys < y_mid, l].sum())
                if top > 0.7:
                    side = "top"
                elif bot > 0.7:
                    side = "bottom"
                else:
                    side = "mixed"
            modes.append(EdgeMode(
                mode_index=int(l),
                energy=float(spec.energies[l]),
                edge_weight=float(weights[l]),
                side=side,
            ))
        out.append(EdgeModeSet(
            gap_window=(float(lo), float(hi)),
            shell_width=shell_width,
            threshold=threshold,
            modes=modes,
            in_gap_count=int(len(idx)),
        ))
    return out


@dataclass
class LocalizationProfile:
    mode_index: int
    energy: float
    positions: np.ndarray    # (N, 2)
    dens_x: np.ndarray
    dens_y: np.ndarray
    is_boundary: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["site_index", "x", "y", "dens_x", "dens_y"])
            for i in range(len(self.dens_x)):
                wr.writerow([
                    i, f"{self.positions[i, 0]:.12g}",
                    f"{self.positions[i, 1]:.12g}",
                    f"{self.dens_x[i]:.12g}", f"{self.dens_y[i]:.12g}",
                ])


def localization_profile(spec: Spectrum, mode_index: int) -> LocalizationProfile:
    """Per-site |u_{i,x}|^2 and |u_{i,y}|^2 of one mode, with positions."""
    lat = spec.lattice
    if not 0 <= mode_index < spec.dim:
        raise ValueError(f"mode index {mode_index} out of range")
    v = spec.modes[:, mode_index]
    dens_x = np.abs(v[0::2]) ** 2
    dens_y = np.abs(v[1::2]) ** 2
    if spec.dim == 2 * lat.n_sites:
        pos = lat.positions
        bnd = lat.is_boundary
    else:
        strip = lat.strip_indices(0)
        pos = lat.positions[strip]
        bnd = lat.is_boundary[strip]
    return LocalizationProfile(
        mode_index=mode_index,
        energy=float(spec.energies[mode_index]),
        positions=pos,
        dens_x=dens_x,
        dens_y=dens_y,
        is_boundary=bnd,
    )


@dataclass
class BranchCrossing:
    """One in-gap branch crossing the center of a gap window."""

    k_x: float
    energy: float
    slope: float
    band_index: int


def edge_velocity(
    bands: Bands, window: tuple[float, float]
) -> list[BranchCrossing]:
    """Finite-difference slopes of in-gap branches at the window center.

    Every edge branch traverses the gap, so its crossings of the center
    energy enumerate the branches; opposite slope signs identify
    counter-propagating pairs.  Raises when no branch crosses the window.
    """
    if bands.geometry is not Geometry.CYLINDER:
        raise NumericalError("edge velocities require cylinder bands")
    lo, hi = window
    center = 0.5 * (lo + hi)
    kx = np.asarray(bands.k_points, dtype=float)
    period = kx[1] - kx[0] if len(kx) > 1 else 0.0
    out = []
    for s in range(bands.n_bands):
        E = bands.energies[:, s]
        Ew = np.append(E, E[0])
        kw = np.append(kx, kx[-1] + period)
        for i in range(len(kx)):
            e0, e1 = Ew[i] - center, Ew[i + 1] - center
            if e0 == 0.0 or e0 * e1 >= 0:
                continue
            if not (lo < Ew[i] < hi and lo < Ew[i + 1] < hi):
                continue
            slope = (Ew[i + 1] - Ew[i]) / (kw[i + 1] - kw[i])
            out.append(BranchCrossing(
                k_x=float(0.5 * (kw[i] + kw[i + 1])),
                energy=float(0.5 * (Ew[i] + Ew[i + 1])),
                slope=float(slope),
                band_index=s,
            ))
    if not out:
        raise NumericalError("no in-gap branch crosses the window center")
    return out


def counter_propagating_pairs(crossings: list[BranchCrossing]) -> int:
    pos = sum(1 for c in crossings if c.slope > 0)
    neg = sum(1 for c in crossings if c.slope < 0)
    return min(pos, neg)


@dataclass
class TrialResult:
    seed: int
    in_gap_count: int
    edge_mode_count: int
    max_edge_weight: float


@dataclass
class RobustnessReport:
    trials: int
    per_trial: list[TrialResult]
    persistence_rate: float
    windows: list[tuple[float, float]]
    shell_width: int
    threshold: float

    def to_json(self) -> str:
        return json.dumps({
            "trials": self.trials,
            "persistence_rate": self.persistence_rate,
            "windows": [list(w) for w in self.windows],
            "shell_width": self.shell_width,
            "threshold": self.threshold,
            "per_trial": [
                {
                    "seed": t.seed,
                    "in_gap_count": t.in_gap_count,
                    "edge_mode_count": t.edge_mode_count,
                    "max_edge_weight": t.max_edge_weight,
                }
                for t in self.per_trial
            ],
        }, indent=1)


def disorder_robustness(
    p: ModelParams,
    u: CouplingMatrix,
    spec: DisorderSpec,
    trials: int,
    windows: list[tuple[float, float]],
    shell_width: int = DEFAULT_SHELL_WIDTH,
    threshold: float = DEFAULT_THRESHOLD,
    threads: int = 1,
) -> RobustnessReport:
    """Seeded disorder trials on the plane; counts surviving in-gap edge modes.

    Trial t uses seed ``spec.seed + t``; trials are independent and
    reproducible, so they may run in parallel with deterministic aggregation.
    """
    lat = u.lattice
    if lat.geometry is not Geometry.PLANE:
        raise NumericalError("disorder robustness runs on the plane geometry")
    clean = assemble_real_space(lat, p, u)

    def one(t: int) -> TrialResult:
        sp = replace(spec, seed=spec.seed + t)
        spectrum = eigensolve(apply_disorder(clean, sp, p))
        sets = find_edge_modes(spectrum, windows, shell_width, threshold)
        all_weights = [m.edge_weight for s in sets for m in s.modes]
        return TrialResult(
            seed=sp.seed,
            in_gap_count=sum(s.in_gap_count for s in sets),
            edge_mode_count=sum(len(s.modes) for s in sets),
            max_edge_weight=max(all_weights, default=0.0),
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_trial = list(pool.map(one, range(trials)))
    else:
        per_trial = [one(t) for t in range(trials)]

    surviving = sum(1 for t in per_trial if t.edge_mode_count > 0)
    return RobustnessReport(
        trials=trials,
        per_trial=per_trial,
        persistence_rate=surviving / trials if trials else 0.0,
        windows=[(float(a), float(b)) for a, b in windows],
        shell_width=shell_width,
        threshold=threshold,
    )
