"""Phonon Hamiltonian assembly in real-space, Bloch and mixed cylinder form,
the physical-to-dimensionless parameter mapping, and site-resolved disorder.

All assembled matrices are in units of the renormalized trap frequency
``omega_tilde_x`` and use the flat index ``2 * site + direction`` with
direction 0 = x, 1 = y (for Bloch matrices, ``2 * sublattice + direction``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import constants as _const

from . import backend
from .errors import NumericalError
from .lattice import CouplingMatrix, Geometry, Lattice

HERMITICITY_TOL = 1e-12


@dataclass
class ModelParams:
    """Dimensionless parameters of the quadratic phonon model.

    beta_x : Coulomb stiffness ratio e^2 / (M omega_tilde_x^2 d^3).
    v_b : time-reversal-breaking on-site x-y coupling, units of omega_tilde_x.
    gamma_y : frequency anisotropy sqrt(omega_tilde_y / omega_tilde_x).
    """

    beta_x: float
    v_b: float
    gamma_y: float = 1.0

    def __post_init__(self):
        if self.beta_x < 0:
            raise ValueError(f"beta_x must be >= 0, got {self.beta_x}")
        if self.gamma_y <= 0:
            raise ValueError(f"gamma_y must be > 0, got {self.gamma_y}")
        if abs(self.v_b) >= self.gamma_y**2:
            warnings.warn(
                "on-site block eigenvalue approaches 0 for "
                f"|v_b| = {abs(self.v_b)} >= gamma_y^2 = {self.gamma_y**2}",
                stacklevel=2,
            )

    @property
    def gammas(self) -> np.ndarray:
        return np.array([1.0, self.gamma_y])

    def onsite_block(self) -> np.ndarray:
        return np.array(
            [[1.0, -1j * self.v_b], [1j * self.v_b, self.gamma_y**2]],
            dtype=np.complex128,
        )


@dataclass
class PhysicalParams:
    """Laser and trap parameters in SI units (angular frequencies, rad/s)."""

    mass: float            # ion mass, kg
    omega_x: float         # bare trap frequency along x
    omega_y: float
    rabi_x: float          # effective Rabi frequency Omega_x
    rabi_y: float          # effective Rabi frequency Omega_y
    wavevector: float      # K, twice the laser wavevector, 1/m
    spacing: float         # lattice constant d, m

    def __post_init__(self):
        for name in ("mass", "omega_x", "omega_y", "spacing"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        for om in (self.omega_x, self.omega_y):
            if abs(self.rabi_y - om) < 1e-12 * max(abs(self.rabi_y), om):
                raise ValueError(
                    "rabi_y coincides with a trap frequency (resonant denominator)"
                )


@dataclass
class DerivedParams:
    """Renormalized frequencies and coupling from the adiabatic elimination."""

    lambda_x: float
    lambda_y: float
    omega_tilde_x: float   # rad/s
    omega_tilde_y: float   # rad/s
    omega_coupling: float  # position-momentum coupling Omega, rad/s
    eta_x: float
    eta_y: float
    adiabatic_ok: bool     # |rabi_y +- omega_alpha| >= 10 x coupling scales
    stiff_ok: bool         # beta_x < 0.3
    lamb_dicke_ok: bool    # eta <= 1


@dataclass
class DisorderSpec:
    """Per-site disorder description.

    mode "draw": the local |V_b| and on-site frequency factor are drawn
    uniformly from the given intervals (intervals centered on the nominal
    values reproduce the robustness protocol).  mode "add": draws are added
    to the nominal values instead (the literal reading).
    """

    v_b_interval: tuple[float, float]
    omega_interval: tuple[float, float]
    mode: str = "draw"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("draw", "add"):
            raise ValueError(f"mode must be 'draw' or 'add', got {self.mode!r}")
        for name, (lo, hi) in (("v_b_interval", self.v_b_interval),
                               ("omega_interval", self.omega_interval)):
            if lo > hi:
                raise ValueError(f"{name} has low > high: ({lo}, {hi})")


@dataclass
class HamiltonianMatrix:
    """A Hermitian phonon Hamiltonian in one of the three representations."""

    matrix: np.ndarray
    representation: str                 # "real_space" | "cylinder" | "bloch"
    lattice: Lattice
    params: ModelParams
    coupling: CouplingMatrix | None = None
    k: tuple[float, float] | float | None = None
    include_onsite_coulomb: bool = False
    dkx: np.ndarray | None = field(default=None, repr=False)
    dky: np.ndarray | None = field(default=None, repr=False)
    site_factors: np.ndarray | None = None   # disorder s_i, None when clean

    def __post_init__(self):
        m = self.matrix
        scale = max(1.0, float(np.abs(m).max()))
        dev = float(np.abs(m - m.conj().T).max())
        if dev > HERMITICITY_TOL * scale:
            raise NumericalError(
                f"assembled matrix is not hermitian (deviation {dev:.3e})"
            )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _coulomb_prefactor(p: ModelParams) -> np.ndarray:
    g = p.gammas
    return p.beta_x / (2.0 * np.outer(g, g))


def assemble_real_space(
    lat: Lattice,
    p: ModelParams,
    u: CouplingMatrix,
    include_onsite_coulomb: bool = False,
) -> HamiltonianMatrix:
    """Assemble the full real-space Hamiltonian (units of omega_tilde_x)."""
    if u.lattice is not lat and u.lattice.n_sites != lat.n_sites:
        raise NumericalError("coupling matrix does not match the lattice")
    N = lat.n_sites
    pref = _coulomb_prefactor(p)
    blocks = u.dense_blocks() * pref[None, None, :, :]
    H = blocks.transpose(0, 2, 1, 3).reshape(2 * N, 2 * N).astype(np.complex128)
    ons = p.onsite_block()
    for i in range(N):
        H[2 * i:2 * i + 2, 2 * i:2 * i + 2] += ons
        if include_onsite_coulomb:
            H[2 * i:2 * i + 2, 2 * i:2 * i + 2] += pref * u.onsite_blocks[i]
    return HamiltonianMatrix(
        matrix=H,
        representation="real_space",
        lattice=lat,
        params=p,
        coupling=u,
        include_onsite_coulomb=include_onsite_coulomb,
    )


def _bloch_tables(lat: Lattice, p: ModelParams, u: CouplingMatrix,
                  include_onsite_coulomb: bool):
    """Kernel inputs for the 4x4 Bloch Hamiltonian (reference cell (0, 0))."""
    ref = np.array([lat.site_index(0, 0, 0), lat.site_index(0, 0, 1)])
    ii, jj, disps, blocks = u.reference_table(ref)
    rows = lat.sublattices[ii]
    cols = lat.sublattices[jj]
    pref = _coulomb_prefactor(p)
    cblocks = (blocks * pref[None, :, :]).astype(np.complex128)
    onsite = np.stack([p.onsite_block(), p.onsite_block()])
    if include_onsite_coulomb:
        onsite = onsite + pref[None, :, :] * u.onsite_blocks[ref]
    return cblocks, rows.astype(np.int64), cols.astype(np.int64), disps, onsite


def bloch_matrices(
    lat: Lattice,
    p: ModelParams,
    u: CouplingMatrix,
    kpts: np.ndarray,
    derivs: bool = False,
    include_onsite_coulomb: bool = False,
):
    """Batched 4x4 Bloch Hamiltonians H(k) over a set of k points.

    Phases use full site positions (atomic gauge); derivatives are analytic,
    obtained by inserting -i R factors.
    """
    if lat.geometry is not Geometry.TORUS:
        raise NumericalError("Bloch form requires a torus lattice")
    blocks, rows, cols, disps, onsite = _bloch_tables(
        lat, p, u, include_onsite_coulomb
    )
    return backend.assemble_bloch_grid(
        blocks, rows, cols, disps, 2, onsite, kpts, derivs=derivs
    )


def bloch_hamiltonian(
    lat: Lattice,
    p: ModelParams,
    u: CouplingMatrix,
    k: np.ndarray,
    include_onsite_coulomb: bool = False,
) -> HamiltonianMatrix:
    """4x4 Bloch Hamiltonian at one quasimomentum, with analytic k gradients."""
    k = np.asarray(k, dtype=float)
    H, dHx, dHy = bloch_matrices(
        lat, p, u, k[None, :], derivs=True,
        include_onsite_coulomb=include_onsite_coulomb,
    )
    return HamiltonianMatrix(
        matrix=H[0],
        representation="bloch",
        lattice=lat,
        params=p,
        coupling=u,
        k=(float(k[0]), float(k[1])),
        include_onsite_coulomb=include_onsite_coulomb,
        dkx=dHx[0],
        dky=dHy[0],
    )


def allowed_kx(lat: Lattice) -> np.ndarray:
    """Quasimomenta along the periodic direction compatible with the lattice."""
    a1x = lat.bravais_vectors[0, 0]
    return 2.0 * np.pi * np.arange(lat.n1) / (lat.n1 * a1x)


def _cylinder_tables(lat: Lattice, p: ModelParams, u: CouplingMatrix,
                     include_onsite_coulomb: bool):
    """Kernel inputs for the mixed representation (reference strip m = 0).

    On a torus (cylinder closed in direction 2) the phase displacement of a
    direction-2 image is reduced to the canonical one, so that the union of
    H(k_x) spectra over the allowed k_x reproduces the real-space spectrum.
    """
    n_strip = 2 * lat.n2
    ref = lat.strip_indices(0)
    ii, jj, disps, blocks = u.reference_table(ref)
    rows = ii                       # strip 0 sites are indices 0 .. n_strip-1
    cols = jj % n_strip             # (m, n, s) -> 2 n + s
    if lat.geometry is Geometry.TORUS:
        T2 = lat.n2 * lat.bravais_vectors[1]
        base_y = lat.positions[jj, 1] - lat.positions[ii, 1]
        q2 = np.rint((disps[:, 1] - base_y) / T2[1])
        disps = disps - q2[:, None] * T2[None, :]
    pref = _coulomb_prefactor(p)
    cblocks = (blocks * pref[None, :, :]).astype(np.complex128)
    onsite = np.broadcast_to(
        p.onsite_block(), (n_strip, 2, 2)
    ).copy()
    if include_onsite_coulomb:
        onsite = onsite + pref[None, :, :] * u.onsite_blocks[ref]
    return cblocks, rows.astype(np.int64), cols.astype(np.int64), disps, onsite


def cylinder_matrices(
    lat: Lattice,
    p: ModelParams,
    u: CouplingMatrix,
    kxs: np.ndarray,
    include_onsite_coulomb: bool = False,
):
    """Mixed-representation Hamiltonians H(k_x), batched over k_x values.

    Valid for any lattice periodic along direction 1 (cylinder, or a torus
    closed into a cylinder for cross-checks).
    """
    if lat.geometry is Geometry.PLANE:
        raise NumericalError("mixed representation requires periodicity along x")
    kxs = np.atleast_1d(np.asarray(kxs, dtype=float))
    blocks, rows, cols, disps, onsite = _cylinder_tables(
        lat, p, u, include_onsite_coulomb
    )
    kpts = np.stack([kxs, np.zeros_like(kxs)], axis=1)
    return backend.assemble_bloch_grid(
        blocks, rows, cols, disps, 2 * lat.n2, onsite, kpts, derivs=False
    )


def cylinder_hamiltonian(
    lat: Lattice,
    p: ModelParams,
    u: CouplingMatrix,
    kx: float,
    include_onsite_coulomb: bool = False,
) -> HamiltonianMatrix:
    """Mixed-representation Hamiltonian at one k_x.

    Off-grid k_x values are accepted (useful for dispersion plots) but
    produce a warning, since only ``allowed_kx`` values correspond to the
    finite cylinder.
    """
    grid = allowed_kx(lat)
    period = grid[1] - grid[0] if len(grid) > 1 else 2 * np.pi
    if np.min(np.abs((kx - grid + period / 2) % period - period / 2)) > 1e-9:
        warnings.warn(f"k_x = {kx} is not on the allowed grid", stacklevel=2)
    H = cylinder_matrices(
        lat, p, u, np.array([kx]),
        include_onsite_coulomb=include_onsite_coulomb,
    )
    return HamiltonianMatrix(
        matrix=H[0],
        representation="cylinder",
        lattice=lat,
        params=p,
        coupling=u,
        k=float(kx),
        include_onsite_coulomb=include_onsite_coulomb,
    )


# --- physical parameter mapping -------------------------------------------

_E2_GAUSS = _const.e**2 / (4.0 * math.pi * _const.epsilon_0)   # J m


def map_physical_params(pp: PhysicalParams) -> tuple[DerivedParams, ModelParams]:
    """Map laser/trap parameters onto (DerivedParams, ModelParams).

    Implements the closed-form renormalization of the adiabatic elimination:
    lambda_x = sqrt(1 - 2 hbar Omega_y Omega_x^2 K^2 / (M omega_x^2 (Omega_y^2 - omega_x^2))),
    lambda_y = 1 - hbar Omega_y K^2 / (2 M (Omega_y^2 - omega_y^2)),
    omega_tilde_x = lambda_x omega_x, omega_tilde_y = omega_y / sqrt(lambda_y),
    Omega = -sum_alpha hbar Omega_x Omega_y K^2 / (2 M (Omega_y^2 - omega_alpha^2)).
    """
    hbar = _const.hbar
    M, K = pp.mass, pp.wavevector
    wx, wy, Ox, Oy = pp.omega_x, pp.omega_y, pp.rabi_x, pp.rabi_y

    eta_x = K * math.sqrt(hbar / (2.0 * M * wx))
    eta_y = K * math.sqrt(hbar / (2.0 * M * wy))

    lam_x_sq = 1.0 - 2.0 * hbar * Oy * Ox**2 * K**2 / (M * wx**2 * (Oy**2 - wx**2))
    if lam_x_sq <= 0:
        raise NumericalError(
            f"laser parameters destabilize the x trap (lambda_x^2 = {lam_x_sq:.3e})"
        )
    lam_x = math.sqrt(lam_x_sq)
    lam_y = 1.0 - hbar * Oy * K**2 / (2.0 * M * (Oy**2 - wy**2))
    if lam_y <= 0:
        raise NumericalError(f"lambda_y = {lam_y:.3e} <= 0: y trap destabilized")

    wtx = lam_x * wx
    wty = wy / math.sqrt(lam_y)
    Om = -sum(
        hbar * Ox * Oy * K**2 / (2.0 * M * (Oy**2 - w**2)) for w in (wx, wy)
    )

    gamma_y = math.sqrt(wty / wtx)
    v_b = Om * gamma_y / (2.0 * wtx)
    beta_x = _E2_GAUSS / (M * wtx**2 * pp.spacing**3)

    coupling_scale = max(Ox * eta_x, wy * eta_y)
    adiabatic = all(
        abs(Oy + sgn * w) >= 10.0 * coupling_scale
        for w in (wx, wy) for sgn in (+1, -1)
    )
    derived = DerivedParams(
        lambda_x=lam_x,
        lambda_y=lam_y,
        omega_tilde_x=wtx,
        omega_tilde_y=wty,
        omega_coupling=Om,
        eta_x=eta_x,
        eta_y=eta_y,
        adiabatic_ok=adiabatic,
        stiff_ok=beta_x < 0.3,
        lamb_dicke_ok=max(eta_x, eta_y) <= 1.0,
    )
    return derived, ModelParams(beta_x=beta_x, v_b=v_b, gamma_y=gamma_y)


@dataclass
class InteractionResult:
    u_int: float
    bandwidth: float | None = None
    gap: float | None = None

    @property
    def inside_window(self) -> bool | None:
        """Strong-correlation verdict: bandwidth < u_int < gap."""
        if self.bandwidth is None or self.gap is None:
            return None
        return self.bandwidth < self.u_int < self.gap


def interaction_strength(
    omega_int: float,
    eta_tilde: float,
    bandwidth: float | None = None,
    gap: float | None = None,
) -> InteractionResult:
    """On-site phonon-phonon interaction u_int = 2 omega_int eta_tilde^4.

    ``bandwidth`` and ``gap`` (same units as ``omega_int``) enable the
    strong-correlation window check.
    """
    if not 0.0 <= eta_tilde < 1.0:
        raise ValueError(f"eta_tilde must be in [0, 1), got {eta_tilde}")
    return InteractionResult(
        u_int=2.0 * omega_int * eta_tilde**4, bandwidth=bandwidth, gap=gap
    )


# --- disorder ---------------------------------------------------------------

def apply_disorder(
    h: HamiltonianMatrix, spec: DisorderSpec, base: ModelParams
) -> HamiltonianMatrix:
    """Re-assemble a real-space Hamiltonian with site-resolved disorder.

    Per site i a local |V_b| value ``v_i`` and an on-site frequency factor
    ``s_i`` are drawn (uniformly from the spec intervals; "add" mode offsets
    the nominal values instead).  On-site blocks become
    ``[[s_i, -i sgn v_i], [i sgn v_i, s_i gamma_y^2]]`` with sgn the sign of
    the base v_b, and every Coulomb block between i and j is scaled by
    ``1 / sqrt(s_i s_j)`` (the a-operator normalization r ~ (2 M omega)^{-1/2}).
    Deterministic for a given seed.
    """
    if h.representation != "real_space":
        raise NumericalError("disorder applies to real-space Hamiltonians")
    lat, u, p = h.lattice, h.coupling, h.params
    N = lat.n_sites
    rng = np.random.default_rng(spec.seed)
    v = rng.uniform(spec.v_b_interval[0], spec.v_b_interval[1], N)
    s = rng.uniform(spec.omega_interval[0], spec.omega_interval[1], N)
    if spec.mode == "add":
        v = abs(base.v_b) + v
        s = 1.0 + s
    if np.any(s <= 0):
        raise NumericalError("disorder draw produced a frequency factor <= 0")
    sgn = math.copysign(1.0, base.v_b) if base.v_b != 0 else 1.0

    pref = _coulomb_prefactor(base)
    blocks = u.dense_blocks() * pref[None, None, :, :]
    scale = 1.0 / np.sqrt(s[:, None] * s[None, :])
    blocks *= scale[:, :, None, None]
    H = blocks.transpose(0, 2, 1, 3).reshape(2 * N, 2 * N).astype(np.complex128)
    gam2 = base.gamma_y**2
    for i in range(N):
        ons = np.array(
            [[s[i], -1j * sgn * v[i]], [1j * sgn * v[i], s[i] * gam2]],
            dtype=np.complex128,
        )
        if h.include_onsite_coulomb:
            ons = ons + pref * u.onsite_blocks[i] / s[i]
        H[2 * i:2 * i + 2, 2 * i:2 * i + 2] += ons
    return HamiltonianMatrix(
        matrix=H,
        representation="real_space",
        lattice=lat,
        params=base,
        coupling=u,
        include_onsite_coulomb=h.include_onsite_coulomb,
        site_factors=s,
    )


def write_triplets(h: HamiltonianMatrix, path) -> None:
    """Dump nonzero entries as text rows ``row col re im`` (debug format)."""
    m = h.matrix
    rows, cols = np.nonzero(np.abs(m) > 0)
    with open(path, "w") as fh:
        fh.write(f"# dim {m.shape[0]} representation {h.representation}\n")
        for r, c in zip(rows, cols):
            z = m[r, c]
            fh.write(f"{r} {c} {z.real:.17g} {z.imag:.17g}\n")
