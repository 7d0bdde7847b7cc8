"""Pure-NumPy implementations of the hot kernels.

Mirror of the compiled extension ``ionphonon._kernels``; same signatures,
same results to rounding.  Selected at import by :mod:`ionphonon.backend`
when the extension is unavailable or disabled.
"""
from __future__ import annotations

import numpy as np

COMPILED = False


def assemble_bloch_grid(blocks, rows, cols, disps, n_blocks, onsite, kpts,
                        derivs=False):
    """Assemble H(k) = sum_p block_p exp(-i k . R_p) + onsite on a k grid.

    Parameters
    ----------
    blocks : (P, 2, 2) complex
        Prefactored 2x2 coupling blocks.
    rows, cols : (P,) int
        Block-row / block-column each entry adds to (0 .. n_blocks-1).
    disps : (P, 2) float
        Displacement vector of each entry (phase and derivative factor).
    onsite : (n_blocks, 2, 2) complex
        Added to the diagonal blocks of every H(k).
    kpts : (K, 2) float
    derivs : bool
        Also return analytic dH/dkx and dH/dky (factors -i R).

    Returns
    -------
    H : (K, 2 n_blocks, 2 n_blocks) complex
    dHx, dHy : same shape, only when ``derivs``.
    """
    kpts = np.atleast_2d(np.asarray(kpts, dtype=float))
    K = kpts.shape[0]
    dim = 2 * n_blocks
    H = np.zeros((K, dim, dim), dtype=np.complex128)
    dHx = np.zeros_like(H) if derivs else None
    dHy = np.zeros_like(H) if derivs else None

    phases = np.exp(-1j * (kpts @ disps.T))                     # (K, P)
    pair_key = rows.astype(np.int64) * n_blocks + cols
    for key in np.unique(pair_key):
        sel = pair_key == key
        r = int(key // n_blocks)
        c = int(key % n_blocks)
        blk = blocks[sel]
        ph = phases[:, sel]
        H[:, 2 * r:2 * r + 2, 2 * c:2 * c + 2] += np.einsum(
            "kp,pab->kab", ph, blk
        )
        if derivs:
            dHx[:, 2 * r:2 * r + 2, 2 * c:2 * c + 2] += np.einsum(
                "kp,p,pab->kab", ph, -1j * disps[sel, 0], blk
            )
            dHy[:, 2 * r:2 * r + 2, 2 * c:2 * c + 2] += np.einsum(
                "kp,p,pab->kab", ph, -1j * disps[sel, 1], blk
            )
    for b in range(n_blocks):
        H[:, 2 * b:2 * b + 2, 2 * b:2 * b + 2] += onsite[b]
    if derivs:
        return H, dHx, dHy
    return H


def eigh_grid(H):
    """Batched Hermitian eigendecomposition (ascending eigenvalues)."""
    return np.linalg.eigh(H)


def rk4_drive(energies, forces, omega_d, t_f, dt):
    """Integrate i dc_l/dt = E_l c_l + f_l cos(omega_d t), c(0) = 0.

    Classic fixed-step fourth-order Runge-Kutta; returns c(t_f).
    Raises FloatingPointError if the solution blows up (step too large).
    """
    E = np.asarray(energies, dtype=float)
    f = np.asarray(forces, dtype=np.complex128)
    n_steps = int(np.ceil(t_f / dt))
    h = t_f / n_steps
    c = np.zeros_like(f)
    cap = 1e12 * (1.0 + np.abs(f).max()) * max(t_f, 1.0)

    mE = -1j * E
    mf = -1j * f
    t = 0.0
    for _ in range(n_steps):
        k1 = mE * c + mf * np.cos(omega_d * t)
        k2 = mE * (c + 0.5 * h * k1) + mf * np.cos(omega_d * (t + 0.5 * h))
        k3 = mE * (c + 0.5 * h * k2) + mf * np.cos(omega_d * (t + 0.5 * h))
        k4 = mE * (c + h * k3) + mf * np.cos(omega_d * (t + h))
        c = c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
        if np.abs(c.real).max() > cap:
            raise FloatingPointError(
                "mode-amplitude integration diverged; reduce dt"
            )
    return c
