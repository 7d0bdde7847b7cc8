"""Kernel backend selection: compiled Cython extension with NumPy fallback.

The compiled extension ``ionphonon._kernels`` is built at install time; when
it is missing (or ``IONPHONON_PURE=1`` is set) the pure-NumPy twin
``ionphonon._kernels_py`` is used instead.  Both expose the same three
functions with identical semantics:

    assemble_bloch_grid(blocks, rows, cols, disps, n_blocks, onsite, kpts,
                        derivs=False)
    eigh_grid(H)
    rk4_drive(energies, forces, omega_d, t_f, dt)

``benchmarks/bench_backends.py`` compares the two implementations.
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("IONPHONON_PURE", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

COMPILED: bool = bool(getattr(_impl, "COMPILED", False))
BACKEND_NAME: str = "compiled" if COMPILED else "pure"

assemble_bloch_grid = _impl.assemble_bloch_grid
eigh_grid = _impl.eigh_grid
rk4_drive = _impl.rk4_drive

# The pure implementation stays importable under a stable name so tests and
# benchmarks can compare backends directly.
pure = _kernels_py


def get_backends():
    """(name, module) pairs for every available backend."""
    out = [("pure", _kernels_py)]
    if COMPILED:
        out.insert(0, ("compiled", _impl))
    return out
