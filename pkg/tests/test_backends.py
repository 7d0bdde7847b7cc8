"""Compiled-kernel vs pure-NumPy backend equivalence."""
import numpy as np
import pytest

import ionphonon as ip
from ionphonon import backend
from ionphonon import _kernels_py as pure
from ionphonon.hamiltonian import _bloch_tables

compiled = pytest.importorskip(
    "ionphonon._kernels", reason="compiled kernels not built"
)


@pytest.fixture(scope="module")
def kernel_inputs(rng_seed=7):
    rng = np.random.default_rng(rng_seed)
    lat = ip.build_lattice("torus", 1, 1)
    u = ip.coulomb_coupling(lat, 8.0)
    p = ip.ModelParams(0.03, -0.15)
    blocks, rows, cols, disps, onsite = _bloch_tables(lat, p, u, False)
    kpts = rng.uniform(-4, 4, size=(37, 2))
    return blocks, rows, cols, disps, onsite, kpts


def test_assemble_equivalence(kernel_inputs):
    blocks, rows, cols, disps, onsite, kpts = kernel_inputs
    a = compiled.assemble_bloch_grid(blocks, rows, cols, disps, 2, onsite, kpts)
    b = pure.assemble_bloch_grid(blocks, rows, cols, disps, 2, onsite, kpts)
    np.testing.assert_allclose(a, b, atol=1e-13)


def test_assemble_derivs_equivalence(kernel_inputs):
    blocks, rows, cols, disps, onsite, kpts = kernel_inputs
    a = compiled.assemble_bloch_grid(blocks, rows, cols, disps, 2, onsite,
                                     kpts, derivs=True)
    b = pure.assemble_bloch_grid(blocks, rows, cols, disps, 2, onsite,
                                 kpts, derivs=True)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, atol=1e-13)


def test_eigh_equivalence(kernel_inputs):
    blocks, rows, cols, disps, onsite, kpts = kernel_inputs
    H = pure.assemble_bloch_grid(blocks, rows, cols, disps, 2, onsite, kpts)
    wa, va = compiled.eigh_grid(H)
    wb, vb = pure.eigh_grid(H)
    np.testing.assert_allclose(wa, wb, atol=1e-12)
    # eigenvector gauge may differ between LAPACK drivers: compare projectors
    pa = np.einsum("kim,kjm->kij", va, va.conj())
    pb = np.einsum("kim,kjm->kij", vb, vb.conj())
    np.testing.assert_allclose(pa, pb, atol=1e-12)
    # residuals of the compiled eigenvectors
    res = np.einsum("kij,kjm->kim", H, va) - va * wa[:, None, :]
    assert np.abs(res).max() < 1e-12


def test_eigh_larger_matrices(rng):
    A = rng.normal(size=(5, 24, 24)) + 1j * rng.normal(size=(5, 24, 24))
    H = A + np.conj(np.transpose(A, (0, 2, 1)))
    wa, va = compiled.eigh_grid(H)
    wb, _ = pure.eigh_grid(H)
    np.testing.assert_allclose(wa, wb, atol=1e-11)
    res = np.einsum("kij,kjm->kim", H, va) - va * wa[:, None, :]
    assert np.abs(res).max() < 1e-10


def test_rk4_equivalence(rng):
    E = rng.uniform(0.5, 1.5, size=40)
    f = rng.normal(size=40) + 1j * rng.normal(size=40)
    a = compiled.rk4_drive(E, f, 0.9, 50.0, 1e-3)
    b = pure.rk4_drive(E, f, 0.9, 50.0, 1e-3)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_rk4_divergence_guard():
    # absurd step size on a stiff phase triggers the blow-up detector in the
    # pure path; compiled path must behave identically
    E = np.array([1e6])
    f = np.array([1.0 + 0j])
    for impl in (compiled, pure):
        with pytest.raises(FloatingPointError):
            impl.rk4_drive(E, f, 1.0, 1000.0, 0.5)


def test_backend_selection_env(monkeypatch):
    import importlib

    import ionphonon.backend as bk

    monkeypatch.setenv("IONPHONON_PURE", "1")
    importlib.reload(bk)
    assert bk.BACKEND_NAME == "pure"
    monkeypatch.delenv("IONPHONON_PURE")
    importlib.reload(bk)
    assert bk.BACKEND_NAME == "compiled"
