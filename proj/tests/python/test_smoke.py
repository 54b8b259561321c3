import json
import os
import subprocess

import numpy as np
import pytest

import epr_doubles as ed

SZ = np.diag([1.0, -1.0]).astype(complex)
SY = np.array([[0, -1j], [1j, 0]])
I2 = np.eye(2, dtype=complex)


def bell():
    return np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)


def test_modular_double_on_bell_pair():
    a = ed.MatrixAlgebra.left_factor(2, 2)
    dbl = ed.modular_double(np.kron(SZ, I2), a, bell())
    assert np.allclose(dbl, np.kron(I2, SZ), atol=1e-10)
    # The transpose rule: sigma_y maps to -sigma_y.
    assert np.allclose(ed.modular_double(np.kron(SY, I2), a, bell()), np.kron(I2, -SY), atol=1e-10)


def test_modular_data_fixes_the_vector():
    c = np.array([[0.8, 0.1], [0.2, 0.5]], dtype=complex)
    psi = c.reshape(-1) / np.linalg.norm(c)
    md = ed.modular_data(ed.MatrixAlgebra.left_factor(2, 2), psi)
    assert np.allclose(md["delta"] @ psi, psi, atol=1e-8)
    assert np.allclose(md["J"] @ psi.conj(), psi, atol=1e-8)


def test_doubles_algebra_for_schmidt_pair():
    psi = np.array([np.sqrt(0.7), 0, 0, np.sqrt(0.3)], dtype=complex)
    rho = np.outer(psi, psi.conj())
    alg, doubles, agree = ed.doubles_algebra(
        ed.MatrixAlgebra.left_factor(2, 2), ed.MatrixAlgebra.right_factor(2, 2), rho
    )
    assert agree
    assert alg.dimension == 2
    assert len(doubles) == 2
    blocks, _ = ed.block_decomposition(alg)
    assert sorted(blocks) == [(1, 2), (1, 2)]


def test_errors_surface_as_epr_error():
    with pytest.raises(ed.EprError):
        ed.modular_double(np.kron(SZ, I2), ed.MatrixAlgebra.left_factor(2, 2), np.array([1, 0, 0, 0], dtype=complex))
    with pytest.raises(ed.EprError):
        ed.Tolerance(rank_tol=-1.0)


def test_run_cli_in_process(tmp_path):
    out = tmp_path / "report.json"
    code = ed.run_cli(["scenario", "qubit-pairs", "--n", "1", "--output", str(out)])
    assert code == 0
    spec = json.loads(out.read_text())
    assert spec["dims"] == [2, 2]


def test_cli_binary_exit_codes(tmp_path):
    exe = os.environ.get("EPR_CLI")
    if not exe:
        pytest.skip("EPR_CLI not set")
    r = subprocess.run([exe, "schmidt", "--scenario", "no-such"], capture_output=True, text=True)
    assert r.returncode == 2
    report = json.loads(r.stdout)
    assert report["error"]["kind"] == "UnknownScenario"
