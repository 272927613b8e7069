import os
import subprocess
import sys

import numpy as np
import pytest

from lpdens import _kernels, polybasis

nb = _kernels.numba_impl
np_ = _kernels.numpy_impl
needs_numba = pytest.mark.skipif(nb is None, reason="numba not installed")


@pytest.fixture
def data(rng):
    U = rng.uniform(-0.7, 0.7, (3000, 2))
    inside = rng.random(3000) < 0.8
    exps = polybasis.enumerate(2, 5).exps
    return U, inside, exps


@needs_numba
class TestBackendsAgree:
    def test_monomials(self, data):
        U, _, exps = data
        np.testing.assert_allclose(nb.monomials(U, exps), np_.monomials(U, exps), rtol=1e-13, atol=1e-15)

    def test_kernel_terms(self, data, rng):
        U, inside, exps = data
        w = rng.standard_normal(len(exps))
        np.testing.assert_allclose(nb.kernel_terms(U, inside, 0.4, exps, w),
                                   np_.kernel_terms(U, inside, 0.4, exps, w), rtol=1e-12, atol=1e-12)

    def test_window_moments(self, data):
        U, inside, exps = data
        hs = np.linspace(0.05, 0.6, 12)
        np.testing.assert_allclose(nb.window_moments(U, inside, hs, exps),
                                   np_.window_moments(U, inside, hs, exps), rtol=1e-11, atol=1e-9)

    def test_jacobi(self, rng):
        A = rng.standard_normal((15, 15))
        A = A @ A.T
        e1, s1 = nb.jacobi_eigenvalues(A, 100)
        e2, s2 = np_.jacobi_eigenvalues(A, 100)
        assert s1 > 0 and s2 > 0
        np.testing.assert_allclose(np.sort(e1), np.sort(e2), rtol=1e-10)
        np.testing.assert_allclose(np.sort(e1), np.linalg.eigvalsh(A), rtol=1e-9)

    def test_compensated_sum(self):
        x = np.array([1e16, 1.0, -1e16, 1.0] * 100)
        assert nb.compensated_sum(x) == 200.0
        assert np_.compensated_sum(x) == 200.0


def test_window_boundary_is_closed():
    U = np.array([[0.2, -0.2], [0.2000001, 0.0]])
    m = _kernels.window_moments(U, np.array([True, True]), np.array([0.2]), np.array([[0, 0]]))
    assert m[0, 0] == 1.0


def test_env_flag_selects_numpy():
    env = dict(os.environ, LPDENS_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from lpdens import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_numpy_backend_end_to_end():
    """The selection result is the same with numba disabled."""
    code = (
        "import numpy as np\n"
        "from lpdens.domain import PolySector, EstimationContext\n"
        "from lpdens.selection import select\n"
        "X = np.random.default_rng(0).random((20000, 2))\n"
        "r = select(EstimationContext(PolySector(1.0), [0.0, 0.0]), X)\n"
        "print(repr(r.f_hat_adaptive), r.selected_ell)\n"
    )
    runs = {}
    for flag in ("0", "1"):
        env = dict(os.environ, LPDENS_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        runs[flag] = out.stdout.split()
    assert runs["0"][1] == runs["1"][1]
    assert float(runs["0"][0]) == pytest.approx(float(runs["1"][0]), rel=1e-12)
