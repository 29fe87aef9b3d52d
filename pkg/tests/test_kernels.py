import subprocess
import sys

import numpy as np
import pytest

from anharmonic import _kernels

pytestmark = pytest.mark.skipif(not _kernels.HAS_NUMBA,
                                reason="numba unavailable, twins not comparable")

EXPONENT_CASES = [
    (1.0, 1.0, False, False),
    (2.0, 1.0, False, False),
    (2.0, 2.0, False, False),
    (3.0, 1.5, False, False),
    (6.0, 2.0, False, False),
    (1.5, 2.5, False, False),
    (0.5, 0.7, False, False),
    (1.0, 2.0, True, False),
    (2.0, 1.0, False, True),
    (1.0, 1.0, True, True),
]


@pytest.fixture(scope="module")
def magnitudes():
    rng = np.random.default_rng(99)
    return np.abs(rng.standard_normal((257, 129)))


@pytest.mark.parametrize("p,q,p_inf,q_inf", EXPONENT_CASES)
def test_mixed_reduce_twins_agree(magnitudes, p, q, p_inf, q_inf):
    ref = _kernels.mixed_reduce_np(magnitudes, p, q, p_inf, q_inf, 1e-2, 1e-3)
    got = _kernels.mixed_reduce_nb(magnitudes, p, q, p_inf, q_inf, 1e-2, 1e-3)
    assert got == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("expo", [-12.0, -8.0, -6.0, -3.7, 0.0, 2.0])
def test_scaled_quotient_twins_agree(expo):
    rng = np.random.default_rng(5)
    a = np.abs(rng.standard_normal(311))
    b = np.abs(rng.standard_normal(97))
    x = _kernels.scaled_quotient_grid_np(a, b, 0.31, expo)
    y = _kernels.scaled_quotient_grid_nb(a, b, 0.31, expo)
    np.testing.assert_allclose(y, x, rtol=1e-12)


@pytest.mark.parametrize("s2,tbn", [(2.0, 12.0), (0.0, 6.0), (1.3, 7.7), (0.02, 8.0)])
def test_weighted_quotient_twins_agree(s2, tbn):
    rng = np.random.default_rng(6)
    a = np.abs(rng.standard_normal(311))
    b = np.abs(rng.standard_normal(97))
    x = _kernels.weighted_quotient_grid_np(a, b, 1.0, s2, 1e-3, tbn)
    y = _kernels.weighted_quotient_grid_nb(a, b, 1.0, s2, 1e-3, tbn)
    np.testing.assert_allclose(y, x, rtol=1e-12)


def test_env_flag_disables_numba():
    code = (
        "import os; os.environ['ANHARMONIC_NO_NUMBA'] = '1';\n"
        "from anharmonic import _kernels\n"
        "assert not _kernels.USE_NUMBA\n"
        "assert _kernels.mixed_reduce is _kernels.mixed_reduce_np\n"
        "import numpy as np\n"
        "import anharmonic as ah\n"
        "g = ah.Grid(1, 64, 8.0)\n"
        "f = ah.FieldSample(g, np.exp(-g.nodes()[:, 0]**2))\n"
        "v = ah.modulation_norm(f, ah.WindowSpec(), ah.WeightSpec('flat', 0.0), None,\n"
        "                       ah.MixedNormParams(2.0, 2.0))\n"
        "assert abs(v - f.norm_l2()) < 1e-10 * f.norm_l2()\n"
        "print('fallback ok')\n"
    )
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "fallback ok" in out.stdout


def test_numba_active_by_default_here():
    assert _kernels.USE_NUMBA
    assert _kernels.mixed_reduce is _kernels.mixed_reduce_nb
