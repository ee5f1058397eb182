import os
import subprocess
import sys

import numpy as np
import pytest

from coopharq import kernel
from coopharq.adaptation import MCS_FAMILY
from coopharq.channel import Cdi, draw_frames

needs_compiled = pytest.mark.skipif(kernel.compiled_simulate_batch is None,
                                    reason="compiled kernel not built")

CONFIGS = [(0, 0.5, 4), (1, 0.5, 4), (2, 1.0, 2), (0, 1.0, 3), (1, 2.0, 2)]


@needs_compiled
@pytest.mark.parametrize("kind, alpha, t", CONFIGS)
def test_backends_agree(kind, alpha, t):
    rng = np.random.default_rng(100 + kind)
    for trial in range(12):
        m = int(rng.integers(1, 6))
        l = int(rng.integers(0, 4))
        gamma_db = rng.uniform(-5, 15, size=(m + l + 1, m + l + 1))
        gamma_db = (gamma_db + gamma_db.T) / 2
        cdi = Cdi.from_db(m, l, gamma_db)
        rates = rng.choice(MCS_FAMILY, size=m)
        gains, uniforms = draw_frames(cdi, trial, 0, 150, t)
        args = (gains, uniforms, rates, kind, alpha, t, m, l)
        py_t, py_d = kernel.python_simulate_batch(*args)
        c_t, c_d = kernel.compiled_simulate_batch(*args)
        assert np.array_equal(py_t, c_t)
        assert np.array_equal(py_d, c_d)


@needs_compiled
def test_compiled_rejects_bad_shapes():
    gains = np.zeros((4, 3, 4))
    with pytest.raises(ValueError):
        kernel.compiled_simulate_batch(gains, np.zeros((4, 2)), [1.0, 1.0], 0, 0.5, 2, 2, 2)
    with pytest.raises(ValueError):  # too few round uniforms
        kernel.compiled_simulate_batch(gains, np.zeros((4, 2)), [1.0, 1.0], 1, 0.5, 3, 2, 1)
    with pytest.raises(ValueError):  # too few frames of uniforms
        kernel.compiled_simulate_batch(gains, np.zeros((3, 3)), [1.0, 1.0], 1, 0.5, 3, 2, 1)


def backend_in_subprocess(value):
    env = dict(os.environ, COOPHARQ_BACKEND=value)
    return subprocess.run([sys.executable, "-c", "from coopharq import kernel; print(kernel.BACKEND)"],
                          env=env, capture_output=True, text=True)


def test_env_forces_python():
    out = backend_in_subprocess("python")
    assert out.returncode == 0 and out.stdout.strip() == "python"


@needs_compiled
def test_env_compiled():
    out = backend_in_subprocess("compiled")
    assert out.returncode == 0 and out.stdout.strip() == "compiled"


def test_env_rejects_unknown():
    assert backend_in_subprocess("gpu").returncode != 0


def test_get_backend():
    assert kernel.get_backend() is kernel.simulate_batch
    assert kernel.get_backend("python") is kernel.python_simulate_batch
    with pytest.raises(ValueError):
        kernel.get_backend("fortran")
