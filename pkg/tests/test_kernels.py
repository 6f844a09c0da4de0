import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from degensys import _pykernels, kernels
from degensys.cases import build
from degensys.grid import Grid
from degensys.solver import solve_truncated

SRC = str(Path(__file__).resolve().parents[1] / "src")

PROBE = """
import numpy as np
from degensys import kernels
from degensys.cases import build
from degensys.grid import Grid
from degensys.solver import solve_truncated
w, W, rep = solve_truncated(build("symmetric-variable", Grid.unit(31, 2)))
print(kernels.BACKEND)
print(repr(float(np.sum(w.values))), rep.iterations)
"""


def probe(pure):
    env = dict(os.environ, PYTHONPATH=SRC + os.pathsep + os.environ.get("PYTHONPATH", ""))
    env.pop("DEGENSYS_PURE_PYTHON", None)
    if pure:
        env["DEGENSYS_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, check=True)
    backend, line = out.stdout.split("\n")[:2]
    total, its = line.split()
    return backend, float(total), int(its)


def test_backend_names():
    assert kernels.BACKEND in ("compiled", "python")
    assert kernels.python_backend is _pykernels


def test_fallback_selected_by_environment():
    backend, total, its = probe(pure=True)
    assert backend == "python"
    if kernels.compiled_backend is not None:
        cb, ctotal, cits = probe(pure=False)
        assert cb == "compiled"
        assert its == cits
        assert total == pytest.approx(ctotal, rel=1e-9)


def test_python_pcg_on_identity():
    n = 5
    x, its, res = _pykernels.pcg(np.arange(n + 1, dtype=np.int64), np.arange(n, dtype=np.int64), np.full(n, 4.0),
                                 np.arange(n, dtype=float), 1e-12, 50)
    np.testing.assert_allclose(x, np.arange(n) / 4.0, rtol=1e-15)
    assert its <= 1 and res == 0.0


def test_zero_rhs_returns_zero_without_iterating():
    for backend in filter(None, (kernels.python_backend, kernels.compiled_backend)):
        x, its, res = backend.pcg(np.array([0, 1], dtype=np.int64), np.array([0], dtype=np.int64),
                                  np.array([3.0]), np.zeros(1), 1e-10, 10)
        assert its == 0 and x[0] == 0.0 and res == 0.0


def test_solver_uses_active_backend():
    w, _, _ = solve_truncated(build("unit-square-constant", Grid.unit(7, 2)))
    assert w.values.max() > 0
