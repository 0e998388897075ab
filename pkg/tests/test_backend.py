import os
import subprocess
import sys

import pytest

from ilwlab import _kernels


def _backend_with(flag):
    env = dict(os.environ)
    env.pop("ILWLAB_DISABLE_NUMBA", None)
    if flag is not None:
        env["ILWLAB_DISABLE_NUMBA"] = flag
    out = subprocess.run(
        [sys.executable, "-c", "from ilwlab import _kernels; print(_kernels.BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    return out.stdout.strip()


def test_flag_forces_numpy():
    assert _backend_with("1") == "numpy"


@pytest.mark.skipif(not _kernels.HAS_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("flag", [None, "0", "false"])
def test_default_uses_numba(flag):
    assert _backend_with(flag) == "numba"
