import os

# keep BLAS single-threaded: the suite's matrices are small and acceptance
# experiments parallelize across processes instead (must run before numpy
# is first imported)
for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import pytest

from helio.geometry import build_extrap_grid, build_interp_grid


@pytest.fixture(scope="session")
def interp_grid():
    return build_interp_grid()


@pytest.fixture(scope="session")
def extrap_grid():
    return build_extrap_grid()
