import pytest

from dsbu import Grid2D, OperatorParams
from dsbu.ground_state import solve_ground_state


@pytest.fixture(scope="session")
def params_focusing():
    return OperatorParams(1, 1.0)


@pytest.fixture(scope="session")
def ground_state_256(params_focusing):
    """Converged profile on the default grid, shared across modules."""
    return solve_ground_state(Grid2D(256, 20.0), params_focusing)
