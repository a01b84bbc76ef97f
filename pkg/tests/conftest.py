from __future__ import annotations

import numpy as np
import pytest

from qgillespie import TimeGrid, build_pure_tables, build_resonant_fluorescence, build_tables

# Lines recorded by the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def rf_model():
    return build_resonant_fluorescence(delta=0.0, omega=0.5, gamma=0.5)


@pytest.fixture(scope="session")
def rf_grid():
    return TimeGrid.from_t_max(0.01, 40.0)


@pytest.fixture(scope="session")
def rf_tables(rf_model, rf_grid):
    return build_tables(rf_model, rf_grid)


@pytest.fixture(scope="session")
def rf_pure_tables(rf_model, rf_grid):
    return build_pure_tables(rf_model, rf_grid)


def random_density(rng: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    A = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


def random_pure(rng: np.random.Generator, d: int) -> np.ndarray:
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    return psi / np.linalg.norm(psi)
