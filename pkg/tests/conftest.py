"""Session fixtures for the acceptance battery.

The solves and data assemblies here are the expensive artifacts shared
across the acceptance tests; everything else builds its own inputs.
"""

from __future__ import annotations

import pytest

from vacuumdata import (
    Dimension,
    RadialProfile,
    assemble_initial_data,
    build_grid,
    build_solution,
    fixed_point_solve,
    smooth_schwarzschild_phi,
)

DIM3 = Dimension(3)


def power_seed(grid, c, q):
    r = grid.nodes
    return RadialProfile(grid, c * (1.0 + r * r) ** (-q / 2.0))


@pytest.fixture(scope="session")
def acceptance_grid():
    return build_grid(4000, 1.0e4, 1.01)


@pytest.fixture(scope="session")
def schwarzschild_solution(acceptance_grid):
    return build_solution(DIM3, smooth_schwarzschild_phi(DIM3, 1.0, acceptance_grid))


@pytest.fixture(scope="session")
def schwarzschild_data(schwarzschild_solution):
    return assemble_initial_data(schwarzschild_solution)


@pytest.fixture(scope="session")
def schwarzschild_refined_data():
    grid = build_grid(8000, 1.0e4, 1.01)
    return assemble_initial_data(
        build_solution(DIM3, smooth_schwarzschild_phi(DIM3, 1.0, grid))
    )


@pytest.fixture(scope="session")
def solver_runs(acceptance_grid):
    runs = {}
    for q in (1.3, 1.5, 2.0):
        runs[q] = fixed_point_solve(DIM3, power_seed(acceptance_grid, 1.0, q))
    return runs


@pytest.fixture(scope="session")
def solver_data(solver_runs):
    return {q: assemble_initial_data(sol) for q, (sol, _) in solver_runs.items()}
