"""Shared fixtures: small assembled systems reused across test modules."""

import numpy as np
import pytest

from tdscope import Background, Ball, assemble, sphere_surface, voxelize


@pytest.fixture(scope="session")
def bg_unit():
    return Background.isotropic(a=1.0, kappa=1.0)


@pytest.fixture(scope="session")
def bg_static():
    return Background.isotropic(a=1.0, kappa=0.0)


@pytest.fixture(scope="session")
def ball_grid_h6():
    return voxelize(Ball(0.5), 1.0 / 6.0)


@pytest.fixture(scope="session")
def ball_grid_h8():
    return voxelize(Ball(0.5), 1.0 / 8.0)


@pytest.fixture(scope="session")
def sys_h6(ball_grid_h6, bg_unit):
    return assemble(ball_grid_h6, bg_unit)


@pytest.fixture(scope="session")
def sys_h8(ball_grid_h8, bg_unit):
    return assemble(ball_grid_h8, bg_unit)


@pytest.fixture(scope="session")
def sys_static_h8(ball_grid_h8, bg_static):
    return assemble(ball_grid_h8, bg_static)


@pytest.fixture(scope="session")
def surface_r5():
    return sphere_surface(5.0, 30)


@pytest.fixture()
def rng():
    return np.random.default_rng(7)
