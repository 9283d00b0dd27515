import numpy as np
import pytest

from seafloorkit import sim


@pytest.fixture(scope="session")
def sensor():
    return sim.SensorModel()


@pytest.fixture(scope="session")
def flat_image(sensor):
    """Small flat-sand mission reused across tests."""
    terrain = sim.generate_terrain("flat_sand", (45, 40), seed=1)
    traj = sim.straight_trajectory((0, 0), 0.0, 30, sensor.ping_resolution)
    image, truth = sim.render_sidescan(terrain, traj, sensor, seed=3)
    return image


@pytest.fixture(scope="session")
def quiet_sensor():
    """Noise-free sensor for geometry-exact tests."""
    return sim.SensorModel(speckle_strength=0.0, noise_floor=0.0)


@pytest.fixture(scope="session")
def quiet_flat_image(quiet_sensor):
    terrain = sim.generate_terrain("flat_sand", (45, 40), seed=1)
    terrain.heightfield[:] = 0.0
    terrain.backscatter[:] = 0.5
    traj = sim.straight_trajectory((0, 0), 0.0, 30,
                                   quiet_sensor.ping_resolution)
    image, _ = sim.render_sidescan(terrain, traj, quiet_sensor, seed=3)
    return image


@pytest.fixture(scope="session")
def mission_set():
    missions, manifest = sim.generate_mission_set(
        seed=0, mission_length_m=30.0)
    return missions, manifest
