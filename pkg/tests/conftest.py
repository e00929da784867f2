import numpy as np
import pytest

from fracphase.grids import PeriodicGrid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid16():
    return PeriodicGrid(2.0 * np.pi, 2.0 * np.pi, 16, 16)


@pytest.fixture
def grid32():
    return PeriodicGrid(2.0 * np.pi, 2.0 * np.pi, 32, 32)


def random_admissible_mesh(rng, nu, max_steps=12, T=None):
    """Random mesh with mild ratio jitter; regenerates until admissible."""
    from fracphase.meshes import TemporalMesh, check_mesh

    while True:
        N = int(rng.integers(2, max_steps + 1))
        taus = [float(rng.uniform(0.05, 1.0))]
        for _ in range(N - 1):
            taus.append(taus[-1] * float(rng.uniform(0.7, 1.6)))
        nodes = np.concatenate([[0.0], np.cumsum(taus)])
        if T is not None:
            nodes *= T / nodes[-1]
        mesh = TemporalMesh(nodes)
        if check_mesh(mesh, nu).admissible:
            return mesh
