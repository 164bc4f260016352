import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from volfmaps.fmap import MatchConfig, farthest_point_sampling, prepare_shape  # noqa: E402
from volfmaps.laplacian import assemble_volume_operators  # noqa: E402
from volfmaps.mesh import TetMesh, bar_mesh, bent_bar_pair, cube_mesh  # noqa: E402
from volfmaps.spectral import compute_eigenbasis  # noqa: E402

settings.register_profile("default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def single_tet():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
    return TetMesh(v, np.array([[0, 1, 2, 3]]))


@pytest.fixture(scope="session")
def cube4():
    return cube_mesh(4)


@pytest.fixture(scope="session")
def bar():
    return bar_mesh((20, 4, 4))


@pytest.fixture(scope="session")
def bar_landmarks(bar):
    return tuple(farthest_point_sampling(bar.vertices, 6).tolist())


@pytest.fixture(scope="session")
def bar_lbo(bar):
    return compute_eigenbasis(assemble_volume_operators(bar), 200)


@pytest.fixture(scope="session")
def bent30():
    return bent_bar_pair((20, 4, 4), np.pi / 6)


@pytest.fixture(scope="session")
def bent45():
    return bent_bar_pair((20, 4, 4), np.pi / 4)


@pytest.fixture(scope="session")
def bent45_shapes(bent45, bar_landmarks):
    M, N, _ = bent45
    cfg = MatchConfig(landmarks_M=bar_landmarks, landmarks_N=bar_landmarks)
    return cfg, prepare_shape(M, cfg), prepare_shape(N, cfg)
