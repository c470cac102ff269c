import numpy as np
import pytest

from ddstab.ellipsoid import CenterFormEllipsoid, MatrixShape


def random_spd(rng: np.random.Generator, dim: int, spread: float = 1.0) -> np.ndarray:
    """Well-conditioned random SPD matrix with eigenvalues roughly in [0.5, 0.5+2*spread]."""
    W = rng.standard_normal((dim, dim))
    Q, _ = np.linalg.qr(W)
    eigs = 0.5 + spread * rng.uniform(0.0, 2.0, size=dim)
    return (Q * eigs) @ Q.T


def random_center_form(rng: np.random.Generator, p: int, q: int) -> CenterFormEllipsoid:
    return CenterFormEllipsoid(
        shape=MatrixShape(p, q),
        Zc=rng.uniform(-1.0, 1.0, size=(p, q)),
        P=random_spd(rng, p),
        Q=random_spd(rng, q),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
