import numpy as np
import pytest

from prs4d import formats


@pytest.fixture(scope="session")
def table1():
    return formats.by_name("table1")


@pytest.fixture(scope="session")
def pm8qam():
    return formats.by_name("pm8qam")


@pytest.fixture(scope="session")
def pm8psk():
    return formats.by_name("pm8psk")


@pytest.fixture(scope="session")
def pm16qam():
    return formats.by_name("pm16qam")


@pytest.fixture(scope="session")
def fmt_2a8psk():
    return formats.by_name("2a8psk")


def random_rotation(rng: np.random.Generator, n: int = 4) -> np.ndarray:
    """Haar-ish random orthogonal matrix via QR."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))
