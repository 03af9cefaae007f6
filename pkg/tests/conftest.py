import numpy as np
import pytest
from hypothesis import settings

from tdrasb.dvr import Interaction, Model, Trap, build_grid
from tdrasb.fock import FockSpace, RasSpec

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_state(space: FockSpace, rng: np.random.Generator) -> np.ndarray:
    c = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
    return c / np.linalg.norm(c)


def random_hamiltonian(m: int, rng: np.random.Generator):
    """Hermitian one-body matrix and a two-body tensor with the physical symmetries."""
    h = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    h = h + h.conj().T
    v = rng.normal(size=(m,) * 4) + 1j * rng.normal(size=(m,) * 4)
    v = v + v.transpose(1, 0, 3, 2)
    v = v + v.transpose(2, 3, 0, 1).conj()
    return h, v


def small_specs(max_dim: int = 500):
    """Representative restricted spaces of every scheme kind."""
    out = []
    for n in (1, 2, 3, 4, 5, 6):
        for m1 in (1, 2, 3):
            for m2 in (0, 1, 2):
                if m2 == 0:
                    out.append(RasSpec(n, m1, 0))
                    continue
                out.append(RasSpec(n, m1, m2, "full"))
                for k in range(0, n + 1):
                    out.append(RasSpec(n, m1, m2, f"general:{k}"))
                for k in range(0, n + 1, 2):
                    out.append(RasSpec(n, m1, m2, f"even:{k}"))
    return [s for s in out if FockSpace(s).dim <= max_dim]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid():
    return build_grid()


@pytest.fixture(scope="session")
def model_free(grid):
    return Model(grid, Trap(), Interaction("contact", 0.0))


def random_orbitals(rng: np.random.Generator, grid, m: int) -> np.ndarray:
    """Smooth, localized, orthonormal random orbitals."""
    from tdrasb.dvr import orthonormalize

    phi = rng.normal(size=(m, grid.n_points)) + 1j * rng.normal(size=(m, grid.n_points))
    phi *= np.exp(-grid.points ** 2 / 4)
    return orthonormalize(phi, grid)


ACCEPTANCE_LINES: list[str] = []


def report_criterion(number: int, passed, detail: str) -> str:
    status = passed if isinstance(passed, str) else ("PASS" if passed else "FAIL")
    line = f"acceptance criterion {number}: {status} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
