import numpy as np
import pytest

from conftest import random_hamiltonian
from tdrasb import Interaction, Model, Trap, build_grid, initial_guess, relax
from tdrasb.fock import FockSpace, RasSpec, dim_fci
from tdrasb.oracle import MAX_DENSE_DIM, DenseBasis, dense_hamiltonian, exact_ground_state
from tdrasb.secondq import FockOperators


def test_single_particle_matrix_is_h(rng):
    h, v = random_hamiltonian(4, rng)
    op = dense_hamiltonian(h, v, 1, 4)
    # basis order |1,0,0,0>, |0,1,0,0>, ...
    assert op.basis == [(1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)]
    assert np.allclose(op.matrix, h, atol=1e-14)


def test_diagonal_spectrum():
    eps = np.array([0.3, 1.1, 2.5])
    op = dense_hamiltonian(np.diag(eps), np.zeros((3,) * 4), 4, 3)
    expected = sorted(float(np.dot(occ, eps)) for occ in op.basis)
    assert np.allclose(np.linalg.eigvalsh(op.matrix), expected, atol=1e-12)


def test_dense_hamiltonian_hermitian(rng):
    h, v = random_hamiltonian(3, rng)
    mat = dense_hamiltonian(h, v, 3, 3).matrix
    assert np.max(np.abs(mat - mat.conj().T)) < 1e-12


def test_sparse_and_dense_ground_states_agree(rng):
    """Lowest eigenvalue of the shell-indexed operator equals the dense one on the same basis."""
    h, v = random_hamiltonian(3, rng)
    space = FockSpace(RasSpec(3, 3, 0))
    ops = FockOperators(space)
    sparse = np.column_stack([ops.apply_hamiltonian(h, v, e) for e in np.eye(space.dim, dtype=complex)])
    dense = dense_hamiltonian(h, v, 3, 3).matrix
    assert np.allclose(np.linalg.eigvalsh(sparse), np.linalg.eigvalsh(dense), atol=1e-10)


def test_noninteracting_ground_state_is_half_n():
    model = Model(build_grid(), Trap(), Interaction("contact", 0.0))
    assert exact_ground_state(model, 6, 4) == pytest.approx(3.0, abs=1e-9)


def test_harmonic_pair_two_particles_converges():
    model = Model(build_grid(), Trap(), Interaction("harmonic", 0.5))
    exact = 0.5 + 0.5 * np.sqrt(1 + 2 * 2 * 0.5)
    energies = [exact_ground_state(model, 2, size) for size in (4, 6, 8, 10)]
    assert all(a >= b - 1e-12 for a, b in zip(energies, energies[1:]))
    assert energies[-1] == pytest.approx(exact, abs=1e-6)
    assert round(energies[-1], 4) == 1.3660


def test_cap_refusal():
    assert dim_fci(10, 8) > MAX_DENSE_DIM
    with pytest.raises(ValueError):
        DenseBasis(10, 8)
    with pytest.raises(ValueError):
        dense_hamiltonian(np.zeros((8, 8)), np.zeros((8,) * 4), 10, 8)


# ---------------------------------------------------------------- variational ordering

CONTACT = Model(build_grid(), Trap(), Interaction("contact", 1.0))


@pytest.fixture(scope="module")
def ladder():
    """Relaxed energies for N = 3 and 4 with three orbitals across the scheme hierarchy."""
    out = {}
    for n in (3, 4):
        for label, spec in [("gp", RasSpec(n, 1, 0)), ("even:2", RasSpec(n, 1, 2, "even:2")),
                            ("general:2", RasSpec(n, 1, 2, "general:2")), ("full", RasSpec(n, 3, 0))]:
            space = FockSpace(spec)
            res = relax(initial_guess(CONTACT, space), CONTACT, space)
            assert res.converged
            out[n, label] = res.energy
        out[n, "exact"] = exact_ground_state(CONTACT, n, 10 if n == 3 else 8)
    space = FockSpace(RasSpec(3, 1, 2, "general:1"))
    out[3, "general:1"] = relax(initial_guess(CONTACT, space), CONTACT, space).energy
    return out


@pytest.mark.slow
@pytest.mark.parametrize("n", [3, 4])
def test_variational_ordering(ladder, n):
    slack = 1e-9
    e = {k[1]: val for k, val in ladder.items() if k[0] == n}
    assert e["gp"] >= e["general:2"] - slack
    assert e["gp"] >= e["even:2"] - slack
    assert e["even:2"] >= e["full"] - slack
    assert e["general:2"] >= e["full"] - slack
    assert e["full"] >= e["exact"] - slack


@pytest.mark.slow
def test_raising_top_shell_never_raises_energy(ladder):
    assert ladder[3, "general:1"] >= ladder[3, "general:2"] - 1e-9 >= ladder[3, "full"] - 2e-9
