"""Brute-force dense references for validating the sparse machinery.

Everything here works in the complete ``N``-particle Fock space over a fixed
set of orbitals, builds operators by explicit ladder algebra on occupation
tuples, and uses dense linear algebra.  It is deliberately slow and simple.

Regenerate reference numbers with ``python -m tdrasb.oracle``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .dvr import Model, build_grid, ho_orbitals
from .fock import FockSpace, dim_fci, enumerate_configs

MAX_DENSE_DIM = 10_000


def _check_cap(n: int, m: int):
    d = dim_fci(n, m)
    if d > MAX_DENSE_DIM:
        raise ValueError(f"dense space dimension {d} exceeds the cap {MAX_DENSE_DIM}")
    return d


def apply_ladders(occ: tuple[int, ...], ops: list[tuple[str, int]]):
    """Apply ladder operators right-to-left; ``('c', i)`` creates, ``('a', i)`` annihilates.

    Returns ``(new_occupation, factor)`` or ``(None, 0.0)``.
    """
    cur = list(occ)
    factor = 1.0
    for kind, i in reversed(ops):
        if kind == "a":
            if cur[i] == 0:
                return None, 0.0
            factor *= np.sqrt(cur[i])
            cur[i] -= 1
        else:
            cur[i] += 1
            factor *= np.sqrt(cur[i])
    return tuple(cur), factor


class DenseBasis:
    """Complete enumerated Fock space with a dict lookup."""

    def __init__(self, n: int, m: int):
        _check_cap(n, m)
        self.n, self.m = n, m
        self.configs = list(enumerate_configs(n, m))
        self.index = {c: k for k, c in enumerate(self.configs)}

    def __len__(self):
        return len(self.configs)

    def operator(self, ops: list[tuple[str, int]]) -> np.ndarray:
        mat = np.zeros((len(self), len(self)))
        for j, occ in enumerate(self.configs):
            new, f = apply_ladders(occ, ops)
            if new is not None:
                mat[self.index[new], j] += f
        return mat

    def embed(self, c: np.ndarray, space: FockSpace) -> np.ndarray:
        out = np.zeros(len(self), dtype=complex)
        for k, occ in enumerate(space.occupations):
            out[self.index[tuple(int(x) for x in occ)]] = c[k]
        return out

    def ras_mask(self, space: FockSpace) -> np.ndarray:
        mask = np.zeros(len(self), dtype=bool)
        for occ in space.occupations:
            mask[self.index[tuple(int(x) for x in occ)]] = True
        return mask


@dataclass
class DenseManyBodyOperator:
    matrix: np.ndarray
    basis: list[tuple[int, ...]]


def dense_hamiltonian(h: np.ndarray, v: np.ndarray, n: int, m: int) -> DenseManyBodyOperator:
    """``sum h[p,q] b_p^+ b_q + 1/2 sum v[p,r,q,s] b_p^+ b_r^+ b_s b_q`` over the full space."""
    basis = DenseBasis(n, m)
    h = np.asarray(h)
    v = np.asarray(v)
    mat = np.zeros((len(basis), len(basis)), dtype=complex)
    for j, occ in enumerate(basis.configs):
        for p, q in product(range(m), repeat=2):
            if h[p, q] != 0:
                new, f = apply_ladders(occ, [("c", p), ("a", q)])
                if new is not None:
                    mat[basis.index[new], j] += h[p, q] * f
        for p, r, q, s in product(range(m), repeat=4):
            if v[p, r, q, s] != 0:
                new, f = apply_ladders(occ, [("c", p), ("c", r), ("a", s), ("a", q)])
                if new is not None:
                    mat[basis.index[new], j] += 0.5 * v[p, r, q, s] * f
    return DenseManyBodyOperator(mat, basis.configs)


def dense_rho1(c_full: np.ndarray, basis: DenseBasis) -> np.ndarray:
    """Double loop over configurations: ``sum_IJ C_I^* C_J <I| b_i^+ b_j |J>``."""
    m = basis.m
    out = np.zeros((m, m), dtype=complex)
    for i, j in product(range(m), repeat=2):
        acc = 0.0
        for jj, occ in enumerate(basis.configs):
            new, f = apply_ladders(occ, [("c", i), ("a", j)])
            if new is not None:
                acc += np.conj(c_full[basis.index[new]]) * c_full[jj] * f
        out[i, j] = acc
    return out


def dense_rho2(c_full: np.ndarray, basis: DenseBasis) -> np.ndarray:
    """``rho2[i,k,j,l] = <b_i^+ b_k^+ b_l b_j>`` by the same double loop."""
    m = basis.m
    out = np.zeros((m,) * 4, dtype=complex)
    for i, k, j, l in product(range(m), repeat=4):
        acc = 0.0
        for jj, occ in enumerate(basis.configs):
            new, f = apply_ladders(occ, [("c", i), ("c", k), ("a", l), ("a", j)])
            if new is not None:
                acc += np.conj(c_full[basis.index[new]]) * c_full[jj] * f
        out[i, k, j, l] = acc
    return out


def _outside_projected_kets(c: np.ndarray, space: FockSpace, basis: DenseBasis):
    psi = basis.embed(c, space)
    outside = ~basis.ras_mask(space)
    m1 = space.m1
    kets = {}
    for a in range(space.m1):
        for b in range(space.m2):
            ket = basis.operator([("c", m1 + b), ("a", a)]) @ psi
            kets[a, b] = np.where(outside, ket, 0.0)
    return psi, kets


def dense_boundary_bra(c: np.ndarray, space: FockSpace, i1: int, j2: int) -> np.ndarray:
    """``<Psi| b_{i'}^+ b_{j''} (1 - Pi)`` as a full-space bra coefficient vector."""
    _, kets = _outside_projected_kets(c, space, DenseBasis(space.n_particles, space.m))
    return kets[i1, j2].conj()


def dense_zeta4(c: np.ndarray, space: FockSpace) -> np.ndarray:
    basis = DenseBasis(space.n_particles, space.m)
    psi, kets = _outside_projected_kets(c, space, basis)
    m1, m2 = space.m1, space.m2
    out = np.zeros((m2, m1, m1, m2), dtype=complex)
    for k2, i1, l1, j2 in product(range(m2), range(m1), range(m1), range(m2)):
        op = basis.operator([("c", m1 + k2), ("a", l1)])
        out[k2, i1, l1, j2] = np.vdot(kets[i1, j2], op @ psi)
    return out


def dense_zeta6(c: np.ndarray, space: FockSpace) -> np.ndarray:
    basis = DenseBasis(space.n_particles, space.m)
    psi, kets = _outside_projected_kets(c, space, basis)
    m, m1, m2 = space.m, space.m1, space.m2
    out = np.zeros((m, m, m1, m, m, m2), dtype=complex)
    for k, mm, l, nn in product(range(m), repeat=4):
        vec = basis.operator([("c", k), ("c", mm), ("a", nn), ("a", l)]) @ psi
        for i1, j2 in product(range(m1), range(m2)):
            out[k, mm, i1, l, nn, j2] = np.vdot(kets[i1, j2], vec)
    return out


def dense_eta(h: np.ndarray, v: np.ndarray, c: np.ndarray, space: FockSpace) -> np.ndarray:
    """Cross-block orbital rotation from the stationarity condition in the full space.

    For every cross pair ``(i', j'')`` the residual
    ``<Psi| F (1 - Pi) X |Psi> - <Psi| X (1 - Pi) F |Psi>`` with
    ``X = b_{i'}^+ b_{j''}`` and ``F = H - i D`` must vanish, where
    ``D = sum eta[p, q] b_p^+ b_q``.  The residual is real-linear in the
    unknown block ``eta[k'', l']``, so it is solved as a real system.
    """
    m, m1, m2 = space.m, space.m1, space.m2
    basis = DenseBasis(space.n_particles, m)
    psi = basis.embed(c, space)
    outside = (~basis.ras_mask(space)).astype(float)
    hmat = dense_hamiltonian(h, v, space.n_particles, m).matrix
    ladders = {(p, q): basis.operator([("c", p), ("a", q)]) for p in range(m) for q in range(m)}

    def residual(eta):
        f = hmat - 1j * sum(eta[p, q] * ladders[p, q] for p in range(m) for q in range(m) if eta[p, q] != 0)
        out = []
        for a in range(m1):
            for b in range(m2):
                x = ladders[a, m1 + b]
                r = np.vdot(psi, f @ (outside * (x @ psi))) - np.vdot(psi, x @ (outside * (f @ psi)))
                out.append(r)
        return np.array(out)

    def eta_from(params):
        eta = np.zeros((m, m), dtype=complex)
        z = params[: m1 * m2] + 1j * params[m1 * m2:]
        for u, (b, a) in enumerate(product(range(m2), range(m1))):
            eta[m1 + b, a] = z[u]
            eta[a, m1 + b] = -np.conj(z[u])
        return eta

    nvar = 2 * m1 * m2
    r0 = residual(eta_from(np.zeros(nvar)))
    cols = []
    for k in range(nvar):
        e = np.zeros(nvar)
        e[k] = 1.0
        d = residual(eta_from(e)) - r0
        cols.append(np.concatenate([d.real, d.imag]))
    jac = np.array(cols).T
    rhs = -np.concatenate([r0.real, r0.imag])
    sol = np.linalg.lstsq(jac, rhs, rcond=None)[0]
    return eta_from(sol)


def exact_ground_state(model: Model, n: int, fixed_basis_size: int) -> float:
    """Lowest eigenvalue of the Hamiltonian in the span of the lowest trap eigenfunctions."""
    _check_cap(n, fixed_basis_size)
    phi = ho_orbitals(model.grid, model.trap, fixed_basis_size)
    h = model.one_body(phi)
    v = model.two_body(phi)
    mat = dense_hamiltonian(h, v, n, fixed_basis_size).matrix
    return float(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0])


def main():
    from .dvr import Interaction

    model = Model(build_grid(), interaction=Interaction("harmonic", 0.5))
    for size in (4, 6, 8, 10):
        print(f"harmonic pair N=2 lambda=0.5 basis={size}: {exact_ground_state(model, 2, size):.10f}")
    contact = Model(build_grid(), interaction=Interaction("contact", 0.5))
    for size in (4, 6, 8):
        print(f"contact N=3 lambda=0.5 basis={size}: {exact_ground_state(contact, 3, size):.10f}")


if __name__ == "__main__":
    main()
