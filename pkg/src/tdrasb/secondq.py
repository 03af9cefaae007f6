"""Second-quantized operator chains on restricted coefficient vectors.

Every operator is applied through annihilation maps into "hole" spaces:
``b_j`` takes an ``N``-particle vector to the ``(N-1)``-particle configurations
reachable from the restricted space, ``b_l b_j`` to the ``(N-2)``-particle ones.
Creation is the adjoint map followed by projection onto the restricted space,
so ``<Phi_I| b_i^+ b_k^+ b_l b_j |Psi>`` is exact even when intermediate
configurations fall outside the space.

Orbital indices are 0-based.  Tensors use upper-then-lower index order:

* ``rho1[i, j] = <b_i^+ b_j>``
* ``rho2[i, k, j, l] = <b_i^+ b_k^+ b_l b_j>``
* ``v[p, r, q, s] = v_{qs}^{pr}`` (two-body matrix element, bra indices first)
"""

from __future__ import annotations

from functools import cached_property, lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import InvalidStateError
from .fock import FockSpace, config_array, rank_array


class ConfigSet:
    """Unordered set of ``n``-particle configurations with vectorised lookup."""

    def __init__(self, occupations: np.ndarray, n: int):
        occ = np.asarray(occupations, dtype=np.int64)
        keys = rank_array(occ, n) if len(occ) else np.zeros(0, dtype=np.int64)
        keys, first = np.unique(keys, return_index=True)
        self.n = n
        self.keys = keys
        self.occupations = occ[first]

    def __len__(self) -> int:
        return len(self.keys)

    def lookup(self, occ: np.ndarray) -> np.ndarray:
        """Row index of each configuration in ``occ`` (``-1`` when absent)."""
        occ = np.asarray(occ, dtype=np.int64)
        out = np.full(len(occ), -1, dtype=np.int64)
        if len(occ) == 0 or len(self.keys) == 0:
            return out
        valid = (occ >= 0).all(axis=1)
        keys = rank_array(np.where(valid[:, None], occ, 0), self.n)
        pos = np.clip(np.searchsorted(self.keys, keys), 0, len(self.keys) - 1)
        hit = valid & (self.keys[pos] == keys)
        out[hit] = pos[hit]
        return out


def _pairs(m: int) -> list[tuple[int, int]]:
    return [(j, l) for j in range(m) for l in range(j, m)]


def _removal_targets(occ: np.ndarray, removed: list[tuple[int, ...]]):
    """For each removal pattern yield (rows, target occupations, factor)."""
    for pattern in removed:
        cur = occ.copy()
        factor = np.ones(len(occ))
        for j in pattern:
            factor = factor * np.sqrt(np.maximum(cur[:, j], 0))
            cur[:, j] -= 1
        rows = np.nonzero(factor > 0)[0]
        yield rows, cur[rows], factor[rows]


def annihilation_matrix(src_occ: np.ndarray, holes: ConfigSet, patterns: list[tuple[int, ...]]) -> sp.csr_matrix:
    """Stacked sparse maps ``src -> holes`` for each annihilation pattern.

    Row ``p * len(holes) + h`` holds the amplitude of hole configuration ``h``
    produced by removing the particles of ``patterns[p]`` (applied left to
    right).  Targets missing from ``holes`` are dropped.
    """
    nh = len(holes)
    data, rows, cols = [], [], []
    for p, (src_rows, targets, factor) in enumerate(_removal_targets(src_occ, patterns)):
        h = holes.lookup(targets)
        keep = h >= 0
        rows.append(p * nh + h[keep])
        cols.append(src_rows[keep])
        data.append(factor[keep])
    shape = (len(patterns) * nh, len(src_occ))
    if not data:
        return sp.csr_matrix(shape)
    return sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=shape)


def hole_set(src_occ: np.ndarray, n: int, patterns: list[tuple[int, ...]]) -> ConfigSet:
    """All configurations reachable from ``src_occ`` by the removal patterns."""
    targets = [t for _, t, _ in _removal_targets(src_occ, patterns)]
    m = src_occ.shape[1]
    occ = np.concatenate(targets) if targets else np.zeros((0, m), dtype=np.int64)
    return ConfigSet(occ, n - len(patterns[0]) if patterns else n)


class FockOperators:
    """Operator application and reduced density matrices on one :class:`FockSpace`.

    The sparse maps are built lazily and cached; a single instance can be
    reused across every derivative evaluation of a propagation.
    """

    def __init__(self, space: FockSpace):
        self.space = space
        self.m = space.m
        self.pairs = _pairs(self.m)
        pidx = np.zeros((self.m, self.m), dtype=np.int64)
        for u, (j, l) in enumerate(self.pairs):
            pidx[j, l] = pidx[l, j] = u
        self.pair_index = pidx

    # ------------------------------------------------------------------ maps
    @cached_property
    def _one_hole(self):
        occ = self.space.occupations
        patterns = [(j,) for j in range(self.m)]
        holes = hole_set(occ, self.space.n_particles, patterns)
        b = annihilation_matrix(occ, holes, patterns)
        return holes, b, b.T.tocsr()

    @cached_property
    def _two_hole(self):
        occ = self.space.occupations
        holes = hole_set(occ, self.space.n_particles, self.pairs)
        b = annihilation_matrix(occ, holes, self.pairs)
        return holes, b, b.T.tocsr()

    @cached_property
    def _pair_fold(self) -> np.ndarray:
        # fold[u, p*m + r] = 1 when ordered pair (p, r) maps to unordered pair u
        m = self.m
        fold = np.zeros((len(self.pairs), m * m))
        for p in range(m):
            for r in range(m):
                fold[self.pair_index[p, r], p * m + r] = 1.0
        return fold

    def one_hole_vectors(self, c: np.ndarray) -> np.ndarray:
        """``Y[j] = b_j |Psi>`` as an ``(M, n_holes)`` array."""
        holes, b, _ = self._one_hole
        return (b @ c).reshape(self.m, len(holes))

    def two_hole_vectors(self, c: np.ndarray) -> np.ndarray:
        """``W[u] = b_l b_j |Psi>`` for each unordered pair ``u = (j, l)``."""
        holes, b, _ = self._two_hole
        return (b @ c).reshape(len(self.pairs), len(holes))

    # ----------------------------------------------------------- operators
    def apply_excitation(self, c: np.ndarray, i: int, j: int) -> np.ndarray:
        """Coefficients ``<Phi_I| b_i^+ b_j |Psi>`` for every ``I`` in the space."""
        if not (0 <= i < self.m and 0 <= j < self.m):
            raise ValueError(f"orbital indices ({i}, {j}) out of range for M={self.m}")
        holes, b, bt = self._one_hole
        nh = len(holes)
        y = b[j * nh:(j + 1) * nh] @ c
        return bt[:, i * nh:(i + 1) * nh] @ y

    def apply_one_body(self, k: np.ndarray, c: np.ndarray) -> np.ndarray:
        """``sum_ij k[i, j] b_i^+ b_j |Psi>`` projected onto the space."""
        holes, b, bt = self._one_hole
        y = (b @ c).reshape(self.m, len(holes))
        return bt @ (k @ y).ravel()

    def apply_two_body(self, v: np.ndarray, c: np.ndarray) -> np.ndarray:
        """``1/2 sum v[p, r, q, s] b_p^+ b_r^+ b_s b_q |Psi>`` projected onto the space."""
        holes, b, bt = self._two_hole
        w = (b @ c).reshape(len(self.pairs), len(holes))
        return 0.5 * (bt @ (self.fold_two_body(v) @ w).ravel())

    def fold_two_body(self, v: np.ndarray) -> np.ndarray:
        """Sum the two-body tensor over orderings of each creator and annihilator pair."""
        m = self.m
        fold = self._pair_fold
        return fold @ np.asarray(v).reshape(m * m, m * m) @ fold.T

    def apply_hamiltonian(self, h: np.ndarray, v: np.ndarray, c: np.ndarray) -> np.ndarray:
        return self.apply_one_body(h, c) + self.apply_two_body(v, c)

    # ------------------------------------------------------------ densities
    def rho1(self, c: np.ndarray) -> np.ndarray:
        y = self.one_hole_vectors(c)
        return y.conj() @ y.T

    def rho2(self, c: np.ndarray) -> np.ndarray:
        w = self.two_hole_vectors(c)
        gram = w.conj() @ w.T
        idx = self.pair_index.ravel()
        m = self.m
        return gram[np.ix_(idx, idx)].reshape(m, m, m, m)

    # -------------------------------------------------------- RAS boundary
    @property
    def top_shell(self) -> Optional[int]:
        """Highest shell when a shell exists just outside the space, else ``None``."""
        spec = self.space.spec
        if spec.m2 == 0 or spec.scheme.kind == "full":
            return None
        top = spec.n_max
        return top if top < spec.n_particles else None

    def _require_general(self):
        if self.space.spec.scheme.is_even:
            raise InvalidStateError("boundary tensors are only defined for general excitation schemes")

    @cached_property
    def _boundary(self):
        # maps c -> u[(i', j'')] = b_{j''}^+ b_{i'} (top-shell part of c), living in shell top + 1
        top = self.top_shell
        sp_ = self.space
        m1, m2 = sp_.m1, sp_.m2
        n = sp_.n_particles
        p1 = config_array(n - top - 1, m1)
        p2 = config_array(top + 1, m2)
        occ = np.empty((len(p1) * len(p2), sp_.m), dtype=np.int64)
        occ[:, :m1] = np.repeat(p1, len(p2), axis=0)
        occ[:, m1:] = np.tile(p2, (len(p1), 1))
        bset = ConfigSet(occ, n)
        nb = len(bset)
        top_rows = np.arange(sp_.shell_slice(top).start, sp_.shell_slice(top).stop)
        src = sp_.occupations[top_rows]
        data, rows, cols = [], [], []
        for a in range(m1):
            for bb in range(m2):
                jj = m1 + bb
                ok = src[:, a] > 0
                tgt = src[ok].copy()
                fac = np.sqrt(tgt[:, a]) * np.sqrt(tgt[:, jj] + 1)
                tgt[:, a] -= 1
                tgt[:, jj] += 1
                h = bset.lookup(tgt)
                rows.append((a * m2 + bb) * nb + h)
                cols.append(top_rows[ok])
                data.append(fac)
        cross = sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(m1 * m2 * nb, sp_.dim),
        )
        holes, _, _ = self._two_hole
        b2 = annihilation_matrix(bset.occupations, holes, self.pairs)
        return bset, cross, b2, b2.T.tocsr()

    def boundary_kets(self, c: np.ndarray) -> np.ndarray:
        """``U[i', j''] = (1 - Pi) b_{j''}^+ b_{i'} |Psi>`` as ``(m1, m2, n_boundary)``."""
        self._require_general()
        sp_ = self.space
        if self.top_shell is None:
            return np.zeros((sp_.m1, sp_.m2, 0), dtype=complex)
        bset, cross, _, _ = self._boundary
        return (cross @ c).reshape(sp_.m1, sp_.m2, len(bset))

    def boundary_bra(self, c: np.ndarray, i1: int, j2: int) -> tuple[np.ndarray, np.ndarray]:
        """Bra ``<Psi| b_{i'}^+ b_{j''} (1 - Pi)`` on the shell just outside the space.

        ``i1`` indexes the first block and ``j2`` the second block (both local,
        0-based).  Returns ``(occupations, bra_coefficients)``.
        """
        u = self.boundary_kets(c)
        if self.top_shell is None:
            return np.zeros((0, self.m), dtype=np.int64), np.zeros(0, dtype=complex)
        bset = self._boundary[0]
        return bset.occupations, u[i1, j2].conj()

    def zeta4(self, c: np.ndarray) -> np.ndarray:
        """``zeta4[k'', i', l', j''] = <Psi_{i'}^{j''}|(1 - Pi) b_{k''}^+ b_{l'} |Psi>`` (block-local indices)."""
        u = self.boundary_kets(c)
        m1, m2 = self.space.m1, self.space.m2
        flat = u.reshape(m1 * m2, -1)
        gram = (flat.conj() @ flat.T).reshape(m1, m2, m1, m2)  # [i', j'', l', k'']
        return gram.transpose(3, 0, 2, 1)

    def zeta6(self, c: np.ndarray) -> np.ndarray:
        """``zeta6[k, m, i', l, n, j''] = <Psi_{i'}^{j''}|(1 - Pi) b_k^+ b_m^+ b_n b_l |Psi>``.

        ``k, m, l, n`` run over all orbitals; ``i'``, ``j''`` are block-local.
        """
        u = self.boundary_kets(c)
        m, m1, m2 = self.m, self.space.m1, self.space.m2
        if self.top_shell is None:
            return np.zeros((m, m, m1, m, m, m2), dtype=complex)
        holes, _, _ = self._two_hole
        _, _, b2, _ = self._boundary
        w = self.two_hole_vectors(c)
        ub = (b2 @ u.reshape(m1 * m2, -1).T).reshape(len(self.pairs), len(holes), m1 * m2)
        gram = np.einsum("uhp,wh->puw", ub.conj(), w)  # [(i',j''), (k,m), (l,n)]
        idx = self.pair_index
        z = gram[:, idx][:, :, :, idx]  # [(i',j''), k, m, l, n]
        z = z.reshape(m1, m2, m, m, m, m)
        return z.transpose(2, 3, 0, 4, 5, 1)

    def boundary_two_body(self, v: np.ndarray, c: np.ndarray) -> np.ndarray:
        """Two-body Hamiltonian applied to ``|Psi>`` and projected on the boundary shell."""
        holes, b, _ = self._two_hole
        _, _, _, b2t = self._boundary
        w = (b @ c).reshape(len(self.pairs), len(holes))
        return 0.5 * (b2t @ (self.fold_two_body(v) @ w).ravel())


@lru_cache(maxsize=64)
def operators_for(space: FockSpace) -> FockOperators:
    """Shared, cached operator set for ``space``."""
    return FockOperators(space)


def apply_excitation(c: np.ndarray, i: int, j: int, space: FockSpace) -> np.ndarray:
    return operators_for(space).apply_excitation(c, i, j)


def build_rho1(c: np.ndarray, space: FockSpace) -> np.ndarray:
    return operators_for(space).rho1(c)


def build_rho2(c: np.ndarray, space: FockSpace) -> np.ndarray:
    return operators_for(space).rho2(c)


def boundary_bra(c: np.ndarray, i1: int, j2: int, space: FockSpace) -> tuple[np.ndarray, np.ndarray]:
    return operators_for(space).boundary_bra(c, i1, j2)


def build_zeta4(c: np.ndarray, space: FockSpace) -> np.ndarray:
    return operators_for(space).zeta4(c)


def build_zeta6(c: np.ndarray, space: FockSpace) -> np.ndarray:
    return operators_for(space).zeta6(c)


def build_A_tensor(rho1: np.ndarray, m1: int) -> np.ndarray:
    """``A[p, i, q, j] = rho1[i, q] delta(p, j) - rho1[p, j] delta(i, q)`` on the cross blocks.

    Only entries with ``p, j`` in the second block and ``i, q`` in the first
    block are filled; all indices are global.
    """
    m = rho1.shape[0]
    a = np.zeros((m, m, m, m), dtype=complex)
    p2 = range(m1, m)
    p1 = range(m1)
    for p in p2:
        for i in p1:
            for q in p1:
                for j in p2:
                    a[p, i, q, j] = rho1[i, q] * (p == j) - rho1[p, j] * (i == q)
    return a
