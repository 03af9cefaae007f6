"""Counting, enumeration and indexing of bosonic configuration spaces.

A configuration of ``N`` bosons in ``M`` orbitals is an occupation vector
``(n_1, ..., n_M)``.  The full space holds every such vector; a restricted
active space (RAS) splits the orbitals into a first block of ``m1`` orbitals
and a second block of ``m2`` orbitals and only admits configurations whose
second-block occupancy (the *shell*) is in an allowed set.

Coefficient vectors are laid out shell by shell (shell 0 first), and inside a
shell the first-block index is the major one.  Each shell is then a contiguous
slice of the coefficient vector.

Python integers are exact, so counts never wrap.  Index tables handed to numpy
are checked against the int64 range and raise ``OverflowError`` instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

_INT64_MAX = np.iinfo(np.int64).max


def binom(a: int, b: int) -> int:
    """Binomial coefficient with ``binom(a, b) = 0`` whenever ``a < b``, ``a < 0`` or ``b < 0``."""
    if a < 0 or b < 0 or a < b:
        return 0
    return math.comb(a, b)


def n_configs(n: int, m: int) -> int:
    """Number of ways to place ``n`` bosons in ``m`` orbitals (``m = 0`` allowed)."""
    if n < 0:
        return 0
    if m == 0:
        return 1 if n == 0 else 0
    return math.comb(n + m - 1, n)


def dim_fci(n: int, m: int) -> int:
    """Dimension of the full configuration space, ``binom(n + m - 1, n)``."""
    if m < 1:
        raise ValueError(f"need at least one orbital, got m={m}")
    if n < 0:
        raise ValueError(f"particle number must be non-negative, got n={n}")
    return math.comb(n + m - 1, n)


@dataclass(frozen=True)
class Scheme:
    """Excitation scheme: which second-block occupancies are allowed.

    ``kind`` is ``"full"``, ``"general"`` (shells ``0..n_max``) or ``"even"``
    (shells ``0, 2, ..., 2*(n_max // 2)``).
    """

    kind: str = "full"
    n_max: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("full", "general", "even"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "full":
            if self.n_max is not None:
                raise ValueError("the full scheme takes no n_max")
        elif self.n_max is None or self.n_max < 0:
            raise ValueError(f"scheme {self.kind!r} needs n_max >= 0")

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        """Parse ``"full"``, ``"general:4"`` or ``"even:6"``."""
        text = text.strip().lower()
        if text in ("full", "mctdhb"):
            return cls("full")
        kind, _, value = text.partition(":")
        if kind not in ("general", "even") or not value:
            raise ValueError(f"cannot parse scheme {text!r}")
        return cls(kind, int(value))

    def __str__(self) -> str:
        return self.kind if self.kind == "full" else f"{self.kind}:{self.n_max}"

    @property
    def is_even(self) -> bool:
        return self.kind == "even"


@dataclass(frozen=True)
class RasSpec:
    """Orbital split and excitation scheme defining a restricted space."""

    n_particles: int
    m1: int
    m2: int = 0
    scheme: Scheme = field(default_factory=Scheme)

    def __post_init__(self):
        if isinstance(self.scheme, str):
            object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if self.n_particles < 0:
            raise ValueError("n_particles must be >= 0")
        if self.m1 < 1:
            raise ValueError("the first orbital block needs at least one orbital")
        if self.m2 < 0:
            raise ValueError("m2 must be >= 0")
        n_max = self.scheme.n_max
        if n_max is not None and n_max > self.n_particles:
            raise ValueError(f"n_max={n_max} exceeds N={self.n_particles}")

    @property
    def m(self) -> int:
        return self.m1 + self.m2

    @property
    def n_max(self) -> int:
        """Highest allowed shell."""
        return self.allowed_shells[-1]

    @property
    def allowed_shells(self) -> tuple[int, ...]:
        n = self.n_particles
        if self.m2 == 0:
            return (0,)
        kind, n_max = self.scheme.kind, self.scheme.n_max
        if kind == "full":
            return tuple(range(n + 1))
        if kind == "general":
            return tuple(range(n_max + 1))
        return tuple(range(0, n_max + 1, 2))

    @property
    def is_complete(self) -> bool:
        """True when every configuration of the full space is admitted."""
        return self.m2 == 0 or self.allowed_shells == tuple(range(self.n_particles + 1))

    def shell_dims(self) -> dict[int, tuple[int, int]]:
        """Per-shell ``(first-block count, second-block count)``."""
        n = self.n_particles
        return {k: (n_configs(n - k, self.m1), n_configs(k, self.m2)) for k in self.allowed_shells}


def dim_ras(spec: RasSpec) -> int:
    """Dimension of the restricted space (sum over allowed shells)."""
    return sum(d1 * d2 for d1, d2 in spec.shell_dims().values())


def index_of(occ: Sequence[int], n: int, m: int) -> int:
    """1-based combinatorial index of a configuration in the full space.

    ``J = 1 + sum_k binom(N + M - 1 - k - (n_1 + ... + n_k), M - k)``.
    Configurations are ordered with the first occupation descending, so
    ``|N, 0, ..., 0>`` has index 1.
    """
    occ = [int(x) for x in occ]
    if len(occ) != m:
        raise ValueError(f"occupation vector has length {len(occ)}, expected {m}")
    if any(x < 0 for x in occ) or sum(occ) != n:
        raise ValueError(f"occupations {occ} do not hold {n} particles")
    j, acc = 1, 0
    for k in range(1, m + 1):
        acc += occ[k - 1]
        j += binom(n + m - 1 - k - acc, m - k)
    return j


def enumerate_configs(n: int, m: int) -> Iterator[tuple[int, ...]]:
    """Yield every configuration of ``n`` bosons in ``m`` orbitals in index order."""
    if m == 0:
        if n == 0:
            yield ()
        return
    if m == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in enumerate_configs(n - first, m - 1):
            yield (first,) + rest


def config_array(n: int, m: int) -> np.ndarray:
    """Configurations of ``n`` bosons in ``m`` orbitals as an ``(count, m)`` array."""
    count = n_configs(n, m)
    out = np.zeros((count, m), dtype=np.int64)
    if m == 0 or count == 0:
        return out
    if m == 1:
        out[0, 0] = n
        return out
    row = 0
    for first in range(n, -1, -1):
        block = config_array(n - first, m - 1)
        out[row:row + len(block), 0] = first
        out[row:row + len(block), 1:] = block
        row += len(block)
    return out


def _binom_table(a_max: int, b_max: int) -> np.ndarray:
    table = np.zeros((a_max + 1, b_max + 1), dtype=np.int64)
    for a in range(a_max + 1):
        for b in range(min(a, b_max) + 1):
            value = math.comb(a, b)
            if value > _INT64_MAX:
                raise OverflowError(f"binom({a}, {b}) does not fit in int64")
            table[a, b] = value
    return table


def rank_array(occ: np.ndarray, n) -> np.ndarray:
    """0-based full-space index for each row of ``occ`` (vectorised :func:`index_of`).

    ``n`` may be a scalar or one particle number per row.  Rows must already
    hold ``n`` particles; no check is made here.
    """
    occ = np.asarray(occ, dtype=np.int64)
    rows, m = occ.shape
    n = np.broadcast_to(np.asarray(n, dtype=np.int64), (rows,))
    if m == 0 or rows == 0:
        return np.zeros(rows, dtype=np.int64)
    table = _binom_table(int(n.max()) + m, m)
    cums = np.cumsum(occ, axis=1)
    ranks = np.zeros(rows, dtype=np.int64)
    for k in range(1, m + 1):
        a = n + m - 1 - k - cums[:, k - 1]
        ok = a >= 0
        ranks[ok] += table[a[ok], m - k]
    return ranks


class RasIndex(NamedTuple):
    """Position of a configuration as (first-block index, second-block index, shell)."""

    j_p1: int
    j_p2: int
    n_exc: int


class FockSpace:
    """Enumerated restricted configuration space with shell bookkeeping.

    Parameters
    ----------
    spec : RasSpec
    max_dim : int
        Refuse to enumerate spaces larger than this.
    """

    def __init__(self, spec: RasSpec, max_dim: int = 5_000_000):
        self.spec = spec
        dim = dim_ras(spec)
        if dim > max_dim:
            raise ValueError(f"space dimension {dim} exceeds max_dim={max_dim}")
        self.n_particles = spec.n_particles
        self.m1, self.m2, self.m = spec.m1, spec.m2, spec.m
        self.shells = spec.allowed_shells
        self.shell_dims: dict[int, tuple[int, int]] = spec.shell_dims()
        self.shell_offsets: dict[int, int] = {}
        blocks, offset = [], 0
        for k in self.shells:
            d1, d2 = self.shell_dims[k]
            self.shell_offsets[k] = offset
            p1 = config_array(self.n_particles - k, self.m1)
            p2 = config_array(k, self.m2)
            block = np.empty((d1 * d2, self.m), dtype=np.int64)
            block[:, : self.m1] = np.repeat(p1, d2, axis=0)
            block[:, self.m1:] = np.tile(p2, (d1, 1))
            blocks.append(block)
            offset += d1 * d2
        self.dim = offset
        self.occupations = np.concatenate(blocks) if blocks else np.zeros((0, self.m), dtype=np.int64)
        self.occupations.setflags(write=False)
        self.shell_of = self.occupations[:, self.m1:].sum(axis=1)

    def __len__(self) -> int:
        return self.dim

    def __repr__(self) -> str:
        s = self.spec
        return f"FockSpace(N={s.n_particles}, m1={s.m1}, m2={s.m2}, scheme={s.scheme}, dim={self.dim})"

    def shell_slice(self, k: int) -> slice:
        """Slice of the coefficient vector holding shell ``k``."""
        start = self.shell_offsets[k]
        d1, d2 = self.shell_dims[k]
        return slice(start, start + d1 * d2)

    def ras_index(self, occ: Sequence[int]) -> Optional[RasIndex]:
        """Split ``occ`` into its block indices, or ``None`` if it lies outside the space."""
        occ = [int(x) for x in occ]
        if len(occ) != self.m or sum(occ) != self.n_particles:
            raise ValueError(f"occupations {occ} are not an {self.n_particles}-particle configuration")
        p1, p2 = occ[: self.m1], occ[self.m1:]
        n_exc = sum(p2)
        if n_exc not in self.shell_offsets:
            return None
        j2 = index_of(p2, n_exc, self.m2) - 1 if self.m2 else 0
        return RasIndex(index_of(p1, self.n_particles - n_exc, self.m1) - 1, j2, n_exc)

    def position(self, occ: Sequence[int]) -> Optional[int]:
        """0-based position in the coefficient vector, ``None`` if outside the space."""
        idx = self.ras_index(occ)
        if idx is None:
            return None
        return self.shell_offsets[idx.n_exc] + idx.j_p1 * self.shell_dims[idx.n_exc][1] + idx.j_p2

    def positions(self, occ: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`position`; rows outside the space map to ``-1``.

        Rows must hold ``N`` non-negative occupations.
        """
        occ = np.asarray(occ, dtype=np.int64).reshape(-1, self.m)
        n_exc = occ[:, self.m1:].sum(axis=1)
        out = np.full(len(occ), -1, dtype=np.int64)
        allowed = np.isin(n_exc, self.shells)
        if not allowed.any():
            return out
        sub, k = occ[allowed], n_exc[allowed]
        j1 = rank_array(sub[:, : self.m1], self.n_particles - k)
        j2 = rank_array(sub[:, self.m1:], k)
        offsets = np.array([self.shell_offsets.get(s, 0) for s in range(self.n_particles + 1)], dtype=np.int64)
        d2 = np.array([self.shell_dims.get(s, (0, 0))[1] for s in range(self.n_particles + 1)], dtype=np.int64)
        out[allowed] = offsets[k] + j1 * d2[k] + j2
        return out


def ras_index_of(occ: Sequence[int], space: FockSpace) -> Optional[int]:
    """0-based position of ``occ`` in ``space`` or ``None`` if not admitted."""
    return space.position(occ)


def enumerate_space(space: FockSpace) -> list[tuple[int, ...]]:
    """All configurations of ``space`` in coefficient-vector order."""
    return [tuple(int(x) for x in row) for row in space.occupations]


def cost_delta(n: int, m1: int, m2: int, scheme: Scheme | str, n_grid: Optional[int] = None) -> int:
    """Operation-count difference between the full and restricted derivative evaluations.

    Even schemes: ``2 M^4 (V_full - V - 1/2)``; general schemes:
    ``2 M^4 (V_full - V - M^2 V_top / 2)`` where ``V_top`` is the size of the
    highest shell.  Both are integers (``2 M^4 / 2 = M^4``), so no rounding
    is involved.  The grid-dependent terms are identical for both methods and
    cancel, so ``n_grid`` is accepted for interface symmetry and ignored.
    Positive means the restricted method is cheaper.
    """
    spec = RasSpec(n, m1, m2, scheme)
    m = spec.m
    v_full = dim_fci(n, m)
    v = dim_ras(spec)
    if spec.scheme.is_even:
        return 2 * m**4 * (v_full - v) - m**4
    d1, d2 = spec.shell_dims()[spec.n_max]
    return 2 * m**4 * (v_full - v) - m**6 * d1 * d2
