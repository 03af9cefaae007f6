"""Time derivative of the restricted-active-space state.

The orbital-rotation matrix ``eta[p, q] = <phi_p|d phi_q/dt>`` is zero inside
each orbital block and determined on the cross blocks by a small linear
system whose form depends on the excitation scheme.  The complementary
(virtual-space) part of the orbital motion comes from the projected mean-field
equation with a regularised inverse one-body density.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .dvr import Model
from .errors import InvalidStateError
from .fock import FockSpace, RasSpec
from .secondq import FockOperators

DENSITY_EPS = 1e-8
LINEAR_EPS = 1e-8
_FLAG_THRESHOLD = 1e-14


@dataclass
class State:
    """Orbitals (rows of grid values), configuration amplitudes and time."""

    orbitals: np.ndarray
    coeffs: np.ndarray
    time: float = 0.0

    def copy(self) -> "State":
        return State(self.orbitals.copy(), self.coeffs.copy(), self.time)


class EtaResult(NamedTuple):
    eta: np.ndarray
    flagged: bool
    residual: float


def _regularize_symmetric(values: np.ndarray, eps: float) -> tuple[np.ndarray, bool]:
    """Push eigenvalues away from zero by ``eps * exp(-|a| / eps)``, keeping their sign."""
    damp = np.exp(-np.abs(values) / eps)
    sign = np.where(values >= 0, 1.0, -1.0)
    return values + sign * eps * damp, bool((damp > _FLAG_THRESHOLD).any())


def _hermitian_solve(mat: np.ndarray, rhs: np.ndarray, eps: float) -> tuple[np.ndarray, bool]:
    mat = 0.5 * (mat + mat.conj().T)
    w, u = np.linalg.eigh(mat)
    w_reg, flagged = _regularize_symmetric(w, eps)
    return u @ ((u.conj().T @ rhs) / w_reg), flagged


def regularized_inverse_density(rho1: np.ndarray, eps: float = DENSITY_EPS) -> np.ndarray:
    """Inverse of ``rho1`` after replacing each eigenvalue ``n`` by ``n + eps exp(-n / eps)``."""
    w, u = np.linalg.eigh(0.5 * (rho1 + rho1.conj().T))
    w_reg = w + eps * np.exp(-np.clip(w, 0.0, None) / eps)
    return (u / w_reg) @ u.conj().T


def _cross_eta(x_minus_h: np.ndarray, m1: int, m: int) -> np.ndarray:
    """Assemble anti-Hermitian eta from its lower-left block ``eta[k'', l']``."""
    eta = np.zeros((m, m), dtype=complex)
    eta[m1:, :m1] = x_minus_h
    eta[:m1, m1:] = -x_minus_h.conj().T
    return eta


def even_scheme_rhs(v: np.ndarray, rho2: np.ndarray, m1: int) -> np.ndarray:
    """``B[i', j''] = -sum_klm (v[j'',m,k,l] rho2[i',m,k,l] - v[k,l,i',m] rho2[k,l,j'',m])``."""
    t1 = np.einsum("jmkl,imkl->ij", v, rho2)
    t2 = np.einsum("klim,kljm->ij", v, rho2)
    return -(t1 - t2)[:m1, m1:]


def solve_eta_even(h: np.ndarray, v: np.ndarray, rho1: np.ndarray, rho2: np.ndarray,
                   spec: RasSpec, eps: float = LINEAR_EPS) -> EtaResult:
    """Cross-block eta for an even-only excitation scheme."""
    if not spec.scheme.is_even:
        raise InvalidStateError("solve_eta_even needs an even-only excitation scheme")
    m1, m2, m = spec.m1, spec.m2, spec.m
    if m2 == 0:
        return EtaResult(np.zeros((m, m), dtype=complex), False, 0.0)
    r11 = rho1[:m1, :m1]
    r22 = rho1[m1:, m1:]
    # rows (i', j''), columns (l', k''): rho1[i',l'] d(k'',j'') - rho1[k'',j''] d(i',l')
    amat = np.kron(r11, np.eye(m2)) - np.kron(np.eye(m1), r22.T)
    rhs = even_scheme_rhs(v, rho2, m1).ravel()
    x, flagged = _hermitian_solve(amat, rhs, eps)
    resid = _relative_residual(amat, x, rhs)
    xkl = x.reshape(m1, m2).T  # X[k'', l'] = h[k'', l'] - i eta[k'', l']
    eta_block = 1j * (xkl - h[m1:, :m1])
    return EtaResult(_cross_eta(eta_block, m1, m), flagged, resid)


def _relative_residual(mat, x, rhs) -> float:
    scale = np.linalg.norm(mat) * np.linalg.norm(x) + np.linalg.norm(rhs)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(mat @ x - rhs) / scale)


def solve_eta_general(h: np.ndarray, v: np.ndarray, c: np.ndarray, space: FockSpace,
                      ops: Optional[FockOperators] = None, eps: float = LINEAR_EPS) -> EtaResult:
    """Cross-block eta for a general scheme.

    With ``u[i', j''] = (1 - Pi) b_{j''}^+ b_{i'} |Psi>`` the condition reads
    ``sum G[(i',j''), (l',k'')] X[k'', l'] = B[(i', j'')]`` with ``G`` the Gram
    matrix of the ``u`` vectors (the fourth-order boundary tensor),
    ``B = <u| (1 - Pi) H_2 |Psi>`` (the sixth-order tensor contracted with
    ``v``) and ``X = i eta - h``.
    """
    spec = space.spec
    if spec.scheme.is_even:
        raise InvalidStateError("solve_eta_general needs a general excitation scheme")
    m1, m2, m = spec.m1, spec.m2, spec.m
    ops = ops or FockOperators(space)
    if ops.top_shell is None:
        return EtaResult(np.zeros((m, m), dtype=complex), False, 0.0)
    u = ops.boundary_kets(c).reshape(m1 * m2, -1)
    gram = u.conj() @ u.T
    rhs = u.conj() @ ops.boundary_two_body(v, c)
    x, flagged = _hermitian_solve(gram, rhs, eps)
    resid = _relative_residual(gram, x, rhs)
    xkl = x.reshape(m1, m2).T
    eta_block = -1j * (xkl + h[m1:, :m1])
    return EtaResult(_cross_eta(eta_block, m1, m), flagged, resid)


def amplitude_rhs(c: np.ndarray, h: np.ndarray, v: np.ndarray, eta: np.ndarray,
                  space: FockSpace, ops: Optional[FockOperators] = None) -> np.ndarray:
    """``dC/dt = -i [sum (h - i eta) b^+ b + 1/2 sum v b^+ b^+ b b] C``."""
    ops = ops or FockOperators(space)
    return -1j * (ops.apply_one_body(h - 1j * eta, c) + ops.apply_two_body(v, c))


def _project_out(orbitals: np.ndarray, f: np.ndarray, dx: float) -> np.ndarray:
    """Apply ``1 - P`` with ``P`` the projector on the orbital span (overlap-corrected)."""
    s = dx * (orbitals.conj() @ orbitals.T)
    coef = np.linalg.solve(s, dx * (orbitals.conj() @ f.T))
    return f - coef.T @ orbitals


def qspace_rhs(orbitals: np.ndarray, c: np.ndarray, model: Model, space: FockSpace,
               ops: Optional[FockOperators] = None, rho1: Optional[np.ndarray] = None,
               rho2: Optional[np.ndarray] = None, eps: float = DENSITY_EPS) -> np.ndarray:
    """Virtual-space part of the orbital time derivative, one row per orbital."""
    ops = ops or FockOperators(space)
    rho1 = ops.rho1(c) if rho1 is None else rho1
    rho2 = ops.rho2(c) if rho2 is None else rho2
    phi = np.asarray(orbitals, dtype=complex)
    hphi = (model.h_grid @ phi.T).T
    mf = model.mean_fields(phi)
    if model.interaction.strength != 0.0:
        # g[m, j, a] = sum_kl rho2[m,k,j,l] W[k,l,a]; then sum_j g[m,j,a] phi[j,a]
        g = np.einsum("mkjl,kla->mja", rho2, mf, optimize=True)
        inner = np.einsum("mja,ja->ma", g, phi)
        hphi = hphi + regularized_inverse_density(rho1, eps) @ inner
    return -1j * _project_out(phi, hphi, model.grid.dx)


@dataclass
class EquationsOfMotion:
    """Bundles the model, restricted space and cached operators for repeated derivative calls."""

    model: Model
    space: FockSpace
    imaginary: bool = False
    density_eps: float = DENSITY_EPS
    linear_eps: float = LINEAR_EPS
    ops: FockOperators = field(init=False, repr=False)
    flag_count: int = field(default=0, init=False)
    max_residual: float = field(default=0.0, init=False)

    def __post_init__(self):
        self.ops = FockOperators(self.space)

    def with_model(self, model: Model) -> "EquationsOfMotion":
        other = EquationsOfMotion(model, self.space, self.imaginary, self.density_eps, self.linear_eps)
        other.ops = self.ops
        return other

    def eta(self, h, v, c, rho1, rho2) -> EtaResult:
        spec = self.space.spec
        m = spec.m
        if spec.m2 == 0 or spec.scheme.kind == "full":
            return EtaResult(np.zeros((m, m), dtype=complex), False, 0.0)
        if spec.scheme.is_even:
            return solve_eta_even(h, v, rho1, rho2, spec, self.linear_eps)
        return solve_eta_general(h, v, c, self.space, self.ops, self.linear_eps)

    def __call__(self, orbitals: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(dC/dt, dphi/dt)`` (or the imaginary-time versions)."""
        h = self.model.one_body(orbitals)
        v = self.model.two_body(orbitals)
        rho1 = self.ops.rho1(c)
        rho2 = self.ops.rho2(c)
        res = self.eta(h, v, c, rho1, rho2)
        if res.flagged:
            self.flag_count += 1
        self.max_residual = max(self.max_residual, res.residual)
        c_dot = amplitude_rhs(c, h, v, res.eta, self.space, self.ops)
        q_dot = qspace_rhs(orbitals, c, self.model, self.space, self.ops, rho1, rho2, self.density_eps)
        phi_dot = res.eta.T @ orbitals + q_dot
        if self.imaginary:
            # t -> -i tau; the energy shift keeps the norm and narrows the spectrum seen by the integrator
            c_tau = -1j * c_dot
            shift = -np.vdot(c, c_tau).real / np.vdot(c, c).real
            return c_tau + shift * c, -1j * phi_dot
        return c_dot, phi_dot


def state_derivative(state: State, model: Model, space: FockSpace, imaginary: bool = False) -> State:
    """Time derivative packed as a :class:`State` (``time`` holds 1)."""
    c_dot, phi_dot = EquationsOfMotion(model, space, imaginary)(state.orbitals, state.coeffs)
    return State(phi_dot, c_dot, 1.0)
