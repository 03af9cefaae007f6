"""Energies, densities, natural occupations and breathing-mode analysis."""

from __future__ import annotations

import warnings
from typing import NamedTuple, Optional

import numpy as np

from .dvr import Grid, Model
from .eom import State
from .errors import InconsistentStateError
from .fock import FockSpace
from .secondq import FockOperators


class NoOscillationError(ValueError):
    """The sampled signal has no measurable oscillation."""


def energy(state: State, model: Model, space: FockSpace, ops: Optional[FockOperators] = None) -> float:
    """``E = sum h rho1 + 1/2 sum v rho2`` (real; raises if the imaginary part exceeds 1e-8)."""
    ops = ops or FockOperators(space)
    c = state.coeffs
    h = model.one_body(state.orbitals)
    v = model.two_body(state.orbitals)
    e = np.sum(h * ops.rho1(c)) + 0.5 * np.sum(v * ops.rho2(c))
    if abs(e.imag) > 1e-8:
        raise InconsistentStateError(f"energy has imaginary part {e.imag:.3e}")
    return float(e.real)


def density_profile(state: State, grid: Grid, space: FockSpace, ops: Optional[FockOperators] = None,
                    rho1: Optional[np.ndarray] = None) -> np.ndarray:
    """One-body density on the grid points."""
    if rho1 is None:
        rho1 = (ops or FockOperators(space)).rho1(state.coeffs)
    phi = state.orbitals
    dens = np.einsum("ij,ia,ja->a", rho1, phi.conj(), phi)
    return dens.real


def rho_at_origin(density: np.ndarray, grid: Grid) -> float:
    """Density at ``x = 0``, interpolated linearly when 0 is not a grid point."""
    x = grid.points
    k = int(np.argmin(np.abs(x)))
    if abs(x[k]) < 1e-9 * grid.dx:
        return float(density[k])
    return float(np.interp(0.0, x, density))


def natural_occupations(state: State, space: FockSpace, ops: Optional[FockOperators] = None,
                        rho1: Optional[np.ndarray] = None) -> np.ndarray:
    """Eigenvalues of the one-body density matrix, descending, clipped to ``[0, N]``."""
    if rho1 is None:
        rho1 = (ops or FockOperators(space)).rho1(state.coeffs)
    w = np.linalg.eigvalsh(0.5 * (rho1 + rho1.conj().T))[::-1]
    return np.clip(w, 0.0, float(space.n_particles))


class CorrelationEnergy(NamedTuple):
    e_corr: float
    fraction: Optional[float]


def correlation_energies(e_method: float, e_gp: float, e_ref: float) -> CorrelationEnergy:
    """``E_corr = E_GP - E_method`` and its fraction of ``E_GP - E_ref``.

    ``fraction`` is ``None`` when the reference correlation energy is zero.
    """
    e_corr = e_gp - e_method
    denom = e_gp - e_ref
    return CorrelationEnergy(e_corr, None if denom == 0.0 else e_corr / denom)


def breathing_omega(n_particles: int, strength: float, omega: float = 1.0, n: int = 1) -> float:
    """Breathing frequency ``2 n sqrt(omega^2 + 2 N g)`` of the harmonic-pair model."""
    return 2.0 * n * np.sqrt(omega ** 2 + 2.0 * n_particles * strength)


class BreathingFrequency(NamedTuple):
    frequency: float
    analytic: Optional[float]


def breathing_frequency(t: np.ndarray, signal: np.ndarray, n_particles: Optional[int] = None,
                        strength: Optional[float] = None, omega: float = 1.0,
                        pad_factor: int = 16) -> BreathingFrequency:
    """Dominant angular frequency of a uniformly sampled signal.

    Mean removal, Hann window, zero padding, then a parabolic fit to the log
    magnitude around the spectral peak.  The analytic harmonic-pair value is
    returned alongside when ``n_particles`` and ``strength`` are given.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(signal, dtype=float)
    if len(t) != len(y) or len(t) < 4:
        raise ValueError("need at least four matching samples")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-6, atol=1e-12):
        raise ValueError("samples must be uniformly spaced")
    y = y - y.mean()
    if np.var(y) < 1e-12:
        raise NoOscillationError("signal variance below 1e-12")
    yw = y * np.hanning(len(y))
    nfft = pad_factor * (1 << int(np.ceil(np.log2(len(y)))))
    mag = np.abs(np.fft.rfft(yw, nfft))
    k = int(np.argmax(mag[1:])) + 1
    shift = 0.0
    if 1 <= k < len(mag) - 1 and mag[k - 1] > 0 and mag[k + 1] > 0:
        a, b, c = np.log(mag[k - 1]), np.log(mag[k]), np.log(mag[k + 1])
        denom = a - 2 * b + c
        if denom != 0:
            shift = 0.5 * (a - c) / denom
    freq = 2 * np.pi * (k + shift) / (nfft * dt[0])
    periods = freq * (t[-1] - t[0]) / (2 * np.pi)
    if periods < 3:
        warnings.warn(f"only {periods:.1f} oscillation periods sampled", RuntimeWarning, stacklevel=2)
    analytic = None
    if n_particles is not None and strength is not None:
        analytic = breathing_omega(n_particles, strength, omega)
    return BreathingFrequency(float(freq), analytic)
