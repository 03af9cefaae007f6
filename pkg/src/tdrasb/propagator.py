"""Real- and imaginary-time integration of the orbital/amplitude state.

The state is flattened to one complex vector for the Runge-Kutta stages.
Two integrators are provided: classical fixed-step RK4 and Dormand-Prince
5(4) with embedded error control.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np

from .dvr import Interaction, Model, ho_orbitals, orthonormalize
from .eom import EquationsOfMotion, State
from .errors import PropagationError
from .fock import FockSpace
from .observables import density_profile, energy, natural_occupations, rho_at_origin
from .secondq import FockOperators

log = logging.getLogger(__name__)

MIN_STEP = 1e-12

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass
class IntegratorSpec:
    method: Literal["rk4", "rk45"] = "rk45"
    dt: float = 1e-3
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_dt: float = 0.05

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise ValueError(f"unknown integrator {self.method!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")


class Propagator:
    """Owns one state's integration: derivative function, step-size memory and flags."""

    def __init__(self, model: Model, space: FockSpace, integrator: IntegratorSpec,
                 imaginary: bool = False, eom: Optional[EquationsOfMotion] = None):
        self.space = space
        self.integrator = integrator
        self.eom = eom or EquationsOfMotion(model, space, imaginary)
        self.eom.imaginary = imaginary
        self.dt = integrator.dt
        self.n_grid = model.grid.n_points
        self.m = space.m

    @property
    def model(self) -> Model:
        return self.eom.model

    def set_model(self, model: Model):
        self.eom = self.eom.with_model(model)

    # -- packing
    def _pack(self, state: State) -> np.ndarray:
        return np.concatenate([state.coeffs, state.orbitals.ravel()])

    def _unpack(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = self.space.dim
        return y[:d], y[d:].reshape(self.m, self.n_grid)

    def _rhs(self, y: np.ndarray) -> np.ndarray:
        c, phi = self._unpack(y)
        c_dot, phi_dot = self.eom(phi, c)
        return np.concatenate([c_dot, phi_dot.ravel()])

    # -- single steps
    def _rk4(self, y, h):
        k1 = self._rhs(y)
        k2 = self._rhs(y + 0.5 * h * k1)
        k3 = self._rhs(y + 0.5 * h * k2)
        k4 = self._rhs(y + h * k3)
        return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    def _dopri(self, y, h, k1):
        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_DP_A[i], ks))
            ks.append(self._rhs(yi))
        y5 = y + h * sum(b * k for b, k in zip(_DP_B5, ks) if b != 0.0)
        err = h * sum((b5 - b4) * k for b5, b4, k in zip(_DP_B5, _DP_B4, ks))
        return y5, err, ks[-1]

    def _finish(self, y: np.ndarray, t: float) -> State:
        c, phi = self._unpack(y)
        c = c.copy()
        phi = phi.copy()
        if self.eom.imaginary:
            c /= np.linalg.norm(c)
            phi = orthonormalize(phi, self.model.grid)
        return State(phi, c, t)

    def step(self, state: State, t_limit: Optional[float] = None) -> State:
        """Advance by one accepted step, never past ``t_limit``."""
        y = self._pack(state)
        h = self.dt
        if t_limit is not None:
            h = min(h, t_limit - state.time)
        if self.integrator.method == "rk4":
            y_new = self._rk4(y, h)
            if not np.all(np.isfinite(y_new)):
                raise PropagationError("non-finite state after RK4 step", state.time)
            return self._finish(y_new, state.time + h)
        spec = self.integrator
        k1 = self._rhs(y)
        while True:
            if h < MIN_STEP:
                raise PropagationError(f"step size underflow (dt={h:.3e})", state.time)
            y_new, err, _ = self._dopri(y, h, k1)
            scale = spec.abs_tol + spec.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            e = float(np.max(np.abs(err / scale)))
            if not math.isfinite(e):
                e = math.inf
            factor = 5.0 if e == 0 else min(5.0, max(0.2, 0.9 * e ** -0.2))
            if e <= 1.0:
                proposed = min(h * factor, spec.max_dt)
                clipped = t_limit is not None and h < self.dt and abs(state.time + h - t_limit) < 1e-14
                # keep the unclipped step size when the step was shortened to hit a sample time
                self.dt = max(self.dt, proposed) if clipped else proposed
                return self._finish(y_new, state.time + h)
            h *= factor

    def advance(self, state: State, t_end: float) -> State:
        while state.time < t_end - 1e-13:
            state = self.step(state, t_end)
        return state


def initial_guess(model: Model, space: FockSpace, seed: int = 0, noise: float = 1e-6) -> State:
    """Lowest trap eigenfunctions, all particles in the first, plus small seeded noise."""
    phi = ho_orbitals(model.grid, model.trap, space.m)
    rng = np.random.default_rng(seed)
    c = noise * (rng.uniform(-1, 1, space.dim) + 1j * rng.uniform(-1, 1, space.dim))
    ground = np.zeros(space.m, dtype=np.int64)
    ground[0] = space.n_particles
    k = space.position(ground)
    c[k] = 1.0
    return State(phi, c / np.linalg.norm(c), 0.0)


@dataclass
class RelaxResult:
    state: State
    energy: float
    trace: list[float] = field(default_factory=list)
    converged: bool = False
    steps: int = 0
    flags: int = 0


def relax(initial: State, model: Model, space: FockSpace, integrator: Optional[IntegratorSpec] = None,
          tol_energy: float = 1e-10, max_steps: int = 200_000,
          callback: Optional[Callable[[State, float], None]] = None,
          monotone_slack: float = 1e-12) -> RelaxResult:
    """Imaginary-time propagation until ``|dE/dtau| < tol_energy``.

    A step that raises the energy by more than ``monotone_slack`` (relative)
    is rejected and retried with half the step, and the step cap drops below
    the failed size; the step regrows towards that cap after a run of
    accepted steps.  Steps at the floor ``dt / 16`` are always accepted, so a
    flow that is not a strict descent (restricted spaces with a singular
    boundary system) still progresses.  This keeps explicit
    integration inside its stability region when the configuration-space
    spectrum is wide.
    """
    integrator = integrator or IntegratorSpec(method="rk4", dt=0.01)
    prop = Propagator(model, space, integrator, imaginary=True)
    ops = prop.eom.ops
    state = initial.copy()
    state.coeffs = state.coeffs / np.linalg.norm(state.coeffs)
    state.orbitals = orthonormalize(state.orbitals, model.grid)
    e_old = energy(state, model, space, ops)
    trace = [e_old]
    dt_cap = integrator.dt if integrator.method == "rk4" else integrator.max_dt
    dt_floor = dt_cap / 16
    streak = 0
    n = 0
    attempts = 0
    while n < max_steps:
        attempts += 1
        if attempts > 4 * max_steps:
            break
        t_old = state.time
        trial = prop.step(state)
        e_new = energy(trial, model, space, ops)
        rising = e_new > e_old + monotone_slack * max(1.0, abs(e_old))
        if not np.isfinite(e_new) or (rising and trial.time - t_old > dt_floor):
            failed = trial.time - t_old
            dt_cap = max(dt_floor, min(dt_cap, 0.8 * failed))
            prop.dt = max(dt_floor, 0.5 * failed)
            streak = 0
            if not np.isfinite(e_new) and failed <= dt_floor:
                raise PropagationError("imaginary-time step produced a non-finite energy", t_old)
            continue
        n += 1
        state = trial
        streak += 1
        if streak >= 20 and prop.dt < dt_cap:
            prop.dt = min(dt_cap, 1.5 * prop.dt)
            streak = 0
        trace.append(e_new)
        if callback is not None:
            callback(state, e_new)
        rate = abs(e_new - e_old) / (state.time - t_old)
        e_old = e_new
        if rate < tol_energy:
            return RelaxResult(state, e_new, trace, True, n, prop.eom.flag_count)
    log.warning("relaxation did not converge in %d steps (last rate above %.1e)", max_steps, tol_energy)
    return RelaxResult(state, e_old, trace, False, n, prop.eom.flag_count)


@dataclass
class Protocol:
    kind: Literal["relax", "propagate", "quench"] = "quench"
    t_final: float = 15.0
    sample_interval: float = 0.05
    quench: Optional[Interaction] = None

    def __post_init__(self):
        if self.kind not in ("relax", "propagate", "quench"):
            raise ValueError(f"unknown protocol {self.kind!r}")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if not self.sample_interval > 0:
            raise ValueError("sample_interval must be positive")


@dataclass
class Sample:
    t: float
    energy: float
    norm: float
    rho0: float
    occupations: np.ndarray


@dataclass
class ProtocolResult:
    samples: list[Sample]
    final_state: State
    relaxed_energy: Optional[float] = None
    flags: int = 0
    density: Optional[np.ndarray] = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])


def sample_observables(state: State, model: Model, space: FockSpace, ops) -> Sample:
    rho1 = ops.rho1(state.coeffs)
    dens = density_profile(state, model.grid, space, rho1=rho1)
    return Sample(
        state.time,
        energy(state, model, space, ops),
        float(np.linalg.norm(state.coeffs)),
        rho_at_origin(dens, model.grid),
        natural_occupations(state, space, rho1=rho1),
    )


def propagate(state: State, model: Model, space: FockSpace, integrator: IntegratorSpec,
              t_final: float, sample_interval: float) -> ProtocolResult:
    """Real-time propagation from ``state.time`` sampling observables on a uniform time grid."""
    prop = Propagator(model, space, integrator)
    ops = prop.eom.ops
    t0 = state.time
    n_samples = int(round((t_final - t0) / sample_interval))
    samples = [sample_observables(state, model, space, ops)]
    for k in range(1, n_samples + 1):
        state = prop.advance(state, t0 + k * sample_interval)
        samples.append(sample_observables(state, model, space, ops))
    dens = density_profile(state, model.grid, space, ops)
    return ProtocolResult(samples, state, flags=prop.eom.flag_count, density=dens)


def run_protocol(protocol: Protocol, model: Model, space: FockSpace, integrator: IntegratorSpec,
                 relax_integrator: Optional[IntegratorSpec] = None, seed: int = 0,
                 initial: Optional[State] = None, tol_energy: float = 1e-10) -> ProtocolResult:
    """Relax under ``model``; for ``quench`` swap in ``protocol.quench`` and propagate."""
    if protocol.kind == "propagate":
        if initial is None:
            raise ValueError("propagate protocol needs an initial state")
        return propagate(initial, model, space, integrator, protocol.t_final, protocol.sample_interval)
    start = initial or initial_guess(model, space, seed)
    rel = relax(start, model, space, relax_integrator, tol_energy=tol_energy)
    if not rel.converged:
        log.warning("initial relaxation not converged; continuing from best state")
    if protocol.kind == "relax":
        ops = FockOperators(space)
        dens = density_profile(rel.state, model.grid, space, ops)
        return ProtocolResult([sample_observables(rel.state, model, space, ops)], rel.state, rel.energy, rel.flags, dens)
    state = rel.state.copy()
    state.time = 0.0
    quenched = model.with_interaction(protocol.quench) if protocol.quench is not None else model
    out = propagate(state, quenched, space, integrator, protocol.t_final, protocol.sample_interval)
    out.relaxed_energy = rel.energy
    out.flags += rel.flags
    return out

