"""Unitary and dissipative propagation of spin registers.

Every matrix exponential here is a hermitian eigendecomposition, so each
unitary step is exact for the Hamiltonian it is handed.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .hamiltonian import QuenchKind, QuenchSpec, build_central_quench_h1, build_dipolar_secular, nuclear_zeeman
from .spin import SpinRegister, electron_spin_operators, embed_site_operator, is_hermitian, spin_half_operators

DEFAULT_DT = 1e-9
DEFAULT_T2E = 7e-6
_CHUNK_BYTES = 64 * 2 ** 20


@dataclass(frozen=True)
class TimeGrid:
    """Output times ``linspace(t_start, t_end, n_output)`` plus the integrator substep."""

    t_start: float
    t_end: float
    n_output: int
    dt_internal: float = DEFAULT_DT

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.n_output < 2:
            raise ValueError("n_output must be at least 2")
        if not self.dt_internal > 0:
            raise ValueError("dt_internal must be positive")
        spacing = (self.t_end - self.t_start) / (self.n_output - 1)
        if self.dt_internal > spacing * (1 + 1e-12):
            object.__setattr__(self, "dt_internal", spacing)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_output)

    @property
    def spacing(self) -> float:
        return (self.t_end - self.t_start) / (self.n_output - 1)

    @property
    def substeps(self) -> int:
        """Integrator steps per output interval (the substep is shrunk to fit)."""
        return max(1, math.ceil(self.spacing / self.dt_internal - 1e-9))

    @classmethod
    def span(cls, t_end, step, dt_internal=DEFAULT_DT, t_start=0.0):
        n = int(round((t_end - t_start) / step)) + 1
        return cls(t_start, t_end, n, min(dt_internal, step))


@dataclass
class Trajectory:
    """States at the output times of ``grid``: shape ``(n, dim)`` or ``(n, dim, dim)``."""

    grid: TimeGrid
    states: np.ndarray
    register: Optional[SpinRegister] = None
    schedule: object = None
    quench: Optional[QuenchSpec] = None

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def is_mixed(self) -> bool:
        return self.states.ndim == 3

    def densities(self) -> np.ndarray:
        if self.is_mixed:
            return self.states
        return np.einsum("ti,tj->tij", self.states, self.states.conj())


@dataclass
class LindbladModel:
    """Collapse operators with rates (rad/s) and the coherence times they encode."""

    collapse: list = field(default_factory=list)
    T2n_star: Optional[float] = None
    T2e: Optional[float] = None

    def __post_init__(self):
        for _, rate in self.collapse:
            if rate < 0:
                raise ValueError(f"collapse rate must be nonnegative, got {rate!r}")


def dephasing_model(register: SpinRegister, T2n_star: Optional[float] = None,
                    T2e: Optional[float] = DEFAULT_T2E) -> LindbladModel:
    """Pure dephasing: ``2Iz`` per nucleus at ``1/(2 T2n*)``; ``Sz`` on the electron.

    The electron rate is ``2/T2e`` so that ``|0><+-1|`` coherences decay as
    ``exp(-t/T2e)``. It is only added when the register holds the electron.
    """
    iz = spin_half_operators()[2]
    collapse = []
    if T2n_star is not None:
        for i in range(1, register.n_nuclei + 1):
            collapse.append((2.0 * embed_site_operator(iz, i, register), 1.0 / (2.0 * T2n_star)))
    if register.include_electron and T2e is not None:
        collapse.append((electron_spin_operators(register)[2], 2.0 / T2e))
    return LindbladModel(collapse, T2n_star, T2e if register.include_electron else None)


def _eig_propagator(h, dt):
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * dt)[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)


def evolve_static(h: np.ndarray, psi0: np.ndarray, grid: TimeGrid, register=None) -> Trajectory:
    """Exact evolution ``U exp(-i w t) U^dag psi0`` from a single eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise ValueError("evolve_static needs a hermitian Hamiltonian")
    w, v = np.linalg.eigh(h)
    c0 = v.conj().T @ np.asarray(psi0, dtype=complex)
    t = grid.times - grid.t_start
    phases = np.exp(-1j * np.outer(t, w))
    states = (phases * c0[None, :]) @ v.T
    return Trajectory(grid, states, register)


def _hamiltonian_stack(builder, ts):
    if hasattr(builder, "batch"):
        hs = np.asarray(builder.batch(ts), dtype=complex)
    else:
        hs = np.stack([np.asarray(builder(t), dtype=complex) for t in ts])
    return hs


def evolve_timedep(builder: Callable, psi0: np.ndarray, grid: TimeGrid, register=None,
                   check_hermitian: bool = True) -> Trajectory:
    """Exponential-midpoint stepping ``psi <- exp(-i H(t + dt/2) dt) psi``.

    ``builder`` maps a time (s) to a hermitian matrix; an optional
    ``builder.batch(times)`` returning a stack is used when present.
    """
    psi = np.asarray(psi0, dtype=complex).copy()
    dim = psi.shape[0]
    nsub = grid.substeps
    dt = grid.spacing / nsub
    out = np.empty((grid.n_output, dim), dtype=complex)
    out[0] = psi
    # all midpoints, processed in chunks to bound memory
    n_steps = nsub * (grid.n_output - 1)
    chunk = max(nsub, (_CHUNK_BYTES // (16 * dim * dim)) // nsub * nsub)
    step = 0
    while step < n_steps:
        stop = min(n_steps, step + chunk)
        mids = grid.t_start + (np.arange(step, stop) + 0.5) * dt
        hs = _hamiltonian_stack(builder, mids)
        if check_hermitian and np.max(np.abs(hs - np.swapaxes(hs.conj(), -1, -2))) > 1e-12 * max(1.0, np.max(np.abs(hs))):
            raise ValueError("builder returned a non-hermitian matrix")
        us = _eig_propagator(hs, dt)
        for k in range(stop - step):
            psi = us[k] @ psi
            if (step + k + 1) % nsub == 0:
                out[(step + k + 1) // nsub] = psi
        step = stop
    return Trajectory(grid, out, register)


def _dissipator(rho, ops):
    d = np.zeros_like(rho)
    for l, ldl, rate in ops:
        d += rate * (l @ rho @ l.conj().T - 0.5 * (ldl @ rho + rho @ ldl))
    return d


def _rk4(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


class LindbladInstability(RuntimeError):
    pass


def evolve_lindblad(builder, rho0: np.ndarray, model: LindbladModel, grid: TimeGrid,
                    register=None, method: str = "rk4") -> Trajectory:
    """Integrate ``drho/dt = -i[H(t), rho] + sum_k g_k (L rho L^dag - {L^dag L, rho}/2)``.

    ``builder`` is either a hermitian matrix (static case) or ``t -> H(t)``.

    ``method="rk4"`` applies classical fourth-order Runge-Kutta to the full
    right-hand side; stable only while ``|H| dt`` stays below ~2.
    ``method="split"`` is a Strang splitting: exact half-step unitaries (with
    ``H`` at the step midpoint) around one RK4 step of the dissipator alone,
    which is what makes GHz-scale Hamiltonians affordable at ns steps.
    """
    if method not in ("rk4", "split"):
        raise ValueError(f"unknown method {method!r}")
    static = not callable(builder)
    if static:
        h_static = np.asarray(builder, dtype=complex)
        if not is_hermitian(h_static):
            raise ValueError("Hamiltonian must be hermitian")
        h_at = lambda t: h_static
    else:
        h_at = builder
    rho = np.asarray(rho0, dtype=complex).copy()
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    ops = [(l, l.conj().T @ l, rate) for l, rate in model.collapse if rate > 0]
    nsub = grid.substeps
    dt = grid.spacing / nsub
    out = np.empty((grid.n_output,) + rho.shape, dtype=complex)
    out[0] = rho
    tr0 = np.trace(rho).real
    u_half = _eig_propagator(h_static, dt / 2) if (static and method == "split") else None

    def diss(r):
        return _dissipator(r, ops)

    def rhs(r, tt):
        h = h_at(tt)
        return -1j * (h @ r - r @ h) + diss(r)

    t = grid.t_start
    for k in range(1, grid.n_output):
        for _ in range(nsub):
            if method == "rk4":
                k1 = rhs(rho, t)
                k2 = rhs(rho + 0.5 * dt * k1, t + 0.5 * dt)
                k3 = rhs(rho + 0.5 * dt * k2, t + 0.5 * dt)
                k4 = rhs(rho + dt * k3, t + dt)
                rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            else:
                u = u_half if u_half is not None else _eig_propagator(np.asarray(h_at(t + 0.5 * dt), dtype=complex), dt / 2)
                rho = u @ rho @ u.conj().T
                if ops:
                    rho = _rk4(diss, rho, dt)
                rho = u @ rho @ u.conj().T
            t += dt
        drift = abs(np.trace(rho).real - tr0)
        size = np.linalg.norm(rho)
        if drift > 1e-6 or not np.isfinite(size) or size > 1.0 + 1e-6:
            raise LindbladInstability(
                f"integration unstable at t={t:.3e} s: trace drift {drift:.2e}, |rho|_F={size:.3e}; "
                f"reduce dt_internal ({dt:.2e} s) or use method='split'"
            )
        rho = 0.5 * (rho + rho.conj().T)
        out[k] = rho
    return Trajectory(grid, out, register)


def apply_manifold_quench(psi_nuclear: np.ndarray, spec: QuenchSpec, register: SpinRegister):
    """Instantaneous electron flip: nuclei unchanged, Hamiltonian becomes ``H0 + H1(ms)``.

    ``H0`` is the secular dipolar term of ``spec.pairs``; any field in
    ``spec.schedule`` (static) is kept on both sides of the quench.
    """
    if spec.kind is not QuenchKind.CENTRAL_SPIN:
        raise ValueError(f"apply_manifold_quench needs a central-spin quench, got {spec.kind.value}")
    h = build_dipolar_secular(spec.pairs, register)
    if spec.schedule is not None:
        h = h + nuclear_zeeman((spec.schedule.bx0, spec.schedule.bz), register)
    h_post = h + build_central_quench_h1(spec.sites, spec.ms_target, register)
    return h_post, np.asarray(psi_nuclear, dtype=complex).copy()
