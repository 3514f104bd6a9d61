"""Loschmidt echo, rate function, magnetization and critical-time detection."""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constants import DEFAULT_CONSTANTS
from .hamiltonian import build_field_quench_pair
from .propagation import TimeGrid, Trajectory, evolve_static
from .spin import SpinRegister, basis_state

PROB_FLOOR = 1e-300
LOG_FLOOR = -math.log(PROB_FLOOR)


@dataclass
class ObservableSeries:
    times: np.ndarray
    p_down: np.ndarray
    p_up: np.ndarray
    lam: np.ndarray
    mz: np.ndarray
    n_nuclei: int
    concurrence: Optional[np.ndarray] = None
    tangle: Optional[np.ndarray] = None

    @property
    def saturated(self) -> np.ndarray:
        """Points where the rate function hit the probability floor."""
        return self.lam >= (LOG_FLOOR - 1.0) / self.n_nuclei


@dataclass
class CriticalTimes:
    switch_times: list = field(default_factory=list)
    mz_zero_times: list = field(default_factory=list)
    skipped_brackets: list = field(default_factory=list)

    @property
    def first(self) -> float:
        return self.switch_times[0] if self.switch_times else math.nan


def _register(traj: Trajectory) -> SpinRegister:
    if traj.register is None:
        raise ValueError("trajectory carries no register")
    return traj.register


def nuclear_populations(traj: Trajectory) -> np.ndarray:
    """Computational-basis populations of the nuclei, electron traced out: ``(n_t, 2**N)``."""
    reg = _register(traj)
    if traj.is_mixed:
        pops = np.real(np.einsum("tii->ti", traj.states))
    else:
        pops = np.abs(traj.states) ** 2
    if reg.include_electron:
        pops = pops.reshape(len(pops), 3, 2 ** reg.n_nuclei).sum(axis=1)
    return pops


def loschmidt_amplitude(traj: Trajectory, psi0: np.ndarray) -> np.ndarray:
    """``G(t_k) = <psi0|psi(t_k)>`` for a pure-state trajectory."""
    psi0 = np.asarray(psi0, dtype=complex)
    if traj.is_mixed:
        raise ValueError("Loschmidt amplitude needs pure states")
    if psi0.shape[0] != traj.states.shape[1]:
        raise ValueError(f"initial state dim {psi0.shape[0]} does not match trajectory dim {traj.states.shape[1]}")
    return traj.states @ psi0.conj()


def manifold_probabilities(traj: Trajectory):
    """Return ``(P_down, P_up)``: weights of all-down and all-up nuclear configurations."""
    reg = _register(traj)
    if reg.n_nuclei < 2:
        raise ValueError("manifold probabilities need at least two nuclei")
    pops = np.clip(nuclear_populations(traj), 0.0, 1.0)
    return pops[:, -1].copy(), pops[:, 0].copy()


def rate_function(p_down, p_up, n: int) -> np.ndarray:
    """``min over branches of -(1/N) log P`` with probabilities clamped to ``[1e-300, 1]``."""
    if n < 1:
        raise ValueError("N must be at least 1")
    pd = np.clip(np.asarray(p_down, dtype=float), PROB_FLOOR, 1.0)
    pu = np.clip(np.asarray(p_up, dtype=float), PROB_FLOOR, 1.0)
    return np.minimum(-np.log(pd), -np.log(pu)) / n


def magnetization(traj: Trajectory) -> np.ndarray:
    """Mean nuclear ``<Iz>``."""
    reg = _register(traj)
    n = reg.n_nuclei
    pops = nuclear_populations(traj).reshape((-1,) + (2,) * n)
    mz = np.zeros(pops.shape[0])
    for k in range(n):
        axes = tuple(a for a in range(1, n + 1) if a != k + 1)
        marg = pops.sum(axis=axes) if axes else pops
        mz += 0.5 * (marg[:, 0] - marg[:, 1])
    return mz / n


def _sign_roots(times, f, valid=None):
    """Linearly interpolated roots of ``f`` across sign changes, plus skipped brackets."""
    roots, skipped = [], []
    s = np.sign(f)
    for k in range(len(f) - 1):
        if s[k] == 0:
            if k > 0 and s[k - 1] != 0 and (k + 1 < len(s)) and s[k - 1] != s[k + 1] and s[k + 1] != 0:
                roots.append(float(times[k]))
            continue
        if s[k + 1] != 0 and s[k] != s[k + 1]:
            if valid is not None and not (valid[k] or valid[k + 1]):
                skipped.append((float(times[k]), float(times[k + 1])))
                continue
            frac = f[k] / (f[k] - f[k + 1])
            roots.append(float(times[k] + frac * (times[k + 1] - times[k])))
    return roots, skipped


def detect_critical_times(p_down, p_up, times, mz=None) -> CriticalTimes:
    """Branch switches of the rate function and zero crossings of the magnetization.

    A switch is a sign change of ``log P_up - log P_down``. Brackets where both
    probabilities sit at the clamp floor carry no information and are skipped.
    """
    times = np.asarray(times, dtype=float)
    pd = np.clip(np.asarray(p_down, dtype=float), PROB_FLOOR, 1.0)
    pu = np.clip(np.asarray(p_up, dtype=float), PROB_FLOOR, 1.0)
    f = np.log(pu) - np.log(pd)
    valid = (pd > PROB_FLOOR) | (pu > PROB_FLOOR)
    switches, skipped = _sign_roots(times, f, valid)
    zeros = []
    if mz is not None:
        zeros, _ = _sign_roots(times, np.asarray(mz, dtype=float))
    return CriticalTimes(switches, zeros, skipped)


def kink_times(lam, times, rel_threshold: float = 0.25) -> list:
    """Cross-check: times where the slope of ``lam`` jumps by more than ``rel_threshold``
    of its typical size. Coarser than :func:`detect_critical_times`."""
    lam = np.asarray(lam, dtype=float)
    times = np.asarray(times, dtype=float)
    if len(lam) < 4:
        return []
    d = np.diff(lam) / np.diff(times)
    jump = np.abs(np.diff(d))
    scale = np.median(np.abs(d)) + 1e-300
    idx = np.where((jump > rel_threshold * scale) & (jump >= np.roll(jump, 1)) & (jump >= np.roll(jump, -1)))[0]
    return [float(times[i + 1]) for i in idx]


def observable_series(traj: Trajectory, concurrence=None, tangle=None) -> ObservableSeries:
    p_down, p_up = manifold_probabilities(traj)
    n = _register(traj).n_nuclei
    return ObservableSeries(
        traj.times, p_down, p_up, rate_function(p_down, p_up, n), magnetization(traj), n,
        concurrence=concurrence, tangle=tangle,
    )


# --------------------------------------------------------------------------- phase diagram

@dataclass
class PhaseDiagram:
    """Indexed ``[i_bx, j_bz]``; ``first_tc`` is NaN where no transition occurs."""

    bx_grid: np.ndarray
    bz_grid: np.ndarray
    dqpt_flag: np.ndarray
    first_tc: np.ndarray
    mean_mz: np.ndarray
    horizon: float

    def no_dqpt_fraction(self, j_bz: int) -> float:
        return float(np.mean(~self.dqpt_flag[:, j_bz]))


def _phase_point(h0, sum_ix, sum_iz, psi0, register, grid, bx, bz):
    traj = evolve_static(h0 + bx * sum_ix + bz * sum_iz, psi0, grid, register)
    pd, pu = manifold_probabilities(traj)
    mz = magnetization(traj)
    crit = detect_critical_times(pd, pu, grid.times)
    return crit.first, float(np.mean(mz))


def _phase_column(args):
    pairs, bx_grid, bz, horizon, n_output, n_nuclei, constants = args
    reg = SpinRegister(n_nuclei)
    h0, sum_ix = build_field_quench_pair(pairs, (1.0, 0.0), reg, constants)
    _, sum_iz = build_field_quench_pair(pairs, (0.0, 1.0), reg, constants)
    psi0 = basis_state("↓" * n_nuclei, reg)
    grid = TimeGrid(0.0, horizon, n_output)
    return [_phase_point(h0, sum_ix, sum_iz, psi0, reg, grid, bx, bz) for bx in bx_grid]


def phase_diagram(bx_grid, bz_grid, pairs, horizon: float = 20e-6, n_output: int = 2000,
                  n_nuclei: int = 2, workers: Optional[int] = None, constants=DEFAULT_CONSTANTS) -> PhaseDiagram:
    """Field-quench sweep from the all-down state over a ``(Bx, Bz)`` grid in Gauss.

    Columns of constant ``Bz`` are farmed out to ``workers`` processes
    (default: all CPUs); results are assembled in grid order.
    """
    bx_grid = np.asarray(bx_grid, dtype=float)
    bz_grid = np.asarray(bz_grid, dtype=float)
    if bx_grid.size == 0 or bz_grid.size == 0:
        raise ValueError("field grids must be nonempty")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    jobs = [(tuple(pairs), bx_grid, float(bz), horizon, n_output, n_nuclei, constants) for bz in bz_grid]
    workers = workers or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            columns = list(pool.map(_phase_column, jobs))
    else:
        columns = [_phase_column(j) for j in jobs]
    first_tc = np.array([[c[i][0] for c in columns] for i in range(len(bx_grid))])
    mean_mz = np.array([[c[i][1] for c in columns] for i in range(len(bx_grid))])
    return PhaseDiagram(bx_grid, bz_grid, np.isfinite(first_tc), first_tc, mean_mz, horizon)
