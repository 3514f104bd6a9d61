"""Classical Fisher information for the nuclear coupling from a single-spin readout."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constants import DEFAULT_CONSTANTS, TWO_PI
from .hamiltonian import FieldQuenchBuilder, FieldSchedule, PairGeometry
from .propagation import TimeGrid, evolve_static, evolve_timedep
from .spin import SpinRegister

DEGENERATE_FLOOR = 1e-12


@dataclass
class FisherSeries:
    times: np.ndarray
    p_up: np.ndarray
    fi: np.ndarray
    beta_ref: float
    delta_beta: float
    fd_rel_change: float

    def relative_to_t2(self) -> np.ndarray:
        """``FI / t^2`` (NaN at t = 0)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.fi / self.times ** 2


def default_delta_beta(beta_ref: float) -> float:
    return max(1e-4 * abs(beta_ref), TWO_PI * 1.0)


def measured_populations(beta12: float, schedule: FieldSchedule, psi0, grid: TimeGrid,
                         measured_site: int = 1, constants=DEFAULT_CONSTANTS):
    """``(P_up, P_down)`` of one nucleus of the two-spin probe at coupling ``beta12``."""
    reg = SpinRegister(2)
    if measured_site not in (1, 2):
        raise IndexError(f"measured_site must be 1 or 2, got {measured_site!r}")
    builder = FieldQuenchBuilder([PairGeometry.from_coupling(1, 2, beta12, constants)], schedule, reg, constants)
    if schedule.is_static:
        traj = evolve_static(builder(0.0), psi0, grid, reg)
    else:
        traj = evolve_timedep(builder, psi0, grid, reg)
    amps = traj.states.reshape(-1, 2, 2)
    pops = np.abs(amps) ** 2
    axis = 2 if measured_site == 1 else 1
    marg = pops.sum(axis=axis)
    return marg[:, 0], marg[:, 1]


def _fisher(beta, delta, schedule, psi0, grid, site, constants):
    up_p, down_p = measured_populations(beta + delta, schedule, psi0, grid, site, constants)
    up_m, down_m = measured_populations(beta - delta, schedule, psi0, grid, site, constants)
    p_up, p_down = measured_populations(beta, schedule, psi0, grid, site, constants)
    # differentiate whichever branch is smaller: it carries the better relative precision
    use_down = p_down < p_up
    d_up = (up_p - up_m) / (2 * delta)
    d_down = (down_p - down_m) / (2 * delta)
    deriv = np.where(use_down, -d_down, d_up)
    denom = p_up * p_down
    with np.errstate(divide="ignore", invalid="ignore"):
        fi = np.where(denom < DEGENERATE_FLOOR, np.nan, deriv ** 2 / denom)
    # no beta dependence yet (e.g. t = 0): zero information rather than 0/0
    fi[(denom < DEGENERATE_FLOOR) & (d_up == 0) & (d_down == 0)] = 0.0
    return p_up, fi


def fisher_information(beta_ref: float, schedule: FieldSchedule, psi0, grid: TimeGrid,
                       measured_site: int = 1, delta_beta: Optional[float] = None,
                       constants=DEFAULT_CONSTANTS) -> FisherSeries:
    """Fisher information about ``beta12`` from measuring ``measured_site`` in the z basis.

    ``FI = (dP/dbeta)^2 / (P (1 - P))`` with a central difference of step
    ``delta_beta``. Points with ``P(1-P) < 1e-12`` are NaN, except where the
    difference quotient is exactly zero (no coupling dependence yet, as at
    ``t = 0``), which carry zero information. The result also
    records how much FI moves when the step is halved (``fd_rel_change``).
    """
    delta = default_delta_beta(beta_ref) if delta_beta is None else float(delta_beta)
    if not delta > 0:
        raise ValueError("delta_beta must be positive")
    p_up, fi = _fisher(beta_ref, delta, schedule, psi0, grid, measured_site, constants)
    _, fi_half = _fisher(beta_ref, delta / 2, schedule, psi0, grid, measured_site, constants)
    ok = np.isfinite(fi) & np.isfinite(fi_half) & (fi > 0)
    change = float(np.max(np.abs(fi_half[ok] - fi[ok]) / fi[ok])) if ok.any() else 0.0
    return FisherSeries(grid.times, p_up, fi, beta_ref, delta, change)
