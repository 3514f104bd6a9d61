"""Hamiltonians of an NV electron spin coupled to 13C nuclear spins.

Conventions
-----------
* Entries are angular frequencies (rad/s); fields are given in Gauss.
* ``PairGeometry.beta`` is the secular dipolar coupling
  ``-(mu0 hbar gamma_n^2 / 4 pi r^3)(1 - 3 cos^2 theta)``, so the secular
  pair Hamiltonian is ``(beta/4)[(I+I- + I-I+) - 4 IzIz]``.
* ``PairGeometry.beta12 = beta / 2`` is the coupling in the two-spin form
  ``(beta12/2)[(I+I- + I-I+) - 4 IzIz]`` used for field quenches, chains and
  the Fisher-information probe. At ``theta = 0`` it equals
  ``mu0 hbar gamma_n^2 / (4 pi r^3)``.
* Constant electron offsets (``ms^2 D + ms gamma_e Bz``) are dropped from
  manifold-conditioned Hamiltonians; they only add a global phase.
"""

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .constants import DEFAULT_CONSTANTS, TWO_PI, PhysicalConstants
from .spin import (
    SpinRegister,
    electron_spin_operators,
    nuclear_spin_operators,
)

MAGIC_ANGLE = math.acos(1.0 / math.sqrt(3.0))


def _hermitize(h):
    return 0.5 * (h + h.conj().T)


# --------------------------------------------------------------------------- geometry

def dipolar_prefactor(r: float, theta: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Secular nuclear dipolar coupling ``beta`` (rad/s) for separation ``r`` (m)."""
    if not r > 0:
        raise ValueError(f"separation must be positive, got {r!r}")
    k = constants.mu0_hbar_factor * constants.gamma_n_si ** 2 / r ** 3
    return -k * (1.0 - 3.0 * math.cos(theta) ** 2)


@dataclass(frozen=True)
class PairGeometry:
    """Relative geometry of nuclei ``i`` and ``j`` (labels from 1)."""

    i: int
    j: int
    r: float
    theta: float = 0.0
    phi: float = 0.0
    constants: PhysicalConstants = field(default=DEFAULT_CONSTANTS, repr=False)

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"pair ({self.i},{self.j}) needs r > 0, got {self.r!r}")
        if self.i == self.j:
            raise ValueError("a pair needs two distinct nuclei")

    @property
    def prefactor(self) -> float:
        """``mu0 hbar gamma_n^2 / (4 pi r^3)`` in rad/s."""
        return self.constants.mu0_hbar_factor * self.constants.gamma_n_si ** 2 / self.r ** 3

    @property
    def beta(self) -> float:
        return dipolar_prefactor(self.r, self.theta, self.constants)

    @property
    def beta12(self) -> float:
        return 0.5 * self.beta

    @classmethod
    def from_positions(cls, i, j, pos_i, pos_j, constants=DEFAULT_CONSTANTS):
        d = np.asarray(pos_j, float) - np.asarray(pos_i, float)
        r = float(np.linalg.norm(d))
        theta = math.acos(max(-1.0, min(1.0, d[2] / r)))
        phi = math.atan2(d[1], d[0])
        return cls(i, j, r, theta, phi, constants)

    @classmethod
    def from_coupling(cls, i, j, beta12: float, constants=DEFAULT_CONSTANTS):
        """Pair along z (or in-plane if ``beta12 < 0``) realising a given ``beta12``."""
        if beta12 == 0:
            raise ValueError("zero coupling has no finite separation; use the magic angle instead")
        k = constants.mu0_hbar_factor * constants.gamma_n_si ** 2
        if beta12 > 0:
            return cls(i, j, (k / beta12) ** (1 / 3), 0.0, 0.0, constants)
        return cls(i, j, (k / (-2.0 * beta12)) ** (1 / 3), math.pi / 2, 0.0, constants)


def make_chain_geometry(n: int, beta12: float, constants=DEFAULT_CONSTANTS) -> list:
    """Nearest-neighbour pairs ``(k, k+1)`` of an ``n``-spin chain, all with ``beta12``."""
    if n < 2:
        raise ValueError(f"a chain needs at least two spins, got {n}")
    return [PairGeometry.from_coupling(k, k + 1, beta12, constants) for k in range(1, n)]


@dataclass(frozen=True)
class CarbonSite:
    """A 13C nucleus with a position (m, NV at origin) and/or a hyperfine z-row (rad/s)."""

    index: int
    position: Optional[tuple] = None
    hyperfine_row: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        if self.position is None and self.hyperfine_row is None:
            raise ValueError(f"site {self.index} needs a position or a hyperfine row")

    def row(self, constants=DEFAULT_CONSTANTS) -> np.ndarray:
        """``(A_zx, A_zy, A_zz)`` in rad/s, from data or the point-dipole tensor."""
        if self.hyperfine_row is not None:
            return np.asarray(self.hyperfine_row, dtype=float)
        return self.tensor(constants)[2]

    @property
    def a_ani(self) -> float:
        azx, azy, _ = self.row()
        return math.hypot(azx, azy)

    @property
    def phi(self) -> float:
        azx, azy, _ = self.row()
        if azx == 0 and azy == 0:
            return 0.0
        p = math.atan2(azy, azx)
        return math.pi if p == -math.pi else p

    @property
    def hyperfine_zz(self) -> float:
        return float(self.row()[2])

    def tensor(self, constants=DEFAULT_CONSTANTS) -> np.ndarray:
        """Full 3x3 hyperfine tensor from the point-dipole model.

        Without a position, a position reproducing the z-row is constructed
        first (see :func:`position_from_row`).
        """
        pos = self.position
        if pos is None:
            pos = position_from_row(self.hyperfine_row, constants)
            if pos is None:
                return np.zeros((3, 3))
        return point_dipole_tensor(pos, constants)


def point_dipole_tensor(position, constants=DEFAULT_CONSTANTS) -> np.ndarray:
    p = np.asarray(position, dtype=float)
    r = np.linalg.norm(p)
    if not r > 0:
        raise ValueError("nucleus cannot sit on the NV")
    u = p / r
    k = constants.mu0_hbar_factor * constants.gamma_e_si * constants.gamma_n_si / r ** 3
    return k * (np.eye(3) - 3.0 * np.outer(u, u))


def position_from_row(row, constants=DEFAULT_CONSTANTS):
    """A position whose point-dipole tensor has z-row ``row`` (rad/s).

    The z-row of ``k(1 - 3 u u^T)`` is ``k(-3 cos t sin t cos p, -3 cos t sin t sin p, 1 - 3 cos^2 t)``;
    the polar angle is found with ``cos t sin t >= 0`` and the azimuth then
    follows from the sign of the transverse part.
    """
    azx, azy, azz = (float(x) for x in row)
    a = math.hypot(azx, azy)
    if a == 0 and azz == 0:
        return None

    def g(t):
        c, s = math.cos(t), math.sin(t)
        return 3 * c * s * azz - a * (1 - 3 * c * c)

    if a == 0:
        theta = 0.0 if azz < 0 else math.pi / 2
    elif azz == 0:
        theta = MAGIC_ANGLE
    elif azz < 0:
        theta = brentq(g, 1e-12, MAGIC_ANGLE, xtol=1e-15)
    else:
        theta = brentq(g, MAGIC_ANGLE, math.pi / 2, xtol=1e-15)
    c, s = math.cos(theta), math.sin(theta)
    k = a / (3 * c * s) if a > 0 else azz / (1 - 3 * c * c)
    phi = math.atan2(-azy, -azx) if a > 0 else 0.0
    r = (constants.mu0_hbar_factor * constants.gamma_e_si * constants.gamma_n_si / k) ** (1 / 3)
    return (r * s * math.cos(phi), r * s * math.sin(phi), r * c)


# --------------------------------------------------------------------------- datasets

@dataclass(frozen=True)
class HyperfineDataset:
    name: str
    sites: tuple

    def site(self, index: int) -> CarbonSite:
        for s in self.sites:
            if s.index == index:
                return s
        raise KeyError(f"dataset {self.name!r} has no site {index}")

    def __len__(self):
        return len(self.sites)


def _load_datasets(text: str) -> dict:
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    grouped = {}
    for lineno, rec in enumerate(csv.reader(rows, delimiter="\t"), start=1):
        if lineno == 1:
            if [c.strip() for c in rec] != ["name", "set", "A_zx_kHz", "A_zy_kHz", "A_zz_kHz"]:
                raise ValueError(f"unexpected hyperfine header {rec}")
            continue
        if len(rec) != 5:
            raise ValueError(f"hyperfine record {rec} must have 5 fields")
        name, set_name = rec[0].strip(), rec[1].strip()
        try:
            row = tuple(TWO_PI * 1e3 * float(x) for x in rec[2:])
        except ValueError as exc:
            raise ValueError(f"corrupt hyperfine record {rec}: {exc}") from None
        grouped.setdefault(set_name, []).append((name, row))
    return {
        k: HyperfineDataset(k, tuple(CarbonSite(n + 1, hyperfine_row=row, name=nm) for n, (nm, row) in enumerate(v)))
        for k, v in grouped.items()
    }


_DATASETS = None


def literature_dataset(name: Optional[str] = None):
    """Hyperfine parameter sets shipped in ``data/hyperfine.tsv``.

    With no name, returns the dict of all sets.
    """
    global _DATASETS
    if _DATASETS is None:
        text = resources.files("dqpt_sim").joinpath("data/hyperfine.tsv").read_text(encoding="utf-8")
        _DATASETS = _load_datasets(text)
    if name is None:
        return dict(_DATASETS)
    try:
        return _DATASETS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown hyperfine dataset {name!r}; known: {sorted(_DATASETS)}") from None


# --------------------------------------------------------------------------- builders

def _check_pairs(pairs, register):
    for p in pairs:
        for k in (p.i, p.j):
            if not 1 <= k <= register.n_nuclei:
                raise IndexError(f"pair ({p.i},{p.j}) refers to nucleus {k} outside 1..{register.n_nuclei}")


def build_dipolar_full(pairs: Sequence[PairGeometry], register: SpinRegister) -> np.ndarray:
    """Nuclear dipolar Hamiltonian with all six alphabet terms A-F."""
    _check_pairs(pairs, register)
    ops = nuclear_spin_operators(register)
    h = np.zeros((register.dim, register.dim), dtype=complex)
    for p in pairs:
        _, _, zi, pi_, mi = ops[p.i]
        _, _, zj, pj, mj = ops[p.j]
        c, s = math.cos(p.theta), math.sin(p.theta)
        e1, e2 = np.exp(-1j * p.phi), np.exp(-2j * p.phi)
        a = zi @ zj * (1 - 3 * c * c)
        b = -0.25 * (pi_ @ mj + mi @ pj) * (1 - 3 * c * c)
        cc = -1.5 * (pi_ @ zj + zi @ pj) * s * c * e1
        d = -1.5 * (mi @ zj + zi @ mj) * s * c * np.conj(e1)
        e = -0.75 * pi_ @ pj * s * s * e2
        f = -0.75 * mi @ mj * s * s * np.conj(e2)
        h += p.prefactor * (a + b + cc + d + e + f)
    return _hermitize(h)


def build_dipolar_secular(pairs: Sequence[PairGeometry], register: SpinRegister) -> np.ndarray:
    """Secular dipolar Hamiltonian ``sum (beta/4)[(I+I- + I-I+) - 4 IzIz]``."""
    _check_pairs(pairs, register)
    ops = nuclear_spin_operators(register)
    h = np.zeros((register.dim, register.dim), dtype=complex)
    for p in pairs:
        _, _, zi, pi_, mi = ops[p.i]
        _, _, zj, pj, mj = ops[p.j]
        h += 0.25 * p.beta * ((pi_ @ mj + mi @ pj) - 4.0 * zi @ zj)
    return _hermitize(h)


def nuclear_zeeman(field_g, register: SpinRegister, constants=DEFAULT_CONSTANTS) -> np.ndarray:
    """``gamma_n (Bx sum Ix + Bz sum Iz)`` for ``field_g = (Bx, Bz)`` in Gauss."""
    bx, bz = field_g
    ops = nuclear_spin_operators(register)
    h = np.zeros((register.dim, register.dim), dtype=complex)
    for ix, _, iz, _, _ in ops.values():
        h += constants.gamma_n * (bx * ix + bz * iz)
    return h


def _hyperfine_z_row(sites, ms, register, constants):
    if ms == 0:
        return np.zeros((register.dim, register.dim), dtype=complex)
    ops = nuclear_spin_operators(register)
    h = np.zeros((register.dim, register.dim), dtype=complex)
    for site in sites:
        if site.index not in ops:
            raise IndexError(f"site {site.index} outside register")
        azx, azy, azz = site.row(constants)
        ix, iy, iz, _, _ = ops[site.index]
        h += ms * (azx * ix + azy * iy + azz * iz)
    return h


def build_field_quench_pair(pairs, field_g, register: SpinRegister, constants=DEFAULT_CONSTANTS):
    """``(H0, H1)``: secular dipolar part and the nuclear Zeeman part switched on by the quench."""
    if register.n_nuclei < 2:
        raise ValueError("a field quench needs at least two nuclei")
    return build_dipolar_secular(pairs, register), nuclear_zeeman(field_g, register, constants)


def build_conditioned_hamiltonian(ms: int, sites, field_g, pairs, register: SpinRegister,
                                  constants=DEFAULT_CONSTANTS) -> np.ndarray:
    """Nuclear Hamiltonian with the electron frozen in manifold ``ms``."""
    if ms not in (-1, 0, 1):
        raise ValueError(f"ms must be -1, 0 or +1, got {ms!r}")
    if ms != 0 and not sites:
        raise ValueError("hyperfine data required for ms != 0")
    h = build_dipolar_secular(pairs, register) + nuclear_zeeman(field_g, register, constants)
    if ms != 0:
        h = h + _hyperfine_z_row(sites, ms, register, constants)
    return h


def build_central_quench_h1(sites, ms: int, register: SpinRegister, constants=DEFAULT_CONSTANTS) -> np.ndarray:
    """Hyperfine term switched on when the electron is flipped into ``ms = +-1``.

    Written per site as ``ms [A_zz Iz + (A_ani/2)(I+ e^{-i phi} + I- e^{i phi})]``.
    """
    if ms not in (-1, 1):
        raise ValueError(f"central quench needs ms = +1 or -1, got {ms!r}")
    ops = nuclear_spin_operators(register)
    h = np.zeros((register.dim, register.dim), dtype=complex)
    for site in sites:
        if site.index not in ops:
            raise IndexError(f"site {site.index} outside register")
        _, _, iz, ip, im = ops[site.index]
        a, phi = site.a_ani, site.phi
        h += ms * (site.hyperfine_zz * iz + 0.5 * a * (ip * np.exp(-1j * phi) + im * np.exp(1j * phi)))
    return _hermitize(h)


def build_full_hamiltonian(sites, field_g, pairs, register: SpinRegister,
                           constants=DEFAULT_CONSTANTS) -> np.ndarray:
    """Electron-nuclear Hamiltonian without any secular approximation.

    ``D Sz^2 + gamma_e B.S + S.sum(A_i.I_i) + gamma_n B.sum(I_i) + H_dip``
    with the full alphabet dipolar term.
    """
    if not register.include_electron:
        raise ValueError("the full model needs a register with the electron")
    bx, bz = field_g
    sx, sy, sz = electron_spin_operators(register)
    s_vec = (sx, sy, sz)
    h = constants.D * sz @ sz + constants.gamma_e * (bx * sx + bz * sz)
    ops = nuclear_spin_operators(register)
    for site in sites:
        if site.index not in ops:
            raise IndexError(f"site {site.index} outside register")
        t = site.tensor(constants)
        i_vec = ops[site.index][:3]
        for a in range(3):
            for b in range(3):
                if t[a, b] != 0:
                    h = h + t[a, b] * s_vec[a] @ i_vec[b]
    h = h + nuclear_zeeman(field_g, register, constants) + build_dipolar_full(pairs, register)
    return _hermitize(h)


# --------------------------------------------------------------------------- fields

class ScheduleKind(str, Enum):
    CONSTANT = "constant"
    OSCILLATING = "oscillating"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class FieldSchedule:
    """``B(t) = (Bx(t), 0, Bz)`` in Gauss with times in seconds."""

    kind: ScheduleKind
    bz: float
    bx0: float = 0.0
    amplitude: float = 0.0
    period: Optional[float] = None
    center: Optional[float] = None
    width: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if self.kind is ScheduleKind.OSCILLATING and not (self.period and self.period > 0):
            raise ValueError("oscillating schedule needs period > 0")
        if self.kind is ScheduleKind.GAUSSIAN:
            if not (self.width and self.width > 0):
                raise ValueError("gaussian schedule needs width > 0")
            if self.center is None:
                raise ValueError("gaussian schedule needs a center")

    @classmethod
    def constant(cls, bx, bz):
        return cls(ScheduleKind.CONSTANT, bz, bx0=bx)

    @classmethod
    def oscillating(cls, bx0, amplitude, period, bz):
        return cls(ScheduleKind.OSCILLATING, bz, bx0=bx0, amplitude=amplitude, period=period)

    @classmethod
    def gaussian(cls, amplitude, center, width, bz):
        return cls(ScheduleKind.GAUSSIAN, bz, amplitude=amplitude, center=center, width=width)

    @property
    def is_static(self) -> bool:
        return self.kind is ScheduleKind.CONSTANT


def field_at(schedule: FieldSchedule, t):
    """``(Bx, Bz)`` in Gauss at time(s) ``t``; ``Bx`` broadcasts over array ``t``."""
    t = np.asarray(t, dtype=float)
    if schedule.kind is ScheduleKind.CONSTANT:
        bx = np.full_like(t, schedule.bx0)
    elif schedule.kind is ScheduleKind.OSCILLATING:
        bx = schedule.bx0 + schedule.amplitude * np.cos(TWO_PI * t / schedule.period)
    else:
        bx = schedule.amplitude * np.exp(-((t - schedule.center) ** 2) / (2.0 * schedule.width ** 2))
    if bx.ndim == 0:
        bx = float(bx)
    return bx, schedule.bz


class FieldQuenchBuilder:
    """``t -> H0 + gamma_n (Bx(t) sum Ix + Bz sum Iz)`` on a nuclear register.

    ``batch`` returns a stack of Hamiltonians for an array of times, which the
    time-dependent propagator uses to diagonalise many steps at once.
    """

    def __init__(self, pairs, schedule: FieldSchedule, register: SpinRegister, constants=DEFAULT_CONSTANTS):
        self.register = register
        self.schedule = schedule
        self.h0 = build_dipolar_secular(pairs, register)
        self.sum_ix = nuclear_zeeman((1.0, 0.0), register, constants)
        self.sum_iz = nuclear_zeeman((0.0, 1.0), register, constants)

    def __call__(self, t):
        bx, bz = field_at(self.schedule, t)
        return self.h0 + bz * self.sum_iz + bx * self.sum_ix

    def batch(self, ts):
        bx, bz = field_at(self.schedule, np.asarray(ts, dtype=float))
        base = self.h0 + bz * self.sum_iz
        return base[None, :, :] + np.asarray(bx)[:, None, None] * self.sum_ix[None, :, :]


# --------------------------------------------------------------------------- quenches

class QuenchKind(str, Enum):
    FIELD = "field"
    CENTRAL_SPIN = "central"


@dataclass(frozen=True)
class QuenchSpec:
    """Which quench is applied, from which state, with which post-quench terms."""

    kind: QuenchKind
    initial_state_label: str = "↓↓"
    ms_target: int = 1
    schedule: Optional[FieldSchedule] = None
    pairs: tuple = ()
    sites: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", QuenchKind(self.kind))
        if self.kind is QuenchKind.CENTRAL_SPIN and self.ms_target not in (-1, 1):
            raise ValueError("central-spin quench targets ms = +1 or -1")
        if self.kind is QuenchKind.FIELD and self.schedule is None:
            raise ValueError("field quench needs a schedule")


def check_eigenstate(h: np.ndarray, psi: np.ndarray, rel_tol: float = 1e-8) -> float:
    """Raise unless ``psi`` is an eigenvector of ``h``; returns its eigenvalue."""
    e = float(np.vdot(psi, h @ psi).real)
    resid = np.linalg.norm(h @ psi - e * psi)
    scale = max(np.linalg.norm(h, 2), np.finfo(float).tiny)
    if resid > rel_tol * scale:
        raise ValueError(f"initial state is not an eigenstate of H0 (residual {resid:.3e})")
    return e
