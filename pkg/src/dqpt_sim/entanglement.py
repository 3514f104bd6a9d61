"""Two- and three-qubit entanglement measures and steady-state phase extraction."""

import cmath
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .spin import SpinRegister, check_density, partial_trace

_SIGMA_YY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def concurrence(rho2: np.ndarray) -> float:
    """Wootters concurrence of a two-qubit density matrix (or pure 4-vector)."""
    rho = np.asarray(rho2, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    if rho.shape != (4, 4):
        raise ValueError(f"concurrence needs a 4x4 density matrix, got {rho.shape}")
    check_density(rho)
    # sqrt-eigenvalues of R = rho Y rho* Y are the singular values of
    # sqrt(rho) Y sqrt(rho)*, which avoids sqrt of roundoff-level eigenvalues
    w, v = np.linalg.eigh(rho)
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    lam = np.linalg.svd(root @ _SIGMA_YY @ root.conj(), compute_uv=False)
    return float(max(lam[0] - lam[1] - lam[2] - lam[3], 0.0))


@dataclass(frozen=True)
class TangleResult:
    tau123: float
    c_1_23_sq: float
    c12: float
    c13: float


def tangle(psi3: np.ndarray) -> TangleResult:
    """Residual three-way tangle ``C^2_1(23) - C^2_12 - C^2_13`` of a pure 3-qubit state."""
    psi = np.asarray(psi3, dtype=complex)
    reg = SpinRegister(3)
    if psi.ndim == 2:
        purity = np.trace(psi @ psi).real
        if abs(purity - 1.0) > 1e-8:
            raise ValueError(f"tangle needs a pure state (purity {purity:.6f})")
        w, v = np.linalg.eigh(psi)
        psi = v[:, -1]
    if psi.shape != (8,):
        raise ValueError(f"tangle needs a 3-qubit state, got shape {psi.shape}")
    psi = psi / np.linalg.norm(psi)
    rho = np.outer(psi, psi.conj())
    rho1 = partial_trace(rho, [1], reg)
    c1_23 = 2.0 * (1.0 - np.trace(rho1 @ rho1).real)
    c12 = concurrence(partial_trace(rho, [1, 2], reg))
    c13 = concurrence(partial_trace(rho, [1, 3], reg))
    return TangleResult(c1_23 - c12 ** 2 - c13 ** 2, c1_23, c12, c13)


def nuclear_factor(psi: np.ndarray, register: SpinRegister, tol: float = 1e-8) -> np.ndarray:
    """Nuclear state of ``|ms> x |psi_n>``; raises if the electron is not in one manifold."""
    psi = np.asarray(psi, dtype=complex)
    if not register.include_electron:
        return psi
    blocks = psi.reshape(3, 2 ** register.n_nuclei)
    weights = np.sum(np.abs(blocks) ** 2, axis=1)
    k = int(np.argmax(weights))
    if 1.0 - weights[k] > tol:
        raise ValueError("state is entangled with the electron")
    return blocks[k] / np.sqrt(weights[k])


def _wrap(x):
    return math.remainder(x, 2 * math.pi)


@dataclass(frozen=True)
class PhaseProfile:
    """``r (e^{i phi1}|uu> + e^{i phi2}(|ud> + |du>) + e^{i phi3}|dd>)``."""

    r: float
    phi1: float
    phi2: float
    phi3: float

    @property
    def relative_13(self) -> float:
        return _wrap(self.phi1 - self.phi3)

    @property
    def relative_entangling(self) -> float:
        """``phi1 + phi3 - 2 phi2``; concurrence is ``|sin|`` of half of it for r = 1/2."""
        return _wrap(self.phi1 + self.phi3 - 2 * self.phi2)


@dataclass(frozen=True)
class PhaseMismatch:
    magnitudes: tuple
    reason: str


def extract_phase_profile(psi2: np.ndarray, tol: float = 0.05) -> Union[PhaseProfile, PhaseMismatch]:
    """Fit a two-spin state to the equal-weight form with three phases.

    Amplitudes are in the order ``(uu, ud, du, dd)``. A :class:`PhaseMismatch`
    is returned when the four magnitudes differ by more than ``tol`` or the
    two middle amplitudes are not in phase within ``tol``.
    """
    a = np.asarray(psi2, dtype=complex)
    if a.shape != (4,):
        raise ValueError(f"expected a two-spin state vector, got shape {a.shape}")
    mags = np.abs(a)
    if mags.max() - mags.min() > tol:
        return PhaseMismatch(tuple(float(m) for m in mags), "amplitude magnitudes are not equal")
    mid = a[1] / mags[1] + a[2] / mags[2]
    if abs(cmath.phase(a[1] * a[2].conjugate())) > tol:
        return PhaseMismatch(tuple(float(m) for m in mags), "middle amplitudes differ in phase")
    phases = [cmath.phase(a[0]), cmath.phase(mid), cmath.phase(a[3])]
    return PhaseProfile(float(mags.mean()), *phases)


def state_from_phase_profile(r: float, phi1: float, phi2: float, phi3: float) -> np.ndarray:
    return r * np.array([cmath.exp(1j * phi1), cmath.exp(1j * phi2), cmath.exp(1j * phi2), cmath.exp(1j * phi3)])
