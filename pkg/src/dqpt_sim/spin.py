"""Spin operators, tensor embeddings, basis states and partial traces.

A register holds an optional spin-1 electron followed by ``N`` spin-1/2
nuclei. Sites are labelled so that nuclear labels never change with the
presence of the electron: site ``0`` is the electron, sites ``1..N`` are the
nuclei. Tensor products always run electron first, then nuclei in ascending
order.

Local bases:

* nucleus: ``[|up>, |down>]`` so that ``Iz = diag(1/2, -1/2)``;
* electron: ``[|+1>, |0>, |-1>]`` so that ``Sz = diag(1, 0, -1)``.

States and operators are plain complex numpy arrays; the register travels
alongside them where the layout matters.
"""

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence, Union

import numpy as np

MAX_NUCLEI = 10
ELECTRON = 0

_HERMITIAN_TOL = 1e-12
_IMAG_TOL = 1e-10


@dataclass(frozen=True)
class SpinRegister:
    """Layout of the Hilbert space: optional electron plus ``n_nuclei`` nuclei."""

    n_nuclei: int
    include_electron: bool = False

    def __post_init__(self):
        if int(self.n_nuclei) != self.n_nuclei or self.n_nuclei < 1:
            raise ValueError(f"n_nuclei must be a positive integer, got {self.n_nuclei!r}")
        if self.n_nuclei > MAX_NUCLEI:
            raise ValueError(f"n_nuclei={self.n_nuclei} exceeds the cap of {MAX_NUCLEI}")

    @property
    def sites(self) -> list:
        first = [ELECTRON] if self.include_electron else []
        return first + list(range(1, self.n_nuclei + 1))

    @property
    def local_dims(self) -> list:
        return [self.site_dim(s) for s in self.sites]

    @property
    def dim(self) -> int:
        return int(np.prod(self.local_dims))

    def site_dim(self, site: int) -> int:
        self._check_site(site)
        return 3 if site == ELECTRON else 2

    def position(self, site: int) -> int:
        """Index of ``site`` in the tensor-product ordering."""
        self._check_site(site)
        return self.sites.index(site)

    def nuclear(self) -> "SpinRegister":
        return SpinRegister(self.n_nuclei, include_electron=False)

    def _check_site(self, site):
        if site not in self.sites:
            raise IndexError(f"site {site!r} not in register with sites {self.sites}")


def spin_half_operators():
    """Return ``(Ix, Iy, Iz, Iplus, Iminus)`` for a spin-1/2."""
    ix = np.array([[0, 1], [1, 0]], dtype=complex) / 2
    iy = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
    iz = np.array([[1, 0], [0, -1]], dtype=complex) / 2
    return ix, iy, iz, ix + 1j * iy, ix - 1j * iy


def spin_one_operators():
    """Return ``(Sx, Sy, Sz)`` for a spin-1 in the basis ``|+1>, |0>, |-1>``."""
    s = 1.0 / np.sqrt(2.0)
    sx = s * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
    sy = s * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return sx, sy, sz


def embed_site_operator(op: np.ndarray, site: int, register: SpinRegister) -> np.ndarray:
    """Return ``id x ... x op x ... x id`` with ``op`` acting on ``site``."""
    op = np.asarray(op, dtype=complex)
    local = register.site_dim(site)
    if op.shape != (local, local):
        raise ValueError(f"operator of shape {op.shape} does not fit site {site} (dim {local})")
    factors = [op if s == site else np.eye(register.site_dim(s)) for s in register.sites]
    return reduce(np.kron, factors)


def nuclear_spin_operators(register: SpinRegister):
    """Embedded ``(Ix, Iy, Iz, I+, I-)`` for every nucleus, keyed by label."""
    local = spin_half_operators()
    return {
        i: tuple(embed_site_operator(o, i, register) for o in local)
        for i in range(1, register.n_nuclei + 1)
    }


def electron_spin_operators(register: SpinRegister):
    if not register.include_electron:
        raise ValueError("register has no electron")
    return tuple(embed_site_operator(o, ELECTRON, register) for o in spin_one_operators())


def total_iz(register: SpinRegister) -> np.ndarray:
    iz = spin_half_operators()[2]
    return sum(embed_site_operator(iz, i, register) for i in range(1, register.n_nuclei + 1))


_NUCLEAR_SYMBOLS = {
    "u": 0, "up": 0, "↑": 0, "+": 0,
    "d": 1, "down": 1, "↓": 1, "-": 1,
}
_ELECTRON_SYMBOLS = {1: 0, 0: 1, -1: 2}


def _electron_index(sym) -> int:
    try:
        ms = int(sym)
    except (TypeError, ValueError):
        raise ValueError(f"bad electron symbol {sym!r}; expected +1, 0 or -1") from None
    if ms not in _ELECTRON_SYMBOLS or float(sym) != ms:
        raise ValueError(f"bad electron symbol {sym!r}; expected +1, 0 or -1")
    return _ELECTRON_SYMBOLS[ms]


def parse_label(label: Union[str, Sequence], register: SpinRegister) -> list:
    """Turn ``"0↓↓"``, ``"0ud"``, ``"↑↓"`` or ``[0, "up", "down"]`` into local indices."""
    if isinstance(label, str):
        text = label.strip()
        symbols = []
        if register.include_electron:
            for prefix in ("+1", "-1", "0", "1"):
                if text.startswith(prefix):
                    symbols.append(prefix)
                    text = text[len(prefix):]
                    break
            else:
                raise ValueError(f"label {label!r} lacks an electron symbol")
        symbols.extend(text)
    else:
        symbols = list(label)
    if len(symbols) != len(register.sites):
        raise ValueError(f"label {label!r} has {len(symbols)} symbols, register has {len(register.sites)} sites")
    out = []
    for site, sym in zip(register.sites, symbols):
        if site == ELECTRON:
            out.append(_electron_index(sym))
        else:
            key = str(sym).lower() if str(sym).isalpha() else str(sym)
            if key not in _NUCLEAR_SYMBOLS:
                raise ValueError(f"bad nuclear symbol {sym!r} in label {label!r}")
            out.append(_NUCLEAR_SYMBOLS[key])
    return out


def basis_index(label, register: SpinRegister) -> int:
    return int(np.ravel_multi_index(parse_label(label, register), register.local_dims))


def basis_state(label, register: SpinRegister) -> np.ndarray:
    """Computational basis vector for a per-site label such as ``"0↑↓"``."""
    psi = np.zeros(register.dim, dtype=complex)
    psi[basis_index(label, register)] = 1.0
    return psi


def as_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


def partial_trace(rho: np.ndarray, keep_sites: Iterable[int], register: SpinRegister) -> np.ndarray:
    """Reduced density matrix on ``keep_sites`` (kept in register order)."""
    keep = sorted(set(keep_sites), key=register.position)
    if not keep:
        raise ValueError("keep_sites must be nonempty")
    rho = as_density(rho)
    dims = register.local_dims
    n = len(dims)
    if rho.shape != (register.dim, register.dim):
        raise ValueError(f"matrix shape {rho.shape} does not match register dim {register.dim}")
    kept_pos = [register.position(s) for s in keep]
    traced = [p for p in range(n) if p not in kept_pos]
    t = rho.reshape(dims + dims)
    # trace out from the highest position down so remaining axes keep their meaning
    for p in sorted(traced, reverse=True):
        m = t.ndim // 2
        t = np.trace(t, axis1=p, axis2=p + m)
    d = int(np.prod([dims[p] for p in kept_pos]))
    return t.reshape(d, d)


def is_hermitian(op: np.ndarray, tol: float = _HERMITIAN_TOL) -> bool:
    op = np.asarray(op)
    scale = max(1.0, float(np.max(np.abs(op)))) if op.size else 1.0
    return bool(np.max(np.abs(op - op.conj().T), initial=0.0) <= tol * scale)


def expectation(state: np.ndarray, op: np.ndarray) -> float:
    """Real expectation value of a hermitian ``op`` in a pure or mixed state."""
    op = np.asarray(op, dtype=complex)
    state = np.asarray(state, dtype=complex)
    if not is_hermitian(op):
        raise ValueError("expectation requires a hermitian operator")
    if state.shape[0] != op.shape[0]:
        raise ValueError(f"state dim {state.shape[0]} does not match operator dim {op.shape[0]}")
    if state.ndim == 1:
        val = np.vdot(state, op @ state)
    else:
        val = np.trace(state @ op)
    scale = max(1.0, float(np.max(np.abs(op))))
    if abs(val.imag) > _IMAG_TOL * scale:
        raise ValueError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def check_state(psi: np.ndarray, tol: float = 1e-10) -> None:
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state norm {norm!r} deviates from 1")


def check_density(rho: np.ndarray, herm_tol=1e-10, trace_tol=1e-8, eig_tol=1e-8) -> None:
    """Raise ``ValueError`` unless ``rho`` is a valid density matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ValueError("density matrix is not hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {tr!r} deviates from 1")
    if np.linalg.eigvalsh(rho).min() < -eig_tol:
        raise ValueError("density matrix has negative eigenvalues")
