"""Truncated Fock-space states, operators and moments.

Probe states are built as S(zeta) D(alpha) |0>, i.e. a coherent seed that is
squeezed afterwards.  Construction goes through the equivalent
displaced-squeezed form D(beta) S(zeta) |0> with beta = alpha cosh r +
conj(alpha) e^{i phi_r} sinh r, so that every intermediate state has a mean
photon number bounded by the final one.  Both unitaries are applied as the
action of the matrix exponential of their truncated generators.
"""

from __future__ import annotations

import cmath
import math
import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import expm_multiply

from .exceptions import CutoffGrowthWarning, TruncationError

DEFAULT_TAIL_TOL = 1e-10
CUTOFF_CAP_ENV = "TPA_CUTOFF_MAX"
DEFAULT_CUTOFF_CAP = 4096

_SQRT2 = math.sqrt(2.0)


def cutoff_cap(explicit: int | None = None) -> int:
    """Largest admissible n_max: explicit argument, else TPA_CUTOFF_MAX, else 4096."""
    if explicit is not None:
        return int(explicit)
    env = os.environ.get(CUTOFF_CAP_ENV)
    if env is not None:
        cap = int(env)
        if cap < 1:
            raise ValueError(f"{CUTOFF_CAP_ENV} must be a positive integer, got {env!r}")
        return cap
    return DEFAULT_CUTOFF_CAP


def _reduce_phase(phi: float) -> float:
    """Reduce an angle to [0, 2*pi)."""
    phi = math.fmod(phi, 2.0 * math.pi)
    if phi < 0.0:
        phi += 2.0 * math.pi
    return phi


@dataclass(frozen=True)
class ProbeSpec:
    """Input light field S(zeta) D(alpha) |0> with zeta = r e^{i phi_r}, alpha = |alpha| e^{i phi}."""

    r: float = 0.0
    phi_r: float = 0.0
    alpha_abs: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not (self.r >= 0.0):
            raise ValueError(f"squeezing magnitude r must be >= 0, got {self.r}")
        if not (self.alpha_abs >= 0.0):
            raise ValueError(f"coherent amplitude |alpha| must be >= 0, got {self.alpha_abs}")
        object.__setattr__(self, "phi_r", _reduce_phase(self.phi_r))
        object.__setattr__(self, "phi", _reduce_phase(self.phi))

    @classmethod
    def vacuum(cls) -> "ProbeSpec":
        return cls()

    @classmethod
    def squeezed_vacuum(cls, r: float, phi_r: float = 0.0) -> "ProbeSpec":
        return cls(r=r, phi_r=phi_r)

    @classmethod
    def coherent(cls, alpha_abs: float, phi: float = 0.0) -> "ProbeSpec":
        return cls(alpha_abs=alpha_abs, phi=phi)

    @property
    def is_vacuum(self) -> bool:
        return self.r == 0.0 and self.alpha_abs == 0.0

    @property
    def alpha(self) -> complex:
        return self.alpha_abs * cmath.exp(1j * self.phi)

    @property
    def n_squeeze(self) -> float:
        """Mean photon number of the squeezing part alone, sinh^2 r."""
        return math.sinh(self.r) ** 2

    @property
    def seed_gain(self) -> float:
        """Factor g with <n> = sinh^2 r + |alpha|^2 g; g = cosh 2r + sinh 2r cos(2 phi - phi_r)."""
        return math.cosh(2.0 * self.r) + math.sinh(2.0 * self.r) * math.cos(2.0 * self.phi - self.phi_r)

    def mean_photon_number(self) -> float:
        """Incident mean photon number (before any loss, at zero absorbance)."""
        return self.n_squeeze + self.alpha_abs**2 * self.seed_gain


@dataclass(frozen=True)
class FockCutoff:
    """Truncation contract: highest retained Fock index and admissible tail population."""

    n_max: int
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError(f"n_max must be nonnegative, got {self.n_max}")
        if not (self.tail_tol > 0.0):
            raise ValueError(f"tail_tol must be positive, got {self.tail_tol}")

    @property
    def dim(self) -> int:
        return self.n_max + 1


@dataclass
class StateVector:
    """Pure state amplitudes c_n in the truncated Fock basis."""

    amp: np.ndarray

    def __post_init__(self):
        self.amp = np.asarray(self.amp, dtype=complex)
        if self.amp.ndim != 1 or self.amp.size < 1:
            raise ValueError("amp must be a nonempty 1-d complex vector")

    @property
    def n_max(self) -> int:
        return self.amp.size - 1

    @property
    def dim(self) -> int:
        return self.amp.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amp))

    def populations(self) -> np.ndarray:
        return np.abs(self.amp) ** 2

    def to_density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amp, self.amp.conj()))

    def fidelity(self, other: "StateVector") -> float:
        n = min(self.dim, other.dim)
        return float(abs(np.vdot(self.amp[:n], other.amp[:n])) ** 2)


@dataclass
class DensityMatrix:
    """Hermitian, trace-(almost-)one matrix in the truncated Fock basis."""

    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.ndim != 2 or self.rho.shape[0] != self.rho.shape[1]:
            raise ValueError("rho must be a square matrix")

    @property
    def n_max(self) -> int:
        return self.rho.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def validate(self, tail_tol: float = DEFAULT_TAIL_TOL, check_positivity: bool = False) -> None:
        """Check hermiticity, trace and (optionally, O(dim^3)) positivity."""
        herm = np.max(np.abs(self.rho - self.rho.conj().T))
        if herm > 1e-12:
            raise ValueError(f"density matrix not Hermitian: max deviation {herm:.3e}")
        tr = self.trace()
        if not (1.0 - tail_tol <= tr <= 1.0 + 1e-12):
            raise ValueError(f"trace {tr!r} outside [1 - tail_tol, 1]")
        if check_positivity:
            evals = np.linalg.eigvalsh(self.rho)
            if evals.min() < -1e-10:
                raise ValueError(f"negative eigenvalue {evals.min():.3e}")


def _as_matrix(state) -> np.ndarray:
    if isinstance(state, DensityMatrix):
        return state.rho
    arr = np.asarray(state)
    if arr.ndim != 2:
        raise ValueError("expected a density matrix")
    return arr


def ladder_matrices(cutoff: FockCutoff | int) -> tuple[np.ndarray, np.ndarray]:
    """Dense annihilation/creation matrices; a[n-1, n] = sqrt(n)."""
    n_max = cutoff.n_max if isinstance(cutoff, FockCutoff) else int(cutoff)
    if n_max < 1:
        raise ValueError("ladder matrices need n_max >= 1")
    dim = n_max + 1
    a = np.zeros((dim, dim), dtype=complex)
    ns = np.arange(1, dim)
    a[ns - 1, ns] = np.sqrt(ns)
    return a, a.conj().T


def _squeeze_generator(r: float, phi_r: float, dim: int):
    """Sparse (zeta/2) a_dag^2 - (zeta*/2) a^2 on the truncated space."""
    zeta = r * cmath.exp(1j * phi_r)
    n = np.arange(dim - 2, dtype=float)
    band = np.sqrt((n + 1.0) * (n + 2.0))  # <n+2| a_dag^2 |n>
    return diags(
        [0.5 * zeta * band, -0.5 * np.conj(zeta) * band],
        offsets=[-2, 2],
        shape=(dim, dim),
        format="csr",
        dtype=complex,
    )


def _displacement_generator(beta: complex, dim: int):
    """Sparse beta a_dag - beta* a on the truncated space."""
    n = np.arange(dim - 1, dtype=float)
    band = np.sqrt(n + 1.0)  # <n+1| a_dag |n>
    return diags(
        [beta * band, -np.conj(beta) * band],
        offsets=[-1, 1],
        shape=(dim, dim),
        format="csr",
        dtype=complex,
    )


def apply_squeeze(state: StateVector, r: float, phi_r: float = 0.0) -> StateVector:
    """Apply S(zeta) = exp((zeta/2) a_dag^2 - (zeta*/2) a^2) by matrix-exponential action."""
    if r == 0.0:
        return StateVector(state.amp.copy())
    gen = _squeeze_generator(abs(r), phi_r if r > 0 else phi_r + math.pi, state.dim)
    return StateVector(expm_multiply(gen, state.amp))


def apply_displacement(state: StateVector, beta: complex) -> StateVector:
    """Apply D(beta) = exp(beta a_dag - beta* a) by matrix-exponential action."""
    if beta == 0:
        return StateVector(state.amp.copy())
    gen = _displacement_generator(beta, state.dim)
    return StateVector(expm_multiply(gen, state.amp))


def _build_probe(spec: ProbeSpec, n_max: int) -> np.ndarray:
    dim = n_max + 1
    amp = np.zeros(dim, dtype=complex)
    amp[0] = 1.0
    state = StateVector(amp)
    if spec.r > 0.0:
        state = apply_squeeze(state, spec.r, spec.phi_r)
    # S(zeta) D(alpha) |0> = D(beta) S(zeta) |0>, beta = alpha cosh r + conj(alpha) e^{i phi_r} sinh r
    if spec.alpha_abs > 0.0:
        alpha = spec.alpha
        beta = alpha * math.cosh(spec.r) + np.conj(alpha) * cmath.exp(1j * spec.phi_r) * math.sinh(spec.r)
        state = apply_displacement(state, beta)
    out = state.amp
    nrm = np.linalg.norm(out)
    if nrm > 1.0:  # roundoff can push the (unitary) norm above one
        out = out / nrm
    return out


def tail_estimate(populations: np.ndarray) -> float:
    """Conservative estimate of the population truncated beyond the cutoff.

    Uses geometric extrapolation of the two top index bands; returns inf when
    the populations still grow towards the cutoff.
    """
    dim = populations.size
    w = max(16, dim // 32)
    if dim < 2 * w + 1:
        w = max(1, dim // 4)
    b1 = float(populations[-2 * w : -w].sum())
    b2 = float(populations[-w:].sum())
    if b2 <= 0.0:
        return 0.0
    if b1 <= b2:
        return math.inf
    ratio = min(b2 / b1, 0.99)
    return b2 * ratio / (1.0 - ratio)


def make_probe_state(
    spec: ProbeSpec,
    cutoff: FockCutoff | None = None,
    *,
    tail_tol: float = DEFAULT_TAIL_TOL,
    max_n: int | None = None,
) -> StateVector:
    """Construct S(zeta) D(alpha) |0> in a truncated Fock basis.

    With an explicit ``cutoff`` the state is built once and rejected if the
    estimated truncated population exceeds ``cutoff.tail_tol``.  Otherwise the
    cutoff starts at max(4 <n> + 50, 64) and doubles until the tail estimate
    drops below ``tail_tol``, up to the cap (TPA_CUTOFF_MAX, default 4096).
    """
    if cutoff is not None:
        if spec.is_vacuum:
            amp = np.zeros(cutoff.dim, dtype=complex)
            amp[0] = 1.0
            return StateVector(amp)
        if cutoff.n_max < 2:
            raise TruncationError("non-vacuum probes need n_max >= 2")
        amp = _build_probe(spec, cutoff.n_max)
        est = tail_estimate(np.abs(amp) ** 2)
        if est > cutoff.tail_tol:
            raise TruncationError(
                f"tail population ~{est:.3e} exceeds tail_tol={cutoff.tail_tol:.1e} "
                f"at n_max={cutoff.n_max}"
            )
        return StateVector(amp)

    cap = cutoff_cap(max_n)
    nbar = spec.mean_photon_number()
    n_max = min(max(int(math.ceil(4.0 * nbar)) + 50, 64), cap)
    first_guess = n_max
    while True:
        amp = _build_probe(spec, n_max)
        est = tail_estimate(np.abs(amp) ** 2)
        if est <= tail_tol:
            break
        if n_max >= cap:
            raise TruncationError(
                f"tail population ~{est:.3e} exceeds tail_tol={tail_tol:.1e} "
                f"at the cutoff cap n_max={cap}; raise {CUTOFF_CAP_ENV} or loosen tail_tol"
            )
        n_max = min(2 * n_max, cap)
    if n_max > 8 * first_guess:
        warnings.warn(
            f"cutoff grew from {first_guess} to {n_max} while chasing tail_tol={tail_tol:.1e}",
            CutoffGrowthWarning,
            stacklevel=2,
        )
    return StateVector(amp)


@dataclass(frozen=True)
class Moments:
    """First and second moments of photon number and both quadratures."""

    mean_n: float
    var_n: float
    mean_q: float
    var_q: float
    mean_p: float
    var_p: float


def _vector_moments(amp: np.ndarray) -> Moments:
    n = np.arange(amp.size, dtype=float)
    p = np.abs(amp) ** 2
    mean_n = float(np.dot(n, p))
    var_n = float(np.dot(n * n, p)) - mean_n**2
    # <a> = sum_n sqrt(n+1) conj(c_n) c_{n+1},  <a^2> = sum_n sqrt((n+1)(n+2)) conj(c_n) c_{n+2}
    ea = complex(np.sum(np.sqrt(n[1:]) * np.conj(amp[:-1]) * amp[1:]))
    ea2 = complex(np.sum(np.sqrt(n[1:-1] * (n[1:-1] + 1.0)) * np.conj(amp[:-2]) * amp[2:]))
    return _quad_moments(mean_n, var_n, ea, ea2)


def _matrix_moments(rho: np.ndarray) -> Moments:
    dim = rho.shape[0]
    n = np.arange(dim, dtype=float)
    diag = np.diagonal(rho).real
    mean_n = float(np.dot(n, diag))
    var_n = float(np.dot(n * n, diag)) - mean_n**2
    # tr(rho a) picks the first subdiagonal, tr(rho a^2) the second.
    ea = complex(np.sum(np.sqrt(n[1:]) * np.diagonal(rho, -1)))
    ea2 = complex(np.sum(np.sqrt(n[2:] * (n[2:] - 1.0)) * np.diagonal(rho, -2)))
    return _quad_moments(mean_n, var_n, ea, ea2)


def _quad_moments(mean_n: float, var_n: float, ea: complex, ea2: complex) -> Moments:
    # q = (a + a_dag)/sqrt(2), p = (a - a_dag)/(i sqrt(2)); vacuum variance 1/2.
    mean_q = _SQRT2 * ea.real
    mean_p = _SQRT2 * ea.imag
    mean_q2 = ea2.real + mean_n + 0.5
    mean_p2 = -ea2.real + mean_n + 0.5
    return Moments(
        mean_n=mean_n,
        var_n=var_n,
        mean_q=mean_q,
        var_q=mean_q2 - mean_q**2,
        mean_p=mean_p,
        var_p=mean_p2 - mean_p**2,
    )


def moments(state: StateVector | DensityMatrix | np.ndarray) -> Moments:
    """Photon-number and quadrature moments of a state vector or density matrix."""
    if isinstance(state, StateVector):
        return _vector_moments(state.amp)
    if isinstance(state, DensityMatrix):
        return _matrix_moments(state.rho)
    arr = np.asarray(state, dtype=complex)
    if arr.ndim == 1:
        return _vector_moments(arr)
    if arr.ndim == 2:
        return _matrix_moments(arr)
    raise ValueError("state must be a vector or a square matrix")
