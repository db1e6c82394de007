"""Two-photon-absorption generator and single-photon loss channels.

The TPA generator is the Lindblad form (1/4)(2 a^2 rho a_dag^2 - a_dag^2 a^2 rho
- rho a_dag^2 a^2) per unit absorbance.  Single-photon loss with transmission
probability eta is provided both as the Kraus channel on density matrices and
as binomial thinning on photon-count distributions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .fock import DensityMatrix, FockCutoff, ProbeSpec, StateVector, _as_matrix, make_probe_state

_THIN_CHUNK = 1024


@dataclass(frozen=True)
class LossSpec:
    """Single-photon transmission probability; eta = 1 is the identity channel."""

    eta: float

    def __post_init__(self):
        if not (0.0 <= self.eta <= 1.0):
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")

    @property
    def is_identity(self) -> bool:
        return self.eta == 1.0


@dataclass
class PerturbedState:
    """State at zero absorbance plus its exact first-order TPA derivative."""

    rho0: DensityMatrix
    drho: np.ndarray

    def validate(self, tol: float = 1e-12) -> None:
        tr = abs(np.trace(self.drho))
        if tr > tol:
            raise ValueError(f"d rho / d eps not traceless: |trace| = {tr:.3e}")
        herm = np.max(np.abs(self.drho - self.drho.conj().T))
        if herm > tol:
            raise ValueError(f"d rho / d eps not Hermitian: max deviation {herm:.3e}")


def tpa_generator(rho: DensityMatrix | np.ndarray) -> np.ndarray:
    """Apply the TPA Lindbladian (per unit absorbance) to a density matrix.

    Implemented with index shifts instead of explicit ladder matrices:
    (a^2 rho a_dag^2)[m, n] = sqrt((m+1)(m+2)(n+1)(n+2)) rho[m+2, n+2] and
    a_dag^2 a^2 = n(n-1) is diagonal.
    """
    mat = _as_matrix(rho)
    dim = mat.shape[0]
    n = np.arange(dim, dtype=float)
    n2 = n * (n - 1.0)
    out = np.zeros_like(mat, dtype=complex)
    if dim > 2:
        shift = np.sqrt((n[:-2] + 1.0) * (n[:-2] + 2.0))
        out[:-2, :-2] = 0.5 * (shift[:, None] * shift[None, :]) * mat[2:, 2:]
    out -= 0.25 * (n2[:, None] + n2[None, :]) * mat
    return out


def population_derivative(pmf: np.ndarray) -> np.ndarray:
    """d P_n / d eps = (1/2)[(n+2)(n+1) P_{n+2} - n(n-1) P_n]; sums to zero."""
    p = np.asarray(pmf, dtype=float)
    n = np.arange(p.size, dtype=float)
    out = -0.5 * n * (n - 1.0) * p
    if p.size > 2:
        out[:-2] += 0.5 * (n[:-2] + 1.0) * (n[:-2] + 2.0) * p[2:]
    return out


def loss_channel(rho: DensityMatrix | np.ndarray, loss: LossSpec) -> DensityMatrix:
    """Pure-loss channel with transmissivity eta via the standard Kraus family.

    K_k removes k photons: (K_k rho K_k_dag)[m, n] = c_k[m] c_k[n] rho[m+k, n+k]
    with c_k[j]^2 = C(j+k, k) eta^j (1-eta)^k, exact within the truncated space.
    """
    mat = _as_matrix(rho)
    eta = loss.eta
    if eta == 1.0:
        return DensityMatrix(mat.copy())
    dim = mat.shape[0]
    out = np.zeros_like(mat, dtype=complex)
    j = np.arange(dim)
    for k in range(dim):
        keep = dim - k
        jj = j[:keep]
        c = np.sqrt(binom.pmf(jj, jj + k, eta))
        out[:keep, :keep] += (c[:, None] * c[None, :]) * mat[k:, k:]
    return DensityMatrix(out)


def apply_binomial_loss(vec: np.ndarray, eta: float) -> np.ndarray:
    """Binomial-thinning linear map on a photon-count vector (need not be a pmf)."""
    v = np.asarray(vec, dtype=float)
    if eta == 1.0:
        return v.copy()
    size = v.size
    m = np.arange(size)
    out = np.empty(size, dtype=float)
    for start in range(0, size, _THIN_CHUNK):
        rows = np.arange(start, min(start + _THIN_CHUNK, size))
        out[rows] = binom.pmf(rows[:, None], m[None, :], eta) @ v
    return out


def binomial_loss_pmf(pmf: np.ndarray, loss: LossSpec) -> np.ndarray:
    """Detected photon-number distribution after single-photon losses.

    P_n = sum_{m >= n} C(m, n) eta^n (1-eta)^{m-n} P_m; equals the diagonal of
    the Kraus loss channel applied to diag(pmf).
    """
    p = np.asarray(pmf, dtype=float)
    total = p.sum()
    if not np.isclose(total, 1.0, atol=1e-6):
        raise ValueError(f"input pmf sums to {total!r}, expected ~1")
    return apply_binomial_loss(p, loss.eta)


def perturb_state(spec: ProbeSpec, cutoff: FockCutoff | None = None, **kwargs) -> PerturbedState:
    """Probe state as rho0 = |psi><psi| together with d rho / d eps at eps = 0."""
    psi = make_probe_state(spec, cutoff, **kwargs)
    rho0 = psi.to_density_matrix()
    return PerturbedState(rho0=rho0, drho=tpa_generator(rho0))


def perturbed_from_state(state: StateVector) -> PerturbedState:
    """PerturbedState for an already-constructed pure probe state."""
    rho0 = state.to_density_matrix()
    return PerturbedState(rho0=rho0, drho=tpa_generator(rho0))
