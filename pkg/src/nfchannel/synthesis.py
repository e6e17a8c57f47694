"""Random-field channel realizations and Karhunen-Loeve eigen-expansion.

Complex noise is circularly symmetric with independent N(0, 1/2) real and
imaginary parts, so ``E[n n^H] = I`` and ``E[h h^H] = R`` for ``h = L n``.
Random streams come from numpy's PCG64 ``default_rng``.
"""

from dataclasses import dataclass
import hashlib

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .correlation import CorrelationMatrix
from .exceptions import InvalidArgumentError, NotPSDError

PSD_FLOOR = 1e-8


def _entries(R):
    return R.entries if isinstance(R, CorrelationMatrix) else np.asarray(R, dtype=complex)


def matrix_digest(R):
    """Short content hash of a correlation matrix, for provenance headers."""
    return hashlib.sha256(np.ascontiguousarray(_entries(R)).tobytes()).hexdigest()[:16]


def complex_normal(rng, size):
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


@dataclass
class EigenSystem:
    """Descending eigenvalues and matching orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        U, lam = self.eigenvectors, self.eigenvalues
        return (U * lam) @ U.conj().T


def eigen_system(R):
    """Hermitian eigendecomposition with eigenvalues sorted in decreasing order."""
    M = _entries(R)
    M = 0.5 * (M + M.conj().T)
    try:
        lam, U = linalg.eigh(M)
    except linalg.LinAlgError as exc:
        raise NotPSDError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(lam)[::-1]
    return EigenSystem(lam[order], U[:, order])


def regularize_psd(R, floor=PSD_FLOOR):
    """Clamp eigenvalues in ``[-floor * lambda_max, 0)`` to zero and rebuild.

    Raises ``NotPSDError`` if an eigenvalue lies below the floor.
    """
    eig = eigen_system(R)
    lam = eig.eigenvalues
    lam_max = max(lam[0], 0.0)
    if lam[-1] < -floor * lam_max or (lam_max == 0.0 and lam[-1] < 0.0):
        raise NotPSDError(
            f"matrix is indefinite beyond the floor: lambda_min = {lam[-1]:.3e}, "
            f"lambda_max = {lam_max:.3e}"
        )
    lam = np.clip(lam, 0.0, None)
    return EigenSystem(lam, eig.eigenvectors)


def cholesky_factor(R, floor=PSD_FLOOR):
    """Lower-triangular ``L`` with ``L L^H = R`` after PSD regularization.

    Rank-deficient matrices get a tiny diagonal jitter so the factorization
    exists; the jitter is far below the regularization floor.
    """
    M = _entries(R)
    M = 0.5 * (M + M.conj().T)
    try:
        return linalg.cholesky(M, lower=True)
    except linalg.LinAlgError:
        pass
    eig = regularize_psd(M, floor)
    lam_max = eig.eigenvalues[0]
    fixed = eig.reconstruct()
    fixed = 0.5 * (fixed + fixed.conj().T)
    jitter = 1e-14 * max(lam_max, np.finfo(float).tiny)
    for _ in range(8):
        try:
            return linalg.cholesky(fixed + jitter * np.eye(len(fixed)), lower=True)
        except linalg.LinAlgError:
            jitter *= 10.0
    raise NotPSDError("Cholesky factorization failed after regularization")


@dataclass
class ChannelRealization:
    """One sampled channel vector with its seed and source-matrix digest."""

    h: np.ndarray
    seed: int
    source: str

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=complex)
        if self.h.ndim != 1 or not np.all(np.isfinite(self.h)):
            raise InvalidArgumentError("realization must be a finite 1-D vector")


def sample_channel(R, seed):
    """Draw ``h = L n`` with ``L`` the Cholesky factor of ``R``."""
    L = cholesky_factor(R)
    rng = np.random.default_rng(seed)
    h = L @ complex_normal(rng, L.shape[0])
    return ChannelRealization(h, int(seed), matrix_digest(R))


def mutual_information(eigs, noise_var, bits=False):
    """``sum_i log(1 + lambda_i / noise_var)``; nats unless ``bits``."""
    if not noise_var > 0:
        raise InvalidArgumentError("noise_var must be > 0")
    lam = eigs.eigenvalues if isinstance(eigs, EigenSystem) else np.asarray(eigs, dtype=float)
    lam = np.clip(lam, 0.0, None)
    mi = float(np.sum(np.log1p(lam / noise_var)))
    return mi / np.log(2.0) if bits else mi


class GaussianFieldSampler(BaseEstimator):
    """Zero-mean complex Gaussian field with a given correlation matrix.

    Parameters
    ----------
    method : {'cholesky', 'kl'}
        ``'cholesky'`` draws ``L n``; ``'kl'`` draws ``U diag(sqrt(lambda)) n``.
    """

    def __init__(self, method="cholesky"):
        self.method = method

    def fit(self, R, y=None):
        if self.method == "cholesky":
            self.factor_ = cholesky_factor(R)
        elif self.method == "kl":
            eig = regularize_psd(R)
            self.factor_ = eig.eigenvectors * np.sqrt(eig.eigenvalues)
        else:
            raise InvalidArgumentError(f"unknown method {self.method!r}")
        self.n_features_in_ = self.factor_.shape[0]
        return self

    def sample(self, n_samples=1, random_state=None):
        """Return an array of shape (n_samples, dim)."""
        check_is_fitted(self, "factor_")
        rng = np.random.default_rng(random_state)
        noise = complex_normal(rng, (n_samples, self.factor_.shape[1]))
        return noise @ self.factor_.T


def sample_covariance(samples):
    """``(1/N) sum h h^H`` for rows ``h`` of ``samples``."""
    samples = np.asarray(samples)
    return samples.T @ samples.conj() / len(samples)
