"""Single-snapshot channel estimators for ``y = sqrt(P) h + n``.

``n`` is unit-variance circular Gaussian noise, so with channels normalized
to ``tr(R) = dim`` the linear power ``P`` is the per-element SNR.

Functional entry points (``estimate_ls``, ``estimate_omp``, ...) work on one
``Observation``; the ``*Estimator`` classes wrap them in a scikit-learn style
``fit / predict / score`` interface acting row-wise on stacked observations.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_complex_2d, check_positive
from .correlation import CorrelationKernel, CorrelationMatrix, assemble_matrix
from .exceptions import InvalidArgumentError
from .geometry import ScattererCluster
from .special import sinc_normalized
from .synthesis import complex_normal, eigen_system, matrix_digest
from .wavenumber import detect_peaks, direction_from_cosines, sample_spectrum

SUBSPACE_CUTOFF = 1e-6
NFS_DEFAULTS = {"d": 100.0, "r": 2.0, "a": 0.0, "mu": None}


@dataclass
class Observation:
    """Noisy snapshot ``y`` at linear SNR ``snr``; ``h`` is the truth when known."""

    y: np.ndarray
    snr: float
    h: np.ndarray = None
    seed: int = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=complex)
        if self.y.ndim != 1:
            raise InvalidArgumentError("y must be a 1-D vector")
        check_positive(self.snr, "snr")
        if self.h is not None:
            self.h = np.asarray(self.h, dtype=complex)
            if self.h.shape != self.y.shape:
                raise InvalidArgumentError("h and y lengths differ")

    @property
    def dim(self):
        return len(self.y)


def make_observation(h, snr, rng=None):
    """Draw ``y = sqrt(snr) h + n`` and keep ``h`` for scoring."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    h = np.asarray(h, dtype=complex)
    check_positive(snr, "snr")
    y = np.sqrt(snr) * h + complex_normal(rng, h.shape)
    return Observation(y, float(snr), h)


def nmse(estimate, truth):
    """``||estimate - truth||^2 / ||truth||^2``."""
    estimate = np.asarray(estimate)
    truth = np.asarray(truth)
    if estimate.shape != truth.shape:
        raise InvalidArgumentError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    denom = np.vdot(truth, truth).real
    if denom == 0.0:
        raise InvalidArgumentError("nmse is undefined for a zero truth vector")
    diff = estimate - truth
    return float(np.vdot(diff, diff).real / denom)


@dataclass
class EstimatorReport:
    estimate: np.ndarray
    method: str
    nmse: float = None
    aux: dict = field(default_factory=dict)


def _report(estimate, obs, method, **aux):
    score = None
    if obs.h is not None:
        if np.vdot(obs.h, obs.h).real == 0.0:
            aux["zero_truth"] = True
        else:
            score = nmse(estimate, obs.h)
    return EstimatorReport(estimate, method, score, aux)


def estimate_ls(obs):
    return _report(obs.y / np.sqrt(obs.snr), obs, "ls")


# -- OMP ------------------------------------------------------------------


@dataclass(frozen=True)
class Codebook:
    """Unit-norm spherical-wave atoms (columns of ``W``).

    ``atoms`` holds ``(azimuth, elevation, distance)`` per column, angles in
    radians measured from the array broadside (+x).
    """

    W: np.ndarray
    atoms: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=complex)
        atoms = np.asarray(self.atoms, dtype=float)
        if W.ndim != 2 or atoms.shape != (W.shape[1], 3):
            raise InvalidArgumentError("atoms must hold one (az, el, distance) row per column")
        norms = np.linalg.norm(W, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise InvalidArgumentError("codebook columns must be unit-norm")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "atoms", atoms)

    @property
    def n_atoms(self):
        return self.W.shape[1]


def default_distance_rings(array, wave, n_rings=4):
    """Geometric rings from the Fraunhofer distance down to the aperture size."""
    aperture = 2.0 * array.aperture_radius
    fraunhofer = 2.0 * aperture**2 / wave.wavelength
    near = max(aperture, wave.wavelength)
    far = max(fraunhofer, 2.0 * near)
    return np.geomspace(far, near, n_rings)


def build_codebook(array, wave, angle_grid=(16, 16), distance_rings=None):
    """Polar-domain codebook over a direction-cosine grid times distance rings.

    The grid is uniform in ``(k_y, k_z)`` direction cosines with cell centres
    ``-1 + (2i + 1)/n``; cells outside the unit disk are dropped.
    """
    n_az, n_el = (int(v) for v in angle_grid)
    if n_az < 1 or n_el < 1:
        raise InvalidArgumentError("angle grid must be nonempty")
    if distance_rings is None:
        distance_rings = default_distance_rings(array, wave)
    rings = np.atleast_1d(np.asarray(distance_rings, dtype=float))
    if rings.size == 0 or np.any(rings <= 0):
        raise InvalidArgumentError("distance rings must be nonempty and positive")
    cy = -1.0 + (2.0 * np.arange(n_az) + 1.0) / n_az
    cz = -1.0 + (2.0 * np.arange(n_el) + 1.0) / n_el
    uy, uz = np.meshgrid(cy, cz, indexing="ij")
    keep = uy**2 + uz**2 < 1.0
    uy, uz = uy[keep], uz[keep]
    ux = np.sqrt(1.0 - uy**2 - uz**2)
    dirs = np.stack([ux, uy, uz], axis=1)
    az = np.arctan2(uy, ux)
    el = np.arcsin(uz)

    pos = array.positions()
    k = wave.wavenumber
    cols, meta = [], []
    for dist in rings:
        q = dist * dirs
        # |p - q| - |q| without cancellation at large distance
        pq = (np.sum(pos**2, axis=1)[:, None] - 2.0 * pos @ q.T) / (
            np.linalg.norm(pos[:, None, :] - q[None, :, :], axis=2) + dist
        )
        # same propagation sign as the correlation model: phase +k(|p - q| - |q|)
        cols.append(np.exp(1j * k * pq) / np.sqrt(len(pos)))
        meta.append(np.stack([az, el, np.full(len(az), dist)], axis=1))
    return Codebook(np.hstack(cols), np.vstack(meta))


def estimate_omp(obs, codebook, n_paths):
    """Greedy sparse recovery with ``n_paths`` atoms.

    Each round correlates the residual with the codebook, adds the best atom
    and re-solves least squares on the whole support. The ``sqrt(P)`` gain is
    folded into the sparse coefficients and divided out at the end.
    """
    W = codebook.W
    if W.shape[0] != obs.dim:
        raise InvalidArgumentError(f"codebook has {W.shape[0]} rows, observation {obs.dim}")
    n_paths = int(n_paths)
    if not 1 <= n_paths <= codebook.n_atoms:
        raise InvalidArgumentError(f"n_paths must lie in [1, {codebook.n_atoms}]")
    y = obs.y
    residual = y.copy()
    support = []
    coef = np.zeros(0, dtype=complex)
    rank_deficient = False
    for _ in range(n_paths):
        gamma = W.conj().T @ residual
        gamma[support] = 0.0
        support.append(int(np.argmax(np.abs(gamma))))
        Ws = W[:, support]
        coef, _, rank, _ = linalg.lstsq(Ws, y, cond=1e-10)
        if rank < len(support):
            rank_deficient = True
        residual = y - Ws @ coef
    estimate = W[:, support] @ coef / np.sqrt(obs.snr)
    return _report(
        estimate, obs, "omp", support=support, rank_deficient=rank_deficient
    )


# -- subspace ---------------------------------------------------------------


def isotropic_correlation(array, wave):
    """``sinc(2 |r1 - r2| / lambda)``, the correlation of an isotropic field."""
    pos = array.positions()
    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
    return sinc_normalized(2.0 * dist / wave.wavelength).astype(complex)


def compact_eigen(R, cutoff=SUBSPACE_CUTOFF):
    """Eigenpairs with eigenvalue above ``cutoff * lambda_max``."""
    eig = eigen_system(R)
    keep = eig.eigenvalues > cutoff * eig.eigenvalues[0]
    return eig.eigenvalues[keep], eig.eigenvectors[:, keep]


def _subspace_apply(y, snr, lam, U, weighted):
    z = U.conj().T @ y
    if weighted:
        # MMSE restricted to the kept subspace
        z = np.sqrt(snr) * lam / (snr * lam + 1.0) * z
    else:
        z = z / np.sqrt(snr)
    return U @ z


def estimate_subspace(obs, array, wave, weighted=True, cutoff=SUBSPACE_CUTOFF, basis=None):
    """Projection onto (``weighted``: MMSE on) the isotropic-field subspace.

    ``basis`` may carry a precomputed ``(eigenvalues, eigenvectors)`` pair.
    """
    lam, U = basis if basis is not None else compact_eigen(isotropic_correlation(array, wave), cutoff)
    if U.shape[0] != obs.dim:
        raise InvalidArgumentError(f"array has {U.shape[0]} elements, observation {obs.dim}")
    estimate = _subspace_apply(obs.y, obs.snr, lam, U, weighted)
    tag = "subspace_weighted" if weighted else "subspace"
    return _report(estimate, obs, tag, rank=int(len(lam)))


# -- MMSE-form reconstruction -----------------------------------------------


def mmse_filter(R_hat, snr):
    """``sqrt(P) R_hat (P R_hat + I)^-1`` through the Hermitian eigendecomposition."""
    eig = eigen_system(R_hat)
    lam = np.clip(eig.eigenvalues, 0.0, None)
    U = eig.eigenvectors
    gain = np.sqrt(snr) * lam / (snr * lam + 1.0)
    return (U * gain) @ U.conj().T


def estimate_mmse(obs, R_hat):
    M = R_hat.entries if isinstance(R_hat, CorrelationMatrix) else np.asarray(R_hat)
    if M.shape != (obs.dim, obs.dim):
        raise InvalidArgumentError(f"R_hat has shape {M.shape}, observation length {obs.dim}")
    return _report(mmse_filter(M, obs.snr) @ obs.y, obs, "mmse", r_hat=matrix_digest(M))


def reconstruct_clusters(y, array, wave, eta, fixed_params=None, max_peaks=None, oversample=1, weight_by_peak=True):
    """Clusters placed on the wavenumber peaks of one snapshot.

    Every peak becomes a disk at distance ``d`` along the peak direction with
    the fixed radius ``r`` and concentration ``a``; the normal defaults to
    facing the array. Powers follow the peak heights. ``oversample`` refines
    the direction-cosine grid the peaks are searched on.
    """
    params = dict(NFS_DEFAULTS)
    params.update(fixed_params or {})
    spec = sample_spectrum(y, array, wave, oversample)
    peaks = detect_peaks(spec, eta)
    if max_peaks is not None:
        peaks = peaks[:max_peaks]
    clusters = []
    for ky, kz in peaks:
        direction = direction_from_cosines(ky, kz)
        i = int(np.argmin(np.abs(spec.ky - ky)))
        j = int(np.argmin(np.abs(spec.kz - kz)))
        normal = -direction if params["mu"] is None else params["mu"]
        clusters.append(
            ScattererCluster(
                params["d"] * direction,
                normal,
                params["r"],
                params["a"],
                float(spec.values[i, j]) if weight_by_peak else 1.0,
            )
        )
    return clusters


def estimate_nfs(obs, array, wave, eta=3.0, fixed_params=None, basis=None, oversample=1):
    """Wavenumber peaks, rebuilt correlation, then the MMSE-form filter.

    Falls back to the weighted subspace estimator when no peak clears ``eta``.
    """
    if obs.dim != array.size:
        raise InvalidArgumentError(f"array has {array.size} elements, observation {obs.dim}")
    check_positive(eta, "eta")
    clusters = reconstruct_clusters(obs.y, array, wave, eta, fixed_params, oversample=oversample)
    if not clusters:
        rep = estimate_subspace(obs, array, wave, weighted=True, basis=basis)
        rep.method = "nfs"
        rep.aux["fallback"] = True
        return rep
    R_hat = assemble_matrix(CorrelationKernel(clusters, wave), array).normalized()
    estimate = mmse_filter(R_hat.entries, obs.snr) @ obs.y
    return _report(
        estimate,
        obs,
        "nfs",
        fallback=False,
        n_peaks=len(clusters),
        r_hat=matrix_digest(R_hat),
    )


def analytic_mse(R, R_hat, snr):
    """Expected ``||h_hat - h||^2`` of the MMSE-form filter built on ``R_hat``.

    Evaluated as ``tr(G G^H (P R + I) - 2 sqrt(P) Re(G R) + R)`` with
    ``G = sqrt(P) R_hat (P R_hat + I)^-1``, which needs no inverse of ``R_hat``.
    """
    A = R.entries if isinstance(R, CorrelationMatrix) else np.asarray(R, dtype=complex)
    B = R_hat.entries if isinstance(R_hat, CorrelationMatrix) else np.asarray(R_hat, dtype=complex)
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"dimension mismatch: {A.shape} vs {B.shape}")
    check_positive(snr, "snr")
    G = mmse_filter(B, snr)
    n = len(A)
    cov_y = snr * A + np.eye(n)
    val = (
        np.trace(G @ cov_y @ G.conj().T).real
        - 2.0 * np.sqrt(snr) * np.trace(G @ A).real
        + np.trace(A).real
    )
    return float(val)


# -- scikit-learn style wrappers ----------------------------------------------


class _ChannelEstimator(BaseEstimator):
    """Shared ``predict`` / ``score`` plumbing; rows of ``Y`` are snapshots."""

    method = None

    def _estimate(self, obs):
        raise NotImplementedError

    def _check_snr(self):
        return check_positive(self.snr, "snr")

    def fit(self, X=None, y=None):
        self._check_snr()
        self.n_features_in_ = None if X is None else check_complex_2d(X, "X").shape[1]
        self.fitted_ = True
        return self

    def estimate_reports(self, Y):
        check_is_fitted(self, "fitted_")
        Y = check_complex_2d(Y, "Y", self.n_features_in_)
        return [self._estimate(Observation(row, self._check_snr())) for row in Y]

    def predict(self, Y):
        return np.vstack([rep.estimate for rep in self.estimate_reports(Y)])

    def score(self, Y, H):
        """Negative mean NMSE of the row-wise estimates against truths ``H``."""
        H = check_complex_2d(H, "H")
        est = self.predict(Y)
        if est.shape != H.shape:
            raise InvalidArgumentError("Y and H shapes differ")
        return -float(np.mean([nmse(e, h) for e, h in zip(est, H)]))


class LSEstimator(_ChannelEstimator):
    def __init__(self, snr=1.0):
        self.snr = snr

    def _estimate(self, obs):
        return estimate_ls(obs)


class OMPEstimator(_ChannelEstimator):
    """Greedy sparse recovery over a polar-domain codebook built at ``fit``."""

    def __init__(self, array=None, wave=None, snr=1.0, n_paths=20, angle_grid=(16, 16), distance_rings=None):
        self.array = array
        self.wave = wave
        self.snr = snr
        self.n_paths = n_paths
        self.angle_grid = angle_grid
        self.distance_rings = distance_rings

    def fit(self, X=None, y=None):
        if self.array is None or self.wave is None:
            raise InvalidArgumentError("OMPEstimator needs array and wave")
        self.codebook_ = build_codebook(self.array, self.wave, self.angle_grid, self.distance_rings)
        if not 1 <= int(self.n_paths) <= self.codebook_.n_atoms:
            raise InvalidArgumentError(f"n_paths must lie in [1, {self.codebook_.n_atoms}]")
        self._check_snr()
        self.n_features_in_ = self.array.size
        self.fitted_ = True
        return self

    def _estimate(self, obs):
        return estimate_omp(obs, self.codebook_, self.n_paths)


class SubspaceEstimator(_ChannelEstimator):
    def __init__(self, array=None, wave=None, snr=1.0, weighted=True, cutoff=SUBSPACE_CUTOFF):
        self.array = array
        self.wave = wave
        self.snr = snr
        self.weighted = weighted
        self.cutoff = cutoff

    def fit(self, X=None, y=None):
        if self.array is None or self.wave is None:
            raise InvalidArgumentError("SubspaceEstimator needs array and wave")
        self.basis_ = compact_eigen(isotropic_correlation(self.array, self.wave), self.cutoff)
        self._check_snr()
        self.n_features_in_ = self.array.size
        self.fitted_ = True
        return self

    def _estimate(self, obs):
        return estimate_subspace(obs, self.array, self.wave, self.weighted, basis=self.basis_)


class NFSEstimator(_ChannelEstimator):
    """Peak-driven correlation reconstruction followed by the MMSE-form filter."""

    def __init__(self, array=None, wave=None, snr=1.0, eta=3.0, d=100.0, r=2.0, a=0.0, mu=None):
        self.array = array
        self.wave = wave
        self.snr = snr
        self.eta = eta
        self.d = d
        self.r = r
        self.a = a
        self.mu = mu

    def fit(self, X=None, y=None):
        if self.array is None or self.wave is None:
            raise InvalidArgumentError("NFSEstimator needs array and wave")
        check_positive(self.eta, "eta")
        self.basis_ = compact_eigen(isotropic_correlation(self.array, self.wave))
        self._check_snr()
        self.n_features_in_ = self.array.size
        self.fitted_ = True
        return self

    def _estimate(self, obs):
        params = {"d": self.d, "r": self.r, "a": self.a, "mu": self.mu}
        return estimate_nfs(obs, self.array, self.wave, self.eta, params, basis=self.basis_)


class MMSEEstimator(_ChannelEstimator):
    """MMSE-form filter on a correlation matrix passed to ``fit``."""

    def __init__(self, snr=1.0):
        self.snr = snr

    def fit(self, X, y=None):
        M = X.entries if isinstance(X, CorrelationMatrix) else np.asarray(X, dtype=complex)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvalidArgumentError("MMSEEstimator.fit expects a square correlation matrix")
        self.correlation_ = M
        self.filter_ = mmse_filter(M, self._check_snr())
        self.n_features_in_ = M.shape[0]
        self.fitted_ = True
        return self

    def _estimate(self, obs):
        if obs.snr != self.snr:
            return estimate_mmse(obs, self.correlation_)
        est = self.filter_ @ obs.y
        return _report(est, obs, "mmse", r_hat=matrix_digest(self.correlation_))
