"""Spatial correlation of the scattered field.

Two routes to ``R(r1, r2) = E[E(r1) E*(r2)]`` for a disk scatterer:

* ``corr_analytic``: the closed-form small-disk approximation, a Bessel
  profile in the transverse spatial frequency times a spherical-wave phase.
* ``corr_oracle``: direct 2-D quadrature of the exact disk integral, used as
  the reference the closed form is checked against.

The scalar Green's function is ``exp(jk|r - r'|) / (4 pi |r - r'|)``; the
1/(16 pi^2) prefactor of the closed form is tied to that normalization.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy.special import roots_jacobi

from ._validation import check_square, check_vector3
from .exceptions import InvalidArgumentError, QuadratureError
from .geometry import frame_terms, orthonormal_frame
from .special import bessel_profile

GREEN_SCALE = 1.0 / (4.0 * np.pi)
PROVENANCES = ("analytic", "oracle", "imported", "reconstructed")


@dataclass(frozen=True)
class CorrelationKernel:
    """Superposition of scatterer clusters illuminated by one wave."""

    clusters: tuple
    wave: object

    def __post_init__(self):
        clusters = tuple(self.clusters)
        if not clusters:
            raise InvalidArgumentError("a correlation kernel needs at least one cluster")
        object.__setattr__(self, "clusters", clusters)


@dataclass
class CorrelationMatrix:
    """Hermitian PSD correlation matrix over array elements."""

    entries: np.ndarray
    provenance: str = "analytic"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = check_square(self.entries, "correlation matrix")
        if self.provenance not in PROVENANCES:
            raise InvalidArgumentError(f"unknown provenance {self.provenance!r}")

    @property
    def dim(self):
        return self.entries.shape[0]

    def hermitian_error(self):
        R = self.entries
        norm = np.linalg.norm(R)
        if norm == 0.0:
            return 0.0
        return float(np.linalg.norm(R - R.conj().T) / norm)

    def check(self, herm_tol=1e-10, psd_tol=1e-8):
        """Raise ``ValueError`` unless Hermitian, PSD up to the floor, with a real non-negative diagonal."""
        herm = self.hermitian_error()
        if herm > herm_tol:
            raise ValueError(f"matrix is not Hermitian (relative error {herm:.2e})")
        diag = np.diag(self.entries)
        scale = max(np.max(np.abs(diag)), np.finfo(float).tiny)
        if np.any(np.abs(diag.imag) > herm_tol * scale) or np.any(diag.real < -herm_tol * scale):
            raise ValueError("diagonal must be real and non-negative")
        eig = np.linalg.eigvalsh(0.5 * (self.entries + self.entries.conj().T))
        if eig[0] < -psd_tol * max(eig[-1], 0.0):
            raise ValueError(
                f"matrix is indefinite: lambda_min = {eig[0]:.3e}, lambda_max = {eig[-1]:.3e}"
            )
        return self

    def normalized(self, trace=None):
        """Copy scaled so that ``tr(R) = trace`` (default: the dimension)."""
        target = self.dim if trace is None else trace
        tr = np.trace(self.entries).real
        if tr <= 0:
            raise ValueError("cannot normalize a matrix with non-positive trace")
        return CorrelationMatrix(self.entries * (target / tr), self.provenance, dict(self.meta))


def _warn_large_disk(cluster):
    if cluster.radius / cluster.distance > 0.1:
        warnings.warn(
            f"disk radius {cluster.radius:g} m is not small against its distance "
            f"{cluster.distance:g} m; the closed form loses accuracy",
            stacklevel=3,
        )


def analytic_block(points1, points2, cluster, wave):
    """Closed-form correlation between every row of ``points1`` and of ``points2``."""
    points1 = np.atleast_2d(points1)
    points2 = np.atleast_2d(points2)
    A1, u1, v1 = frame_terms(points1, cluster)
    A2, u2, v2 = frame_terms(points2, cluster)
    k = wave.wavenumber
    d = cluster.distance
    s1, s2 = np.sqrt(A1), np.sqrt(A2)
    amp = cluster.power / (16.0 * np.pi**2 * d**2) / np.outer(s1, s2)
    phase = np.exp(1j * k * d * (s1[:, None] - s2[None, :]))
    C = k**2 * ((u1[:, None] - u2[None, :]) ** 2 + (v1[:, None] - v2[None, :]) ** 2)
    profile = bessel_profile(cluster.concentration + 1.0, np.sqrt(C) * cluster.radius)
    return amp * phase * profile


def corr_analytic(r1, r2, cluster, wave):
    """Closed-form correlation of one disk cluster between ``r1`` and ``r2``."""
    _warn_large_disk(cluster)
    r1 = check_vector3(r1, "r1")
    r2 = check_vector3(r2, "r2")
    return complex(analytic_block(r1, r2, cluster, wave)[0, 0])


def corr_multi(r1, r2, kernel):
    return sum(corr_analytic(r1, r2, c, kernel.wave) for c in kernel.clusters)


def point_scatterer_corr(r1, r2, cluster, wave):
    """Correlation of an ideal point scatterer at the cluster centre."""
    d = cluster.d
    D1 = np.linalg.norm(check_vector3(r1, "r1") - d)
    D2 = np.linalg.norm(check_vector3(r2, "r2") - d)
    k = wave.wavenumber
    return complex(cluster.power * np.exp(1j * k * (D1 - D2)) / (16.0 * np.pi**2 * D1 * D2))


def _disk_rule(cluster, n_u, n_t):
    """Nodes and weights integrating the normalized gain profile over the disk.

    Gauss-Jacobi in ``u = rho^2`` absorbs the (r_s^2 - u)^a endpoint
    behaviour for every a > -1; the periodic angle uses the trapezoid rule.
    Weights sum to 1.
    """
    a = cluster.concentration
    x, w = roots_jacobi(n_u, a, 0.0)
    rs2 = cluster.radius**2
    rho = np.sqrt(rs2 * (1.0 + x) / 2.0)
    theta = 2.0 * np.pi * np.arange(n_t) / n_t
    mu1, mu2 = orthonormal_frame(cluster.mu)
    offsets = (
        rho[:, None, None] * np.cos(theta)[None, :, None] * mu1
        + rho[:, None, None] * np.sin(theta)[None, :, None] * mu2
    ).reshape(-1, 3)
    nodes = cluster.d + offsets
    # log-space keeps 2^(a+1) finite for large a
    radial = w * np.exp(np.log(a + 1.0) - (a + 1.0) * np.log(2.0))
    weights = (radial[:, None] * np.full(n_t, 1.0 / n_t)[None, :]).reshape(-1)
    return nodes, weights


def _integrate_pairs(r1, r2, nodes, weights, k, chunk):
    out = np.empty(len(r1), dtype=complex)
    sq_nodes = np.sum(nodes**2, axis=1)
    for start in range(0, len(r1), chunk):
        a = r1[start : start + chunk]
        b = r2[start : start + chunk]
        d1sq = np.sum(a**2, axis=1)[:, None] + sq_nodes[None, :] - 2.0 * a @ nodes.T
        d2sq = np.sum(b**2, axis=1)[:, None] + sq_nodes[None, :] - 2.0 * b @ nodes.T
        D1 = np.sqrt(d1sq)
        D2 = np.sqrt(d2sq)
        # difference of large distances, formed without cancellation
        diff_sq = (np.sum(a**2, axis=1) - np.sum(b**2, axis=1))[:, None] - 2.0 * (a - b) @ nodes.T
        delta = diff_sq / (D1 + D2)
        vals = np.exp(1j * k * delta) / (D1 * D2)
        out[start : start + chunk] = vals @ weights
    return out * GREEN_SCALE**2


def oracle_pairs(r1, r2, cluster, wave, tol=1e-8, atol=0.0, n_start=(16, 32), max_nodes=2**21):
    """Quadrature of the exact disk integral for paired rows of ``r1`` and ``r2``.

    Node counts in both directions double until consecutive levels agree to
    ``max(tol |I|, atol)``; entries converge independently.
    """
    if tol <= 0:
        raise InvalidArgumentError("tol must be > 0")
    r1 = np.atleast_2d(np.asarray(r1, dtype=float))
    r2 = np.atleast_2d(np.asarray(r2, dtype=float))
    if r1.shape != r2.shape:
        raise InvalidArgumentError("r1 and r2 must pair up row by row")
    k = wave.wavenumber
    # the sums below are for unit power; atol refers to the scaled result
    atol_unit = atol / cluster.power if cluster.power > 0 else np.inf
    n_u, n_t = n_start
    result = np.zeros(len(r1), dtype=complex)
    todo = np.arange(len(r1))
    nodes, weights = _disk_rule(cluster, n_u, n_t)
    chunk = max(1, int(4e6 // len(weights)))
    prev = _integrate_pairs(r1, r2, nodes, weights, k, chunk)
    err = np.full(len(r1), np.inf)
    while todo.size:
        n_u, n_t = 2 * n_u, 2 * n_t
        if n_u * n_t > max_nodes:
            worst = float(np.max(err[todo] / np.maximum(np.abs(prev[todo]), 1e-300)))
            raise QuadratureError(
                f"disk quadrature did not reach tol={tol:g} for {todo.size} entries "
                f"(worst relative error estimate {worst:.2e})",
                achieved=worst,
            )
        nodes, weights = _disk_rule(cluster, n_u, n_t)
        chunk = max(1, int(4e6 // len(weights)))
        cur = _integrate_pairs(r1[todo], r2[todo], nodes, weights, k, chunk)
        delta = np.abs(cur - prev[todo])
        err[todo] = delta
        done = delta <= np.maximum(tol * np.abs(cur), atol_unit)
        result[todo[done]] = cur[done]
        prev[todo] = cur
        todo = todo[~done]
    return cluster.power * result


def corr_oracle(r1, r2, cluster, wave, tol=1e-8, atol=0.0):
    """Exact disk correlation by adaptive quadrature (reference for ``corr_analytic``)."""
    r1 = check_vector3(r1, "r1")
    r2 = check_vector3(r2, "r2")
    return complex(oracle_pairs(r1, r2, cluster, wave, tol=tol, atol=atol)[0])


def _oracle_matrix(cluster, wave, pos, tol, n_jobs):
    n = len(pos)
    iu, ju = np.triu_indices(n)
    scale = cluster.power / (16.0 * np.pi**2 * cluster.distance**2)
    atol = tol * scale
    if n_jobs and n_jobs > 1 and len(iu) > n_jobs:
        parts = np.array_split(np.arange(len(iu)), n_jobs)
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            vals = list(
                pool.map(
                    lambda idx: oracle_pairs(pos[iu[idx]], pos[ju[idx]], cluster, wave, tol, atol),
                    parts,
                )
            )
        upper = np.concatenate(vals)
    else:
        upper = oracle_pairs(pos[iu], pos[ju], cluster, wave, tol, atol)
    R = np.zeros((n, n), dtype=complex)
    R[iu, ju] = upper
    R[ju, iu] = upper.conj()
    R[np.diag_indices(n)] = np.diag(R).real
    return R


def assemble_matrix(kernel, array, mode="analytic", tol=1e-8, n_jobs=None):
    """Correlation matrix over the array elements (flat-index order)."""
    return assemble_on_points(kernel, array.positions(), mode, tol, n_jobs)


def assemble_on_points(kernel, positions, mode="analytic", tol=1e-8, n_jobs=None):
    """Correlation matrix over arbitrary receiver points, one per row of ``positions``."""
    if mode not in ("analytic", "oracle"):
        raise InvalidArgumentError(f"mode must be 'analytic' or 'oracle', got {mode!r}")
    pos = np.asarray(positions, dtype=float)
    if pos.ndim != 2 or pos.shape[1] != 3:
        raise InvalidArgumentError("positions must be an (n, 3) array")
    R = np.zeros((len(pos), len(pos)), dtype=complex)
    for cluster in kernel.clusters:
        if mode == "analytic":
            _warn_large_disk(cluster)
            R += analytic_block(pos, pos, cluster, kernel.wave)
        else:
            R += _oracle_matrix(cluster, kernel.wave, pos, tol, n_jobs)
    if mode == "analytic":
        upper = np.triu(R)
        R = upper + np.triu(R, 1).conj().T
        R[np.diag_indices_from(R)] = np.diag(R).real
    return CorrelationMatrix(R, provenance=mode)


def relative_error(Ra, Rb):
    """``||Ra - Rb||_F^2 / ||Rb||_F^2`` with ``Rb`` the reference."""
    a = Ra.entries if isinstance(Ra, CorrelationMatrix) else np.asarray(Ra)
    b = Rb.entries if isinstance(Rb, CorrelationMatrix) else np.asarray(Rb)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"dimension mismatch: {a.shape} vs {b.shape}")
    denom = np.linalg.norm(b) ** 2
    if denom == 0.0:
        raise InvalidArgumentError("reference matrix is zero")
    return float(np.linalg.norm(a - b) ** 2 / denom)
