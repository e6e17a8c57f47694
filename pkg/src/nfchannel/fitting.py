"""Fitting disk-cluster parameters to a target correlation matrix.

The loss is the squared relative Frobenius error between the closed-form
model and the target. It is minimized with a quasi-Newton recursion on the
inverse Hessian plus Armijo backtracking; gradients come from central
finite differences. Optimization runs in per-component scaled coordinates,
so the identity start ``H0 = I`` is sensible for mixed units.

Per cluster the parameter vector holds, in order: centre distance (m),
centre azimuth and elevation (rad), normal azimuth and elevation (rad),
radius (m), concentration, power.
"""

import csv
from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy.optimize import nnls
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .correlation import CorrelationKernel, CorrelationMatrix, analytic_block, relative_error
from .exceptions import InvalidArgumentError
from .geometry import ScattererCluster
from .wavenumber import detect_peaks, direction_from_cosines, expected_spectrum

PARAM_NAMES = (
    "distance",
    "azimuth",
    "elevation",
    "normal_azimuth",
    "normal_elevation",
    "radius",
    "concentration",
    "power",
)
N_PARAMS = len(PARAM_NAMES)
_HALF_PI = np.pi / 2.0
DEFAULT_LOWER = np.array([0.5, -np.pi, -_HALF_PI + 1e-3, -2 * np.pi, -_HALF_PI, 1e-4, -0.99, 0.0])
DEFAULT_UPPER = np.array([1e5, np.pi, _HALF_PI - 1e-3, 2 * np.pi, _HALF_PI, 1e3, 50.0, np.inf])
# per-component floors of the optimizer scaling
_SCALE_FLOOR = np.array([1.0, 0.05, 0.05, 0.1, 0.1, 0.05, 0.5, 0.0])

# ray angle offsets (units of the cluster spread) of a 20-ray cluster
RAY_OFFSETS = np.array(
    [0.0447, 0.1413, 0.2492, 0.3715, 0.5129, 0.6797, 0.8844, 1.1481, 1.5195, 2.1551]
)


def _unit_from_angles(az, el):
    ce = np.cos(el)
    return np.array([ce * np.cos(az), ce * np.sin(az), np.sin(el)])


def _angles_from_unit(v):
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    return float(np.arctan2(v[1], v[0])), float(np.arcsin(np.clip(v[2], -1.0, 1.0)))


def cluster_to_params(cluster):
    az, el = _angles_from_unit(cluster.d)
    naz, nel = _angles_from_unit(cluster.mu)
    return np.array(
        [cluster.distance, az, el, naz, nel, cluster.radius, cluster.concentration, cluster.power]
    )


def params_to_cluster(p):
    p = np.asarray(p, dtype=float)
    if p.shape != (N_PARAMS,):
        raise InvalidArgumentError(f"expected {N_PARAMS} cluster parameters, got shape {p.shape}")
    d, az, el, naz, nel, radius, conc, power = p
    return ScattererCluster(
        d * _unit_from_angles(az, el), _unit_from_angles(naz, nel), radius, conc, power
    )


@dataclass
class FitProblem:
    """Target matrix plus the geometry it lives on; bounds apply per component."""

    target: CorrelationMatrix
    array: object
    wave: object
    n_clusters: int = 1
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        if not isinstance(self.target, CorrelationMatrix):
            self.target = CorrelationMatrix(self.target, provenance="imported")
        if self.target.dim != self.array.size:
            raise InvalidArgumentError(
                f"target has dimension {self.target.dim}, array has {self.array.size} elements"
            )
        if int(self.n_clusters) != self.n_clusters or self.n_clusters < 1:
            raise InvalidArgumentError("n_clusters must be a positive integer")
        n = self.n_clusters * N_PARAMS
        self.lower = np.tile(DEFAULT_LOWER, self.n_clusters) if self.lower is None else np.asarray(self.lower, float)
        self.upper = np.tile(DEFAULT_UPPER, self.n_clusters) if self.upper is None else np.asarray(self.upper, float)
        if self.lower.shape != (n,) or self.upper.shape != (n,) or np.any(self.lower > self.upper):
            raise InvalidArgumentError("bounds must be ordered vectors of length 8 * n_clusters")
        self._positions = self.array.positions()
        self._target_norm2 = np.linalg.norm(self.target.entries) ** 2
        if self._target_norm2 == 0.0:
            raise InvalidArgumentError("target matrix is zero")

    @property
    def size(self):
        return self.n_clusters * N_PARAMS

    def encode(self, clusters):
        clusters = list(clusters)
        if len(clusters) != self.n_clusters:
            raise InvalidArgumentError(f"expected {self.n_clusters} clusters, got {len(clusters)}")
        return np.concatenate([cluster_to_params(c) for c in clusters])

    def decode(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.size,):
            raise InvalidArgumentError(f"parameter vector must have length {self.size}")
        return [params_to_cluster(p) for p in x.reshape(self.n_clusters, N_PARAMS)]

    def project(self, x):
        return np.clip(x, self.lower, self.upper)

    def model_blocks(self, x):
        """Per-cluster model matrices with unit power."""
        blocks = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for c in self.decode(x):
                blocks.append(analytic_block(self._positions, self._positions, c.replace(power=1.0), self.wave))
        return blocks

    def model(self, x):
        x = np.asarray(x, dtype=float)
        powers = x.reshape(self.n_clusters, N_PARAMS)[:, -1]
        return sum(p * B for p, B in zip(powers, self.model_blocks(x)))

    def loss(self, x):
        diff = self.model(x) - self.target.entries
        return float(np.linalg.norm(diff) ** 2 / self._target_norm2)

    def fit_powers(self, x):
        """Return ``x`` with powers replaced by their non-negative least-squares optimum."""
        x = np.array(x, dtype=float)
        blocks = self.model_blocks(x)
        A = np.stack([B.ravel() for B in blocks], axis=1)
        b = self.target.entries.ravel()
        beta, _ = nnls(np.vstack([A.real, A.imag]), np.concatenate([b.real, b.imag]))
        x.reshape(self.n_clusters, N_PARAMS)[:, -1] = beta
        return self.project(x)


def fit_loss(x, problem):
    """Squared relative Frobenius error of the decoded model against the target."""
    return problem.loss(x)


@dataclass
class FitTrace:
    """Accepted iterates as ``(x, loss, gradient norm, step size)`` tuples."""

    iterates: list = field(default_factory=list)
    converged: bool = False
    curvature_skips: int = 0
    message: str = ""

    @property
    def losses(self):
        return np.array([it[1] for it in self.iterates])

    def rows(self):
        """Plot-ready rows ``(iteration, loss, grad_norm, step)``."""
        return [(i, it[1], it[2], it[3]) for i, it in enumerate(self.iterates)]


def finite_difference_gradient(f, x, rel_step=1e-5, f_args=()):
    """Central differences with per-component step ``rel_step * (1 + |x_i|)``."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(len(x)):
        h = rel_step * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp, *f_args) - f(xm, *f_args)) / (2.0 * h)
    return g


def inverse_hessian_update(H, s, q, form="bfgs"):
    """Rank-two inverse-Hessian update from step ``s`` and gradient change ``q``.

    ``form="bfgs"`` is ``V^T H V + s s^T / (q^T s)`` with
    ``V = I - q s^T / (q^T s)``, which satisfies the secant condition
    ``H_new q = s``. ``form="literal"`` applies ``V H V^T`` instead.
    Returns ``None`` when the curvature ``q^T s`` is not positive.
    """
    qs = float(q @ s)
    if not qs > 1e-300:
        return None
    V = np.eye(len(s)) - np.outer(q, s) / qs
    if form == "bfgs":
        core = V.T @ H @ V
    elif form == "literal":
        core = V @ H @ V.T
    else:
        raise InvalidArgumentError(f"unknown update form {form!r}")
    Hn = core + np.outer(s, s) / qs
    return 0.5 * (Hn + Hn.T)


def quasi_newton(
    f,
    x0,
    max_iter=100,
    tol=1e-8,
    lower=None,
    upper=None,
    scale=None,
    grad=None,
    c1=1e-4,
    max_backtracks=60,
    form="bfgs",
    callback=None,
):
    """Minimize ``f`` from ``x0`` with a quasi-Newton recursion.

    The search runs on ``z = x / scale``; bounds are enforced by projection
    after each trial step. Every accepted step satisfies the Armijo condition
    and strictly lowers ``f``. Stops when the loss or the scaled gradient norm
    drops to ``tol`` or after ``max_iter`` iterations.
    """
    x0 = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise InvalidArgumentError("initial point must be finite")
    n = len(x0)
    scale = np.ones(n) if scale is None else np.asarray(scale, dtype=float)
    if np.any(scale <= 0):
        raise InvalidArgumentError("scale must be positive")
    lo = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    hi = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)

    def fz(z):
        return f(np.clip(z * scale, lo, hi))

    def gz(z):
        if grad is not None:
            return grad(np.clip(z * scale, lo, hi)) * scale
        return finite_difference_gradient(fz, z)

    z = np.clip(x0, lo, hi) / scale
    fk = fz(z)
    g = gz(z)
    H = np.eye(n)
    trace = FitTrace()
    trace.iterates.append((z * scale, fk, float(np.linalg.norm(g)), 0.0))
    for _ in range(max_iter):
        if fk <= tol or np.linalg.norm(g) <= tol:
            trace.converged = True
            trace.message = "tolerance reached"
            break
        p = -H @ g
        if not g @ p < 0:
            H = np.eye(n)
            p = -g
        alpha = 1.0
        accepted = False
        for _ in range(max_backtracks):
            z_new = np.clip((z + alpha * p) * scale, lo, hi) / scale
            s = z_new - z
            f_new = fz(z_new)
            if f_new < fk and f_new <= fk + c1 * (g @ s):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            trace.message = "line search failed"
            break
        g_new = gz(z_new)
        H_new = inverse_hessian_update(H, s, g_new - g, form)
        if H_new is None:
            trace.curvature_skips += 1
        else:
            H = H_new
        z, fk, g = z_new, f_new, g_new
        trace.iterates.append((z * scale, fk, float(np.linalg.norm(g)), alpha))
        if callback is not None:
            callback(z * scale, fk)
    else:
        trace.message = "max_iter reached"
    if not trace.converged and (fk <= tol or np.linalg.norm(g) <= tol):
        trace.converged = True
    return np.clip(z * scale, lo, hi), trace


def default_scale(x):
    """Per-component optimizer scaling ``max(|x_i|, floor_i)``."""
    x = np.asarray(x, dtype=float)
    floors = np.tile(_SCALE_FLOOR, len(x) // N_PARAMS)
    s = np.maximum(np.abs(x), floors)
    return np.where(s > 0, s, 1.0)


def initial_guess(problem, distance=None, radius_fraction=0.05, oversample=4):
    """Start from the strongest peaks of the target's wavenumber spectrum.

    Clusters face the array from ``distance`` (default: 20 apertures) with
    radius ``radius_fraction * distance``; powers are least-squares fitted.
    Missing peaks are filled with copies of the strongest one.
    """
    spec = expected_spectrum(problem.target, problem.array, problem.wave, oversample)
    peaks = detect_peaks(spec, eta=1e-6)
    if not peaks:
        peaks = [spec.argmax_direction()]
    if distance is None:
        distance = max(20.0 * 2.0 * problem.array.aperture_radius, 10.0 * problem.wave.wavelength)
    clusters = []
    for i in range(problem.n_clusters):
        ky, kz = peaks[i % len(peaks)]
        u = direction_from_cosines(ky, kz)
        clusters.append(ScattererCluster(distance * u, -u, radius_fraction * distance, 0.0, 1.0))
    return problem.fit_powers(problem.project(problem.encode(clusters)))


def quasi_newton_fit(problem, x0=None, max_iter=200, tol=1e-6, form="bfgs", scale=None):
    """Fit ``problem`` from ``x0`` (default: spectrum-peak initial guess)."""
    x0 = initial_guess(problem) if x0 is None else problem.project(np.asarray(x0, dtype=float))
    scale = default_scale(x0) if scale is None else scale
    return quasi_newton(
        problem.loss,
        x0,
        max_iter=max_iter,
        tol=tol,
        lower=problem.lower,
        upper=problem.upper,
        scale=scale,
        form=form,
    )


# -- ray-cluster targets -----------------------------------------------------


def _ray_array(rays):
    if isinstance(rays, np.ndarray):
        table = np.asarray(rays, dtype=float)
    else:
        rays = list(rays)
        if rays and isinstance(rays[0], dict):
            table = np.array([[r["power"], r["azimuth"], r["elevation"]] for r in rays], dtype=float)
        else:
            table = np.asarray(rays, dtype=float)
    if table.ndim != 2 or table.shape[1] != 3 or len(table) == 0:
        raise InvalidArgumentError("rays must be a nonempty (n, 3) table of power, azimuth, elevation")
    if np.any(table[:, 0] < 0) or not np.all(np.isfinite(table)):
        raise InvalidArgumentError("ray powers must be finite and >= 0")
    return table


def ray_cluster_target(rays, array, wave):
    """Far-field correlation ``sum_rays power exp(-j k u_ray . (r1 - r2))``.

    ``rays`` is a table of ``(power, azimuth_deg, elevation_deg)`` rows or a
    list of dicts with those keys (``power``, ``azimuth``, ``elevation``).
    """
    table = _ray_array(rays)
    az = np.radians(table[:, 1])
    el = np.radians(table[:, 2])
    dirs = np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1)
    steer = np.exp(-1j * wave.wavenumber * array.positions() @ dirs.T)
    R = (steer * table[:, 0]) @ steer.conj().T
    R = 0.5 * (R + R.conj().T)
    return CorrelationMatrix(R, provenance="imported", meta={"n_rays": len(table)})


def synthetic_ray_table(
    n_clusters=23,
    rays_per_cluster=20,
    decay_db=3.0,
    spread_deg=5.0,
    azimuth_range=60.0,
    elevation_range=20.0,
    seed=0,
):
    """Clustered ray table in the style of a clustered-delay-line profile.

    Cluster ``i`` has power ``10^(-decay_db * i / 10)`` split evenly over its
    rays around a uniformly drawn centre direction. Ray offsets follow the
    standard +- pattern scaled by ``spread_deg``, with a shuffled copy at half
    scale in elevation.
    """
    if rays_per_cluster > 2 * len(RAY_OFFSETS) or rays_per_cluster < 1:
        raise InvalidArgumentError(f"rays_per_cluster must lie in [1, {2 * len(RAY_OFFSETS)}]")
    rng = np.random.default_rng(seed)
    offsets = np.stack([RAY_OFFSETS, -RAY_OFFSETS], axis=1).ravel()[:rays_per_cluster]
    rows = []
    for i in range(n_clusters):
        power = 10.0 ** (-decay_db * i / 10.0) / rays_per_cluster
        az0 = rng.uniform(-azimuth_range, azimuth_range)
        el0 = rng.uniform(-elevation_range, elevation_range)
        el_offsets = rng.permutation(offsets)
        for j, off in enumerate(offsets):
            rows.append((power, az0 + spread_deg * off, el0 + 0.5 * spread_deg * el_offsets[j]))
    return np.array(rows)


def write_ray_table(path, table):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["power", "azimuth_deg", "elevation_deg"])
        for row in _ray_array(table):
            w.writerow([repr(float(v)) for v in row])


def read_ray_table(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["power", "azimuth_deg", "elevation_deg"]:
            raise InvalidArgumentError(f"{path}: expected header power,azimuth_deg,elevation_deg")
        rows = [[float(v) for v in row] for row in reader if row]
    return _ray_array(np.array(rows))


class CorrelationModelFitter(BaseEstimator):
    """Fit ``n_clusters`` disk clusters to a target matrix.

    ``fit(R)`` takes a ``CorrelationMatrix`` or square array; after fitting,
    ``clusters_``, ``loss_`` and ``trace_`` hold the result and ``predict()``
    returns the fitted model matrix.
    """

    def __init__(self, array=None, wave=None, n_clusters=1, max_iter=200, tol=1e-6, init=None, form="bfgs"):
        self.array = array
        self.wave = wave
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.tol = tol
        self.init = init
        self.form = form

    def fit(self, X, y=None):
        if self.array is None or self.wave is None:
            raise InvalidArgumentError("CorrelationModelFitter needs array and wave")
        self.problem_ = FitProblem(X, self.array, self.wave, self.n_clusters)
        x0 = None
        if self.init is not None:
            x0 = self.init if isinstance(self.init, np.ndarray) else self.problem_.encode(self.init)
        x, self.trace_ = quasi_newton_fit(self.problem_, x0, self.max_iter, self.tol, self.form)
        self.x_ = x
        self.clusters_ = self.problem_.decode(x)
        self.loss_ = self.problem_.loss(x)
        self.n_features_in_ = self.array.size
        return self

    def predict(self, X=None):
        check_is_fitted(self, "x_")
        return CorrelationMatrix(self.problem_.model(self.x_), provenance="reconstructed")

    def score(self, X, y=None):
        """Negative relative error of the fitted model against ``X``."""
        check_is_fitted(self, "x_")
        target = X if isinstance(X, CorrelationMatrix) else CorrelationMatrix(X, provenance="imported")
        return -relative_error(self.predict(), target)

    @property
    def kernel_(self):
        check_is_fitted(self, "x_")
        return CorrelationKernel(self.clusters_, self.wave)
