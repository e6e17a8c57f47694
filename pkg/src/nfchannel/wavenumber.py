"""Wavenumber-domain view of the channel.

The transform matrices follow the centred-index form
``F[p, q] = exp(j 2k/(N-1) (p - c)(q - c) spacing)``, c = (N-1)/2, so row
``p`` is a plane wave with direction cosine ``(2p - (N-1)) / (N-1)``.
Spectra are ``|F1 H F2|^2`` with ``H`` the channel reshaped to (n_y, n_z);
under the ``exp(jk|r - r'|)`` propagation convention a scatterer in
direction ``d_hat`` lights up the cell nearest ``(d_hat_y, d_hat_z)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .correlation import CorrelationMatrix
from .exceptions import InvalidArgumentError


@dataclass
class SpectrumGrid:
    """Power over the (k_y, k_z) grid; axes are direction cosines in [-1, 1]."""

    values: np.ndarray
    ky: np.ndarray
    kz: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.ky), len(self.kz)):
            raise InvalidArgumentError("spectrum shape does not match its axes")

    @property
    def bin_width(self):
        return (
            float(self.ky[1] - self.ky[0]) if len(self.ky) > 1 else 2.0,
            float(self.kz[1] - self.kz[0]) if len(self.kz) > 1 else 2.0,
        )

    def argmax_direction(self):
        i, j = np.unravel_index(np.argmax(self.values), self.values.shape)
        return float(self.ky[i]), float(self.kz[j])


def direction_axis(n, oversample=1):
    """Direction cosines of the ``oversample * (n - 1) + 1`` grid rows."""
    if n < 2:
        raise InvalidArgumentError("a wavenumber axis needs at least 2 elements")
    if int(oversample) != oversample or oversample < 1:
        raise InvalidArgumentError("oversample must be a positive integer")
    m = int(oversample) * (n - 1) + 1
    return (2.0 * np.arange(m) - (m - 1)) / (m - 1)


def _dft(n, spacing, k, oversample=1):
    c = np.arange(n) - (n - 1) / 2.0
    return np.exp(1j * k * np.outer(direction_axis(n, oversample), c) * spacing)


def dft_matrices(array, wave, oversample=1):
    """Return ``(F1, F2)``; square (n_y, n_y) and (n_z, n_z) unless oversampled.

    With ``oversample > 1`` the rows sample the direction-cosine axis
    ``oversample`` times more finely; ``F2`` is returned transposed so that
    ``F1 H F2`` keeps working.
    """
    if array.n_y < 2 or array.n_z < 2:
        raise InvalidArgumentError("dft_matrices needs n_y, n_z >= 2")
    k = wave.wavenumber
    F1 = _dft(array.n_y, array.spacing_y, k, oversample)
    F2 = _dft(array.n_z, array.spacing_z, k, oversample).T
    return F1, F2


def expected_spectrum(R, array, wave, oversample=1):
    """``E|(F1 H F2)_ij|^2`` computed from the correlation matrix."""
    M = R.entries if isinstance(R, CorrelationMatrix) else np.asarray(R)
    ny, nz = array.n_y, array.n_z
    if M.shape != (ny * nz, ny * nz):
        raise InvalidArgumentError(f"R has shape {M.shape}, array needs {(ny * nz,) * 2}")
    F1, F2 = dft_matrices(array, wave, oversample)
    R4 = M.reshape(ny, nz, ny, nz)
    T = np.einsum("ia,abcd->ibcd", F1, R4, optimize=True)
    T = np.einsum("ibcd,ic->ibd", T, F1.conj(), optimize=True)
    S = np.einsum("bj,ibd,dj->ij", F2, T, F2.conj(), optimize=True)
    return SpectrumGrid(
        np.clip(S.real, 0.0, None),
        direction_axis(ny, oversample),
        direction_axis(nz, oversample),
    )


def spectrum_power(h, array, wave, oversample=1):
    """``|F1 H F2|^2`` for one vector or a batch of shape (n, dim)."""
    h = np.asarray(h, dtype=complex)
    if h.shape[-1] != array.size:
        raise InvalidArgumentError(f"channel length {h.shape[-1]} != array size {array.size}")
    F1, F2 = dft_matrices(array, wave, oversample)
    H = array.to_grid(h)
    return np.abs(F1 @ H @ F2) ** 2


def sample_spectrum(h, array, wave, oversample=1):
    h = getattr(h, "h", h)
    return SpectrumGrid(
        spectrum_power(h, array, wave, oversample),
        direction_axis(array.n_y, oversample),
        direction_axis(array.n_z, oversample),
    )


def local_maxima(values, neighbors=8):
    """Boolean mask of cells strictly above every existing neighbour."""
    v = np.asarray(values, dtype=float)
    padded = np.pad(v, 1, mode="constant", constant_values=-np.inf)
    if neighbors == 8:
        shifts = [(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)]
    elif neighbors == 4:
        shifts = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        raise InvalidArgumentError("neighbors must be 4 or 8")
    n, m = v.shape
    mask = np.ones_like(v, dtype=bool)
    for di, dj in shifts:
        mask &= v > padded[1 + di : 1 + di + n, 1 + dj : 1 + dj + m]
    return mask


def detect_peaks(grid, eta, neighbors=8, magnitude=False):
    """Peak cells of a spectrum as ``(k_y, k_z)`` direction cosines.

    A cell qualifies when it is strictly above its neighbours and above
    ``eta`` times the grid mean. With ``magnitude=True`` the comparison runs
    on ``sqrt(power)``. Peaks come back strongest first.
    """
    if not eta > 0:
        raise InvalidArgumentError("eta must be > 0")
    v = np.sqrt(grid.values) if magnitude else grid.values
    mask = local_maxima(v, neighbors) & (v > eta * v.mean())
    idx = np.argwhere(mask)
    order = np.argsort(-v[mask])
    return [(float(grid.ky[i]), float(grid.kz[j])) for i, j in idx[order]]


def direction_from_cosines(ky, kz):
    """Unit vector in the x > 0 half-space with the given y, z direction cosines."""
    s = ky * ky + kz * kz
    if s > 1.0:
        norm = np.sqrt(s)
        return np.array([0.0, ky / norm, kz / norm])
    return np.array([np.sqrt(1.0 - s), ky, kz])


def far_field_corr(r1, r2, cluster, wave):
    """Stationary plane-wave limit of a cluster's correlation."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    k = wave.wavenumber
    d = cluster.distance
    return complex(
        cluster.power / (16.0 * np.pi**2 * d**2) * np.exp(-1j * k * cluster.direction @ (r1 - r2))
    )


def far_field_matrix(clusters, array, wave):
    pos = array.positions()
    R = np.zeros((array.size, array.size), dtype=complex)
    k = wave.wavenumber
    for c in clusters:
        a = np.exp(-1j * k * pos @ c.direction)
        R += c.power / (16.0 * np.pi**2 * c.distance**2) * np.outer(a, a.conj())
    return CorrelationMatrix(R, provenance="analytic")


POINT_FAR = "point-scatterer-far"
EXTENDED_FAR = "extended-scatterer-far"
EXTENDED_NEAR = "extended-scatterer-near"


@dataclass
class FieldRegime:
    classification: str
    thresholds: dict = field(default_factory=dict)

    def to_dict(self):
        return {"classification": self.classification, "thresholds": dict(self.thresholds)}


def classify_regime(r_s, r_m, d, wave):
    """Three-way near/far classification that accounts for the scatterer size.

    The scatterer counts as a point when the total phase error stays below
    pi/8, i.e. ``(lambda - 16 r_s) d >= 8 (r_s + r_m)^2``; that needs
    ``r_s < lambda/16``. Otherwise the Rayleigh distance grown by the disk
    radius, ``8 (r_s + r_m)^2 / lambda``, splits near from far.
    """
    for name, val in (("r_s", r_s), ("r_m", r_m)):
        if not val >= 0:
            raise InvalidArgumentError(f"{name} must be >= 0")
    if not d > 0:
        raise InvalidArgumentError("d must be > 0")
    lam = wave.wavelength
    span = 8.0 * (r_s + r_m) ** 2
    size_limit = lam / 16.0
    point_boundary = span / (lam - 16.0 * r_s) if lam > 16.0 * r_s else np.inf
    rayleigh = span / lam
    thresholds = {
        "size_limit": size_limit,
        "point_boundary": point_boundary,
        "rayleigh_boundary": rayleigh,
        "r_s": float(r_s),
        "r_m": float(r_m),
        "d": float(d),
    }
    if r_s <= size_limit and d >= point_boundary:
        label = POINT_FAR
    elif d <= rayleigh:
        label = EXTENDED_NEAR
    else:
        label = EXTENDED_FAR
    return FieldRegime(label, thresholds)
