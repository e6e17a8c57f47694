"""Scene description: wave, receive array, scatterer clusters.

Points are plain ``numpy`` 3-vectors in metres. The receive array lies in
the plane x = 0 with elements on a centred y-z grid.
"""

from dataclasses import dataclass, field
import json

import numpy as np

from ._validation import check_positive, check_vector3
from .exceptions import ConfigError, DegenerateGeometryError, InvalidArgumentError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class Wave:
    """Monochromatic scalar wave of a given wavelength (metres)."""

    wavelength: float

    def __post_init__(self):
        check_positive(self.wavelength, "wavelength")

    @property
    def wavenumber(self):
        return 2.0 * np.pi / self.wavelength

    @classmethod
    def from_frequency(cls, frequency_hz):
        check_positive(frequency_hz, "frequency_hz")
        return cls(SPEED_OF_LIGHT / frequency_hz)


def _unit(v, name):
    v = check_vector3(v, name)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise InvalidArgumentError(f"{name} has zero length")
    return v / norm


@dataclass(frozen=True)
class ScattererCluster:
    """A disk-shaped scattering region.

    Parameters
    ----------
    center : array-like of 3 floats
        Disk centre ``d`` in metres, seen from the array centre (origin).
    normal : array-like of 3 floats
        Disk normal. Normalized on construction.
    radius : float
        Disk radius ``r_s`` (m), > 0.
    concentration : float
        Shape exponent ``a`` of the gain profile (r_s^2 - rho^2)^a, > -1.
        ``a -> -1`` is a ring, ``a = 0`` a uniform disk, ``a -> inf`` a point.
    power : float
        Scattered power ``beta`` >= 0.
    """

    center: tuple
    normal: tuple
    radius: float
    concentration: float = 0.0
    power: float = 1.0

    def __post_init__(self):
        c = check_vector3(self.center, "center")
        n = _unit(self.normal, "normal")
        check_positive(self.radius, "radius")
        if not np.isfinite(self.concentration) or self.concentration <= -1.0:
            raise InvalidArgumentError(
                f"concentration must be > -1, got {self.concentration!r}"
            )
        check_positive(self.power, "power", strict=False)
        if np.linalg.norm(c) == 0.0:
            raise InvalidArgumentError("cluster center must not be at the array origin")
        object.__setattr__(self, "center", tuple(float(x) for x in c))
        object.__setattr__(self, "normal", tuple(float(x) for x in n))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "concentration", float(self.concentration))
        object.__setattr__(self, "power", float(self.power))

    @property
    def d(self):
        return np.array(self.center)

    @property
    def mu(self):
        return np.array(self.normal)

    @property
    def distance(self):
        return float(np.linalg.norm(self.center))

    @property
    def direction(self):
        return self.d / self.distance

    def replace(self, **changes):
        values = dict(
            center=self.center,
            normal=self.normal,
            radius=self.radius,
            concentration=self.concentration,
            power=self.power,
        )
        values.update(changes)
        return ScattererCluster(**values)


def facing_cluster(center, radius, concentration=0.0, power=1.0):
    """Cluster whose disk faces the array (normal = -direction)."""
    c = check_vector3(center, "center")
    return ScattererCluster(c, -c, radius, concentration, power)


@dataclass(frozen=True)
class ArrayGeometry:
    """Planar ``n_y x n_z`` receive grid in the x = 0 plane, centred on the origin.

    Flat index ``i`` maps to grid row ``i // n_z`` (y) and column ``i % n_z`` (z).
    """

    n_y: int
    n_z: int
    spacing_y: float
    spacing_z: float

    def __post_init__(self):
        for name in ("n_y", "n_z"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidArgumentError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        check_positive(self.spacing_y, "spacing_y")
        check_positive(self.spacing_z, "spacing_z")

    @classmethod
    def square(cls, n, spacing):
        return cls(n, n, spacing, spacing)

    @property
    def size(self):
        return self.n_y * self.n_z

    def element_position(self, i):
        if not 0 <= i < self.size:
            raise InvalidArgumentError(f"element index {i} out of range [0, {self.size})")
        iy, iz = divmod(int(i), self.n_z)
        return np.array(
            [
                0.0,
                (iy - (self.n_y - 1) / 2.0) * self.spacing_y,
                (iz - (self.n_z - 1) / 2.0) * self.spacing_z,
            ]
        )

    def positions(self):
        """All element positions, shape (size, 3), in flat-index order."""
        iy, iz = np.divmod(np.arange(self.size), self.n_z)
        pos = np.zeros((self.size, 3))
        pos[:, 1] = (iy - (self.n_y - 1) / 2.0) * self.spacing_y
        pos[:, 2] = (iz - (self.n_z - 1) / 2.0) * self.spacing_z
        return pos

    def flat_index(self, iy, iz):
        return iy * self.n_z + iz

    def to_grid(self, h):
        """Reshape flat channel vector(s) so row ``i`` holds the i-th y slice."""
        h = np.asarray(h)
        return h.reshape(h.shape[:-1] + (self.n_y, self.n_z))

    def from_grid(self, H):
        H = np.asarray(H)
        return H.reshape(H.shape[:-2] + (self.size,))

    @property
    def aperture_radius(self):
        """Largest element distance from the array centre (``r_m``)."""
        return float(
            np.hypot((self.n_y - 1) / 2.0 * self.spacing_y, (self.n_z - 1) / 2.0 * self.spacing_z)
        )


def orthonormal_frame(normal):
    """Return ``(mu1, mu2)`` completing ``normal`` to a right-handed orthonormal triad.

    Deterministic: ``mu1`` is Gram-Schmidt of the canonical axis least
    aligned with ``normal``; ``mu2 = normal x mu1``.
    """
    n = _unit(normal, "normal")
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(n)))] = 1.0
    mu1 = axis - np.dot(axis, n) * n
    mu1 /= np.linalg.norm(mu1)
    mu2 = np.cross(n, mu1)
    return mu1, mu2


def factor_A(r, cluster):
    """Normalized squared distance ``||d - r||^2 / d^2`` written in the disk frame."""
    r = check_vector3(r, "r")
    d = cluster.distance
    d_hat = cluster.direction
    mu = cluster.mu
    mu1, mu2 = orthonormal_frame(mu)
    ratio = np.linalg.norm(r) / d
    cross = sum(np.dot(d_hat, m) * np.dot(r, m) for m in (mu, mu1, mu2)) / d
    A = 1.0 + ratio**2 - 2.0 * cross
    return float(A)


def frame_terms(points, cluster):
    """Per-point quantities shared by the closed-form correlation.

    Returns ``(A, u, v)`` for ``points`` of shape (n, 3) where
    ``u = (d - r).mu1 / (d sqrt(A))`` and ``v`` likewise with ``mu2``.
    Raises ``DegenerateGeometryError`` if any ``A <= 0``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = cluster.distance
    d_vec = cluster.d
    mu1, mu2 = orthonormal_frame(cluster.mu)
    basis = np.stack([cluster.mu, mu1, mu2])
    d_proj = basis @ d_vec / d
    r_proj = points @ basis.T / d
    # squared distance taken directly; the expanded form cancels near r = d
    A = np.sum((d_vec - points) ** 2, axis=1) / (d * d)
    if np.any(A <= 1e-300):
        raise DegenerateGeometryError("receive point coincides with scatterer centre (A <= 0)")
    root = np.sqrt(A)
    u = (d_proj[1] - r_proj[:, 1]) / root
    v = (d_proj[2] - r_proj[:, 2]) / root
    return A, u, v


def factor_C(r1, r2, cluster, wave):
    """Squared spatial frequency of the disk phase term between ``r1`` and ``r2``."""
    pts = np.stack([check_vector3(r1, "r1"), check_vector3(r2, "r2")])
    _, u, v = frame_terms(pts, cluster)
    k = wave.wavenumber
    return float(k**2 * ((u[0] - u[1]) ** 2 + (v[0] - v[1]) ** 2))


@dataclass(frozen=True)
class Scene:
    """A scene JSON document: the wave and array plus their scatterer clusters."""

    wave: Wave
    array: ArrayGeometry
    clusters: tuple = field(default_factory=tuple)

    _TOP_KEYS = frozenset({"wavelength", "array", "scatterers", "format_version"})
    _ARRAY_KEYS = frozenset({"ny", "nz", "dy", "dz"})
    _CLUSTER_KEYS = frozenset({"center", "normal", "radius", "concentration", "power"})

    @classmethod
    def from_dict(cls, doc, require_scatterers=True):
        if not isinstance(doc, dict):
            raise ConfigError("scene must be a JSON object")
        _reject_unknown(doc, cls._TOP_KEYS, "scene")
        for key in ("wavelength", "array"):
            if key not in doc:
                raise ConfigError(f"scene is missing required key '{key}'")
        arr = doc["array"]
        if not isinstance(arr, dict):
            raise ConfigError("scene.array must be an object")
        _reject_unknown(arr, cls._ARRAY_KEYS, "scene.array")
        missing = cls._ARRAY_KEYS - set(arr)
        if missing:
            raise ConfigError(f"scene.array is missing {sorted(missing)}")
        scatterers = doc.get("scatterers", [])
        if not isinstance(scatterers, list):
            raise ConfigError("scene.scatterers must be a list")
        if require_scatterers and not scatterers:
            raise ConfigError("scene.scatterers must contain at least one scatterer")
        try:
            wave = Wave(float(doc["wavelength"]))
            array = ArrayGeometry(arr["ny"], arr["nz"], float(arr["dy"]), float(arr["dz"]))
            clusters = []
            for n, s in enumerate(scatterers):
                if not isinstance(s, dict):
                    raise ConfigError(f"scatterer {n} must be an object")
                _reject_unknown(s, cls._CLUSTER_KEYS, f"scatterer {n}")
                for key in ("center", "normal", "radius"):
                    if key not in s:
                        raise ConfigError(f"scatterer {n} is missing '{key}'")
                clusters.append(
                    ScattererCluster(
                        s["center"],
                        s["normal"],
                        float(s["radius"]),
                        float(s.get("concentration", 0.0)),
                        float(s.get("power", 1.0)),
                    )
                )
        except (InvalidArgumentError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(wave, array, tuple(clusters))

    @classmethod
    def from_json(cls, path, require_scatterers=True):
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(doc, require_scatterers=require_scatterers)

    def to_dict(self):
        return {
            "format_version": 1,
            "wavelength": self.wave.wavelength,
            "array": {
                "ny": self.array.n_y,
                "nz": self.array.n_z,
                "dy": self.array.spacing_y,
                "dz": self.array.spacing_z,
            },
            "scatterers": [
                {
                    "center": list(c.center),
                    "normal": list(c.normal),
                    "radius": c.radius,
                    "concentration": c.concentration,
                    "power": c.power,
                }
                for c in self.clusters
            ],
        }


def _reject_unknown(doc, allowed, where):
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
