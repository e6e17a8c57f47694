"""Degrees-of-freedom diagnostics: eigenvalue mass, spatial bandwidth, cap bounds."""

from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import InvalidArgumentError
from .synthesis import EigenSystem, eigen_system

# Hidden constant of N0 = O(r_s^2 / lambda^2); only ratios of the bounds are constant-free.
DOF_CONSTANT = 4.0 * np.pi


@dataclass
class DofReport:
    effective_dof: int
    eigen_fractions: np.ndarray
    bandwidth_lower: float
    bandwidth_upper: float
    n0: float
    n1: float
    n2: float
    threshold: float = 0.99

    def to_dict(self):
        out = asdict(self)
        out["eigen_fractions"] = [float(x) for x in self.eigen_fractions]
        out["format_version"] = 1
        return out


def _eigenvalues(eigs):
    lam = eigs.eigenvalues if isinstance(eigs, EigenSystem) else np.asarray(eigs, dtype=float)
    return np.clip(np.sort(lam)[::-1], 0.0, None)


def eigen_fractions(eigs):
    """Cumulative normalized eigenvalue mass (non-decreasing, ends at 1)."""
    lam = _eigenvalues(eigs)
    total = lam.sum()
    if total == 0.0:
        return np.zeros_like(lam)
    frac = np.cumsum(lam) / total
    frac[-1] = 1.0
    return np.minimum(frac, 1.0)


def effective_dof(eigs, threshold=0.99):
    """Smallest ``k`` whose top-``k`` eigenvalues hold ``threshold`` of the mass."""
    if not 0.0 < threshold < 1.0:
        raise InvalidArgumentError("threshold must lie in (0, 1)")
    lam = _eigenvalues(eigs)
    total = lam.sum()
    if total == 0.0:
        return 0
    cum = np.cumsum(lam)
    # relative slack absorbs rounding in the cumulative sum
    return int(np.searchsorted(cum, threshold * total * (1.0 - 1e-12)) + 1)


def bandwidth_bounds(r_s, wave):
    """Bounds ``(2 pi r_s / lambda, sqrt(2) 2 pi r_s / lambda)`` on the spatial bandwidth."""
    if not r_s > 0:
        raise InvalidArgumentError("r_s must be > 0")
    lower = 2.0 * np.pi * r_s / wave.wavelength
    return lower, np.sqrt(2.0) * lower


def tilted_bandwidth_lower(r_s, d, theta, wave):
    """Lower bandwidth bound for a disk tilted by ``theta`` from the tangent orientation."""
    if not 0 < r_s < d:
        raise InvalidArgumentError("need 0 < r_s < d")
    if not 0.0 <= theta < np.pi / 2:
        raise InvalidArgumentError("theta must lie in [0, pi/2)")
    alpha0 = np.arcsin(r_s / d)
    ang = alpha0 + theta
    num = r_s * np.cos(ang)
    den = np.sqrt(d * d + r_s * r_s - 2.0 * d * r_s * np.sin(ang))
    return float(2.0 * np.pi * d / wave.wavelength * num / den)


def cap_dof_bounds(r_s, r_m, d, wave, c0=DOF_CONSTANT):
    """``(N0, N1, N2)`` with ``N2 <= N_receiver <= N1 <= N0``."""
    for name, val in (("r_s", r_s), ("r_m", r_m), ("d", d)):
        if not val > 0:
            raise InvalidArgumentError(f"{name} must be > 0")
    n0 = c0 * r_s**2 / wave.wavelength**2
    big = np.sqrt(d * d + r_m * r_m)
    n1 = n0 * 2.0 * np.pi * big * (big - d) / (4.0 * np.pi * big**2)
    small = np.sqrt(2.0 * d * d + r_m * r_m)
    n2 = n0 * 2.0 * np.pi * small * (small - np.sqrt(2.0) * d) / (4.0 * np.pi * small**2)
    return float(n0), float(n1), float(n2)


def dof_report(R, r_s, r_m, d, wave, threshold=0.99):
    eig = eigen_system(R)
    lower, upper = bandwidth_bounds(r_s, wave)
    n0, n1, n2 = cap_dof_bounds(r_s, r_m, d, wave)
    return DofReport(
        effective_dof=effective_dof(eig, threshold),
        eigen_fractions=eigen_fractions(eig),
        bandwidth_lower=lower,
        bandwidth_upper=upper,
        n0=n0,
        n1=n1,
        n2=n2,
        threshold=threshold,
    )
