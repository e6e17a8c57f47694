"""Real-order Bessel and Gamma functions with a normalized sinc.

Thin wrappers over ``scipy.special`` with the argument checks and the
removable-singularity handling the correlation formulas need. All functions
accept scalars or arrays.
"""

import numpy as np
from scipy import special as sp

from .exceptions import InvalidArgumentError


def _as_array(x):
    return np.asarray(x, dtype=float)


def _scalar_or_array(out, *inputs):
    if all(np.ndim(v) == 0 for v in inputs):
        return float(out)
    return out


def bessel_j(nu, x):
    """Bessel function of the first kind ``J_nu(x)`` for ``nu >= 0, x >= 0``."""
    nu_a, x_a = _as_array(nu), _as_array(x)
    if np.any(nu_a < 0):
        raise InvalidArgumentError("bessel_j requires nu >= 0")
    if np.any(x_a < 0):
        raise InvalidArgumentError("bessel_j requires x >= 0")
    return _scalar_or_array(sp.jv(nu_a, x_a), nu, x)


def bessel_i(nu, x):
    """Modified Bessel function ``I_nu(x)`` for ``nu >= 0, x >= 0``."""
    nu_a, x_a = _as_array(nu), _as_array(x)
    if np.any(nu_a < 0) or np.any(x_a < 0):
        raise InvalidArgumentError("bessel_i requires nu >= 0 and x >= 0")
    return _scalar_or_array(sp.iv(nu_a, x_a), nu, x)


def gamma(x):
    """Gamma function on ``x > 0``."""
    x_a = _as_array(x)
    if np.any(x_a <= 0):
        raise InvalidArgumentError("gamma is only defined here for x > 0")
    return _scalar_or_array(sp.gamma(x_a), x)


# scipy's hyp0f1 returns NaN for large b at small |z|; above this b we evaluate it ourselves
_HYP_DIRECT_MAX_B = 60.0
_SERIES_TERMS = 40


def _profile_large_order(b, z, x, nu):
    out = np.empty_like(z)
    near = -z <= b
    if np.any(near):
        # terms shrink monotonically when |z| <= b, so the sum is cancellation-free
        zn, bn = z[near], b[near]
        term = np.ones_like(zn)
        total = np.ones_like(zn)
        for k in range(_SERIES_TERMS):
            term = term * zn / ((bn + k) * (k + 1.0))
            total += term
        out[near] = total
    far = ~near
    if np.any(far):
        nf, xf = nu[far], x[far]
        log_scale = sp.gammaln(nf + 1.0) + nf * np.log(2.0 / xf)
        out[far] = np.exp(log_scale) * sp.jv(nf, xf)
    return out


def bessel_profile(nu, x):
    """``Gamma(nu+1) (2/x)^nu J_nu(x)``, equal to 1 at ``x = 0``.

    This is the hypergeometric form ``0F1(; nu+1; -x^2/4)``; evaluating it
    that way avoids the overflow of ``x^-nu`` and ``Gamma(nu+1)`` for large
    ``nu`` and the 0/0 at the origin.
    """
    nu_a, x_a = _as_array(nu), _as_array(x)
    if np.any(nu_a <= 0):
        raise InvalidArgumentError("bessel_profile requires nu > 0")
    if np.any(x_a < 0):
        raise InvalidArgumentError("bessel_profile requires x >= 0")
    nu_b, x_b = np.broadcast_arrays(nu_a, x_a)
    b = nu_b + 1.0
    z = -0.25 * x_b * x_b
    out = np.empty(b.shape)
    small = b <= _HYP_DIRECT_MAX_B
    out[small] = sp.hyp0f1(b[small], z[small])
    if np.any(~small):
        out[~small] = _profile_large_order(b[~small], z[~small], x_b[~small], nu_b[~small])
    return _scalar_or_array(out, nu, x)


def scaled_bessel(nu, x):
    """``x^-nu J_nu(x)``, with the value ``2^-nu / Gamma(nu+1)`` at ``x = 0``."""
    nu_a = _as_array(nu)
    prof = _as_array(bessel_profile(nu, x))
    log_norm = nu_a * np.log(2.0) + sp.gammaln(nu_a + 1.0)
    return _scalar_or_array(prof * np.exp(-log_norm), nu, x)


def sinc_normalized(x):
    """``sin(pi x) / (pi x)`` with ``sinc(0) = 1``."""
    x_a = _as_array(x)
    return _scalar_or_array(np.sinc(x_a), x)
