"""C-infinity bump functions used by the deformation switches.

zeta is the classic smooth step seed: exp(-mu/chi) for positive arguments,
identically zero otherwise; all derivatives vanish at zero, which is what
makes the switches flat at the collar boundary. eta rescales it into a
monotone cutoff that equals 1 at chi = 0 and reaches 0 at chi = eps.
"""

import numpy as np


def zeta(chi, mu: float):
    """exp(-mu/chi) for chi > 0, else 0. Vectorized; mu must be positive."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    c = np.asarray(chi, dtype=float)
    out = np.zeros_like(c)
    pos = c > 0
    np.divide(-mu, c, out=out, where=pos)
    np.exp(out, out=out, where=pos)
    out[~pos] = 0.0
    return out if np.ndim(chi) else float(out)


def zeta_prime(chi, mu: float):
    """Derivative of zeta: mu * zeta(chi) / chi^2 on the positive branch."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    c = np.asarray(chi, dtype=float)
    out = np.zeros_like(c)
    pos = c > 0
    z = zeta(c, mu)
    np.divide(mu * np.asarray(z), c * c, out=out, where=pos)
    return out if np.ndim(chi) else float(out)


def eta(chi, mu: float, eps: float):
    """Monotone cutoff zeta(eps - chi) / zeta(eps): 1 at chi <= 0, 0 at chi >= eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return zeta(eps - np.asarray(chi, dtype=float), mu) / zeta(eps, mu)


def eta_prime(chi, mu: float, eps: float):
    """Derivative of eta in chi."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return -zeta_prime(eps - np.asarray(chi, dtype=float), mu) / zeta(eps, mu)
