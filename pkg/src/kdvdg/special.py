"""Complete elliptic integral K(m) and Jacobi elliptic functions.

Both use the parameter convention: ``K(m) = int_0^{pi/2} (1 - m sin^2)^{-1/2}``
and ``cn(z|m)`` with the same ``m`` (not the modulus ``k = sqrt(m)``).
"""

from __future__ import annotations

import math

import numpy as np

_AGM_TOL = 1e-16
_AGM_MAX = 60


def _check_param(m: float) -> float:
    m = float(m)
    if not 0.0 <= m < 1.0:
        raise ValueError(f"elliptic parameter must satisfy 0 <= m < 1, got {m}")
    return m


def _agm_sequence(m: float):
    a, b, c = [1.0], [math.sqrt(1.0 - m)], [math.sqrt(m)]
    while abs(c[-1]) > _AGM_TOL * a[-1] and len(a) < _AGM_MAX:
        an, bn = a[-1], b[-1]
        a.append(0.5 * (an + bn))
        b.append(math.sqrt(an * bn))
        c.append(0.5 * (an - bn))
    return a, c


def elliptic_K(m: float) -> float:
    """Complete elliptic integral of the first kind via the AGM of (1, sqrt(1-m))."""
    a, _ = _agm_sequence(_check_param(m))
    return math.pi / (2.0 * a[-1])


def jacobi_sncndn(z, m: float):
    """``(sn, cn, dn)(z|m)`` by the descending Landen transformation.

    The amplitude is recovered backwards through
    ``phi_{n-1} = (phi_n + asin(c_n/a_n sin phi_n)) / 2``.
    """
    a, c = _agm_sequence(_check_param(m))
    z = np.asarray(z, dtype=float)
    n = len(a) - 1
    phi = (2.0 ** n) * a[-1] * z
    phi_next = phi
    for j in range(n, 0, -1):
        phi_next = phi
        phi = 0.5 * (phi + np.arcsin(c[j] / a[j] * np.sin(phi)))
    sn, cn = np.sin(phi), np.cos(phi)
    dn = cn / np.cos(phi_next - phi) if n > 0 else np.ones_like(phi)
    if z.ndim == 0:
        return float(sn), float(cn), float(dn)
    return sn, cn, dn


def jacobi_cn(z, m: float):
    return jacobi_sncndn(z, m)[1]


def jacobi_sn(z, m: float):
    return jacobi_sncndn(z, m)[0]


def jacobi_dn(z, m: float):
    return jacobi_sncndn(z, m)[2]
