"""Complete and incomplete elliptic integrals and Jacobi elliptic functions.

Every function in this module takes the elliptic MODULUS k, never the
parameter m = k**2 used by SciPy and most other numerical libraries.
Conversions between the two conventions belong to the call sites.

All functions accept scalars or numpy arrays (broadcast together) and
return a float for scalar input, an ndarray otherwise.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike

from dynamics.DynamicsExceptions import DomainError

# Largest modulus accepted by the functions that diverge at k = 1.
SINGULAR_GUARD = 1e-12
K_MAX = 1.0 - SINGULAR_GUARD
# Largest modulus that passes the guard; physical callers clamp to it.
K_CLAMP = math.nextafter(K_MAX, 0.0)

AGM_RTOL = 1e-16
AGM_MAX_ITER = 64

_RF_TOLERANCE_SCALE = (3.0 * np.finfo(float).eps) ** (-1.0 / 8.0)


def _output(values: np.ndarray, *inputs: ArrayLike) -> float | np.ndarray:
    if all(np.ndim(value) == 0 for value in inputs):
        return float(values)

    return values


def _check_modulus(k: ArrayLike, upper: float, closed: bool = False) -> np.ndarray:
    k_arr = np.asarray(k, dtype=float)
    bad = ~np.isfinite(k_arr) | (k_arr < 0.0) | ((k_arr > upper) if closed else (k_arr >= upper))
    if np.any(bad):
        interval = f'[0, {upper!r}]' if closed else f'[0, {upper!r})'
        raise DomainError('k', float(k_arr[bad].flat[0]), f'{interval} (modulus, not parameter m = k**2)')

    return k_arr


def complementary_modulus(k: ArrayLike) -> float | np.ndarray:
    """Returns k' = sqrt(1 - k**2), computed as sqrt((1 - k)(1 + k)) to keep precision near k = 1."""
    k_arr = _check_modulus(k, 1.0, closed=True)

    return _output(np.sqrt((1.0 - k_arr) * (1.0 + k_arr)), k)


def _agm_sequence(k: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Runs the descending arithmetic-geometric mean started at (1, k').

    Args:
        k (np.ndarray): moduli, already validated.

    Returns:
        tuple[list[np.ndarray], list[np.ndarray]]: the sequences a_n and c_n, with c_0 = k.
    """

    a = np.ones_like(k)
    b = np.sqrt((1.0 - k) * (1.0 + k))
    c = k.copy()
    a_seq = [a]
    c_seq = [c]

    for _ in range(AGM_MAX_ITER):
        if np.all(np.abs(a - b) <= AGM_RTOL * a + np.spacing(a)):
            break

        a, b, c = 0.5 * (a + b), np.sqrt(a * b), 0.5 * (a - b)
        a_seq.append(a)
        c_seq.append(c)

    return a_seq, c_seq


def ellint_K(k: ArrayLike) -> float | np.ndarray:
    """Complete elliptic integral of the first kind K(k).

    Args:
        k (ArrayLike): modulus in [0, 1 - 1e-12).

    Raises:
        DomainError: raised for k < 0 or k too close to (or above) 1.

    Returns:
        float | np.ndarray: K(k).
    """

    k_arr = _check_modulus(k, K_MAX)
    a_seq, _ = _agm_sequence(k_arr)

    return _output(0.5 * np.pi / a_seq[-1], k)


def ellint_E(k: ArrayLike) -> float | np.ndarray:
    """Complete elliptic integral of the second kind E(k), finite on the closed interval [0, 1].

    Args:
        k (ArrayLike): modulus in [0, 1].

    Raises:
        DomainError: raised for k outside [0, 1].

    Returns:
        float | np.ndarray: E(k).
    """

    k_arr = _check_modulus(k, 1.0, closed=True)
    at_one = k_arr >= K_MAX
    k_safe = np.where(at_one, 0.0, k_arr)

    a_seq, c_seq = _agm_sequence(k_safe)
    weighted = sum(2.0 ** (n - 1) * c_n * c_n for n, c_n in enumerate(c_seq))
    values = 0.5 * np.pi / a_seq[-1] * (1.0 - weighted)

    if np.any(at_one):
        # The AGM start (1, k') degenerates at k = 1; the terms beyond k'**2 lie below 1e-22 here.
        kp2 = np.where(at_one, (1.0 - k_arr) * (1.0 + k_arr), 1.0)
        log_term = np.log(4.0) - 0.5 * np.log(np.where(kp2 > 0.0, kp2, 1.0))
        near_one = 1.0 + 0.5 * kp2 * (log_term - 0.5)
        values = np.where(k_arr == 1.0, 1.0, np.where(at_one, near_one, values))

    return _output(values, k)


def _carlson_rf(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Carlson symmetric integral R_F(x, y, z) by duplication, for x, y, z >= 0 with at most one zero."""

    a0 = (x + y + z) / 3.0
    q = _RF_TOLERANCE_SCALE * np.maximum.reduce([np.abs(a0 - x), np.abs(a0 - y), np.abs(a0 - z)])
    a = a0.copy()
    scale = np.ones_like(a0)

    while np.any(q >= np.abs(a)):
        sx, sy, sz = np.sqrt(x), np.sqrt(y), np.sqrt(z)
        lam = sx * sy + sx * sz + sy * sz
        x = 0.25 * (x + lam)
        y = 0.25 * (y + lam)
        z = 0.25 * (z + lam)
        a = 0.25 * (a + lam)
        q = 0.25 * q
        scale = 4.0 * scale

    big_x = (a0 - x) / (a * scale)
    big_y = (a0 - y) / (a * scale)
    big_z = -(big_x + big_y)
    e2 = big_x * big_y - big_z * big_z
    e3 = big_x * big_y * big_z

    return (1.0
            + e3 * (1.0 / 14.0 + 3.0 * e3 / 104.0)
            + e2 * (-0.1 + e2 / 24.0 - 3.0 * e3 / 44.0 - 5.0 * e2 * e2 / 208.0 + e2 * e3 / 16.0)) / np.sqrt(a)


def ellint_F(phi: ArrayLike, k: ArrayLike) -> float | np.ndarray:
    """Incomplete elliptic integral of the first kind F(phi, k).

    Arguments outside [-pi/2, pi/2] are reduced with F(phi + n*pi, k) = F(phi, k) + 2nK(k).

    Args:
        phi (ArrayLike): amplitude in radians.
        k (ArrayLike): modulus in [0, 1 - 1e-12).

    Raises:
        DomainError: raised for an invalid modulus.

    Returns:
        float | np.ndarray: F(phi, k).
    """

    k_arr = _check_modulus(k, K_MAX)
    phi_arr = np.asarray(phi, dtype=float)
    phi_b, k_b = np.broadcast_arrays(phi_arr, k_arr)

    turns = np.rint(phi_b / np.pi)
    reduced = phi_b - turns * np.pi
    s = np.sin(reduced)
    c = np.cos(reduced)
    ks = k_b * s

    values = s * _carlson_rf(c * c, (1.0 - ks) * (1.0 + ks), np.ones_like(s))
    if np.any(turns != 0.0):
        values = values + 2.0 * turns * np.asarray(ellint_K(k_b))

    return _output(values, phi, k)


def jacobi_sn_cn_dn(u: ArrayLike, k: ArrayLike) -> tuple[float | np.ndarray, float | np.ndarray, float | np.ndarray]:
    """Jacobi elliptic functions sn, cn and dn evaluated together by the descending AGM.

    Args:
        u (ArrayLike): argument, any magnitude (reduced modulo 4K(k)).
        k (ArrayLike): modulus in [0, 1 - 1e-12).

    Raises:
        DomainError: raised for an invalid modulus.

    Returns:
        tuple: (sn, cn, dn).
    """

    k_arr = _check_modulus(k, K_MAX)
    u_b, k_b = np.broadcast_arrays(np.asarray(u, dtype=float), k_arr)

    a_seq, c_seq = _agm_sequence(np.array(k_b, dtype=float))
    period = 2.0 * np.pi / a_seq[-1]
    u_red = u_b - period * np.rint(u_b / period)

    depth = len(a_seq) - 1
    phi = math.ldexp(1.0, depth) * a_seq[-1] * u_red
    for n in range(depth, 0, -1):
        phi = 0.5 * (phi + np.arcsin(c_seq[n] / a_seq[n] * np.sin(phi)))

    sn = np.sin(phi)
    cn = np.cos(phi)
    ksn = k_b * sn
    dn = np.sqrt((1.0 - ksn) * (1.0 + ksn))

    return _output(sn, u, k), _output(cn, u, k), _output(dn, u, k)
