"""Dormand-Prince 5(4) kernel for batches of forced quartic oscillators.

Every operation is elementwise over the batch, so each trajectory follows the
same step sequence whatever batch it is integrated in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NODES = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
COUPLING = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
ERROR_WEIGHTS = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])

ERROR_EXPONENT = -1.0 / 5.0


@dataclass(frozen=True)
class StepSettings:
    """Step-size control of the adaptive integrator.

    Attributes:
        rtol (float): relative tolerance.
        atol (float): absolute tolerance.
        safety (float): safety factor on the optimal step.
        min_factor (float): smallest step shrink per attempt.
        max_factor (float): largest step growth per attempt.
        max_step_fraction (float): largest step as a fraction of the forcing period.
        first_step_fraction (float): first trial step as a fraction of the forcing period.
    """

    rtol: float = 1e-10
    atol: float = 1e-12
    safety: float = 0.9
    min_factor: float = 0.2
    max_factor: float = 5.0
    max_step_fraction: float = 1.0 / 20.0
    first_step_fraction: float = 1.0 / 1000.0


def rhs(t: np.ndarray, q: np.ndarray, p: np.ndarray, F: np.ndarray, Omega: np.ndarray,
        Psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """q' = p, p' = -q + q**3 + F sin(Omega*t + Psi)."""
    return p, q * q * q - q + F * np.sin(Omega * t + Psi)


def dopri_step(t: np.ndarray, q: np.ndarray, p: np.ndarray, fq: np.ndarray, fp: np.ndarray, h: np.ndarray,
               F: np.ndarray, Omega: np.ndarray, Psi: np.ndarray, settings: StepSettings) -> tuple:
    """One trial step of size h from (t, q, p) whose derivative (fq, fp) is already known.

    Returns:
        tuple: (q_new, p_new, fq_new, fp_new, err) with err the RMS scaled error estimate.
    """

    kq = [fq]
    kp = [fp]
    for stage in range(1, 7):
        q_stage = q + h * sum(a * k for a, k in zip(COUPLING[stage], kq))
        p_stage = p + h * sum(a * k for a, k in zip(COUPLING[stage], kp))
        dq, dp = rhs(t + NODES[stage] * h, q_stage, p_stage, F, Omega, Psi)
        kq.append(dq)
        kp.append(dp)

    # The last stage is evaluated at the fifth-order solution.
    q_new, p_new = q_stage, p_stage
    err_q = h * sum(e * k for e, k in zip(ERROR_WEIGHTS, kq))
    err_p = h * sum(e * k for e, k in zip(ERROR_WEIGHTS, kp))
    scale_q = settings.atol + settings.rtol * np.maximum(np.abs(q), np.abs(q_new))
    scale_p = settings.atol + settings.rtol * np.maximum(np.abs(p), np.abs(p_new))
    err = np.sqrt(0.5 * ((err_q / scale_q) ** 2 + (err_p / scale_p) ** 2))

    return q_new, p_new, kq[6], kp[6], err


def step_factor(err: np.ndarray, settings: StepSettings) -> np.ndarray:
    with np.errstate(divide='ignore'):
        optimal = settings.safety * np.where(err > 0.0, err, 1e-300) ** ERROR_EXPONENT

    return np.clip(optimal, settings.min_factor, settings.max_factor)


def hermite_midpoint(y0: np.ndarray, y1: np.ndarray, f0: np.ndarray, f1: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Cubic Hermite interpolant of a step evaluated at its midpoint."""
    return 0.5 * (y0 + y1) + 0.125 * h * (f0 - f1)
