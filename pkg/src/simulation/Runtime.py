from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike

from dynamics.Model import EscapeCriterion
from simulation.Integrator import (StepSettings, dopri_step, hermite_midpoint,
                                   rhs, step_factor)
from simulation.SimulationExceptions import (IntegrationAlreadyDoneError,
                                             IntegratorStepError)

STEP_UNDERFLOW = 1e-14


class Runtime:
    """Keeps track of the integration state of a batch of forced trajectories.

    Trajectories stop advancing once they escape; escape is checked at the
    initial state, at the Hermite midpoint of every accepted step and at its end.

    Attributes:
        criterion (EscapeCriterion): escape definition applied to every trajectory.
        settings (StepSettings): step-size control.
        F (np.ndarray): forcing amplitude per trajectory.
        Omega (np.ndarray): forcing frequency per trajectory.
        Psi (np.ndarray): forcing phase per trajectory.
        t (np.ndarray): current time per trajectory.
        q (np.ndarray): current displacement per trajectory.
        p (np.ndarray): current momentum per trajectory.
        h (np.ndarray): next trial step per trajectory.
        t_stop (np.ndarray): time each trajectory is advanced to.
        escape_time (np.ndarray): first time the criterion was exceeded, NaN while it has not.
    """

    def __init__(self, q0: ArrayLike, p0: ArrayLike, F: ArrayLike, Omega: ArrayLike, Psi: ArrayLike,
                 criterion: EscapeCriterion, settings: StepSettings | None = None) -> None:
        q, p, F_b, Omega_b, Psi_b = np.broadcast_arrays(*(np.atleast_1d(np.asarray(value, dtype=float))
                                                          for value in (q0, p0, F, Omega, Psi)))
        self.criterion: EscapeCriterion = criterion
        self.settings: StepSettings = settings or StepSettings()
        self.F: np.ndarray = F_b.copy()
        self.Omega: np.ndarray = Omega_b.copy()
        self.Psi: np.ndarray = Psi_b.copy()
        self.q: np.ndarray = q.copy()
        self.p: np.ndarray = p.copy()
        self.t: np.ndarray = np.zeros_like(self.q)
        self.fq, self.fp = rhs(self.t, self.q, self.p, self.F, self.Omega, self.Psi)

        period = 2.0 * math.pi / self.Omega
        self.h_max: np.ndarray = self.settings.max_step_fraction * period
        self.h: np.ndarray = self.settings.first_step_fraction * period
        self.t_stop: np.ndarray = np.zeros_like(self.q)
        self.escape_time: np.ndarray = np.where(criterion.exceeded(self.q, self.p), 0.0, np.nan)

    @property
    def size(self) -> int:
        return self.q.size

    @property
    def escaped(self) -> np.ndarray:
        return ~np.isnan(self.escape_time)

    def running(self) -> np.ndarray:
        return np.flatnonzero(~self.escaped & (self.t < self.t_stop))

    def advance_to(self, t_stop: ArrayLike) -> None:
        """Integrates every non-escaped trajectory up to t_stop exactly, or until it escapes."""
        self.t_stop = np.broadcast_to(np.asarray(t_stop, dtype=float), self.q.shape).copy()

        while self.running().size:
            self.next_step()

    def next_step(self) -> int:
        """Attempts one adaptive step for every running trajectory.

        Raises:
            IntegrationAlreadyDoneError: raised when no trajectory is left to advance.
            IntegratorStepError: raised when a step size underflows.

        Returns:
            int: number of trajectories still running afterwards.
        """

        idx = self.running()
        if idx.size == 0:
            raise IntegrationAlreadyDoneError()

        t, q, p, fq, fp = self.t[idx], self.q[idx], self.p[idx], self.fq[idx], self.fp[idx]
        F, Omega, Psi = self.F[idx], self.Omega[idx], self.Psi[idx]
        remaining = self.t_stop[idx] - t
        h = np.minimum(np.minimum(self.h[idx], self.h_max[idx]), remaining)

        underflow = h < STEP_UNDERFLOW * np.maximum(1.0, np.abs(t))
        if np.any(underflow):
            first = int(np.flatnonzero(underflow)[0])
            raise IntegratorStepError(float(t[first]), int(idx[first]), f'step size {h[first]!r} underflowed')

        with np.errstate(over='ignore', invalid='ignore'):
            q_new, p_new, fq_new, fp_new, err = dopri_step(t, q, p, fq, fp, h, F, Omega, Psi, self.settings)
        finite = np.isfinite(err) & np.isfinite(q_new) & np.isfinite(p_new)
        err = np.where(finite, err, np.inf)
        accepted = err <= 1.0
        factor = step_factor(err, self.settings)

        t_new = np.where(h >= remaining, self.t_stop[idx], t + h)
        q_mid = hermite_midpoint(q, q_new, fq, fq_new, h)
        p_mid = hermite_midpoint(p, p_new, fp, fp_new, h)
        escape_mid = accepted & self.criterion.exceeded(q_mid, p_mid)
        escape_end = accepted & ~escape_mid & self.criterion.exceeded(q_new, p_new)

        self.escape_time[idx] = np.where(escape_mid, t + 0.5 * h, np.where(escape_end, t_new, np.nan))
        self.t[idx] = np.where(accepted, t_new, t)
        self.q[idx] = np.where(accepted, q_new, q)
        self.p[idx] = np.where(accepted, p_new, p)
        self.fq[idx] = np.where(accepted, fq_new, fq)
        self.fp[idx] = np.where(accepted, fp_new, fp)
        self.h[idx] = h * np.where(accepted, factor, np.minimum(factor, 1.0))

        return int(self.running().size)

    def escape_time_ec(self) -> np.ndarray:
        """Escape times in excitation cycles (NaN for trajectories that have not escaped)."""
        return self.escape_time * self.Omega / (2.0 * math.pi)
