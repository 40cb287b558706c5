class IntegratorStepError(ArithmeticError):
    """Error raised when the adaptive integrator cannot continue a trajectory,
    either because the step size underflowed or the state became non-finite.

    Attributes:
        time (float): time reached by the failing trajectory.
        trajectory (int): index of the failing trajectory within its batch.
        reason (str): short description of the failure.
    """

    def __init__(self, time: float, trajectory: int, reason: str, *args: object) -> None:
        super().__init__(*args)
        self.time = time
        self.trajectory = trajectory
        self.reason = reason

    def __str__(self) -> str:
        return f'Integration of trajectory {self.trajectory} failed at t={self.time!r}: {self.reason}.'


class BracketError(ValueError):
    """Error raised when a critical-force bisection is started on an interval
    that does not separate escaping from non-escaping forcing.

    Attributes:
        F_lo (float): lower end of the tested bracket.
        F_hi (float): upper end of the tested bracket.
        escaped_lo (bool): whether the trajectory escaped at F_lo.
        escaped_hi (bool): whether the trajectory escaped at F_hi.
    """

    def __init__(self, F_lo: float, F_hi: float, escaped_lo: bool, escaped_hi: bool, *args: object) -> None:
        super().__init__(*args)
        self.F_lo = F_lo
        self.F_hi = F_hi
        self.escaped_lo = escaped_lo
        self.escaped_hi = escaped_hi

    def __str__(self) -> str:
        return (f'Invalid bracket [{self.F_lo!r}, {self.F_hi!r}]: escape expected only at the upper end, '
                f'got escaped_lo={self.escaped_lo}, escaped_hi={self.escaped_hi}.')


class IntegrationAlreadyDoneError(Exception):
    """Error raised when a step is requested from a runtime whose trajectories
    have all escaped or reached their stop time.
    """

    def __init__(self, *args: object) -> None:
        super().__init__(*args)

    def __str__(self) -> str:
        return 'Integration already done.'
