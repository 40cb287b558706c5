class ConfigError(ValueError):
    """Error raised when a run configuration holds an unknown key or an invalid value.

    Attributes:
        key (str): dotted path of the offending key, e.g. 'run.resolution'.
        reason (str): what is wrong with it.
    """

    def __init__(self, key: str, reason: str, *args: object) -> None:
        super().__init__(*args)
        self.key = key
        self.reason = reason

    def __str__(self) -> str:
        return f'Invalid configuration key {self.key}: {self.reason}.'
