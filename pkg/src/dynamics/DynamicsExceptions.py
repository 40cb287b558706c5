class DomainError(ValueError):
    """Error raised when an argument lies outside the domain of a formula.

    Attributes:
        name (str): name of the offending argument.
        value (float): the rejected value.
        domain (str): human-readable description of the valid domain.
    """

    def __init__(self, name: str, value: float, domain: str, *args: object) -> None:
        super().__init__(*args)
        self.name = name
        self.value = value
        self.domain = domain

    def __str__(self) -> str:
        return f'{self.name}={self.value!r} is outside the domain {self.domain}.'
