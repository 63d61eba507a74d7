"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration field failed validation. The message names the field."""


class IdxFormatError(ValueError):
    """An IDX file is malformed (bad magic, count mismatch, or truncation)."""


class NumericOverflowError(FloatingPointError):
    """A forward/backward pass produced non-finite values.

    Usually signals a learning rate or initialization that blew up.
    """


class DivergenceError(RuntimeError):
    """The global model became non-finite during a round."""

    def __init__(self, round_index: int, message: str = ""):
        self.round_index = round_index
        super().__init__(
            message or f"global model diverged (non-finite) at round {round_index}"
        )
