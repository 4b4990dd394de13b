"""exceptions raised by the library."""


class DPAError(Exception):
    """base class for all library errors."""


class ShapeError(DPAError, ValueError):
    def __init__(self, op: str, left: tuple, right: tuple) -> None:
        self.op = op
        self.left = tuple(left)
        self.right = tuple(right)
        super().__init__(f"{op}: shape mismatch {self.left} vs {self.right}")


class TapeError(DPAError, RuntimeError):
    pass


class CentroidError(DPAError, RuntimeError):
    pass


class ScenarioError(DPAError, ValueError):
    def __init__(self, msg: str, nearest: tuple = ()) -> None:
        self.nearest = tuple(nearest)
        super().__init__(msg)


class ConfigError(DPAError, ValueError):
    """invalid run config; `problems` holds `(location, message)` pairs."""

    def __init__(self, msg: str, problems: list[tuple[str, str]] | None = None) -> None:
        self.problems = problems or []
        details = "".join(f"\n\t{loc}: {m}" for loc, m in self.problems)
        super().__init__(msg + details)


class FigDataError(DPAError, ValueError):
    pass


class NumericError(DPAError, ArithmeticError):
    pass
