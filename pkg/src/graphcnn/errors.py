"""Exception hierarchy.

Each class maps onto one CLI exit code via ``exit_code``.
"""


class GraphCnnError(Exception):
    exit_code = 1


class ShapeError(GraphCnnError, ValueError):
    """Operand shapes or lengths do not line up."""


class InvalidSizeError(GraphCnnError, ValueError):
    pass


class DomainError(GraphCnnError, ValueError):
    """A scalar argument lies outside its admissible range."""


class UnsupportedStructureError(GraphCnnError, ValueError):
    pass


class DegenerateSpectrumError(GraphCnnError, ValueError):
    exit_code = 3


class DegreeError(GraphCnnError, ValueError):
    """Polynomial filter degree K is not below the vertex count."""


class ContractError(GraphCnnError, ValueError):
    pass


class SpecError(GraphCnnError, ValueError):
    """A ModelSpec is internally inconsistent."""


class ConfigError(GraphCnnError, ValueError):
    pass


class DataError(GraphCnnError):
    exit_code = 2


class ParseError(DataError, ValueError):
    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class LabelingError(DataError, ValueError):
    pass


class NumericError(GraphCnnError, ArithmeticError):
    """Non-finite values, solver failure or a violated numerical identity."""

    exit_code = 3


class DualityError(NumericError):
    pass


class DegenerateGraphError(GraphCnnError, ValueError):
    pass
