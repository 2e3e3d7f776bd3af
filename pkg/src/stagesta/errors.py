"""Exception types raised by stagesta."""


class StageStaError(Exception):
    """Base class for analysis-domain errors (CLI exit status 1)."""


class CyclicGraph(StageStaError):
    pass


class InvalidGraph(StageStaError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations[:5])
        super().__init__(f"graph has {len(self.violations)} violation(s): {lines}")


class InvalidConfig(StageStaError):
    pass


class InvalidModel(StageStaError):
    pass


class InvalidCorner(StageStaError):
    pass


class UnknownRegister(StageStaError):
    pass


class Unclassifiable(StageStaError):
    pass


class InsufficientSamples(StageStaError):
    pass


class EmptyInput(StageStaError):
    pass


class ParseError(StageStaError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")
