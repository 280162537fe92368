"""Exception hierarchy. Library code raises these; only the CLI maps them to exit codes."""


class RoydenNetError(Exception):
    pass


class InputError(RoydenNetError, ValueError):
    pass


class SpaceFormatError(InputError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownVertexError(InputError, KeyError):
    def __init__(self, vertex):
        super().__init__(f"unknown vertex id {vertex!r}")
        self.vertex = vertex

    def __str__(self) -> str:
        return self.args[0]


class ConfigError(InputError):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


class NetError(RoydenNetError):
    pass


class SolverError(RoydenNetError, RuntimeError):
    pass


class ConvergenceError(SolverError):
    def __init__(self, final_residual: float, sweeps: int):
        super().__init__(
            f"no convergence after {sweeps} sweeps (final residual {final_residual:.3e})"
        )
        self.final_residual = final_residual
        self.sweeps = sweeps
