"""Exception hierarchy shared across modules (and mapped to CLI exit codes)."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (CLI exit code 2)."""


class NumericalError(RuntimeError):
    """Numerical failure: non-hermitian input, divergence, ... (exit code 3)."""


class GapClosedError(NumericalError):
    """A band gap required by the computation is closed."""


class RefineGridError(NumericalError):
    """Link-variable overlap became singular; a finer BZ grid is needed."""
