"""Error hierarchy shared by the library and the command line.

Each error carries the process exit code the CLI reports for it.
"""


class QrmError(Exception):
    exit_code: int = 1
    kind: str = "error"

    def diagnostic(self) -> str:
        """One-line machine-parsable description."""
        message = str(self).replace("\n", " ").replace('"', "'")
        return f'qrm-error code={self.exit_code} kind={self.kind} message="{message}"'


class ConfigError(QrmError, ValueError):
    exit_code = 1
    kind = "config"


class ModelInvariantError(QrmError, ValueError):
    exit_code = 2
    kind = "model-invariant"


class DimensionError(ModelInvariantError):
    kind = "dimension"


class AssumptionError(QrmError):
    """Spec, Coup or Gen does not hold for the model at hand."""

    exit_code = 3
    kind = "assumption"


class ResidualError(QrmError):
    exit_code = 4
    kind = "residual"
