"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class CausalPMError(Exception):
    exit_code = 1


class ConfigError(CausalPMError):
    """Malformed or inconsistent configuration (schema config, template, run config)."""

    exit_code = 2


class ValidationError(CausalPMError):
    """A structural rule is violated, e.g. a cyclic causal process template."""

    exit_code = 3

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DataError(CausalPMError):
    """Table contents are unusable: bad timestamps, duplicate keys, dangling references."""

    exit_code = 4
