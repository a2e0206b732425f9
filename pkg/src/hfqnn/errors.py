"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class HfqnnError(Exception):
    exit_code = 1


class ConfigError(HfqnnError, ValueError):
    exit_code = 1


class KindError(ConfigError):
    """Checkpoint model kind does not match the requested kind."""


class IncompatibleCheckpointError(ConfigError):
    pass


class DataError(HfqnnError, ValueError):
    exit_code = 2


class SchemaError(DataError):
    pass


class ShapeError(DataError):
    pass


class StateError(HfqnnError, RuntimeError):
    exit_code = 1


class TrainingError(HfqnnError, RuntimeError):
    exit_code = 3
