"""Exception hierarchy shared across the package.

Library code raises the most specific class that applies; the CLI maps
ConfigError to exit code 4 and DataError (and subclasses) to exit code 3.
"""


class GraspForgeError(Exception):
    """Base class for package-specific failures."""


class ConfigError(GraspForgeError):
    """Invalid or inconsistent configuration values."""


class DataError(GraspForgeError):
    """Invalid input data (files, meshes, grids, manifests)."""


class MeshFormatError(DataError):
    """Malformed mesh file; carries the offending line number when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix += str(path)
        if line is not None:
            prefix += f":{line}"
        if prefix:
            message = f"{prefix}: {message}"
        super().__init__(message)
