"""Error hierarchy of the lagrangian package.

Big-cell misses and degenerate surfaces are data and are never raised.
"""


class HslagError(Exception):
    """Root of every error raised by the package."""


class AlgebraError(HslagError, ValueError):
    pass


class LoopError(HslagError, ValueError):
    pass


class FactorizationError(HslagError):
    def __init__(self, message, nodes=None):
        self.nodes = [] if nodes is None else [tuple(node) for node in nodes]
        if self.nodes:
            shown = ", ".join(str(tuple(int(i) for i in node)) for node in self.nodes[:20])
            more = f" and {len(self.nodes) - 20} more" if len(self.nodes) > 20 else ''
            message = f"{message} at nodes {shown}{more}"
        super().__init__(message)


class IntegrationError(HslagError):
    def __init__(self, message, edge=None):
        self.edge = edge
        if edge is not None:
            message = f"{message} on edge {edge}"
        super().__init__(message)


class GeometryError(HslagError):
    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class PotentialFormatError(HslagError):
    """A potential file could not be read; ``str()`` is ``path:line: reason``."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        self.reason = message
        location = f"{path or '<potential>'}:{line if line is not None else 0}"
        super().__init__(f"{location}: {message}")


class ArchiveError(HslagError):
    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
