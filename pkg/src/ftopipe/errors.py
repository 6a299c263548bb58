"""Base exception for data and protocol failures.

Every module-specific error subclasses PipelineError so the CLI can map the
whole family to a single data-error exit code.
"""


class PipelineError(Exception):
    pass
