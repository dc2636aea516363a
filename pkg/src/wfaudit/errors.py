"""Exception hierarchy shared by all wfaudit modules."""

from __future__ import annotations


class WfauditError(Exception):
    """Base class for every error raised by wfaudit."""


class WorkflowError(WfauditError):
    """A workflow file could not be turned into a model."""


class MalformedYaml(WorkflowError):
    pass


class NotAWorkflow(WorkflowError):
    pass


class EmptyJobs(WorkflowError):
    pass


class NotAContextPath(WfauditError):
    """Template interior has no context reference (literal or bare function)."""


class ForgeError(WfauditError):
    pass


class RepoNotFound(ForgeError):
    pass


class RefNotFound(ForgeError):
    pass


class RateLimited(ForgeError):
    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class NetworkError(ForgeError):
    pass


class FixtureMiss(ForgeError):
    """Recorded mode was asked for a response that was never recorded."""


class ResolverUnavailable(WfauditError):
    pass


class NoManifestFound(WfauditError):
    pass


class ConfigError(WfauditError):
    pass
