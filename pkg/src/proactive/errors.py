"""Exception hierarchy shared by every unit."""

from __future__ import annotations


class ProactiveError(Exception):
    """Base class for runtime errors raised by this package."""


# core
class StaleEvent(ProactiveError):
    pass


class SessionFailed(ProactiveError):
    """A session aborted; ``trace`` holds every entry recorded before the failure."""

    def __init__(self, message: str, trace) -> None:
        super().__init__(message)
        self.trace = trace


# backends
class BackendFailure(ProactiveError):
    pass


class FixtureMiss(BackendFailure):
    pass


class Timeout(BackendFailure):
    pass


class TransportFailure(BackendFailure):
    pass


class NonSuccessStatus(BackendFailure):
    def __init__(self, status: int, body: str = "") -> None:
        super().__init__(f"backend returned HTTP {status}: {body[:200]}")
        self.status = status


class UnknownPrompt(ProactiveError):
    pass


# input unit
class MalformedDescription(ProactiveError):
    pass


class InvalidTime(ProactiveError):
    pass


# cpu
class MalformedProposal(ProactiveError):
    pass


class MalformedPlan(ProactiveError):
    pass


class EmptySynthesis(ProactiveError):
    pass


# alu
class UnknownTool(ProactiveError):
    pass


class DuplicateTool(ProactiveError):
    pass


class ProviderUnavailable(ProactiveError):
    pass


class UnknownFixtureQuery(ProactiveError):
    pass


# memory
class MemoryStoreError(ProactiveError):
    pass


class DuplicateId(MemoryStoreError):
    pass


class DuplicateTimestamp(MemoryStoreError):
    pass


class PersistenceFailure(MemoryStoreError):
    pass


# output unit
class EmptyCondensation(ProactiveError):
    pass


class SinkFailure(ProactiveError):
    pass


# cli / scenarios
class ParseError(ProactiveError):
    pass


class MissingFixture(ProactiveError):
    pass
