"""Exception hierarchy.

``InputError`` subclasses signal malformed input (CLI exit code 2); the
remaining ``DetachmentError`` subclasses are domain failures (exit code 3).
"""


class DetachmentError(Exception):
    pass


class InputError(DetachmentError, ValueError):
    pass


class MissingWeight(InputError):
    pass


class InvalidWeight(InputError):
    pass


class InvalidDistribution(InputError):
    pass


class UnknownVertex(InputError):
    pass


class NotAMember(DetachmentError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class TooLarge(DetachmentError):
    pass


class NoCandidates(DetachmentError):
    pass


class NoBridges(DetachmentError):
    pass


class DisconnectedTerminals(DetachmentError):
    pass


class InfeasibleTargets(DetachmentError):
    pass
