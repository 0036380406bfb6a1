"""Exception types shared across the package."""


class TestSpaceError(Exception):
    """Base class for all errors raised by this package."""

    __test__ = False


class InvalidSpace(TestSpaceError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid test space: " + "; ".join(self.violations))


class SpaceParseError(TestSpaceError, ValueError):
    """Malformed document. ``location`` is a JSON-pointer-like path."""

    def __init__(self, message, location=""):
        self.location = location
        where = f" at {location}" if location else ""
        super().__init__(f"{message}{where}")


class EmptyStateSpace(TestSpaceError):
    """The test space admits no state at all."""


class SizeLimitExceeded(TestSpaceError):
    pass


class FrameError(TestSpaceError):
    """Frame construction failed numerically."""


class SignallingState(TestSpaceError):
    """A joint state fails the nonsignalling condition on some split.

    ``source`` are the systems whose test choice leaks into ``affected``.
    """

    def __init__(self, source, affected, magnitude):
        self.source = tuple(source)
        self.affected = tuple(affected)
        self.magnitude = float(magnitude)
        super().__init__(
            "nonsignalling violated: systems {} affected by test choice on {} "
            "(deviation {:.3e})".format(
                _fmt(self.affected), _fmt(self.source), self.magnitude
            )
        )


class NotSymmetric(TestSpaceError):
    def __init__(self, deviation):
        self.deviation = float(deviation)
        super().__init__(
            f"exchangeability clause 1 (symmetry) violated: deviation {deviation:.3e}"
        )


class ZeroProbabilityOutcome(TestSpaceError):
    pass


class ZeroProbabilityObservation(TestSpaceError):
    pass


def _fmt(systems):
    # 1-based for humans
    return "{" + ",".join(str(i + 1) for i in systems) + "}"
