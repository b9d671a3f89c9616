"""Exception types shared across the package."""


class TreeStructureError(ValueError):
    """A subtree or address violates the base-tree structural invariants."""


class EnumerationCapError(RuntimeError):
    """Exhaustive enumeration would exceed the configured subtree cap."""

    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(
            f"enumeration would produce {count} subtrees, above the cap of {cap}"
        )


class ZeroConditionError(ValueError):
    """A conditional probability was requested on a zero-probability event."""


class AbsoluteContinuityError(ValueError):
    """KL divergence is undefined: q puts zero mass where p does not."""

    def __init__(self, address, pattern: int):
        self.address = address
        self.pattern = pattern
        super().__init__(
            f"absolute continuity violated at node {address!r}, pattern {pattern}"
        )


class ZeroEvidenceError(ValueError):
    """The observation has zero marginal probability under the prior."""

    def __init__(self, msg: str = "observation has zero marginal probability"):
        super().__init__(msg)


class CodecError(ValueError):
    """Malformed, truncated, or otherwise undecodable bitstream."""


class FormatError(ValueError):
    """Malformed structured-text input (distribution files, configs, ...)."""

    def __init__(self, line: int, msg: str):
        self.line = line
        super().__init__(f"line {line}: {msg}")
