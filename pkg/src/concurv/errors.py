"""Error type shared by every module."""

from __future__ import annotations


class ConcurvError(ValueError):
    """Raised for rejected inputs.

    ``code`` is a short stable token ("disconnected", "too-large", ...) that
    the CLI and the tests match on; ``detail`` is free text.
    """

    def __init__(self, code: str, detail: str = "") -> None:
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}" if detail else code)
