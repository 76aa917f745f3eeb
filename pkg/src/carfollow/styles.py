"""Driving-style labels shared across the package."""

from __future__ import annotations

import enum


class Style(enum.Enum):
    AGGRESSIVE = "aggressive"
    NORMAL = "normal"
    CONSERVATIVE = "conservative"

    @classmethod
    def from_string(cls, text: str) -> "Style":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown style {text!r}") from None

    def __str__(self) -> str:
        return self.value


# Canonical iteration order for deterministic loops and reports.
STYLE_ORDER = (Style.AGGRESSIVE, Style.NORMAL, Style.CONSERVATIVE)

# Stable small integers used when deriving per-style RNG streams.
STYLE_CODE = {Style.AGGRESSIVE: 0, Style.NORMAL: 1, Style.CONSERVATIVE: 2}
