"""Handling schemes: ordered lists of fault-handling steps."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Step(Enum):
    REPLICATE = 1
    RETRY = 2
    SOFT_RESTART = 3
    HARD_RESTART = 4
    ROLLBACK = 5
    NOTIFY = 6


@dataclass(frozen=True)
class Scheme:
    name: str
    steps: tuple[Step, ...]


BUILTIN_SCHEMES = {
    "conservative": Scheme("conservative", (
        Step.REPLICATE, Step.RETRY, Step.SOFT_RESTART, Step.HARD_RESTART,
        Step.ROLLBACK, Step.NOTIFY)),
    "transient_resistant": Scheme("transient_resistant", (
        Step.REPLICATE, Step.SOFT_RESTART, Step.HARD_RESTART, Step.ROLLBACK,
        Step.NOTIFY)),
    "long_restart": Scheme("long_restart", (
        Step.REPLICATE, Step.RETRY, Step.ROLLBACK, Step.SOFT_RESTART,
        Step.HARD_RESTART, Step.NOTIFY)),
    "time_sensitive": Scheme("time_sensitive", (
        Step.REPLICATE, Step.ROLLBACK, Step.RETRY, Step.SOFT_RESTART,
        Step.HARD_RESTART, Step.NOTIFY)),
}
