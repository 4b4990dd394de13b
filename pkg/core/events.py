"""named events for skipped steps and numeric fallbacks."""

from dataclasses import dataclass, field
from typing import Any

from loguru import logger

# event names
SKIP_GDPA_EMPTY_NEG = "skip_gdpa_empty_neg"
SKIP_IDSA_EMPTY_POS = "skip_idsa_empty_pos"
SKIP_PCC_UNDEFINED = "skip_pcc_undefined"
WARN_ZERO_NORM_MEAN = "warn_zero_norm_mean"
WARN_WEIGHT_FALLBACK = "warn_weight_fallback"
SKIP_SGD_NONFINITE = "skip_sgd_nonfinite"
SKIP_ADAM_NONFINITE = "skip_adam_nonfinite"

_WARNINGS = {WARN_ZERO_NORM_MEAN, WARN_WEIGHT_FALLBACK, SKIP_SGD_NONFINITE, SKIP_ADAM_NONFINITE}


@dataclass
class Event:
    name: str
    context: dict[str, Any] = field(default_factory=dict)


@dataclass
class EventLog:
    """Collects events emitted during one step; the trainer drains it into the metrics row."""

    events: list[Event] = field(default_factory=list)

    def record(self, name: str, **context: Any) -> None:
        self.events.append(Event(name, context))
        log = logger.bind(event=name)
        if name in _WARNINGS:
            log.warning(f"{name}: {context}")
        else:
            log.debug(f"{name}: {context}")

    def drain(self) -> list[Event]:
        out, self.events = self.events, []
        return out

    def __contains__(self, name: str) -> bool:
        return any(e.name == name for e in self.events)

    def __len__(self) -> int:
        return len(self.events)


def record(events: "EventLog | None", name: str, **context: Any) -> None:
    """record into `events` if given, otherwise just log."""
    if events is None:
        events = EventLog()
    events.record(name, **context)
