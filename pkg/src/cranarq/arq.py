"""Per-slot ARQ sender automaton (SW, GBN, SR) with delta-slot CU feedback.

The window holds the outstanding packets: admitted but not yet acknowledged
(unsent after a NAK, or awaiting feedback). ``W`` bounds its length. One call
to :func:`step` advances the mobile terminal by one slot:

1. feedback: awaiting entries age by one; the entry reaching ``delta``
   resolves. An ACK releases it (GBN: cumulatively, with everything ahead of
   it). A NAK makes it unsent (GBN: it and everything behind it).
2. transmission: the oldest unsent entry is sent, otherwise a new packet is
   admitted from the buffer if the window has room, otherwise the slot idles.
   The receiver accepts the packet in this slot if it decodes (and, for GBN,
   everything ahead of it is already accepted).
3. an arrival, if any, joins the buffer (dropped when the buffer is full).

Feedback for a packet sent in slot k is usable in slot k + delta, so W = delta
keeps GBN/SR pipelines gapless. The conventional architecture resolves every
transmission in the same slot. Hybrid C-RAN acknowledges BS decodes in the
same slot and defers everything else to the CU.

The window is positional: packets carry no sequence numbers.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import NamedTuple

from .decode import DecodeOutcome
from .errors import InternalInvariantError, InvalidParameterError


class Protocol(str, enum.Enum):
    SW = "sw"
    GBN = "gbn"
    SR = "sr"


class Architecture(str, enum.Enum):
    CONVENTIONAL = "conventional"
    CRAN = "cran"
    HYBRID = "hybrid"


class Status(enum.IntEnum):
    UNSENT = 0
    AWAITING = 1
    ACKED = 2


@dataclass(frozen=True)
class ProtocolConfig:
    """Sender configuration.

    ``window`` defaults to 1 for SW and to ``delta`` otherwise.
    ``window_mode`` selects what W bounds: "outstanding" counts packets still
    awaiting an ACK; "span" also counts acknowledged packets that cannot leave
    because an older packet is unresolved (sequence-span window). ``lump``
    drops state detail that cannot influence the future (see
    :func:`canonical`); it never changes any trajectory's rewards.
    """

    protocol: Protocol
    architecture: Architecture
    delta: int = 5
    window: int | None = None
    b_max: int = 1
    alpha: float = 0.5
    lump: bool = True
    window_mode: str = "outstanding"

    def __post_init__(self):
        if self.window_mode not in ("outstanding", "span"):
            raise InvalidParameterError(f"unknown window_mode {self.window_mode!r}")
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "architecture", Architecture(self.architecture))
        conventional = self.architecture is Architecture.CONVENTIONAL
        if int(self.delta) != self.delta or self.delta < (0 if conventional else 1):
            raise InvalidParameterError(
                f"delta must be an integer >= 1 (feedback arrives after delta >= 1 slots), "
                f"got {self.delta!r}")
        window = self.window
        if window is None:
            window = 1 if self.protocol is Protocol.SW else max(1, int(self.delta))
        if int(window) != window or window < 1:
            raise InvalidParameterError(f"window must be an integer >= 1, got {window!r}")
        if self.protocol is Protocol.SW and window != 1:
            raise InvalidParameterError(f"stop-and-wait uses window 1, got {window}")
        object.__setattr__(self, "window", int(window))
        object.__setattr__(self, "delta", int(self.delta))
        if int(self.b_max) != self.b_max or self.b_max < 1:
            raise InvalidParameterError(f"b_max must be an integer >= 1, got {self.b_max!r}")
        object.__setattr__(self, "b_max", int(self.b_max))
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidParameterError(f"alpha must be a probability, got {self.alpha!r}")

    @property
    def delta_ignored(self) -> bool:
        return self.architecture is Architecture.CONVENTIONAL

    @property
    def window_never_full(self) -> bool:
        # At most delta - 1 entries await feedback after the feedback phase.
        return (self.window_mode == "outstanding"
                and self.architecture is not Architecture.CONVENTIONAL
                and self.window >= self.delta)


class WindowEntry(NamedTuple):
    status: Status
    age: int = 0
    outcome: bool = False  # pending feedback is an ACK
    accepted: bool = False  # receiver already holds this packet

    def __repr__(self):
        flag = "+" if self.accepted else ""
        if self.status is Status.AWAITING:
            return f"awaiting({self.age},{'S' if self.outcome else 'F'}){flag}"
        return f"{self.status.name.lower()}{flag}"


UNSENT = WindowEntry(Status.UNSENT)


class ProtocolState(NamedTuple):
    buffer: int
    window: tuple = ()

    def __repr__(self):
        return f"({self.buffer}, [{', '.join(map(repr, self.window))}])"


class RewardIncrement(NamedTuple):
    delivered: int
    transmitted: int


def initial_state(cfg: ProtocolConfig) -> ProtocolState:
    return ProtocolState(0, ())


def decode_success(architecture: Architecture, outcome: DecodeOutcome) -> bool:
    if architecture is Architecture.CONVENTIONAL:
        return outcome.bs_ok
    if architecture is Architecture.CRAN:
        return outcome.cu_ok
    return outcome.bs_ok or outcome.cu_ok


def state_key(phi: ProtocolState) -> bytes:
    """Injective byte encoding: uint16 buffer, then 4 bytes per entry
    (status, age, outcome, accepted), oldest entry first."""
    parts = [struct.pack(">H", phi.buffer)]
    for e in phi.window:
        parts.append(bytes((int(e.status), e.age, int(e.outcome), int(e.accepted))))
    return b"".join(parts)


def check_state(phi: ProtocolState, cfg: ProtocolConfig) -> None:
    if not 0 <= phi.buffer <= cfg.b_max:
        raise InternalInvariantError(f"buffer {phi.buffer} outside 0..{cfg.b_max}")
    if len(phi.window) > cfg.window:
        raise InternalInvariantError(f"window occupancy {len(phi.window)} exceeds W={cfg.window}")
    ages = [e.age for e in phi.window if e.status is Status.AWAITING]
    if len(set(ages)) != len(ages):
        raise InternalInvariantError(f"duplicate awaiting ages {ages}")
    if any(a < 0 or a >= max(cfg.delta, 1) for a in ages):
        raise InternalInvariantError(f"awaiting age outside 0..delta-1: {ages}")
    if phi.window and phi.window[0].status is Status.ACKED:
        raise InternalInvariantError("acknowledged entry left at the window head")
    if cfg.window_mode == "outstanding" and any(e.status is Status.ACKED for e in phi.window):
        raise InternalInvariantError("acknowledged entry left in the window")


def _release(window: list, pos: int, cfg: ProtocolConfig) -> None:
    """Remove an acknowledged entry; a GBN ACK also covers everything ahead.

    In span mode the entry is only marked and leaves once it reaches the head.
    """
    gone = window[:pos + 1] if cfg.protocol is Protocol.GBN else [window[pos]]
    if not all(e.accepted for e in gone):
        raise InternalInvariantError("entry left the window without being delivered")
    if cfg.window_mode == "span":
        window[pos] = WindowEntry(Status.ACKED, accepted=True)
        while window and window[0].status is Status.ACKED:
            window.pop(0)
    elif cfg.protocol is Protocol.GBN:
        del window[:pos + 1]
    else:
        del window[pos]


def _feedback_phase(phi: ProtocolState, cfg: ProtocolConfig) -> list:
    window = list(phi.window)
    if cfg.architecture is Architecture.CONVENTIONAL:
        return window
    resolved = None
    for i, e in enumerate(window):
        if e.status is Status.AWAITING:
            age = e.age + 1
            if age >= cfg.delta:
                if resolved is not None:
                    raise InternalInvariantError("two entries resolved in one slot")
                resolved = i
            window[i] = e._replace(age=age)
    if resolved is not None:
        e = window[resolved]
        if e.outcome:
            _release(window, resolved, cfg)
        elif cfg.protocol is Protocol.GBN:
            for j in range(resolved, len(window)):
                window[j] = WindowEntry(Status.UNSENT, accepted=window[j].accepted)
        else:
            window[resolved] = WindowEntry(Status.UNSENT, accepted=e.accepted)
    return window


def _next_to_send(window: list, buffer: int, cfg: ProtocolConfig):
    for i, e in enumerate(window):
        if e.status is Status.UNSENT:
            return i
    if len(window) < cfg.window and buffer > 0:
        return len(window)
    return None


def canonical(window: list, cfg: ProtocolConfig) -> tuple:
    """Canonical window after a slot (identity when ``cfg.lump`` is off).

    SR windows never hold more than one unsent entry, and only between the
    feedback and transmission phases, so their order carries no information:
    they are sorted oldest transmission first. When the window can never fill
    (W >= delta), a pending ACK only removes its entry later, which affects
    neither transmissions nor acceptances, so such entries are dropped now.
    """
    if not cfg.lump or cfg.window_mode == "span":
        return tuple(window)
    if cfg.window_never_full:
        window = [e for e in window if not (e.status is Status.AWAITING and e.outcome)]
    if cfg.protocol is Protocol.SR:
        window = sorted(window, key=lambda e: -e.age)
    return tuple(window)


def transmits(phi: ProtocolState, cfg: ProtocolConfig) -> bool:
    """Whether the terminal sends a packet in this slot (after feedback)."""
    window = _feedback_phase(phi, cfg)
    return _next_to_send(window, phi.buffer, cfg) is not None


def step(phi: ProtocolState, cfg: ProtocolConfig, outcome: DecodeOutcome,
         arrival: bool) -> tuple[ProtocolState, RewardIncrement]:
    """Advance one slot; returns the successor state and the slot's reward."""
    check_state(phi, cfg)
    buffer = phi.buffer
    window = _feedback_phase(phi, cfg)

    pos = _next_to_send(window, buffer, cfg)
    delivered = transmitted = 0
    if pos is not None:
        transmitted = 1
        if pos == len(window):
            window.append(UNSENT)
            buffer -= 1
        e = window[pos]
        ok = decode_success(cfg.architecture, outcome)
        accept = ok and not e.accepted
        if accept and cfg.protocol is Protocol.GBN:
            accept = all(w.accepted for w in window[:pos])
        accepted = e.accepted or accept
        delivered = int(accept)
        arch = cfg.architecture
        if arch is Architecture.CONVENTIONAL:
            immediate = ok
        else:
            # A GBN receiver discards out-of-order packets, so feedback is an
            # ACK exactly when the receiver holds the packet.
            immediate = arch is Architecture.HYBRID and outcome.bs_ok and accepted
        if immediate:
            window[pos] = e._replace(accepted=accepted)
            _release(window, pos, cfg)
        elif arch is Architecture.CONVENTIONAL:
            window[pos] = WindowEntry(Status.UNSENT, accepted=accepted)
        else:
            window[pos] = WindowEntry(Status.AWAITING, 0, accepted, accepted)

    if arrival:
        buffer = min(buffer + 1, cfg.b_max)
    return ProtocolState(buffer, canonical(window, cfg)), RewardIncrement(delivered, transmitted)
