"""Piecewise-constant drive amplitude in the probe rotating frame.

A protocol is an ordered list of contiguous segments, each with a
constant complex amplitude.  Segment boundaries are also the mandatory
subinterval boundaries of the segmented integral-equation solver.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BadInterval, OutOfRange


@dataclass(frozen=True)
class DriveProtocol:
    """Ordered, contiguous segments (t_start, t_end, eta)."""

    segments: tuple

    def __post_init__(self):
        if not self.segments:
            raise BadInterval("protocol needs at least one segment")
        segs = tuple((float(a), float(b), complex(e)) for a, b, e in self.segments)
        object.__setattr__(self, "segments", segs)
        for a, b, _ in segs:
            if not (b > a):
                raise BadInterval(f"segment [{a}, {b}) is empty or reversed")
        for (_, b0, _), (a1, _, _) in zip(segs, segs[1:]):
            if a1 != b0:
                raise BadInterval(
                    f"segments must be contiguous, found gap/overlap at {b0} vs {a1}"
                )

    @property
    def t_start(self) -> float:
        return self.segments[0][0]

    @property
    def t_end(self) -> float:
        return self.segments[-1][1]

    def boundaries(self) -> list:
        """All segment boundary times, including both span endpoints."""
        return [s[0] for s in self.segments] + [self.t_end]


def rectangular(eta0: complex, t_on: float, t_off: float, t_end: float) -> DriveProtocol:
    """Single rectangular pulse: eta0 on [t_on, t_off), zero elsewhere in [0, t_end)."""
    if not (0.0 <= t_on < t_off <= t_end):
        raise BadInterval(
            f"need 0 <= t_on < t_off <= t_end, got ({t_on}, {t_off}, {t_end})"
        )
    segments = []
    if t_on > 0.0:
        segments.append((0.0, t_on, 0.0j))
    segments.append((t_on, t_off, complex(eta0)))
    if t_end > t_off:
        segments.append((t_off, t_end, 0.0j))
    return DriveProtocol(tuple(segments))


def phase_switched_train(eta0: complex, tau: float, n_pulses: int,
                         t_end: float) -> DriveProtocol:
    """n_pulses back-to-back pulses of duration tau with alternating sign.

    Odd pulses carry +eta0, even pulses -eta0, then zero drive up to t_end.
    """
    if tau <= 0.0:
        raise BadInterval(f"pulse duration must be positive, got {tau}")
    if n_pulses < 1:
        raise BadInterval(f"need at least one pulse, got {n_pulses}")
    if n_pulses * tau > t_end + 1e-12:
        raise BadInterval(
            f"train of {n_pulses} x {tau} ns does not fit into t_end = {t_end}"
        )
    segments = []
    for n in range(1, n_pulses + 1):
        sign = 1.0 if n % 2 == 1 else -1.0
        segments.append(((n - 1) * tau, n * tau, sign * complex(eta0)))
    if t_end > n_pulses * tau:
        segments.append((n_pulses * tau, t_end, 0.0j))
    return DriveProtocol(tuple(segments))


def amplitude_at(protocol: DriveProtocol, t: float) -> complex:
    """Drive amplitude at time t (segments are left-closed, right-open)."""
    if not (protocol.t_start <= t < protocol.t_end):
        raise OutOfRange(
            f"t = {t} outside protocol span [{protocol.t_start}, {protocol.t_end})"
        )
    for a, b, eta in protocol.segments:
        if a <= t < b:
            return eta
    raise OutOfRange(f"no segment contains t = {t}")  # unreachable for valid protocols
