"""PHY/MAC timing constants and derived slot-occupancy durations.

All durations are microseconds, sizes are bits, rates are bits per second.
``PhyParams()`` with no arguments reproduces the DSSS defaults (SIFS 10 us,
DIFS 50 us, 20 us slots, 11 Mb/s data over a 1 Mb/s control channel).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class AccessMode(enum.Enum):
    """Channel access method: two-way handshake or RTS/CTS four-way handshake."""

    BASIC = "basic"
    RTS_CTS = "rtscts"


@dataclass(frozen=True)
class PhyParams:
    """Physical and MAC layer parameters.

    ``ack_timeout_us`` and ``cts_timeout_us`` default to SIFS plus the
    control-frame transmission time plus one propagation delay; pass explicit
    values to override.
    """

    sifs_us: float = 10.0
    difs_us: float = 50.0
    slot_us: float = 20.0
    phys_header_bits: int = 192
    mac_header_bits: int = 224
    udp_ip_header_bits: int = 320
    ack_bits: int = 112
    rts_bits: int = 160
    cts_bits: int = 112
    data_rate_bps: float = 11e6
    control_rate_bps: float = 1e6
    prop_delay_us: float = 1.0
    payload_bits: int = 8000
    ack_timeout_us: float | None = field(default=None)
    cts_timeout_us: float | None = field(default=None)

    def __post_init__(self):
        for name in ("sifs_us", "difs_us", "slot_us", "data_rate_bps",
                     "control_rate_bps", "payload_bits"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("phys_header_bits", "mac_header_bits", "udp_ip_header_bits",
                     "ack_bits", "rts_bits", "cts_bits", "prop_delay_us"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.data_rate_bps < self.control_rate_bps:
            raise ValueError("data_rate_bps must be >= control_rate_bps")
        for name in ("ack_timeout_us", "cts_timeout_us"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be strictly positive when given")

    @property
    def ack_time_us(self) -> float:
        return bits_to_us(self.ack_bits, self.control_rate_bps)

    @property
    def rts_time_us(self) -> float:
        return bits_to_us(self.rts_bits, self.control_rate_bps)

    @property
    def cts_time_us(self) -> float:
        return bits_to_us(self.cts_bits, self.control_rate_bps)

    @property
    def payload_time_us(self) -> float:
        return bits_to_us(self.payload_bits, self.data_rate_bps)

    def effective_ack_timeout_us(self) -> float:
        if self.ack_timeout_us is not None:
            return self.ack_timeout_us
        return self.sifs_us + self.ack_time_us + self.prop_delay_us

    def effective_cts_timeout_us(self) -> float:
        if self.cts_timeout_us is not None:
            return self.cts_timeout_us
        return self.sifs_us + self.cts_time_us + self.prop_delay_us


@dataclass(frozen=True)
class SlotDurations:
    """Durations of the three kinds of channel slot, plus the idle slot length."""

    t_s_us: float
    t_c_us: float
    t_o_us: float
    t_idle_us: float


def bits_to_us(bits: float, rate_bps: float) -> float:
    """Transmission time of ``bits`` at ``rate_bps``, in microseconds."""
    return bits / rate_bps * 1e6


def compute_header_time(p: PhyParams) -> float:
    """Header transmission time: PHY preamble at the control rate, MAC and
    UDP/IP headers at the data rate."""
    return (bits_to_us(p.phys_header_bits, p.control_rate_bps)
            + bits_to_us(p.mac_header_bits + p.udp_ip_header_bits, p.data_rate_bps))


def slot_durations(p: PhyParams, mode: AccessMode) -> SlotDurations:
    """Derive the successful-transmission, collision, and timeout slot
    durations for the given access method.

    Basic access pays the full header + payload + ACK exchange on both
    success and collision; RTS/CTS collisions cost only the RTS/CTS
    exchange.
    """
    t_h = compute_header_time(p)
    t_ep = p.payload_time_us
    d = p.prop_delay_us
    sifs, difs = p.sifs_us, p.difs_us
    if mode is AccessMode.BASIC:
        t_c = difs + t_h + t_ep + sifs + p.ack_time_us
        t_s = difs + t_h + t_ep + d + sifs + p.ack_time_us + d
        t_o = sifs + p.effective_ack_timeout_us()
    else:
        t_s = (difs + p.rts_time_us + sifs + d + p.cts_time_us + sifs + d
               + t_h + t_ep + sifs + d + p.ack_time_us + 2 * d)
        t_c = difs + p.rts_time_us + sifs + p.cts_time_us
        t_o = sifs + p.effective_cts_timeout_us()
    return SlotDurations(t_s_us=t_s, t_c_us=t_c, t_o_us=t_o, t_idle_us=p.slot_us)


# Named parameter profiles. They differ only in the data rate: the DSSS
# profile runs payload bits at 11 Mb/s, the reproduction profile at 1 Mb/s.
def table1_params(**overrides) -> PhyParams:
    """DSSS defaults (11 Mb/s data rate)."""
    return PhyParams(**overrides)


def one_mbps_params(**overrides) -> PhyParams:
    """1 Mb/s channel-capacity profile used by the validation recipes."""
    overrides.setdefault("data_rate_bps", 1e6)
    return PhyParams(**overrides)


PROFILES = {
    "table1": table1_params,
    "1mbps": one_mbps_params,
}
