"""
Packet-loss models: i.i.d. Bernoulli erasures and a slotted collision channel
whose loss grows when coding expands the payload by 1/R.
"""
import math
from dataclasses import dataclass
from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field

from slidingfountain.codec import Packet, PrngState


class BernoulliChannel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    model: Literal["bernoulli"] = "bernoulli"
    p_e: float = Field(default=0.0, ge=0.0, le=1.0)


class SlottedAlohaChannel(BaseModel):
    """`devices` end-devices contending for `slots` slots; `rate` is the code rate R"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    model: Literal["slotted_aloha"] = "slotted_aloha"
    devices: int = Field(default=1, ge=1)
    slots: int = Field(default=1, ge=1)
    rate: float | None = Field(default=None, gt=0.0, le=1.0)


ChannelConfig = Annotated[BernoulliChannel | SlottedAlohaChannel, Field(discriminator="model")]


@dataclass(frozen=True, slots=True)
class Delivered:
    packet: Packet

    @property
    def seq(self) -> int:
        return self.packet.seq


@dataclass(frozen=True, slots=True)
class Lost:
    seq: int


Outcome = Delivered | Lost


def collision_loss_prob(devices: int, slots: int) -> float:
    """p_e ≈ 1 − exp(−l/m) for l devices over m slots"""
    if slots < 1:
        raise ValueError("slots must be at least 1")
    return 1.0 - math.exp(-devices / slots)


def expanded_loss_prob(p_e: float, rate: float) -> float:
    """Loss after the payload grows by 1/R: p_e' ≈ 1 − (1 − p_e)^(1/R)"""
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"rate {rate} outside (0, 1]")
    if p_e >= 1.0:
        return 1.0
    if rate == 1.0:
        return p_e
    # 1 - (1 - p) can round below p
    return max(p_e, 1.0 - (1.0 - p_e) ** (1.0 / rate))


def loss_probability(config: BernoulliChannel | SlottedAlohaChannel, code_rate: float = 1.0) -> float:
    """Per-packet drop probability; a collision channel without its own rate uses `code_rate`"""
    if isinstance(config, BernoulliChannel):
        return config.p_e
    rate = config.rate if config.rate is not None else code_rate
    return expanded_loss_prob(collision_loss_prob(config.devices, config.slots), rate)


def transmit(packet: Packet, rng: PrngState, p_loss: float) -> Outcome:
    """One channel use; advances `rng` exactly once whatever the outcome"""
    u = rng.uniform()
    if u < p_loss:
        return Lost(packet.seq)
    return Delivered(packet)


class ErasureChannel:
    """Seeded channel instance for one stream"""

    def __init__(self, config: BernoulliChannel | SlottedAlohaChannel, seed: int, code_rate: float = 1.0):
        self.config = config
        self.p_loss = loss_probability(config, code_rate)
        self.rng = PrngState(seed)

    def transmit(self, packet: Packet) -> Outcome:
        return transmit(packet, self.rng, self.p_loss)
