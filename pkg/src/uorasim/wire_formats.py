"""Byte codecs for the frames exchanged by the simulator.

Layouts (all multi-octet integers little-endian):

UORA Parameter Set element, 4 octets::

    | Element ID | Length (=2) | Element ID Extension | OCW Range |

    OCW Range bits: b0-b2 EOCWmin, b3-b5 EOCWmax, b6-b7 reserved.

Trigger frame (simulator-canonical)::

    | variant u8 | ul_length_us/16 u16 | n_alloc u8 | n_alloc * allocation |
    allocation = | ru_index u8 | tones code u8 | aid u16 |

Buffer status report::

    | aid u16 | queue_bytes u32 |

Multi-STA Block Ack::

    | n u8 | n * aid u16 (ascending) |
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

from uorasim.errors import MalformedElementError, MalformedFrameError

UORA_ELEMENT_ID = 255
UORA_ELEMENT_ID_EXTENSION = 0
UORA_ELEMENT_LENGTH = 2

RA_AID = 0
UNASSOCIATED_RA_AID = 2045
MAX_AID = 2047

UL_LENGTH_UNIT_US = 16

TONES_TO_CODE = {26: 0, 52: 1, 106: 2, 242: 3}
CODE_TO_TONES = {v: k for k, v in TONES_TO_CODE.items()}

_TF_HEADER = struct.Struct("<BHB")
_TF_ALLOC = struct.Struct("<BBH")
_BSR = struct.Struct("<HI")


@dataclass(frozen=True)
class UoraParameterSetElement:
    eocw_min: int
    eocw_max: int
    element_id: int = UORA_ELEMENT_ID
    length: int = UORA_ELEMENT_LENGTH
    element_id_extension: int = UORA_ELEMENT_ID_EXTENSION
    reserved: int = 0

    def __post_init__(self) -> None:
        for name in ("element_id", "length", "element_id_extension"):
            value = getattr(self, name)
            if not 0 <= value <= 0xFF:
                raise MalformedElementError(f"{name} must fit in one octet, got {value}")
        if self.length != UORA_ELEMENT_LENGTH:
            raise MalformedElementError(f"length must be {UORA_ELEMENT_LENGTH}, got {self.length}")
        for name in ("eocw_min", "eocw_max"):
            value = getattr(self, name)
            if not 0 <= value <= 7:
                raise MalformedElementError(f"{name} must be in 0..7, got {value}")
        if self.eocw_min > self.eocw_max:
            raise MalformedElementError(
                f"eocw_min ({self.eocw_min}) exceeds eocw_max ({self.eocw_max})"
            )
        if not 0 <= self.reserved <= 3:
            raise MalformedElementError(f"reserved must be in 0..3, got {self.reserved}")

    @property
    def ocw_min(self) -> int:
        return (1 << self.eocw_min) - 1

    @property
    def ocw_max(self) -> int:
        return (1 << self.eocw_max) - 1


def encode_uora_param_set(elem: UoraParameterSetElement) -> bytes:
    if elem.reserved != 0:
        raise MalformedElementError("reserved bits must be zero on encode")
    ocw_range = elem.eocw_min | (elem.eocw_max << 3) | (elem.reserved << 6)
    return bytes((elem.element_id, elem.length, elem.element_id_extension, ocw_range))


def decode_uora_param_set(data: bytes) -> UoraParameterSetElement:
    """Parse a UORA Parameter Set element. Nonzero reserved bits are kept."""
    if len(data) < 4:
        raise MalformedElementError(f"element needs 4 octets, got {len(data)}")
    element_id, length, ext, ocw_range = data[0], data[1], data[2], data[3]
    if length != UORA_ELEMENT_LENGTH:
        raise MalformedElementError(f"length field must be {UORA_ELEMENT_LENGTH}, got {length}")
    return UoraParameterSetElement(
        eocw_min=ocw_range & 0x07,
        eocw_max=(ocw_range >> 3) & 0x07,
        element_id=element_id,
        length=length,
        element_id_extension=ext,
        reserved=(ocw_range >> 6) & 0x03,
    )


class TriggerVariant(enum.IntEnum):
    BSRP = 0
    BASIC = 1


@dataclass(frozen=True)
class RuAllocation:
    ru_index: int
    ru_tones: int
    aid: int

    def __post_init__(self) -> None:
        if not 0 <= self.ru_index <= 0xFF:
            raise MalformedFrameError(f"ru_index out of range: {self.ru_index}")
        if self.ru_tones not in TONES_TO_CODE:
            raise MalformedFrameError(f"unsupported RU size: {self.ru_tones}")
        if not 0 <= self.aid <= MAX_AID:
            raise MalformedFrameError(f"aid out of range: {self.aid}")
        if self.aid == UNASSOCIATED_RA_AID:
            raise MalformedFrameError("AID 2045 (unassociated-STA random access) is not supported")

    @property
    def is_random_access(self) -> bool:
        return self.aid == RA_AID


@dataclass(frozen=True)
class TriggerFrame:
    variant: TriggerVariant
    ul_length_us: int = 0
    allocations: tuple[RuAllocation, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", TriggerVariant(self.variant))
        object.__setattr__(self, "allocations", tuple(self.allocations))
        if self.ul_length_us % UL_LENGTH_UNIT_US or not (
            0 <= self.ul_length_us <= 0xFFFF * UL_LENGTH_UNIT_US
        ):
            raise MalformedFrameError(
                f"ul_length_us must be a multiple of {UL_LENGTH_UNIT_US} in range, "
                f"got {self.ul_length_us}"
            )
        if len(self.allocations) > 0xFF:
            raise MalformedFrameError("too many allocations")
        seen = set()
        for alloc in self.allocations:
            if alloc.ru_index in seen:
                raise MalformedFrameError(f"duplicate ru_index {alloc.ru_index}")
            seen.add(alloc.ru_index)

    def ra_ru_indices(self) -> list[int]:
        return [a.ru_index for a in self.allocations if a.aid == RA_AID]

    def sa_allocations(self) -> dict[int, int]:
        """Map of AID to its scheduled RU index."""
        return {a.aid: a.ru_index for a in self.allocations if a.aid != RA_AID}

    @property
    def n_ra(self) -> int:
        return sum(1 for a in self.allocations if a.aid == RA_AID)


def encode_trigger(tf: TriggerFrame) -> bytes:
    out = bytearray(
        _TF_HEADER.pack(int(tf.variant), tf.ul_length_us // UL_LENGTH_UNIT_US, len(tf.allocations))
    )
    for alloc in tf.allocations:
        out += _TF_ALLOC.pack(alloc.ru_index, TONES_TO_CODE[alloc.ru_tones], alloc.aid)
    return bytes(out)


def decode_trigger(data: bytes) -> TriggerFrame:
    if len(data) < _TF_HEADER.size:
        raise MalformedFrameError("trigger frame truncated")
    variant, ul_units, count = _TF_HEADER.unpack_from(data, 0)
    if variant not in TriggerVariant._value2member_map_:
        raise MalformedFrameError(f"unknown trigger variant {variant}")
    expected = _TF_HEADER.size + count * _TF_ALLOC.size
    if len(data) != expected:
        raise MalformedFrameError(f"trigger frame length {len(data)} != {expected}")
    allocations = []
    for i in range(count):
        ru_index, code, aid = _TF_ALLOC.unpack_from(data, _TF_HEADER.size + i * _TF_ALLOC.size)
        if code not in CODE_TO_TONES:
            raise MalformedFrameError(f"unknown RU tones code {code}")
        allocations.append(RuAllocation(ru_index, CODE_TO_TONES[code], aid))
    return TriggerFrame(TriggerVariant(variant), ul_units * UL_LENGTH_UNIT_US, tuple(allocations))


@dataclass(frozen=True)
class BufferStatusReport:
    aid: int
    queue_bytes: int

    def __post_init__(self) -> None:
        if not 1 <= self.aid <= MAX_AID:
            raise MalformedFrameError(f"BSR aid out of range: {self.aid}")
        if not 0 <= self.queue_bytes <= 0xFFFFFFFF:
            raise MalformedFrameError(f"queue_bytes out of range: {self.queue_bytes}")


def encode_bsr(bsr: BufferStatusReport) -> bytes:
    return _BSR.pack(bsr.aid, bsr.queue_bytes)


def decode_bsr(data: bytes) -> BufferStatusReport:
    if len(data) != _BSR.size:
        raise MalformedFrameError(f"BSR must be {_BSR.size} octets, got {len(data)}")
    return BufferStatusReport(*_BSR.unpack(data))


@dataclass(frozen=True)
class MultiStaBlockAck:
    acked_aids: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "acked_aids", frozenset(self.acked_aids))
        if len(self.acked_aids) > 0xFF:
            raise MalformedFrameError("too many acknowledged STAs")
        for aid in self.acked_aids:
            if not 1 <= aid <= MAX_AID:
                raise MalformedFrameError(f"acked aid out of range: {aid}")


def encode_multi_sta_ba(ba: MultiStaBlockAck) -> bytes:
    aids = sorted(ba.acked_aids)
    return bytes([len(aids)]) + b"".join(struct.pack("<H", a) for a in aids)


def decode_multi_sta_ba(data: bytes) -> MultiStaBlockAck:
    if not data:
        raise MalformedFrameError("empty Block Ack")
    count = data[0]
    if len(data) != 1 + 2 * count:
        raise MalformedFrameError(f"Block Ack length {len(data)} does not match count {count}")
    aids = struct.unpack(f"<{count}H", data[1:])
    if len(set(aids)) != count:
        raise MalformedFrameError("duplicate AID in Block Ack")
    return MultiStaBlockAck(frozenset(aids))
