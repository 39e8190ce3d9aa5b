import random

import pytest
from hypothesis import given, strategies as st

from uorasim.errors import MalformedElementError, MalformedFrameError
from uorasim.wire_formats import (
    BufferStatusReport,
    MultiStaBlockAck,
    RuAllocation,
    TriggerFrame,
    TriggerVariant,
    UoraParameterSetElement,
    decode_bsr,
    decode_multi_sta_ba,
    decode_trigger,
    decode_uora_param_set,
    encode_bsr,
    encode_multi_sta_ba,
    encode_trigger,
    encode_uora_param_set,
)


class TestUoraParameterSet:
    def test_table_values_pack_to_0x3d(self):
        raw = encode_uora_param_set(UoraParameterSetElement(eocw_min=5, eocw_max=7))
        assert raw == bytes([255, 2, 0, 0x3D])

    def test_zero_exponents(self):
        assert encode_uora_param_set(UoraParameterSetElement(0, 0))[3] == 0x00

    def test_always_four_octets_and_roundtrip_all_pairs(self):
        seen = set()
        pairs = [(lo, hi) for lo in range(8) for hi in range(8) if lo <= hi]
        assert len(pairs) == 36
        for lo, hi in pairs:
            elem = UoraParameterSetElement(lo, hi)
            raw = encode_uora_param_set(elem)
            assert len(raw) == 4
            assert decode_uora_param_set(raw) == elem
            seen.add(raw)
        assert len(seen) == 36

    def test_decode_known_octet(self):
        elem = decode_uora_param_set(bytes([255, 2, 0, 0x3D]))
        assert (elem.eocw_min, elem.eocw_max) == (5, 7)
        assert (elem.ocw_min, elem.ocw_max) == (31, 127)

    def test_reserved_bits_tolerated_on_decode(self):
        elem = decode_uora_param_set(bytes([255, 2, 0, 0xC0]))
        assert (elem.eocw_min, elem.eocw_max, elem.reserved) == (0, 0, 3)

    def test_reserved_bits_rejected_on_encode(self):
        with pytest.raises(MalformedElementError):
            encode_uora_param_set(UoraParameterSetElement(0, 0, reserved=1))

    def test_truncated(self):
        with pytest.raises(MalformedElementError):
            decode_uora_param_set(bytes([255, 2, 0]))

    def test_bad_length_field(self):
        with pytest.raises(MalformedElementError):
            decode_uora_param_set(bytes([255, 3, 0, 0x3D]))

    def test_min_above_max_rejected(self):
        with pytest.raises(MalformedElementError):
            UoraParameterSetElement(6, 5)

    def test_custom_ids_carried(self):
        elem = UoraParameterSetElement(2, 4, element_id=7, element_id_extension=99)
        raw = encode_uora_param_set(elem)
        assert raw[0] == 7 and raw[2] == 99
        assert decode_uora_param_set(raw) == elem


def exchange_bsrp():
    allocs = [RuAllocation(i, 52, 0) for i in range(3)] + [RuAllocation(3, 52, 5)]
    return TriggerFrame(TriggerVariant.BSRP, 96, tuple(allocs))


def random_trigger(rng):
    count = rng.randint(0, 40)
    indices = rng.sample(range(256), count)
    tones = [26, 52, 106, 242]
    aids = [a for a in range(2048) if a != 2045]
    allocs = tuple(RuAllocation(i, rng.choice(tones), rng.choice(aids)) for i in indices)
    return TriggerFrame(
        rng.choice(list(TriggerVariant)), 16 * rng.randint(0, 0xFFFF), allocs
    )


class TestTriggerFrame:
    def test_exchange_bsrp_roundtrip(self):
        tf = exchange_bsrp()
        raw = encode_trigger(tf)
        assert raw[3] == 4
        assert decode_trigger(raw) == tf
        assert tf.ra_ru_indices() == [0, 1, 2]
        assert tf.sa_allocations() == {5: 3}

    def test_layout_bytes(self):
        tf = TriggerFrame(TriggerVariant.BASIC, 32, (RuAllocation(2, 106, 0x0102),))
        assert encode_trigger(tf) == bytes([1, 2, 0, 1, 2, 2, 0x02, 0x01])

    def test_empty(self):
        tf = TriggerFrame(TriggerVariant.BASIC)
        raw = encode_trigger(tf)
        assert raw[3] == 0
        assert decode_trigger(raw) == tf

    def test_random_roundtrip_and_injective(self):
        rng = random.Random(7)
        encoded = {}
        for _ in range(10_000):
            tf = random_trigger(rng)
            raw = encode_trigger(tf)
            assert decode_trigger(raw) == tf
            if raw in encoded:
                assert encoded[raw] == tf
            encoded[raw] = tf

    def test_aid_2045_rejected(self):
        with pytest.raises(MalformedFrameError):
            RuAllocation(0, 26, 2045)
        raw = bytearray(encode_trigger(exchange_bsrp()))
        raw[-2:] = (2045).to_bytes(2, "little")
        with pytest.raises(MalformedFrameError):
            decode_trigger(bytes(raw))

    def test_duplicate_ru_rejected(self):
        with pytest.raises(MalformedFrameError):
            TriggerFrame(TriggerVariant.BSRP, 0, (RuAllocation(1, 26, 0), RuAllocation(1, 26, 3)))
        raw = bytes([0, 0, 0, 2, 1, 0, 0, 0, 1, 0, 3, 0])
        with pytest.raises(MalformedFrameError):
            decode_trigger(raw)

    @pytest.mark.parametrize(
        "raw",
        [
            bytes([2, 0, 0, 0]),  # unknown variant
            bytes([0, 0, 0, 1, 0, 9, 0, 0]),  # unknown tones code
            bytes([0, 0, 0, 1, 0, 0]),  # truncated allocation
            bytes([0, 0]),
        ],
    )
    def test_malformed(self, raw):
        with pytest.raises(MalformedFrameError):
            decode_trigger(raw)

    def test_ul_length_granularity(self):
        with pytest.raises(MalformedFrameError):
            TriggerFrame(TriggerVariant.BSRP, 20)


class TestBsrAndBlockAck:
    @given(st.integers(1, 2047), st.integers(0, 2**32 - 1))
    def test_bsr_roundtrip(self, aid, queue):
        bsr = BufferStatusReport(aid, queue)
        assert decode_bsr(encode_bsr(bsr)) == bsr

    def test_bsr_aid_zero_rejected(self):
        with pytest.raises(MalformedFrameError):
            BufferStatusReport(0, 10)

    @given(st.frozensets(st.integers(1, 2047), max_size=40))
    def test_block_ack_roundtrip(self, aids):
        ba = MultiStaBlockAck(aids)
        assert decode_multi_sta_ba(encode_multi_sta_ba(ba)) == ba

    def test_block_ack_bad_length(self):
        with pytest.raises(MalformedFrameError):
            decode_multi_sta_ba(bytes([2, 1, 0]))
