import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_message, random_name
from tunnelguard.codec import (
    BadLabelLength,
    DnsHeader,
    DnsMessage,
    DomainName,
    EmptyLabel,
    LabelTooLong,
    NameTooLong,
    PointerLoop,
    QType,
    Question,
    ResourceRecord,
    Truncated,
    decode,
    encode,
    encode_udp,
    make_query,
    parse_name,
)

# id=0x1234, RD, one question example.com A IN, laid out field by field
EXAMPLE_QUERY = (
    bytes.fromhex("1234 0100 0001 0000 0000 0000")
    + b"\x07example\x03com\x00"
    + bytes.fromhex("0001 0001")
)


def test_hand_encoded_query_vector():
    assert len(EXAMPLE_QUERY) == 29
    msg = make_query("example.com", QType.A, id=0x1234)
    assert encode(msg) == EXAMPLE_QUERY
    assert EXAMPLE_QUERY[:6] == bytes([0x12, 0x34, 0x01, 0x00, 0x00, 0x01])


def test_decode_hand_encoded_vector():
    msg = decode(EXAMPLE_QUERY)
    assert msg.header == DnsHeader(id=0x1234, rd=True)
    assert msg.questions == (Question(parse_name("example.com"), 1, 1),)
    assert msg.answers == msg.authorities == msg.additionals == ()
    assert encode(msg) == EXAMPLE_QUERY


def test_empty_message_is_twelve_zero_octets():
    assert encode(DnsMessage()) == bytes(12)
    assert decode(bytes(12)) == DnsMessage()


def test_compression_pointer_to_question_name():
    answer = b"\xc0\x0c" + struct.pack("!HHIH", 1, 1, 60, 4) + bytes([127, 0, 0, 1])
    data = bytes.fromhex("1234 8180 0001 0001 0000 0000") + EXAMPLE_QUERY[12:] + answer
    msg = decode(data)
    assert msg.answers[0].name == msg.questions[0].qname == parse_name("example.com")
    assert str(msg.answers[0].rdata) == "127.0.0.1"


def test_pointer_loop_detected():
    data = bytes.fromhex("0000 0000 0001 0000 0000 0000") + b"\xc0\x0c" + b"\x00\x01\x00\x01"
    with pytest.raises(PointerLoop):
        decode(data)


def test_two_pointer_cycle_detected():
    # offset 12 points at 14, 14 points back at 12
    data = bytes.fromhex("0000 0000 0001 0000 0000 0000") + b"\xc0\x0e\xc0\x0c" + b"\x00\x01\x00\x01"
    with pytest.raises(PointerLoop):
        decode(data)


def test_short_input_truncated():
    with pytest.raises(Truncated):
        decode(bytes([1, 2, 3, 4, 5]))


def test_truncated_question():
    with pytest.raises(Truncated):
        decode(EXAMPLE_QUERY[:-2])


def test_reserved_label_type():
    data = bytes.fromhex("0000 0000 0001 0000 0000 0000") + b"\x45abc\x00\x00\x01\x00\x01"
    with pytest.raises(BadLabelLength):
        decode(data)


def test_parse_name_basics():
    assert parse_name("example.com").labels == (b"example", b"com")
    assert parse_name("example.com.") == parse_name("example.com")
    name = parse_name("a." + "x" * 63 + ".com")
    assert len(name.labels) == 3
    assert max(len(l) for l in name.labels) == 63


def test_parse_name_errors():
    with pytest.raises(LabelTooLong):
        parse_name("x" * 64 + ".com")
    with pytest.raises(EmptyLabel):
        parse_name("a..com")
    with pytest.raises(EmptyLabel):
        parse_name("")
    # 4 labels of 63 plus length octets and root = 257 wire octets
    with pytest.raises(NameTooLong):
        parse_name(".".join(["x" * 63] * 4))
    # 3*64 + 62 + 1 = 255 exactly
    assert parse_name(".".join(["x" * 63] * 3 + ["y" * 61])).wire_length == 255


def test_escapes_round_trip():
    name = parse_name(r"a\.b.c\032d")
    assert name.labels == (b"a.b", b"c d")
    assert parse_name(name.to_text()) == name


def test_case_insensitive_equality_and_order():
    assert parse_name("ExAmPlE.com") == parse_name("example.com")
    assert hash(parse_name("ExAmPlE.com")) == hash(parse_name("example.com"))
    assert parse_name("A.example") < parse_name("b.example")
    # case is preserved on the wire
    assert b"ExAmPlE" in encode(make_query("ExAmPlE.com"))


def test_non_ascii_octets_are_not_folded():
    assert DomainName([b"\xc4"]) != DomainName([b"\xe4"])


def test_truncation_sets_tc():
    q = make_query("big.example", QType.TXT, id=7)
    rrs = [ResourceRecord(q.questions[0].qname, QType.TXT, 1, 60, (b"x" * 200,)) for _ in range(5)]
    msg = DnsMessage(DnsHeader(id=7, qr=True), q.questions, rrs)
    wire = encode_udp(msg)
    assert len(wire) <= 512
    out = decode(wire)
    assert out.header.tc
    assert 0 < len(out.answers) < 5


def test_unknown_rtype_is_opaque():
    rr = ResourceRecord(parse_name("x.example"), 4242, 1, 5, b"\x00\xffabc")
    msg = DnsMessage(DnsHeader(id=1, qr=True), (), (rr,))
    assert decode(encode(msg)).answers[0].rdata == b"\x00\xffabc"


def test_random_messages_round_trip():
    rng = random.Random(7)
    for _ in range(500):
        m = random_message(rng)
        wire = encode(m)
        assert decode(wire) == m
        assert encode(decode(wire)) == wire


@settings(max_examples=300)
@given(st.binary(max_size=64))
def test_decode_never_crashes_unexpectedly(data):
    try:
        decode(data)
    except (Truncated, PointerLoop, BadLabelLength):
        pass


@settings(max_examples=200)
@given(st.randoms(use_true_random=False))
def test_round_trip_property(rnd):
    m = random_message(rnd)
    assert decode(encode(m)) == m


@given(st.lists(st.binary(min_size=1, max_size=63), min_size=1, max_size=3))
def test_name_text_round_trip(labels):
    name = DomainName(labels)
    again = parse_name(name.to_text())
    assert again.labels == name.labels


def test_random_name_helper_is_valid():
    rng = random.Random(3)
    for _ in range(100):
        n = random_name(rng)
        assert n.wire_length <= 255
