import hashlib

import numpy as np

import pytest

from lighthash.helpers import (
    bits_to_bytes, bytes_to_bits, derive_seed, grid_parity, is_power_of_two,
    parse_hex, sha3, u64
)


def test_sha3_concatenates_parts():
    assert sha3(b"ab", b"c") == hashlib.sha3_256(b"abc").digest()
    assert sha3() == hashlib.sha3_256(b"").digest()


def test_u64_is_big_endian_and_wraps():
    assert u64(1) == b"\x00" * 7 + b"\x01"
    assert u64(1 << 64) == bytes(8)
    assert u64(-1) == b"\xff" * 8


###############################################################################


def test_derive_seed_is_deterministic():
    assert derive_seed(7, "device", 3) == derive_seed(7, "device", 3)
    assert 0 <= derive_seed(7) < 1 << 63


@pytest.mark.parametrize("labels", [
    ("device", 4),
    ("block", 3),
    (b"device", 3),
    ("device", "3"),
])
def test_derive_seed_separates_labels(labels):
    assert derive_seed(7, *labels) != derive_seed(7, "device", 3)


def test_derive_seed_depends_on_base():
    assert derive_seed(1, "x") != derive_seed(2, "x")


###############################################################################


def test_bytes_to_bits_msb_first():
    bits = bytes_to_bits(b"\x80\x01")

    assert bits.tolist() == [1, 0, 0, 0, 0, 0, 0, 0,
                             0, 0, 0, 0, 0, 0, 0, 1]


def test_bits_to_bytes_pads_with_zeros():
    assert bits_to_bytes([1, 1]) == b"\xc0"
    assert bits_to_bytes(np.ones(16, dtype=int)) == b"\xff\xff"


def test_bits_round_trip():
    data = bytes(range(0, 256, 7))

    assert bits_to_bytes(bytes_to_bits(data)) == data


###############################################################################


@pytest.mark.parametrize("text, expected", [
    ("00ff", b"\x00\xff"),
    ("0x00FF", b"\x00\xff"),
    ("  ab\n", b"\xab"),
])
def test_parse_hex(text, expected):
    assert parse_hex(text) == expected


@pytest.mark.parametrize("text, length", [
    ("xyz", None),
    ("abc", None),
    ("00ff", 3),
])
def test_parse_hex_rejects(text, length):
    with pytest.raises(ValueError):
        parse_hex(text, length)


@pytest.mark.parametrize("value, expected", [
    (1, True), (2, True), (64, True), (256, True),
    (0, False), (-4, False), (12, False), (255, False),
])
def test_is_power_of_two(value, expected):
    assert is_power_of_two(value) is expected


@pytest.mark.parametrize("n, k, parity", [
    (4, 2, 0), (8, 2, 0), (1, 2, 1), (3, 4, 1), (3, 3, 0),
])
def test_grid_parity(n, k, parity):
    assert grid_parity(n, k) == parity
