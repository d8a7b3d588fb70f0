"""
Here are defined helping functions shared by the whole package: hashing,
seed derivation and conversions between bytes and bit vectors.
"""

import hashlib
import struct

from typing import Iterable, Union

import numpy as np

U64_MASK = (1 << 64) - 1
SEED_MASK = (1 << 63) - 1


def sha3(*parts: bytes) -> bytes:
    """
    SHA3-256 of the concatenation of the given byte strings.

    Example:
        sha3(b"LHQ1", prev_hash, merkle_root, u64(n))
    """
    hasher = hashlib.sha3_256()

    for part in parts:
        hasher.update(part)

    return hasher.digest()


def u64(value: int) -> bytes:
    """
    Big-endian unsigned 64-bit encoding (wraps modulo 2^64).
    """
    return struct.pack(">Q", value & U64_MASK)


def derive_seed(base: int, *labels: Union[int, str, bytes]) -> int:
    """
    Derive an independent 63-bit seed from a base seed and labels.

    Arguments:
        base:
            The base seed of a run.
        *labels:
            Anything identifying the consumer (cell index, copy index, ...).

    Returns:
        A seed usable by `numpy.random.default_rng`.

    Example:
        derive_seed(7, "device", 3)
    """
    parts = [b"LHS1", u64(base)]

    for label in labels:
        if isinstance(label, bytes):
            parts.append(b"b" + label)
        elif isinstance(label, str):
            parts.append(b"s" + label.encode("utf-8"))
        else:
            parts.append(b"i" + u64(int(label)))

        parts.append(b"\x00")

    return int.from_bytes(sha3(*parts)[:8], "big") & SEED_MASK


def bytes_to_bits(data: bytes) -> np.ndarray:
    """
    Unpack bytes into a bit vector, most significant bit of each byte first.

    Example:
        bytes_to_bits(b"\\x80") -> array([1, 0, 0, 0, 0, 0, 0, 0])
    """
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def bits_to_bytes(bits: Iterable[int]) -> bytes:
    """
    Pack a bit vector into bytes, MSB first, zero padding the last byte.
    """
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def parse_hex(text: str, length: int = None) -> bytes:
    """
    Parse a hexadecimal string, optionally checking its byte length.

    Raises:
        ValueError:
            Not hexadecimal, or the wrong number of bytes.
    """
    text = text.strip()

    if text.startswith(("0x", "0X")):
        text = text[2:]

    data = bytes.fromhex(text)

    if length is not None and len(data) != length:
        raise ValueError("expected {length} bytes, got {actual}".format(
            length=length, actual=len(data)))

    return data


def is_power_of_two(value: int) -> bool:
    return value > 0 and value & (value - 1) == 0


def grid_parity(n: int, k: int) -> int:
    """
    Parity of every attainable row output `s` for N ports and resolution K.
    """
    return (n * (k + 1)) % 2
