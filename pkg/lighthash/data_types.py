"""
Here are defined own data types shared by the hashing, chain and analysis
modules.
"""

import enum

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from scipy.linalg import block_diag

from lighthash.exceptions import InvalidParameters, ShapeMismatch
from lighthash.helpers import grid_parity, is_power_of_two

DIGEST_BITS = 256
U16_MAX = (1 << 16) - 1


class Mode(str, enum.Enum):
    """
    How detected outputs become bits.
    """
    UNSIGNED = "unsigned"
    SIGNED = "signed"


@dataclass(frozen=True)
class LightHashParams:
    """
    Parameters of the hash.

    Attributes:
        n (int):
            Ports per block, a power of two not above 256.
        k (int):
            Numerical resolution, the number of distinct matrix values.
        t_int (Optional[int]):
            Integer threshold in grid units, `None` until selected for a
            block.
        mode (Mode):
            Unsigned (|s| > t) or signed (s > 0) thresholding.
        copies (int):
            Error-correction copies R.
        batch (int):
            Number of nonces evaluated together (S).

    Example:
        LightHashParams(n=8, k=4, t_int=3)
    """
    n: int
    k: int
    t_int: Optional[int] = None
    mode: Mode = Mode.UNSIGNED
    copies: int = 1
    batch: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))

        if not is_power_of_two(self.n) or self.n > DIGEST_BITS:
            raise InvalidParameters(
                "N must be a power of two between 1 and 256, got {n}".format(
                    n=self.n))

        if not 2 <= self.k <= U16_MAX:
            raise InvalidParameters(
                "K must be between 2 and 65535, got {k}".format(k=self.k))

        if self.t_int is not None:
            check_threshold(self.t_int, self.n, self.k)

        if self.copies < 1:
            raise InvalidParameters("R (copies) must be at least 1")

        if self.batch < 1:
            raise InvalidParameters("S (batch) must be at least 1")

    @property
    def n_blocks(self) -> int:
        return DIGEST_BITS // self.n

    @property
    def parity(self) -> int:
        return grid_parity(self.n, self.k)

    def with_threshold(self, t_int: int) -> "LightHashParams":
        return replace(self, t_int=t_int)


def check_threshold(t_int: int, n: int, k: int) -> None:
    """
    Raises:
        InvalidParameters:
            `t_int` is negative or lies on the output grid.
    """
    if t_int < 0 or t_int % 2 == grid_parity(n, k):
        raise InvalidParameters(
            "t_int = {t} must be a non-negative midpoint of the output grid "
            "(parity {parity} for N={n}, K={k})".format(
                t=t_int, parity=1 - grid_parity(n, k), n=n, k=k))


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    """
    The block-diagonal integer matrix Q of one block header.

    Attributes:
        n, k (int):
            Block size and numerical resolution.
        blocks (np.ndarray):
            Integer array of shape `(256 / n, n, n)`.
        prev_hash, merkle_root (bytes):
            The seeds it was derived from.
    """
    n: int
    k: int
    blocks: np.ndarray
    prev_hash: bytes = bytes(32)
    merkle_root: bytes = bytes(32)

    def __post_init__(self) -> None:
        blocks = np.array(self.blocks, dtype=np.int64)
        expected = (DIGEST_BITS // self.n, self.n, self.n)

        if blocks.shape != expected:
            raise ShapeMismatch("block matrix", expected, blocks.shape)

        blocks.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_blocks(self) -> int:
        return self.blocks.shape[0]

    def block(self, index: int) -> np.ndarray:
        return self.blocks[index]

    def dense(self) -> np.ndarray:
        """
        The full 256 x 256 block-diagonal matrix.
        """
        return block_diag(*self.blocks)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BlockMatrix):
            return NotImplemented

        return (self.n, self.k, self.prev_hash, self.merkle_root) == \
            (other.n, other.k, other.prev_hash, other.merkle_root) \
            and np.array_equal(self.blocks, other.blocks)

    __hash__ = None


@dataclass(frozen=True)
class BlockOutput:
    """
    What a backend produces for a batch of inputs to one block.

    `outputs` and `powers` are in the backend's own units: grid units for
    the integer oracle, normalized field units for the photonic backends.
    """
    outputs: np.ndarray
    powers: np.ndarray
    bits: np.ndarray


@dataclass(frozen=True)
class HashTrace:
    """
    Every intermediate value of one hash evaluation.

    Attributes:
        d1 (bytes):
            SHA3-256 of header and nonce.
        inputs (np.ndarray):
            Encoded input field per chunk, shape `(256 / N, N)`.
        outputs (np.ndarray):
            Output value per chunk, see `BlockOutput`.
        powers (np.ndarray):
            Detected power per chunk.
        out_bits (np.ndarray):
            The 256 thresholded bits.
        digest (bytes):
            SHA3-256 of `out_bits XOR d1`.
    """
    d1: bytes
    inputs: np.ndarray
    outputs: np.ndarray
    powers: np.ndarray
    out_bits: np.ndarray
    digest: bytes

    def lines(self) -> Tuple[str, ...]:
        """
        Human readable rendering, one chunk per line.
        """
        rows = ["d1 {}".format(self.d1.hex())]
        n = self.inputs.shape[1]

        for index in range(self.inputs.shape[0]):
            bits = self.out_bits[index * n:(index + 1) * n]
            rows.append("chunk {index:3d} s={outputs} p={powers} bits={bits}"
                        .format(index=index,
                                outputs=_render(self.outputs[index]),
                                powers=_render(self.powers[index]),
                                bits="".join(str(int(bit)) for bit in bits)))

        rows.append("digest {}".format(self.digest.hex()))

        return tuple(rows)


def _render(values: np.ndarray) -> str:
    values = np.asarray(values)

    if np.iscomplexobj(values):
        if np.allclose(values.imag, 0):
            values = values.real
        else:
            return "[" + " ".join("{:.4g}".format(value) for value in values) \
                + "]"

    return "[" + " ".join("{:.6g}".format(value) for value in values) + "]"
