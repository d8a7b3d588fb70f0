"""
Here is defined the LightHash digest pipeline:

    d1 = SHA3-256(header || nonce)
    B  = threshold(Q . encode(d1))      chunk by chunk, on some backend
    digest = SHA3-256(B XOR d1)

together with the interchangeable matrix-vector backends (bit-exact integer
oracle, noisy photonic simulator and its R-copy error-corrected variant) and
the bit-exact block header layout.
"""

import logging
import math
import struct

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from lighthash.data_types import (
    DIGEST_BITS, BlockMatrix, BlockOutput, HashTrace, LightHashParams, Mode,
    check_threshold
)
from lighthash.error_model import (
    ErrorProfile, ErrorSample, detection_noise, sample_errors
)
from lighthash.exceptions import InvalidParameters, ShapeMismatch
from lighthash.helpers import (
    bits_to_bytes, bytes_to_bits, derive_seed, grid_parity, sha3, u64
)
from lighthash.mesh import (
    Layout, SVDProgram, cyclic_schedule, factor_common_loss, permute_svd,
    svd_program
)
from lighthash.models import Backend

logger = logging.getLogger(__name__)

HEADER_MAGIC = b"LHB1"
HEADER_FORMAT = ">4sQ32s32sHHHi"
HEADER_SIZE = struct.calcsize(HEADER_FORMAT)

THRESHOLD_DRAWS = 65536
EXACT_THRESHOLD_PORTS = 16  # 2^16 inputs
_MATMUL_ROWS = 8192


###############################################################################
# Header


@dataclass(frozen=True)
class HeaderFields:
    height: int
    prev_hash: bytes
    merkle_root: bytes
    n: int
    k: int
    difficulty: int
    t_int: int


def header_bytes(height: int, prev_hash: bytes, merkle_root: bytes, n: int,
                 k: int, difficulty: int, t_int: int) -> bytes:
    """
    Serialize a block header (the nonce is appended at hashing time).

    Layout: "LHB1" | height u64 | prev_hash 32B | merkle_root 32B | N u16 |
    K u16 | D u16 | t_int i32, all big-endian.

    Raises:
        InvalidParameters:
            Hashes are not 32 bytes, or a field does not fit its width.
    """
    if len(prev_hash) != 32 or len(merkle_root) != 32:
        raise InvalidParameters("prev_hash and merkle_root must be 32 bytes")

    try:
        return struct.pack(HEADER_FORMAT, HEADER_MAGIC, height, prev_hash,
                           merkle_root, n, k, difficulty, t_int)
    except struct.error as error:
        raise InvalidParameters("cannot serialize the header: {error}".format(
            error=error))


def parse_header(data: bytes) -> HeaderFields:
    """
    Inverse of `header_bytes`.

    Raises:
        InvalidParameters:
            Wrong length or magic.
    """
    if len(data) != HEADER_SIZE:
        raise InvalidParameters("a header has {size} bytes, got {actual}"
                                .format(size=HEADER_SIZE, actual=len(data)))

    magic, *fields = struct.unpack(HEADER_FORMAT, data)

    if magic != HEADER_MAGIC:
        raise InvalidParameters("unknown header magic {magic!r}".format(
            magic=magic))

    return HeaderFields(*fields)


###############################################################################
# Encoding, oracle and thresholds


def _bits_array(bits, n: int = None) -> np.ndarray:
    bits = np.asarray(bits)

    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise ShapeMismatch("input bits", "values 0 or 1",
                            sorted(set(np.unique(bits).tolist())))

    if n is not None and bits.shape[-1] != n:
        raise ShapeMismatch("input bits", n, bits.shape[-1])

    return bits.astype(np.int64)


def encode_input(bits, n: int = None) -> np.ndarray:
    """
    Phase-shift key bits into a unit-power field: bit 0 -> +1/sqrt(N),
    bit 1 -> -1/sqrt(N).

    Works on one vector `(N,)` or a batch `(S, N)`.

    Raises:
        ShapeMismatch:
            `n` given and the last axis has another length, or a value is
            not a bit.

    Example:
        encode_input([0, 1, 0, 1]) -> [0.5, -0.5, 0.5, -0.5]
    """
    bits = _bits_array(bits, n)

    return (1 - 2 * bits) / math.sqrt(bits.shape[-1])


def oracle_matvec(block, bits) -> np.ndarray:
    """
    Exact integer product `s = Q . (1 - 2 b)`, for one vector or a batch.

    Example:
        oracle_matvec([[-3, -1, 1, 3]] * 4, [0, 1, 1, 0]) -> [0, 0, 0, 0]
    """
    block = np.asarray(block, dtype=np.int64)
    signs = 1 - 2 * _bits_array(bits, block.shape[1])

    return signs @ block.T


def physical_threshold(t_int: int, sigma_max: float, n: int) -> float:
    """
    The power threshold `t^2 / (sigma_max^2 N)` matching the grid threshold
    `t` for a normalized cascade.
    """
    return t_int ** 2 / (sigma_max ** 2 * n)


def threshold_unsigned(powers, p_th: float) -> np.ndarray:
    """
    Heaviside comparator `p > p_th`, with H(0) = 0.
    """
    return (np.asarray(powers) > p_th).astype(np.uint8)


def threshold_signed(outputs, reference: complex = 1.0) -> np.ndarray:
    """
    Interfere every output with a co-phased reference field and compare the
    two detected powers: bit 1 when `|y + r|^2 > |y - r|^2`, ties give 0.
    """
    outputs = np.asarray(outputs)
    plus = np.abs(outputs + reference) ** 2
    minus = np.abs(outputs - reference) ** 2

    return (plus > minus).astype(np.uint8)


def meets_difficulty(digest: bytes, difficulty: int) -> bool:
    """
    Whether the `difficulty` most significant bits of the digest are zero.

    Raises:
        InvalidParameters:
            Difficulty outside 0 .. 256.
    """
    if not 0 <= difficulty <= DIGEST_BITS:
        raise InvalidParameters("difficulty must be between 0 and 256")

    return int.from_bytes(digest, "big") < 1 << (DIGEST_BITS - difficulty)


###############################################################################
# Threshold selection


def _threshold_inputs(n: int, seed: bytes) -> np.ndarray:
    if n <= EXACT_THRESHOLD_PORTS:
        codes = np.arange(1 << n, dtype=np.int64)
        shifts = np.arange(n - 1, -1, -1, dtype=np.int64)

        return (codes[:, None] >> shifts) & 1

    n_bytes = THRESHOLD_DRAWS * n // 8
    stream = b"".join(sha3(seed, u64(counter))
                      for counter in range(-(-n_bytes // 32)))

    return bytes_to_bits(stream[:n_bytes]).reshape(THRESHOLD_DRAWS, n)


def output_histogram(block_matrix: BlockMatrix, seed: bytes = b"") \
        -> np.ndarray:
    """
    Counts of every |s| value over all rows of all blocks, for every input
    when N <= 16 and for 65536 inputs drawn from a SHA3 counter stream
    otherwise.

    Returns:
        Integer counts indexed by |s|.
    """
    n, k = block_matrix.n, block_matrix.k
    signs = (1 - 2 * _threshold_inputs(n, seed)).astype(float)
    counts = np.zeros(n * (k - 1) + 1, dtype=np.int64)

    for block in block_matrix.blocks:
        transposed = block.T.astype(float)

        for start in range(0, signs.shape[0], _MATMUL_ROWS):
            values = np.rint(signs[start:start + _MATMUL_ROWS] @ transposed)
            counts += np.bincount(np.abs(values).astype(np.int64).ravel(),
                                  minlength=counts.size)

    return counts


def select_threshold(block_matrix: BlockMatrix,
                     params: LightHashParams = None,
                     seed: bytes = b"") -> int:
    """
    Pick the grid midpoint `t` for which `P(|s| > t)` is closest to one half.

    Candidates have the parity opposite to the output grid; ties go to the
    smaller `t`. The result depends only on the block matrix and `seed`, so
    every validator derives the same threshold.

    Arguments:
        block_matrix:
            The derived Q.
        params:
            Optional parameters to check against the block matrix.
        seed:
            Seed of the Monte-Carlo input stream (unused when N <= 16).

    Returns:
        The integer threshold.

    Example:
        select_threshold(generate_block_matrix(prev, root, 4, 2)) -> 1
    """
    if params is not None and (params.n, params.k) != \
            (block_matrix.n, block_matrix.k):
        raise InvalidParameters("parameters do not match the block matrix")

    counts = output_histogram(block_matrix, seed)
    total = int(counts.sum())
    above = total - np.cumsum(counts)  # above[t] = #(|s| > t)
    parity = grid_parity(block_matrix.n, block_matrix.k)

    best, best_score = None, None

    for t_int in range(1 - parity, counts.size, 2):
        score = abs(2 * int(above[t_int]) - total)

        if best_score is None or score < best_score:
            best, best_score = t_int, score

    probability = above[best] / total

    if abs(probability - 0.5) > 0.1:
        logger.warning("Threshold t=%d splits outputs at P=%.3f, far from "
                       "one half", best, probability)
    else:
        logger.debug("Selected threshold t=%d (P=%.4f)", best, probability)

    return best


###############################################################################
# Photonic matrix-vector products


def photonic_operator(program: SVDProgram,
                      error_sample: ErrorSample = None) -> np.ndarray:
    """
    The normalized operator of a programmed cascade as seen by the
    detectors: the common-mode loss is calibrated out at the outputs.
    """
    matrix = program.matrix(error_sample)

    if error_sample is not None:
        _, loss = factor_common_loss(program, error_sample)
        matrix = matrix / loss[:, None]

    return matrix


def propagate(operator: np.ndarray, bits) -> np.ndarray:
    """
    Output fields `y = M . x` for one input or a batch of inputs.
    """
    return encode_input(bits, operator.shape[1]) @ operator.T


def photonic_matvec(program: SVDProgram, error_sample: Optional[ErrorSample],
                    bits, profile: ErrorProfile = None,
                    seed: int = 0) -> np.ndarray:
    """
    Detected powers `|y|^2` of one block under a static error sample, plus
    optional detection noise from `profile`.

    The wavelength is the one the error sample was drawn at.

    Raises:
        ShapeMismatch:
            The sample or the bits do not fit the program.
    """
    powers = np.abs(propagate(photonic_operator(program, error_sample),
                              bits)) ** 2

    if profile is not None and profile.detection_noise_sigma > 0:
        powers = detection_noise(powers, profile.detection_noise_sigma, seed)

    return powers


def _is_identity(permutation: Sequence[int]) -> bool:
    return all(int(value) == index for index, value in enumerate(permutation))


def copy_seed(seed: int, copy: int) -> int:
    """
    Error-sample seed of correction copy `copy`; copy 0 keeps `seed`.
    """
    return seed if copy == 0 else derive_seed(seed, "copy", copy)


def corrected_operators(program: SVDProgram, copies: int,
                        schedule: Sequence[Sequence[int]] = None,
                        profile: ErrorProfile = None, seed: int = 0,
                        wavelength: float = None) -> List[np.ndarray]:
    """
    Program R permuted copies of a cascade, each with its own independent
    error sample.

    Raises:
        InvalidParameters:
            R < 1 or the schedule does not hold R permutations.
    """
    if copies < 1:
        raise InvalidParameters("R (copies) must be at least 1")

    if schedule is None:
        schedule = cyclic_schedule(program.n_ports, copies)

    if len(schedule) != copies:
        raise InvalidParameters("the permutation schedule has {actual} "
                                "entries for R={copies}".format(
                                    actual=len(schedule), copies=copies))

    operators = []

    for copy, permutation in enumerate(schedule):
        permuted = program if _is_identity(permutation) \
            else permute_svd(program, permutation)

        if profile is None or profile.is_zero:
            sample = None
        else:
            sample = sample_errors(profile, permuted, wavelength,
                                   copy_seed(seed, copy))

        operators.append(photonic_operator(permuted, sample))

    return operators


def corrected_matvec(program: SVDProgram, copies: int,
                     schedule: Sequence[Sequence[int]] = None,
                     profile: ErrorProfile = None, bits=None, seed: int = 0,
                     wavelength: float = None) -> np.ndarray:
    """
    Average of the detected powers of R permuted copies (photocurrent
    summing), each copy with independent errors.

    Example:
        corrected_matvec(program, 4, None, ErrorProfile.scaled(0.01), bits)
    """
    operators = corrected_operators(program, copies, schedule, profile, seed,
                                    wavelength)
    total = 0.0

    for copy, operator in enumerate(operators):
        powers = np.abs(propagate(operator, bits)) ** 2

        if profile is not None and profile.detection_noise_sigma > 0:
            powers = detection_noise(powers, profile.detection_noise_sigma,
                                     derive_seed(seed, "detect", copy))

        total = total + powers

    return total / len(operators)


###############################################################################
# Backends


class OracleBackend(Backend):
    """
    Bit-exact integer arithmetic: the consensus reference.
    """
    name = "oracle"

    def evaluate(self, index: int, bits: np.ndarray) -> BlockOutput:
        values = oracle_matvec(self.block_matrix.block(index),
                               self._as_batch(bits))

        if self.params.mode is Mode.SIGNED:
            out_bits = threshold_signed(values)
        else:
            out_bits = (np.abs(values) > self.params.t_int).astype(np.uint8)

        return BlockOutput(outputs=values, powers=values ** 2, bits=out_bits)


class PhotonicBackend(Backend):
    """
    Simulated photonic hardware: every chunk is an SVD-programmed cascade
    with one static error sample, drawn once per block from `profile` at
    `wavelength`.

    Example:
        backend = PhotonicBackend(block_matrix, params,
                                  ErrorProfile.scaled(0.005), seed=3)
        lighthash_digest(header, nonce, block_matrix, params, backend)
    """
    name = "photonic"

    def __init__(self, block_matrix: BlockMatrix, params: LightHashParams,
                 profile: ErrorProfile = None, wavelength: float = None,
                 seed: int = 0,
                 layout: Union[Layout, str] = Layout.RECTANGULAR) -> None:
        super().__init__(block_matrix, params)
        self.profile = profile if profile is not None else ErrorProfile()
        self.wavelength = wavelength
        self.seed = seed
        self.layout = Layout(layout)
        self._programs: Dict[int, SVDProgram] = {}
        self._operators: Dict[int, List[np.ndarray]] = {}

    @property
    def copies(self) -> int:
        return 1

    @property
    def schedule(self) -> List[Sequence[int]]:
        return [tuple(range(self.params.n))]

    def block_seed(self, index: int) -> int:
        return derive_seed(self.seed, "block", index)

    def program(self, index: int) -> SVDProgram:
        if index not in self._programs:
            self._programs[index] = svd_program(
                self.block_matrix.block(index), self.layout)

        return self._programs[index]

    def operators(self, index: int) -> List[np.ndarray]:
        """
        Calibrated operators of every copy of chunk `index`.
        """
        if index not in self._operators:
            self._operators[index] = corrected_operators(
                self.program(index), self.copies, self.schedule,
                self.profile, self.block_seed(index), self.wavelength)

        return self._operators[index]

    def _detect(self, index: int, bits: np.ndarray, copy: int,
                powers: np.ndarray) -> np.ndarray:
        sigma = self.profile.detection_noise_sigma

        if sigma == 0:
            return powers

        noisy = np.empty_like(powers)

        for row in range(bits.shape[0]):
            key = bits_to_bytes(bits[row])
            noisy[row] = detection_noise(
                powers[row], sigma,
                derive_seed(self.seed, "detect", index, copy, key))

        return noisy

    def evaluate(self, index: int, bits: np.ndarray) -> BlockOutput:
        bits = self._as_batch(bits)
        operators = self.operators(index)
        outputs = 0.0
        powers = 0.0
        plus = 0.0
        minus = 0.0

        for copy, operator in enumerate(operators):
            fields = propagate(operator, bits)
            outputs = outputs + fields
            powers = powers + self._detect(index, bits, copy,
                                           np.abs(fields) ** 2)

            if self.params.mode is Mode.SIGNED:
                plus = plus + self._detect(index, bits, copy + len(operators),
                                           np.abs(fields + 1) ** 2)
                minus = minus + self._detect(
                    index, bits, copy + 2 * len(operators),
                    np.abs(fields - 1) ** 2)

        count = len(operators)
        outputs = outputs / count
        powers = powers / count

        if self.params.mode is Mode.SIGNED:
            out_bits = (plus > minus).astype(np.uint8)
        else:
            p_th = physical_threshold(self.params.t_int,
                                      self.program(index).sigma_max,
                                      self.params.n)
            out_bits = threshold_unsigned(powers, p_th)

        return BlockOutput(outputs=outputs, powers=powers, bits=out_bits)


class CorrectedBackend(PhotonicBackend):
    """
    Photonic hardware with R permuted copies per chunk whose detected powers
    are summed (hardware-agnostic error correction).
    """
    name = "corrected"

    def __init__(self, block_matrix: BlockMatrix, params: LightHashParams,
                 profile: ErrorProfile = None, wavelength: float = None,
                 seed: int = 0,
                 layout: Union[Layout, str] = Layout.RECTANGULAR,
                 schedule: Sequence[Sequence[int]] = None) -> None:
        super().__init__(block_matrix, params, profile, wavelength, seed,
                         layout)

        if schedule is None:
            schedule = cyclic_schedule(params.n, params.copies)

        if len(schedule) != params.copies:
            raise InvalidParameters("the permutation schedule must hold R={r} "
                                    "permutations".format(r=params.copies))

        self._schedule = [tuple(permutation) for permutation in schedule]

    @property
    def copies(self) -> int:
        return self.params.copies

    @property
    def schedule(self) -> List[Sequence[int]]:
        return self._schedule


BACKENDS = {
    backend.name: backend
    for backend in (OracleBackend, PhotonicBackend, CorrectedBackend)
}


###############################################################################
# Pipeline


def _backend_for(block_matrix: BlockMatrix, params: LightHashParams,
                 backend: Optional[Backend]) -> Backend:
    if backend is None:
        return OracleBackend(block_matrix, params)

    if backend.block_matrix is not block_matrix and \
            backend.block_matrix != block_matrix:
        raise InvalidParameters("the backend is bound to another block "
                                "matrix")

    return backend


def _check_params(block_matrix: BlockMatrix, params: LightHashParams) -> None:
    if (params.n, params.k) != (block_matrix.n, block_matrix.k):
        raise InvalidParameters("parameters do not match the block matrix")

    if params.t_int is None:
        raise InvalidParameters("a threshold t_int has to be selected "
                                "before hashing")

    check_threshold(params.t_int, params.n, params.k)


def lighthash_trace(header: bytes, nonce: int, block_matrix: BlockMatrix,
                    params: LightHashParams,
                    backend: Backend = None) -> HashTrace:
    """
    Evaluate the hash of one nonce and keep every intermediate value.

    Bit `b` of d1 (most significant bit of each byte first) feeds port
    `b mod N` of chunk `b // N`.

    Arguments:
        header:
            Serialized block header.
        nonce:
            Unsigned 64-bit nonce.
        block_matrix:
            Q derived for this header.
        params:
            Hash parameters with the selected threshold.
        backend:
            Backend bound to `block_matrix`; the integer oracle by default.

    Returns:
        The full trace of the evaluation.
    """
    _check_params(block_matrix, params)
    backend = _backend_for(block_matrix, params, backend)

    d1 = sha3(header, u64(nonce))
    bits = bytes_to_bits(d1)
    chunks = bits.reshape(params.n_blocks, params.n)

    outputs, powers, out_bits = [], [], []

    for index in range(params.n_blocks):
        result = backend.evaluate(index, chunks[index:index + 1])
        outputs.append(result.outputs[0])
        powers.append(result.powers[0])
        out_bits.append(result.bits[0])

    out_bits = np.concatenate(out_bits).astype(np.uint8)
    digest = sha3(bits_to_bytes(out_bits ^ bits))

    return HashTrace(
        d1=d1,
        inputs=encode_input(chunks),
        outputs=np.array(outputs),
        powers=np.array(powers),
        out_bits=out_bits,
        digest=digest,
    )


def lighthash_digest(header: bytes, nonce: int, block_matrix: BlockMatrix,
                     params: LightHashParams,
                     backend: Backend = None) -> bytes:
    """
    The 32-byte LightHash digest of a header and nonce.

    Example:
        lighthash_digest(header, 0, block_matrix, params).hex()
    """
    return lighthash_trace(header, nonce, block_matrix, params,
                           backend).digest


def digest_batch(header: bytes, nonces: Sequence[int],
                 block_matrix: BlockMatrix, params: LightHashParams,
                 backend: Backend = None) -> List[bytes]:
    """
    Digests of many nonces at once, every chunk evaluated for the whole
    batch in one pass.
    """
    _check_params(block_matrix, params)
    backend = _backend_for(block_matrix, params, backend)

    if len(nonces) == 0:
        return []

    d1s = [sha3(header, u64(nonce)) for nonce in nonces]
    bits = np.stack([bytes_to_bits(d1) for d1 in d1s])
    chunks = bits.reshape(len(nonces), params.n_blocks, params.n)
    out_bits = np.empty_like(chunks)

    for index in range(params.n_blocks):
        out_bits[:, index, :] = backend.evaluate(index, chunks[:, index, :]) \
            .bits

    out_bits = out_bits.reshape(len(nonces), DIGEST_BITS) ^ bits

    return [sha3(bits_to_bytes(row)) for row in out_bits]
