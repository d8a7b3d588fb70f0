"""
Here is defined a toy blockchain built on LightHash: merkle trees,
deterministic derivation of the block matrix Q, the mining loop, block and
chain validation, on-disk persistence and the mining-pool share model.
"""

import json
import logging
import multiprocessing
import os
import os.path
import re
import tempfile
import time

from dataclasses import dataclass, field
from typing import (
    Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union
)

import numpy as np

from lighthash.data_types import BlockMatrix, LightHashParams
from lighthash.digest import (
    OracleBackend, digest_batch, header_bytes, lighthash_digest,
    meets_difficulty, select_threshold
)
from lighthash.exceptions import (
    ChainStoreError, EmptyTransactions, InvalidParameters
)
from lighthash.helpers import U64_MASK, sha3, u64
from lighthash.models import Backend

logger = logging.getLogger(__name__)

ZERO_HASH = bytes(32)
DEFAULT_DIFFICULTY = 12
BLOCK_FILE_REGEX = re.compile(r"^(\d+)-([0-9a-f]{64})\.json$")

BLOCK_KEYS = ("height", "prev_hash", "merkle_root", "n", "k", "difficulty",
              "t_int", "nonce", "hash", "transactions")

# Reported for a block file that cannot be read back.
FORMAT_CHECK = "format"

CHECKS = ("linkage", "parameters", "merkle_root", "difficulty_schedule",
          "threshold", "hash", "difficulty")

BackendFactory = Callable[[BlockMatrix, LightHashParams], Backend]


###############################################################################
# Merkle tree and block matrix


def merkle_root(transactions: Sequence[bytes]) -> bytes:
    """
    Root of the merkle tree over the transactions.

    Leaves are `SHA3(0x00 || tx)`, inner nodes `SHA3(0x01 || left ||
    right)`; a level with an odd count duplicates its last node.

    Raises:
        EmptyTransactions:
            No transaction at all.

    Example:
        merkle_root([b"tx"]) == sha3(b"\\x00", b"tx")
    """
    if not transactions:
        raise EmptyTransactions

    level = [sha3(b"\x00", bytes(transaction))
             for transaction in transactions]

    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])

        level = [sha3(b"\x01", level[index], level[index + 1])
                 for index in range(0, len(level), 2)]

    return level[0]


def generate_block_matrix(prev_hash: bytes, merkle_root: bytes, n: int,
                          k: int) -> BlockMatrix:
    """
    Derive the block-diagonal matrix Q from the block seeds.

    Entry `(m, i, j)` uses counter `n' = m N^2 + i N + j`: `u` is the first
    8 bytes (big-endian) of `SHA3("LHQ1" || prev_hash || merkle_root ||
    u64(n'))`, `q = 1 + u mod K` and the entry is `2q - K - 1`.

    Raises:
        InvalidParameters:
            N is not a power of two dividing 256, or K < 2.

    Example:
        generate_block_matrix(bytes(32), root, 8, 4).block(0)
    """
    LightHashParams(n=n, k=k)

    prefix = b"LHQ1" + bytes(prev_hash) + bytes(merkle_root)
    count = 256 * n
    entries = np.empty(count, dtype=np.int64)

    for counter in range(count):
        u = int.from_bytes(sha3(prefix, u64(counter))[:8], "big")
        entries[counter] = 2 * (1 + u % k) - k - 1

    return BlockMatrix(n=n, k=k, blocks=entries.reshape(256 // n, n, n),
                       prev_hash=bytes(prev_hash),
                       merkle_root=bytes(merkle_root))


def threshold_seed(root: bytes) -> bytes:
    return b"LHT1" + root


###############################################################################
# Blocks


@dataclass(frozen=True)
class DifficultySchedule:
    """
    Difficulty as a function of height: `default`, overridden from every
    height in `steps` onwards.

    Example:
        DifficultySchedule(8, {100: 12})(150) -> 12
    """
    default: int = DEFAULT_DIFFICULTY
    steps: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        steps = {int(height): int(value)
                 for height, value in dict(self.steps).items()}

        for value in [self.default, *steps.values()]:
            if not 0 <= value <= 256:
                raise InvalidParameters("difficulty must be between 0 and "
                                        "256, got {}".format(value))

        object.__setattr__(self, "steps", steps)

    def __call__(self, height: int) -> int:
        difficulty = self.default

        for start in sorted(self.steps):
            if height >= start:
                difficulty = self.steps[start]

        return difficulty

    def to_dict(self) -> Dict[str, Any]:
        return {"default": self.default,
                "steps": {str(height): value
                          for height, value in sorted(self.steps.items())}}


def difficulty_schedule(height: int,
                        schedule: DifficultySchedule = None) -> int:
    """
    The difficulty D a block at `height` has to meet.
    """
    return (schedule or DifficultySchedule())(height)


@dataclass(frozen=True)
class Block:
    """
    A mined block.

    Attributes:
        height (int):
            Position in the chain, 0 for genesis.
        prev_hash, merkle_root, hash (bytes):
            32-byte hashes.
        difficulty (int):
            Required number of leading zero bits.
        n, k, t_int (int):
            Hash parameters fixed by the header.
        nonce (int):
            Winning u64 nonce.
        transactions (Tuple[bytes, ...]):
            Opaque transaction payloads.
    """
    height: int
    prev_hash: bytes
    merkle_root: bytes
    difficulty: int
    n: int
    k: int
    t_int: int
    nonce: int
    hash: bytes
    transactions: Tuple[bytes, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "transactions",
                           tuple(bytes(tx) for tx in self.transactions))

    @property
    def header(self) -> bytes:
        return header_bytes(self.height, self.prev_hash, self.merkle_root,
                            self.n, self.k, self.difficulty, self.t_int)

    @property
    def params(self) -> LightHashParams:
        return LightHashParams(n=self.n, k=self.k, t_int=self.t_int)

    @property
    def file_name(self) -> str:
        return "{height}-{hash}.json".format(height=self.height,
                                             hash=self.hash.hex())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "height": self.height,
            "prev_hash": self.prev_hash.hex(),
            "merkle_root": self.merkle_root.hex(),
            "n": self.n,
            "k": self.k,
            "difficulty": self.difficulty,
            "t_int": self.t_int,
            "nonce": self.nonce,
            "hash": self.hash.hex(),
            "transactions": [tx.hex() for tx in self.transactions],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Block":
        """
        Raises:
            InvalidParameters:
                Missing or unknown keys, or malformed values.
        """
        if set(data) != set(BLOCK_KEYS):
            raise InvalidParameters("a block needs exactly the keys {keys}"
                                    .format(keys=", ".join(BLOCK_KEYS)))

        try:
            integers = {name: _integer(data[name]) for name in
                        ("height", "n", "k", "difficulty", "t_int", "nonce")}
            hashes = {name: bytes.fromhex(data[name]) for name in
                      ("prev_hash", "merkle_root", "hash")}
            transactions = tuple(bytes.fromhex(tx)
                                 for tx in data["transactions"])
        except (TypeError, ValueError) as error:
            raise InvalidParameters("malformed block: {error}".format(
                error=error))

        return cls(transactions=transactions, **integers, **hashes)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Block":
        try:
            data = json.loads(text)
        except ValueError as error:
            raise InvalidParameters("malformed block JSON: {error}".format(
                error=error))

        if not isinstance(data, dict):
            raise InvalidParameters("a block must be a JSON object")

        return cls.from_dict(data)


def _integer(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError("expected an integer, got {!r}".format(value))

    return value


@dataclass(frozen=True)
class Violation:
    """
    The first failed validation check of a block.

    Attributes:
        check (str):
            One of `CHECKS`.
        message (str):
            What exactly is wrong.
        index (Optional[int]):
            Position of the block in a validated chain.
    """
    check: str
    message: str
    index: Optional[int] = None

    def __str__(self) -> str:
        where = "" if self.index is None else "block {}: ".format(self.index)

        return "{where}{check}: {message}".format(where=where,
                                                  check=self.check,
                                                  message=self.message)


@dataclass(frozen=True)
class MiningResult:
    """
    Outcome of `mine_block`; `block` is `None` when the attempts ran out.
    """
    block: Optional[Block]
    attempts: int
    elapsed: float

    @property
    def exhausted(self) -> bool:
        return self.block is None


###############################################################################
# Mining


def start_nonce(root: bytes, seed: int) -> int:
    return int.from_bytes(sha3(b"LHN1", root, u64(seed))[:8], "big")


def _search_window(task) -> Optional[Tuple[int, bytes]]:
    """
    Evaluate one window of nonces and return the first winner (offset
    inside the window and digest) or `None`.
    """
    header, nonces, block_matrix, params, backend, difficulty = task
    digests = digest_batch(header, nonces, block_matrix, params, backend)

    for offset, digest in enumerate(digests):
        if meets_difficulty(digest, difficulty):
            return offset, digest

    return None


def _windows(first: int, count: Optional[int], size: int):
    offset = 0

    while count is None or offset < count:
        width = size if count is None else min(size, count - offset)
        yield [(first + offset + index) & U64_MASK for index in range(width)]
        offset += width


def mine_block(tip: Optional[Block], transactions: Sequence[bytes],
               params: LightHashParams,
               backend_factory: BackendFactory = None,
               max_attempts: int = None,
               difficulty: Union[int, DifficultySchedule] = None,
               seed: int = 0, jobs: int = 1) -> MiningResult:
    """
    Assemble the next block and search nonces until its digest meets the
    difficulty.

    Q and t_int are derived once per block (the device would be programmed
    once here); nonces then run from a seeded start in windows of
    `params.batch`. With `jobs > 1` consecutive windows are evaluated in
    parallel but the earliest winner is always taken, so the result does
    not depend on `jobs`.

    Arguments:
        tip:
            Current chain tip, `None` to mine the genesis block.
        transactions:
            Block payload, at least one transaction.
        params:
            N, K, mode and batch size; the threshold is selected here.
        backend_factory:
            Builds the backend for the block matrix; the integer oracle by
            default.
        max_attempts:
            Give up after this many nonces (`None` searches forever).
        difficulty:
            Constant D or a schedule by height; `DEFAULT_DIFFICULTY` by
            default.
        seed:
            Seeds the start nonce.
        jobs:
            Worker processes.

    Returns:
        The mining result with the attempt count and elapsed seconds.

    Raises:
        EmptyTransactions:
            No transaction given.
    """
    if difficulty is None:
        difficulty = DifficultySchedule()
    elif isinstance(difficulty, int):
        difficulty = DifficultySchedule(default=difficulty)

    height = 0 if tip is None else tip.height + 1
    prev_hash = ZERO_HASH if tip is None else tip.hash
    target = difficulty(height)

    started = time.perf_counter()
    root = merkle_root(transactions)
    block_matrix = generate_block_matrix(prev_hash, root, params.n, params.k)
    t_int = select_threshold(block_matrix, params, threshold_seed(root))
    params = params.with_threshold(t_int)
    header = header_bytes(height, prev_hash, root, params.n, params.k, target,
                          t_int)
    factory = backend_factory or OracleBackend
    backend = factory(block_matrix, params)

    logger.debug("Mining height %d with D=%d, t_int=%d on %s", height, target,
                 t_int, backend)

    first = start_nonce(root, seed)
    windows = _windows(first, max_attempts, params.batch)
    attempts = 0
    winner = None

    pool = multiprocessing.Pool(jobs) if jobs > 1 else None

    try:
        while winner is None:
            round_windows = [window for _, window in
                             zip(range(max(1, jobs)), windows)]

            if not round_windows:
                break

            tasks = [(header, window, block_matrix, params, backend, target)
                     for window in round_windows]
            results = pool.map(_search_window, tasks) if pool \
                else [_search_window(task) for task in tasks]

            for window, result in zip(round_windows, results):
                if result is not None:
                    offset, digest = result
                    attempts += offset + 1
                    winner = (window[offset], digest)
                    break

                attempts += len(window)
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    elapsed = time.perf_counter() - started

    if winner is None:
        logger.info("Height %d exhausted after %d attempts", height, attempts)

        return MiningResult(block=None, attempts=attempts, elapsed=elapsed)

    nonce, digest = winner
    block = Block(height=height, prev_hash=prev_hash, merkle_root=root,
                  difficulty=target, n=params.n, k=params.k, t_int=t_int,
                  nonce=nonce, hash=digest, transactions=tuple(transactions))

    logger.info("Mined height %d after %d attempts (%.3f s)", height,
                attempts, elapsed)

    return MiningResult(block=block, attempts=attempts, elapsed=elapsed)


###############################################################################
# Validation


def validate_block(block: Block, prev_block: Optional[Block] = None,
                   schedule: DifficultySchedule = None) -> Optional[Violation]:
    """
    Re-derive everything a block commits to and return the first failed
    check, or `None` when the block is valid.

    Checks run in the order of `CHECKS`; the difficulty schedule is only
    checked when one is given. The digest is always recomputed with the
    integer oracle.
    """
    if prev_block is None:
        if block.height != 0 or block.prev_hash != ZERO_HASH:
            return Violation("linkage", "a genesis block needs height 0 and "
                                        "an all-zero prev_hash")
    elif block.prev_hash != prev_block.hash:
        return Violation("linkage", "prev_hash does not point to block {}"
                         .format(prev_block.hash.hex()))
    elif block.height != prev_block.height + 1:
        return Violation("linkage", "height {} does not follow {}".format(
            block.height, prev_block.height))

    try:
        params = block.params

        if not 0 <= block.difficulty <= 256:
            raise InvalidParameters("difficulty out of range")

        if not 0 <= block.nonce <= U64_MASK:
            raise InvalidParameters("nonce is not a u64")
    except InvalidParameters as error:
        return Violation("parameters", str(error))

    if not block.transactions:
        return Violation("merkle_root", "the block has no transactions")

    if merkle_root(block.transactions) != block.merkle_root:
        return Violation("merkle_root", "merkle root does not match the "
                                        "transactions")

    if schedule is not None and block.difficulty != schedule(block.height):
        return Violation("difficulty_schedule",
                         "difficulty {} differs from the scheduled {}".format(
                             block.difficulty, schedule(block.height)))

    block_matrix = generate_block_matrix(block.prev_hash, block.merkle_root,
                                         block.n, block.k)
    expected = select_threshold(block_matrix, params,
                                threshold_seed(block.merkle_root))

    if block.t_int != expected:
        return Violation("threshold", "t_int {} differs from the derived {}"
                         .format(block.t_int, expected))

    digest = lighthash_digest(block.header, block.nonce, block_matrix, params)

    if digest != block.hash:
        return Violation("hash", "stored hash differs from the recomputed "
                                 "{}".format(digest.hex()))

    if not meets_difficulty(block.hash, block.difficulty):
        return Violation("difficulty", "hash does not have {} leading zero "
                                       "bits".format(block.difficulty))

    return None


def validate_chain(blocks: Sequence[Block],
                   schedule: DifficultySchedule = None) -> Optional[Violation]:
    """
    Validate blocks from genesis onwards and report the first failure with
    its index.
    """
    previous = None

    for index, block in enumerate(blocks):
        violation = validate_block(block, previous, schedule)

        if violation is not None:
            return Violation(violation.check, violation.message, index)

        previous = block

    return None


###############################################################################
# Persistence


class ChainStore:
    """
    A directory with one JSON document per block, named
    `<height>-<hexhash>.json`.

    Appending writes a temporary file first and renames it into place.
    """

    def __init__(self, directory: str) -> None:
        self.directory = directory

    def _block_files(self) -> List[str]:
        try:
            names = os.listdir(self.directory)
        except FileNotFoundError:
            return []

        return [name for name in names if BLOCK_FILE_REGEX.match(name)]

    def _read(self, name: str, index: int = None) -> Block:
        path = os.path.join(self.directory, name)

        try:
            with open(path) as file:
                return Block.from_json(file.read())
        except OSError as error:
            raise ChainStoreError(path, error.strerror or str(error), index)
        except InvalidParameters as error:
            raise ChainStoreError(path, str(error), index)

    def blocks(self) -> List[Block]:
        """
        All stored blocks ordered by height.

        Raises:
            ChainStoreError:
                A block file is unreadable or malformed.
        """
        names = sorted(self._block_files(), key=lambda name: int(
            BLOCK_FILE_REGEX.match(name).group(1)))
        blocks = [self._read(name, index) for index, name in enumerate(names)]

        return sorted(blocks, key=lambda block: block.height)

    def load(self) -> List[Block]:
        """
        Like `blocks`, but an empty chain is an error.
        """
        blocks = self.blocks()

        if not blocks:
            raise ChainStoreError(self.directory, "no blocks found")

        return blocks

    def tip(self) -> Optional[Block]:
        blocks = self.blocks()

        return blocks[-1] if blocks else None

    def append(self, block: Block) -> str:
        """
        Store a block atomically.

        Returns:
            Path of the written file.
        """
        os.makedirs(self.directory, exist_ok=True)
        path = os.path.join(self.directory, block.file_name)

        with tempfile.NamedTemporaryFile("w", dir=self.directory,
                                         suffix=".tmp", delete=False) as file:
            file.write(block.to_json())
            temporary = file.name

        os.replace(temporary, path)
        logger.debug("Stored block %d at %s", block.height, path)

        return path


###############################################################################
# Mining pool


@dataclass(frozen=True)
class PoolModel:
    """
    A pool miner submitting low-difficulty shares.

    Attributes:
        share_difficulty (int):
            Leading zero bits B_share of a share.
        hash_rate (float):
            Hashes per second.
        hash_error_rate (float):
            Fraction of wrong digests of the miner's hardware.
        difficulty (Optional[int]):
            Block difficulty D, which must not be below B_share.
    """
    share_difficulty: int
    hash_rate: float
    hash_error_rate: float = 0.0
    difficulty: Optional[int] = None

    def __post_init__(self) -> None:
        if not 0 <= self.share_difficulty <= 256:
            raise InvalidParameters("share difficulty must be in 0 .. 256")

        if self.hash_rate < 0:
            raise InvalidParameters("hash rate must not be negative")

        if not 0 <= self.hash_error_rate <= 1:
            raise InvalidParameters("hash error rate must be in [0, 1]")

        if self.difficulty is not None and \
                self.share_difficulty > self.difficulty:
            raise InvalidParameters("share difficulty exceeds the block "
                                    "difficulty")


def expected_share_rate(pool: PoolModel, duration: float) -> float:
    """
    Expected number of accepted shares over `duration` seconds; a wrong
    digest is rejected, so the miner loses exactly the hash-error fraction.

    Example:
        expected_share_rate(PoolModel(16, 1e6, 0.01), 60) -> 906.37...
    """
    return pool.hash_rate * duration * 2.0 ** -pool.share_difficulty \
        * (1 - pool.hash_error_rate)


def simulate_share_submissions(pool: PoolModel, attempts: int,
                               seed: int = 0) -> int:
    """
    Analytic Monte-Carlo count of accepted shares over `attempts` hashes:
    every digest is modelled as uniformly random, a digest meeting the
    share difficulty is corrupted by the hardware with probability
    `hash_error_rate` and then rejected by the pool. `tally_hardware_shares`
    counts the same on digests of a real backend.

    Raises:
        InvalidParameters:
            Share difficulty above 64 bits.
    """
    if pool.share_difficulty > 64:
        raise InvalidParameters("simulation supports share difficulty up to "
                                "64 bits")

    rng = np.random.default_rng(seed)
    accepted = 0
    remaining = attempts

    while remaining > 0:
        size = min(remaining, 1 << 20)
        leading = rng.integers(0, np.iinfo(np.uint64).max, size=size,
                               dtype=np.uint64, endpoint=True)

        if pool.share_difficulty == 0:
            shares = np.ones(size, dtype=bool)
        else:
            shares = (leading >> np.uint64(64 - pool.share_difficulty)) == 0

        wrong = rng.random(size) < pool.hash_error_rate
        accepted += int(np.count_nonzero(shares & ~wrong))
        remaining -= size

    return accepted


@dataclass(frozen=True)
class ShareTally:
    """
    Shares of a miner whose digests come from real (simulated) hardware.

    Attributes:
        attempts (int):
            Nonces evaluated.
        submitted (int):
            Hardware digests meeting the share difficulty.
        accepted (int):
            Submitted shares the pool confirms with the integer oracle.
        wrong_digests (int):
            Nonces whose hardware digest differs from the oracle's.
    """
    attempts: int
    submitted: int
    accepted: int
    wrong_digests: int

    @property
    def hash_error_rate(self) -> float:
        return self.wrong_digests / self.attempts if self.attempts else 0.0


def tally_hardware_shares(pool: PoolModel, header: bytes,
                          block_matrix: BlockMatrix,
                          params: LightHashParams, backend: Backend,
                          attempts: int, first_nonce: int = 0) -> ShareTally:
    """
    Run `attempts` consecutive nonces through `backend` and let the pool
    check every submitted share against the oracle digest.

    The pool model contributes only its share difficulty; the error rate is
    whatever the backend's hardware produces.

    Example:
        tally_hardware_shares(PoolModel(4, 1.0), header, block_matrix,
                              params, PhotonicBackend(...), 1000)
    """
    oracle = OracleBackend(block_matrix, params)
    tally = dict(submitted=0, accepted=0, wrong_digests=0)

    for nonces in _windows(first_nonce, attempts, params.batch):
        hardware = digest_batch(header, nonces, block_matrix, params, backend)
        truth = digest_batch(header, nonces, block_matrix, params, oracle)

        for digest, expected in zip(hardware, truth):
            share = meets_difficulty(digest, pool.share_difficulty)
            tally["submitted"] += share
            tally["accepted"] += share and digest == expected
            tally["wrong_digests"] += digest != expected

    logger.debug("%d of %d shares accepted over %d nonces",
                 tally["accepted"], tally["submitted"], attempts)

    return ShareTally(attempts=attempts, **tally)
