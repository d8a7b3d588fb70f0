"""
Here are defined base classes.
"""

import abc
import logging

import numpy as np

from lighthash.data_types import BlockMatrix, BlockOutput, LightHashParams
from lighthash.exceptions import InvalidParameters, ShapeMismatch

logger = logging.getLogger(__name__)


class Backend(abc.ABC):
    """
    Backend is the lowest class of every matrix-vector engine of the hash.

    A backend is bound to one block matrix (one block header): everything
    that has to happen once per block, like programming meshes or drawing
    the static device errors, happens in the constructor or lazily on first
    use of a chunk.
    """
    name = "abstract"

    def __init__(self, block_matrix: BlockMatrix,
                 params: LightHashParams) -> None:
        """
        Initialize a backend.

        Arguments:
            block_matrix:
                The derived matrix Q of the block.
            params:
                Hash parameters, with a selected threshold.

        Raises:
            InvalidParameters:
                Parameters disagree with the block matrix or no threshold
                is set.
        """
        if (params.n, params.k) != (block_matrix.n, block_matrix.k):
            raise InvalidParameters(
                "parameters N={n}, K={k} do not match the block matrix "
                "N={bn}, K={bk}".format(n=params.n, k=params.k,
                                        bn=block_matrix.n, bk=block_matrix.k))

        if params.t_int is None:
            raise InvalidParameters("a threshold t_int has to be selected "
                                    "before hashing")

        self.block_matrix = block_matrix
        self.params = params

    @abc.abstractmethod
    def evaluate(self, index: int, bits: np.ndarray) -> BlockOutput:
        """
        Abstract method evaluating chunk `index` for a batch of inputs.

        Arguments:
            index:
                Block index m.
            bits:
                Input bits of shape `(S, N)`.
        """
        pass

    def _as_batch(self, bits) -> np.ndarray:
        bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))

        if bits.shape[1] != self.params.n:
            raise ShapeMismatch("input bits", self.params.n, bits.shape[1])

        return bits

    def block_powers(self, index: int, bits) -> np.ndarray:
        """
        Detected powers of one chunk for one input vector.
        """
        return self.evaluate(index, self._as_batch(bits)).powers[0]

    def block_bits(self, index: int, bits) -> np.ndarray:
        """
        Output bits of one chunk for one input vector.
        """
        return self.evaluate(index, self._as_batch(bits)).bits[0]

    def __repr__(self) -> str:
        return "{cls}(n={n}, k={k}, t_int={t}, mode={mode})".format(
            cls=type(self).__name__, n=self.params.n, k=self.params.k,
            t=self.params.t_int, mode=self.params.mode.value)
