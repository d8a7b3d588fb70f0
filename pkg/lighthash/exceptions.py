"""
Here are defined own exceptions.

All of them derive from `LightHashError`, so a caller (mostly the CLI) may
catch the whole family at once.
"""


class LightHashError(Exception):
    """
    Base class for every error raised by the `lighthash` package.
    """


class NonUnitaryMatrix(LightHashError):
    """
    When a matrix handed to the mesh decomposition is not unitary.
    """
    __slots__ = ("deviation", "tolerance")

    def __init__(self, deviation: float, tolerance: float) -> None:
        """
        Initialize an object of class `NonUnitaryMatrix`.

        Arguments:
            deviation:
                Measured max-norm of `U^H U - I`.
            tolerance:
                The largest accepted deviation.
        """
        super().__init__()
        self.deviation = deviation
        self.tolerance = tolerance

    def __str__(self) -> str:
        return (
            "The matrix is not unitary: max |U^H U - I| = {deviation:.3e} "
            "exceeds {tolerance:.1e}."
        ).format(deviation=self.deviation, tolerance=self.tolerance)


class DecompositionError(LightHashError):
    """
    When an integer block cannot be programmed (zero block, SVD failure).
    """
    __slots__ = ("reason",)

    def __init__(self, reason: str) -> None:
        super().__init__()
        self.reason = reason

    def __str__(self) -> str:
        return "Cannot program the block: {reason}".format(reason=self.reason)


class InvalidPermutation(LightHashError):
    """
    When a port permutation is not a bijection on `0 .. N-1`.
    """
    __slots__ = ("permutation", "n_ports")

    def __init__(self, permutation, n_ports: int) -> None:
        super().__init__()
        self.permutation = tuple(permutation)
        self.n_ports = n_ports

    def __str__(self) -> str:
        return "{permutation} is not a permutation of {n} ports.".format(
            permutation=self.permutation, n=self.n_ports)


class ShapeMismatch(LightHashError):
    """
    When arrays that are supposed to describe the same mesh / block disagree
    in their sizes.
    """
    __slots__ = ("what", "expected", "actual")

    def __init__(self, what: str, expected, actual) -> None:
        super().__init__()
        self.what = what
        self.expected = expected
        self.actual = actual

    def __str__(self) -> str:
        return "Shape mismatch for {what}: expected {expected}, got " \
            "{actual}.".format(what=self.what, expected=self.expected,
                               actual=self.actual)


class InvalidParameters(LightHashError):
    """
    When LightHash parameters (N, K, t_int, R, S, D) break their rules.
    """
    __slots__ = ("message",)

    def __init__(self, message: str) -> None:
        super().__init__()
        self.message = message

    def __str__(self) -> str:
        return self.message


class InvalidProfile(InvalidParameters):
    """
    When an error profile has a negative sigma / loss or a non-positive
    centre wavelength.
    """


class InvalidConfig(InvalidParameters):
    """
    When a configuration file cannot be parsed or contains unknown keys.
    """


class EmptyTransactions(LightHashError):
    """
    When a merkle tree is requested for no transactions at all.
    """

    def __str__(self) -> str:
        return "Cannot build a merkle tree without any transaction."


class ChainStoreError(LightHashError):
    """
    When the chain directory is empty, or a block file is unreadable.

    `index` is the position of the bad file in height order, `None` when
    no single block is to blame.
    """
    __slots__ = ("path", "reason", "index")

    def __init__(self, path: str, reason: str, index: int = None) -> None:
        super().__init__()
        self.path = path
        self.reason = reason
        self.index = index

    def __str__(self) -> str:
        return "{path}: {reason}".format(path=self.path, reason=self.reason)


class DegenerateFit(LightHashError):
    """
    When the dispersion fit has a zero centre error rate, so the relative
    dispersion is undefined.
    """

    def __str__(self) -> str:
        return (
            "The error rate at the centre wavelength is zero; the relative "
            "dispersion cannot be fitted. Increase the error sigmas or the "
            "number of trials."
        )
