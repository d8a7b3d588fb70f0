"""
Here are defined the linear-algebra building blocks of a programmable MZI
mesh: node transfer matrices, unitary decomposition into rectangular or
triangular meshes, reconstruction with or without errors, SVD programming of
integer blocks and common-loss factoring.

Node convention:

    T(theta, phi) = i * [[e^(i phi) sin(theta/2),  cos(theta/2)],
                         [e^(i phi) cos(theta/2), -sin(theta/2)]]

acts on the two neighbouring ports `(row, row + 1)`.
"""

import enum
import logging
import math

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from scipy.stats import unitary_group

from lighthash.error_model import ErrorSample, NodeError
from lighthash.exceptions import (
    DecompositionError, InvalidPermutation, InvalidProfile, NonUnitaryMatrix,
    ShapeMismatch
)

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
UNITARY_TOLERANCE = 1e-8

# External phase of an attenuator node, chosen so that i * e^(i phi) = 1.
ATTENUATOR_PHI = 1.5 * math.pi


class Layout(str, enum.Enum):
    RECTANGULAR = "rectangular"
    TRIANGULAR = "triangular"


class NodeRole(str, enum.Enum):
    UNITARY = "unitary-internal"
    ATTENUATOR = "singular-value-attenuator"


@dataclass(frozen=True)
class MZINode:
    """
    One programmed MZI.

    Attributes:
        theta, phi (float):
            Internal and external phase, reduced to [0, 2 pi).
        row (int):
            Port index of the upper arm.
        column (int):
            Layer index inside its mesh.
        role (NodeRole):
            Whether the node belongs to a unitary mesh or attenuates one
            singular value.
    """
    theta: float
    phi: float
    row: int
    column: int
    role: NodeRole = NodeRole.UNITARY

    def __post_init__(self) -> None:
        for name in ("theta", "phi"):
            value = float(getattr(self, name))

            if not math.isfinite(value):
                raise ValueError("{name} must be finite".format(name=name))

            object.__setattr__(self, name, value % TWO_PI)


def mzi_transfer(theta: float, phi: float) -> np.ndarray:
    """
    Ideal 2x2 transfer matrix of one node.

    Example:
        mzi_transfer(0, 0) -> i * [[0, 1], [1, 0]]  # cross state
    """
    return _ideal_stack(np.array([theta], dtype=float),
                        np.array([phi], dtype=float))[0]


def mzi_transfer_noisy(theta: float, phi: float,
                       node_error: NodeError) -> np.ndarray:
    """
    Transfer matrix of one node built from its physical parts: two imperfect
    50:50 couplers and two phase-shifter stages, each a lossy phase shifter
    on the upper arm beside a matched arm with the common-mode loss.

    With all errors zero the result is `e^(i theta/2) * mzi_transfer(theta,
    phi)`, identical up to the global phase.

    Arguments:
        theta, phi:
            The programmed phases.
        node_error:
            Deviations of this node.

    Raises:
        InvalidProfile:
            A negative loss.
    """
    if min(node_error.loss_theta_db, node_error.loss_phi_db,
           node_error.common_loss_db) < 0:
        raise InvalidProfile("phase-shifter loss must not be negative")

    def one(value: float) -> np.ndarray:
        return np.array([value], dtype=float)

    return _noisy_stack(
        one(theta), one(phi),
        one(node_error.delta_theta), one(node_error.delta_phi),
        one(node_error.delta_l), one(node_error.delta_r),
        _db_to_amplitude(one(node_error.loss_theta_db)),
        _db_to_amplitude(one(node_error.loss_phi_db)),
        _db_to_amplitude(node_error.common_loss_db),
    )[0]


def _db_to_amplitude(loss_db):
    return 10.0 ** (-np.asarray(loss_db, dtype=float) / 20.0)


def _ideal_stack(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    s = np.sin(theta / 2)
    c = np.cos(theta / 2)
    e = np.exp(1j * phi)

    stack = np.empty((theta.size, 2, 2), dtype=complex)
    stack[:, 0, 0] = 1j * e * s
    stack[:, 0, 1] = 1j * c
    stack[:, 1, 0] = 1j * e * c
    stack[:, 1, 1] = -1j * s

    return stack


def _coupler_stack(delta: np.ndarray) -> np.ndarray:
    c = np.cos(np.pi / 4 + delta)
    s = np.sin(np.pi / 4 + delta)

    stack = np.empty((delta.size, 2, 2), dtype=complex)
    stack[:, 0, 0] = c
    stack[:, 0, 1] = 1j * s
    stack[:, 1, 0] = 1j * s
    stack[:, 1, 1] = c

    return stack


def _shifter_stack(phase: np.ndarray, amplitude: np.ndarray,
                   matched=1.0) -> np.ndarray:
    stack = np.zeros((phase.size, 2, 2), dtype=complex)
    stack[:, 0, 0] = amplitude * np.exp(1j * phase)
    stack[:, 1, 1] = matched

    return stack


def _noisy_stack(theta, phi, delta_theta, delta_phi, delta_l, delta_r,
                 amplitude_theta, amplitude_phi, matched=1.0) -> np.ndarray:
    """
    Vectorized `B_r . P(theta) . B_l . P(phi)` over many nodes; `matched`
    is the field amplitude of the lower arm of both stages.
    """
    return (_coupler_stack(delta_r)
            @ _shifter_stack(theta + delta_theta, amplitude_theta, matched)
            @ _coupler_stack(delta_l)
            @ _shifter_stack(phi + delta_phi, amplitude_phi, matched))


def _sample_stack(theta: np.ndarray, phi: np.ndarray,
                  sample: ErrorSample) -> np.ndarray:
    """
    Node matrices under an error sample, with the nominal global phase
    `e^(i theta/2)` of the physical node removed.
    """
    stack = _noisy_stack(theta, phi, sample.delta_theta, sample.delta_phi,
                         sample.delta_l, sample.delta_r,
                         _db_to_amplitude(sample.loss_theta_db),
                         _db_to_amplitude(sample.loss_phi_db),
                         _db_to_amplitude(sample.common_loss_db))

    return stack * np.exp(-0.5j * theta)[:, None, None]


def layer_amplitude(common_loss_db: float) -> float:
    """
    Field amplitude left after one mesh layer with common-mode loss `l0` dB
    on each of its two phase-shifter stages.
    """
    return 10.0 ** (-2.0 * common_loss_db / 20.0)


@dataclass(frozen=True)
class MeshProgram:
    """
    Phases of a whole unitary mesh.

    Attributes:
        n_ports (int):
            Number of waveguides.
        nodes (Tuple[MZINode, ...]):
            Nodes in propagation order, every one carrying its layer.
        output_phases (Tuple[float, ...]):
            Phase screen applied at the output ports.
        layout (Layout):
            Rectangular or triangular arrangement.
    """
    n_ports: int
    nodes: Tuple[MZINode, ...]
    output_phases: Tuple[float, ...]
    layout: Layout = Layout.RECTANGULAR

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "output_phases",
                           tuple(float(phase) for phase in self.output_phases))
        object.__setattr__(self, "layout", Layout(self.layout))

        if self.n_ports < 1:
            raise ShapeMismatch("mesh", "at least one port", self.n_ports)

        if len(self.output_phases) != self.n_ports:
            raise ShapeMismatch("output phases", self.n_ports,
                                len(self.output_phases))

        occupied = set()

        for node in self.nodes:
            if not 0 <= node.row < self.n_ports - 1:
                raise ShapeMismatch("node row", "0 .. {}".format(
                    self.n_ports - 2), node.row)

            for port in (node.row, node.row + 1):
                if (node.column, port) in occupied:
                    raise ShapeMismatch(
                        "mesh layer {}".format(node.column),
                        "non-overlapping nodes", "port {} used twice".format(
                            port))

                occupied.add((node.column, port))

    @cached_property
    def _arrays(self):
        thetas = np.array([node.theta for node in self.nodes], dtype=float)
        phis = np.array([node.phi for node in self.nodes], dtype=float)
        rows = np.array([node.row for node in self.nodes], dtype=int)
        columns = np.array([node.column for node in self.nodes], dtype=int)
        layers = [np.flatnonzero(columns == column)
                  for column in range(self.n_layers)]

        return thetas, phis, rows, layers

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_layers(self) -> int:
        if not self.nodes:
            return 0

        return max(node.column for node in self.nodes) + 1

    def transfer_matrix(self, error_sample: ErrorSample = None) \
            -> np.ndarray:
        return reconstruct(self, error_sample)


def _apply_left(matrix: np.ndarray, row: int, node: np.ndarray) -> None:
    matrix[[row, row + 1], :] = node @ matrix[[row, row + 1], :]


def _apply_right_dagger(matrix: np.ndarray, column: int,
                        node: np.ndarray) -> None:
    pair = [column, column + 1]
    matrix[:, pair] = matrix[:, pair] @ node.conj().T


def _null_from_left(upper: complex, lower: complex) -> Tuple[float, float]:
    """
    Phases of a node which, applied to rows (m, m + 1), zeroes the entry
    of row m + 1 given the column entries `upper` and `lower`.
    """
    theta = 2 * math.atan2(abs(upper), abs(lower))
    phi = np.angle(lower) - np.angle(upper)

    return theta, float(phi) % TWO_PI


def _null_from_right(left: complex, right: complex) -> Tuple[float, float]:
    """
    Phases of a node whose inverse, applied to columns (m, m + 1), zeroes
    the entry of column m given the row entries `left` and `right`.
    """
    theta = 2 * math.atan2(abs(right), abs(left))
    phi = np.angle(left) - np.angle(right) - math.pi

    return theta, float(phi) % TWO_PI


def _rectangular(matrix: np.ndarray):
    n = matrix.shape[0]
    right_ops = []
    left_ops = []

    for i in range(1, n):
        if i % 2 == 1:
            for j in range(i):
                row, column = n - 1 - j, i - 1 - j
                theta, phi = _null_from_right(matrix[row, column],
                                              matrix[row, column + 1])
                _apply_right_dagger(matrix, column, mzi_transfer(theta, phi))
                right_ops.append((column, theta, phi))
        else:
            for j in range(1, i + 1):
                row, column = n + j - i - 1, j - 1
                theta, phi = _null_from_left(matrix[row - 1, column],
                                             matrix[row, column])
                _apply_left(matrix, row - 1, mzi_transfer(theta, phi))
                left_ops.append((row - 1, theta, phi))

    # Move every left node behind the diagonal phase screen:
    # T^-1 . diag(a, b) = diag(-e^(i(b - phi)), -e^(i b)) . T(theta, a - b)
    diagonal = np.diag(matrix).copy()
    moved = []

    for row, theta, phi in reversed(left_ops):
        alpha = np.angle(diagonal[row])
        beta = np.angle(diagonal[row + 1])
        moved.append((row, theta, float(alpha - beta) % TWO_PI))
        diagonal[row] = -np.exp(1j * (beta - phi))
        diagonal[row + 1] = -np.exp(1j * beta)

    return right_ops + moved, np.angle(diagonal)


def _triangular(matrix: np.ndarray):
    n = matrix.shape[0]
    ops = []

    for row in range(n - 1, 0, -1):
        for column in range(row):
            theta, phi = _null_from_right(matrix[row, column],
                                          matrix[row, column + 1])
            _apply_right_dagger(matrix, column, mzi_transfer(theta, phi))
            ops.append((column, theta, phi))

    return ops, np.angle(np.diag(matrix))


def _schedule(n_ports: int, placements) -> Tuple[MZINode, ...]:
    """
    Put every node into the earliest layer where both its ports are free.
    """
    last = [-1] * n_ports
    nodes = []

    for row, theta, phi in placements:
        column = max(last[row], last[row + 1]) + 1
        last[row] = last[row + 1] = column
        nodes.append(MZINode(theta, phi, row, column))

    return tuple(nodes)


def _as_square(matrix, what: str) -> np.ndarray:
    matrix = np.array(matrix, dtype=complex)

    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeMismatch(what, "a square matrix", matrix.shape)

    return matrix


def decompose_unitary(unitary, layout: Union[Layout, str] =
                      Layout.RECTANGULAR) -> MeshProgram:
    """
    Find the phases of a mesh realizing the given unitary.

    Arguments:
        unitary:
            N x N unitary matrix.
        layout:
            Rectangular (balanced depth N) or triangular (depth 2N - 3).

    Returns:
        The mesh program with N(N - 1)/2 nodes.

    Raises:
        ShapeMismatch:
            The matrix is not square.
        NonUnitaryMatrix:
            max |U^H U - I| exceeds 1e-8.

    Example:
        program = decompose_unitary(random_unitary(8, seed=1))
        reconstruct(program)  # equals the input within 1e-9
    """
    matrix = _as_square(unitary, "unitary")
    n = matrix.shape[0]
    deviation = float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(n))))

    if deviation > UNITARY_TOLERANCE:
        raise NonUnitaryMatrix(deviation, UNITARY_TOLERANCE)

    layout = Layout(layout)

    if layout is Layout.TRIANGULAR:
        placements, phases = _triangular(matrix)
    else:
        placements, phases = _rectangular(matrix)

    return MeshProgram(n, _schedule(n, placements), tuple(phases), layout)


def reconstruct(program: MeshProgram,
                error_sample: ErrorSample = None) -> np.ndarray:
    """
    Compose the transfer matrix of a mesh, layer by layer.

    With an error sample every node is built by its physical parts. Ports a
    layer leaves idle pass a waveguide segment matched to the common-mode
    loss of two stages in the rectangular layout and a lossless one in the
    triangular layout.

    Raises:
        ShapeMismatch:
            The sample covers a different number of nodes.
    """
    thetas, phis, rows, layers = program._arrays
    matrix = np.eye(program.n_ports, dtype=complex)
    idle = 1.0

    if error_sample is None:
        stack = _ideal_stack(thetas, phis)
    else:
        if error_sample.n_nodes != program.n_nodes:
            raise ShapeMismatch("error sample", program.n_nodes,
                                error_sample.n_nodes)

        stack = _sample_stack(thetas, phis, error_sample)

        if program.layout is Layout.RECTANGULAR:
            idle = layer_amplitude(error_sample.common_loss_db)

    for indices in layers:
        upper = rows[indices]
        lower = upper + 1
        nodes = stack[indices]
        top = matrix[upper]
        bottom = matrix[lower]
        matrix[upper] = nodes[:, 0, 0, None] * top \
            + nodes[:, 0, 1, None] * bottom
        matrix[lower] = nodes[:, 1, 0, None] * top \
            + nodes[:, 1, 1, None] * bottom

        if idle != 1.0:
            waiting = np.ones(program.n_ports, dtype=bool)
            waiting[upper] = waiting[lower] = False
            matrix[waiting] *= idle

    return np.exp(1j * np.asarray(program.output_phases))[:, None] * matrix


@dataclass(frozen=True)
class SVDProgram:
    """
    A mesh / attenuator / mesh cascade realizing `sigma_max * U diag(sigma)
    V^H` for one integer block.

    The flattened node order is: V^H mesh nodes, one attenuator per port,
    U mesh nodes. Error samples for the whole cascade follow that order.
    """
    v_mesh: MeshProgram
    sigma: Tuple[float, ...]
    u_mesh: MeshProgram
    sigma_max: float
    permutation: Tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma",
                           tuple(float(value) for value in self.sigma))

        if not self.permutation:
            object.__setattr__(self, "permutation",
                               tuple(range(self.n_ports)))

        if not (len(self.sigma) == self.v_mesh.n_ports
                == self.u_mesh.n_ports):
            raise ShapeMismatch("SVD program", self.v_mesh.n_ports,
                                (len(self.sigma), self.u_mesh.n_ports))

    @property
    def n_ports(self) -> int:
        return self.v_mesh.n_ports

    @property
    def n_nodes(self) -> int:
        return self.v_mesh.n_nodes + self.n_ports + self.u_mesh.n_nodes

    @property
    def n_layers(self) -> int:
        """
        Depth of the cascade, counting the attenuator column as one layer.
        """
        return self.v_mesh.n_layers + 1 + self.u_mesh.n_layers

    @property
    def layout(self) -> Layout:
        return self.v_mesh.layout

    @property
    def attenuators(self) -> Tuple[MZINode, ...]:
        """
        Attenuator nodes, passing `cos(theta/2) = sigma_k` from the upper
        input to the lower output of node k.
        """
        return tuple(
            MZINode(2 * math.acos(min(1.0, max(0.0, value))), ATTENUATOR_PHI,
                    row=port, column=0, role=NodeRole.ATTENUATOR)
            for port, value in enumerate(self.sigma))

    def _attenuation(self, error_sample: ErrorSample = None) -> np.ndarray:
        nodes = self.attenuators
        thetas = np.array([node.theta for node in nodes])
        phis = np.full(len(nodes), ATTENUATOR_PHI)

        if error_sample is None:
            return _ideal_stack(thetas, phis)[:, 1, 0]

        return _sample_stack(thetas, phis, error_sample)[:, 1, 0]

    def split_sample(self, error_sample: ErrorSample) \
            -> Tuple[ErrorSample, ErrorSample, ErrorSample]:
        """
        Split a cascade-wide sample into its (V, attenuators, U) parts.

        Raises:
            ShapeMismatch:
                The sample covers a different number of nodes.
        """
        if error_sample.n_nodes != self.n_nodes:
            raise ShapeMismatch("error sample", self.n_nodes,
                                error_sample.n_nodes)

        v_end = self.v_mesh.n_nodes
        a_end = v_end + self.n_ports

        return (error_sample.slice(0, v_end),
                error_sample.slice(v_end, a_end),
                error_sample.slice(a_end, error_sample.n_nodes))

    def matrix(self, error_sample: ErrorSample = None) -> np.ndarray:
        """
        The normalized physical operator `U diag(sigma) V^H` of the cascade,
        optionally under errors.
        """
        if error_sample is None:
            v_part = a_part = u_part = None
        else:
            v_part, a_part, u_part = self.split_sample(error_sample)

        v_matrix = reconstruct(self.v_mesh, v_part)
        u_matrix = reconstruct(self.u_mesh, u_part)

        return (u_matrix * self._attenuation(a_part)[None, :]) @ v_matrix

    def reconstruct(self) -> np.ndarray:
        """
        The source block `sigma_max * U diag(sigma) V^H` (error-free).
        """
        return self.sigma_max * self.matrix()


def svd_program(block, layout: Union[Layout, str] = Layout.RECTANGULAR) \
        -> SVDProgram:
    """
    Program one integer block onto a mesh / attenuator / mesh cascade.

    Singular values are divided by the largest one, so the passive cascade
    needs no gain; `sigma_max` is kept for threshold rescaling.

    Raises:
        ShapeMismatch:
            The block is not square.
        DecompositionError:
            The block is all zeros or the SVD does not converge.

    Example:
        svd_program([[2, 0], [0, 1]]).sigma -> (1.0, 0.5)
    """
    matrix = np.array(block, dtype=float)

    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeMismatch("block", "a square matrix", matrix.shape)

    if not np.any(matrix):
        raise DecompositionError("the block is all zeros")

    try:
        u, singular, vh = np.linalg.svd(matrix)
    except np.linalg.LinAlgError as error:
        raise DecompositionError(str(error))

    sigma_max = float(singular[0])

    logger.debug("Programming a %dx%d block, sigma_max=%.6g", *matrix.shape,
                 sigma_max)

    return SVDProgram(
        v_mesh=decompose_unitary(vh, layout),
        sigma=tuple(singular / sigma_max),
        u_mesh=decompose_unitary(u, layout),
        sigma_max=sigma_max,
    )


def _check_permutation(permutation, n_ports: int) -> np.ndarray:
    try:
        array = np.asarray(permutation)
        valid = (array.shape == (n_ports,)
                 and np.issubdtype(array.dtype, np.integer)
                 and np.array_equal(np.sort(array), np.arange(n_ports)))
    except (TypeError, ValueError):
        valid = False

    if not valid:
        try:
            shown = list(permutation)
        except TypeError:
            shown = [permutation]

        raise InvalidPermutation(shown, n_ports)

    return array.astype(int)


def permute_svd(program: SVDProgram, permutation: Sequence[int]) \
        -> SVDProgram:
    """
    Reprogram a cascade with its singular values permuted, the matched
    columns of U and rows of V^H permuted identically.

    Since `U diag(sigma) V^H = (U P)(P^T diag(sigma) P)(P^T V^H)`, the
    error-free operator does not change, but every node gets new phases and
    so different systematic errors.

    Arguments:
        program:
            The source cascade.
        permutation:
            0-based permutation of the ports; position k of the new program
            takes index `permutation[k]` of the old one.

    Raises:
        InvalidPermutation:
            Not a bijection on `0 .. N-1`.
    """
    order = _check_permutation(permutation, program.n_ports)
    u = reconstruct(program.u_mesh)
    vh = reconstruct(program.v_mesh)
    sigma = np.asarray(program.sigma)

    return SVDProgram(
        v_mesh=decompose_unitary(vh[order, :], program.layout),
        sigma=tuple(sigma[order]),
        u_mesh=decompose_unitary(u[:, order], program.layout),
        sigma_max=program.sigma_max,
        permutation=tuple(int(index) for index in
                          np.asarray(program.permutation)[order]),
    )


def cyclic_schedule(n_ports: int, copies: int) -> List[Tuple[int, ...]]:
    """
    The default permutation schedule: R cyclic shifts of the ports.

    Example:
        cyclic_schedule(4, 2) -> [(0, 1, 2, 3), (3, 0, 1, 2)]
    """
    return [tuple(int(index) for index in np.roll(np.arange(n_ports), shift))
            for shift in range(copies)]


def port_attenuation(program: Union[MeshProgram, SVDProgram],
                     common_loss_db: float) -> np.ndarray:
    """
    Field attenuation of every output port caused by the common-mode loss
    alone: the row norms of the mesh with only that loss over its ideal row
    norms.

    The rectangular layout gives the uniform `layer_amplitude(l0) **
    n_layers`; the triangular layout, whose paths cross different numbers
    of nodes, does not.
    """
    if program.layout is Layout.RECTANGULAR:
        return np.full(program.n_ports,
                       layer_amplitude(common_loss_db) ** program.n_layers)

    sample = replace(ErrorSample.zeros(program.n_nodes),
                     loss_theta_db=np.full(program.n_nodes, common_loss_db),
                     loss_phi_db=np.full(program.n_nodes, common_loss_db),
                     common_loss_db=common_loss_db)

    if isinstance(program, SVDProgram):
        lossy, ideal = program.matrix(sample), program.matrix()
    else:
        lossy, ideal = reconstruct(program, sample), reconstruct(program)

    lossy_norm = np.linalg.norm(lossy, axis=1)
    ideal_norm = np.linalg.norm(ideal, axis=1)
    dark = ideal_norm < 1e-12
    #
    # A port with an all-zero ideal row carries no signal to calibrate.
    #
    return np.where(dark, layer_amplitude(common_loss_db) ** program.n_layers,
                    lossy_norm / np.where(dark, 1.0, ideal_norm))


def factor_common_loss(program: Union[MeshProgram, SVDProgram],
                       error_sample: ErrorSample) \
        -> Tuple[ErrorSample, np.ndarray]:
    """
    Separate the common-mode loss of a sample from its per-shifter
    deviations.

    Returns:
        A differential sample (common-mode loss 0, per-shifter losses
        relative to it) and the per-output field loss vector of
        `port_attenuation`. In the rectangular layout `diag(loss) .
        T(differential) == T(original)` holds exactly; in the triangular
        layout the vector only matches the output row norms.

    Raises:
        ShapeMismatch:
            The sample covers a different number of nodes.
    """
    if error_sample.n_nodes != program.n_nodes:
        raise ShapeMismatch("error sample", program.n_nodes,
                            error_sample.n_nodes)

    common = error_sample.common_loss_db
    differential = replace(
        error_sample,
        loss_theta_db=error_sample.loss_theta_db - common,
        loss_phi_db=error_sample.loss_phi_db - common,
        common_loss_db=0.0,
    )

    return differential, port_attenuation(program, common)


def random_unitary(n: int, seed: Optional[int] = None) -> np.ndarray:
    """
    Haar-random N x N unitary.
    """
    if n == 1:
        rng = np.random.default_rng(seed)
        return np.exp(2j * np.pi * rng.random((1, 1)))

    return unitary_group.rvs(n, random_state=seed)
