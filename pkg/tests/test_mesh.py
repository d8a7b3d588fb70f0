import math

from dataclasses import replace

import numpy as np

import pytest

from lighthash.error_model import (
    ErrorProfile, ErrorSample, NodeError, sample_errors
)
from lighthash.exceptions import (
    DecompositionError, InvalidPermutation, InvalidProfile, NonUnitaryMatrix,
    ShapeMismatch
)
from lighthash.mesh import (
    ATTENUATOR_PHI, Layout, MeshProgram, MZINode, NodeRole, cyclic_schedule,
    decompose_unitary, factor_common_loss, layer_amplitude, mzi_transfer,
    mzi_transfer_noisy, permute_svd, random_unitary, reconstruct, svd_program
)


def assert_unitary(matrix):
    identity = np.eye(matrix.shape[0])

    np.testing.assert_allclose(matrix.conj().T @ matrix, identity, atol=1e-9)


def test_cross_and_bar_states():
    np.testing.assert_allclose(mzi_transfer(0, 0), 1j * np.array([[0, 1],
                                                                  [1, 0]]))
    np.testing.assert_allclose(mzi_transfer(math.pi, 0),
                               1j * np.array([[1, 0], [0, -1]]), atol=1e-12)


@pytest.mark.parametrize("theta, phi", [
    (0.3, 1.2), (2.0, 5.5), (math.pi, math.pi / 3),
])
def test_node_is_unitary(theta, phi):
    assert_unitary(mzi_transfer(theta, phi))


def test_noisy_node_without_errors():
    theta, phi = 1.1, 0.4
    noisy = mzi_transfer_noisy(theta, phi, NodeError())

    np.testing.assert_allclose(
        noisy, np.exp(0.5j * theta) * mzi_transfer(theta, phi), atol=1e-12)


def test_noisy_node_with_phase_and_coupling_errors_stays_unitary():
    error = NodeError(delta_theta=0.02, delta_phi=-0.01, delta_l=0.03,
                      delta_r=-0.02)
    noisy = mzi_transfer_noisy(0.7, 2.1, error)

    assert_unitary(noisy)
    assert not np.allclose(noisy, np.exp(0.35j) * mzi_transfer(0.7, 2.1))


def test_noisy_node_loss():
    error = NodeError(loss_theta_db=0.5, loss_phi_db=0.5)
    noisy = mzi_transfer_noisy(0.0, 0.0, error)
    power = np.sum(np.abs(noisy[:, 0]) ** 2)

    arm = 10 ** (-0.5 / 10)

    assert power == pytest.approx(arm * (0.5 * arm + 0.5), rel=1e-9)


def test_noisy_node_negative_loss():
    with pytest.raises(InvalidProfile):
        mzi_transfer_noisy(0.1, 0.2, NodeError(loss_phi_db=-0.1))


def test_layer_amplitude():
    assert layer_amplitude(0.0) == 1.0
    assert layer_amplitude(10.0) == pytest.approx(0.1)


###############################################################################


def test_node_phases_are_reduced():
    node = MZINode(theta=-0.5, phi=7.0, row=0, column=0)

    assert node.theta == pytest.approx(2 * math.pi - 0.5)
    assert node.phi == pytest.approx(7.0 - 2 * math.pi)
    assert node.role is NodeRole.UNITARY


def test_node_phases_must_be_finite():
    with pytest.raises(ValueError):
        MZINode(theta=float("nan"), phi=0.0, row=0, column=0)


def test_program_rejects_overlapping_nodes():
    nodes = [MZINode(0.1, 0.2, 0, 0), MZINode(0.1, 0.2, 1, 0)]

    with pytest.raises(ShapeMismatch):
        MeshProgram(3, nodes, (0.0, 0.0, 0.0))


def test_program_rejects_rows_outside_the_mesh():
    with pytest.raises(ShapeMismatch):
        MeshProgram(2, [MZINode(0.1, 0.2, 1, 0)], (0.0, 0.0))


def test_program_rejects_wrong_phase_screen():
    with pytest.raises(ShapeMismatch):
        MeshProgram(2, [MZINode(0.1, 0.2, 0, 0)], (0.0,))


###############################################################################


@pytest.mark.parametrize("layout", list(Layout))
@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 8, 16])
def test_decompose_and_reconstruct(n, layout):
    unitary = random_unitary(n, seed=n)
    program = decompose_unitary(unitary, layout)

    assert program.n_nodes == n * (n - 1) // 2
    assert program.layout is layout
    np.testing.assert_allclose(reconstruct(program), unitary, atol=1e-9)


@pytest.mark.parametrize("n", [4, 8, 16])
def test_rectangular_mesh_is_shallow(n):
    program = decompose_unitary(random_unitary(n, seed=3))

    assert program.n_layers <= n


@pytest.mark.parametrize("n", [2, 4, 8])
def test_triangular_mesh_depth(n):
    program = decompose_unitary(random_unitary(n, seed=3), "triangular")

    assert program.n_layers == 2 * n - 3


def test_decompose_identity_and_permutation():
    swap = np.array([[0, 1], [1, 0]])

    np.testing.assert_allclose(reconstruct(decompose_unitary(np.eye(4))),
                               np.eye(4), atol=1e-12)
    np.testing.assert_allclose(reconstruct(decompose_unitary(swap)), swap,
                               atol=1e-12)


def test_decompose_rejects_non_unitary():
    with pytest.raises(NonUnitaryMatrix) as error:
        decompose_unitary(np.eye(3) * 1.001)

    assert error.value.deviation > error.value.tolerance


def test_decompose_rejects_non_square():
    with pytest.raises(ShapeMismatch):
        decompose_unitary(np.ones((2, 3)))


def test_transfer_matrix_method(unitary_4):
    program = decompose_unitary(unitary_4)

    np.testing.assert_allclose(program.transfer_matrix(), unitary_4,
                               atol=1e-9)


###############################################################################


def test_reconstruct_with_zero_errors(unitary_4):
    program = decompose_unitary(unitary_4)
    sample = ErrorSample.zeros(program.n_nodes)

    np.testing.assert_allclose(reconstruct(program, sample), unitary_4,
                               atol=1e-9)


def test_reconstruct_with_lossless_errors_is_unitary(unitary_4):
    program = decompose_unitary(unitary_4)
    sample = sample_errors(ErrorProfile(sigma_phase=0.01, sigma_coupling=0.01),
                           program, seed=1)
    noisy = reconstruct(program, sample)

    assert_unitary(noisy)
    assert 0 < np.max(np.abs(noisy - unitary_4)) < 0.2


@pytest.mark.parametrize("layout", list(Layout))
def test_lossless_mesh_conserves_power(layout, rng):
    program = decompose_unitary(random_unitary(16, seed=5), layout)
    sample = sample_errors(ErrorProfile(sigma_phase=0.05, sigma_coupling=0.05),
                           program, seed=2)
    fields = rng.standard_normal((50, 16)) + 1j * rng.standard_normal((50, 16))
    out = fields @ reconstruct(program, sample).T

    np.testing.assert_allclose(np.sum(np.abs(out) ** 2, axis=1),
                               np.sum(np.abs(fields) ** 2, axis=1), rtol=1e-9)


def test_reconstruct_rejects_sample_of_other_size(unitary_4):
    program = decompose_unitary(unitary_4)

    with pytest.raises(ShapeMismatch):
        reconstruct(program, ErrorSample.zeros(program.n_nodes + 1))


def test_factor_common_loss_rectangular():
    program = decompose_unitary(random_unitary(6, seed=5))
    sample = sample_errors(ErrorProfile.scaled(0.01), program, seed=2)
    differential, loss = factor_common_loss(program, sample)

    assert differential.common_loss_db == 0.0
    np.testing.assert_allclose(loss, layer_amplitude(sample.common_loss_db)
                               ** program.n_layers)
    np.testing.assert_allclose(loss[:, None] * reconstruct(program,
                                                           differential),
                               reconstruct(program, sample), atol=1e-12)


def test_factor_common_loss_triangular_depends_on_the_port():
    program = decompose_unitary(random_unitary(6, seed=5), Layout.TRIANGULAR)
    sample = sample_errors(ErrorProfile(sigma_loss_db=0.1), program, seed=2)
    _, loss = factor_common_loss(program, sample)

    common_only = ErrorSample(
        *(np.zeros(program.n_nodes) for _ in range(4)),
        loss_theta_db=np.full(program.n_nodes, sample.common_loss_db),
        loss_phi_db=np.full(program.n_nodes, sample.common_loss_db),
        common_loss_db=sample.common_loss_db)
    row_norms = np.linalg.norm(reconstruct(program, common_only), axis=1)

    assert np.ptp(loss) > 1e-3
    assert np.all(loss < 1.0)
    np.testing.assert_allclose(loss, row_norms, atol=1e-12)


def test_single_node_mesh_matches_the_noisy_node():
    theta, phi = 1.3, 0.6
    sample = ErrorSample(delta_theta=[0.02], delta_phi=[-0.01],
                         delta_l=[0.015], delta_r=[-0.02],
                         loss_theta_db=[1.2], loss_phi_db=[0.8],
                         common_loss_db=1.0)
    program = MeshProgram(2, (MZINode(theta, phi, row=0, column=0),),
                          (0.0, 0.0))
    expected = np.exp(-0.5j * theta) \
        * mzi_transfer_noisy(theta, phi, sample.node(0))

    np.testing.assert_allclose(reconstruct(program, sample), expected,
                               atol=1e-12)


def test_balanced_loss_scales_the_node_uniformly():
    # 1 dB on both shifters and 1 dB on the matched arms: 2 dB per path
    theta, phi = 0.9, 2.4
    sample = ErrorSample(*(np.zeros(1) for _ in range(4)),
                         loss_theta_db=[1.0], loss_phi_db=[1.0],
                         common_loss_db=1.0)
    program = MeshProgram(2, (MZINode(theta, phi, row=0, column=0),),
                          (0.0, 0.0))
    noisy = mzi_transfer_noisy(theta, phi, sample.node(0))
    powers = np.abs(reconstruct(program, sample)) ** 2

    np.testing.assert_allclose(powers, np.abs(noisy) ** 2, atol=1e-12)
    np.testing.assert_allclose(
        powers, 10 ** (-0.2) * np.abs(mzi_transfer(theta, phi)) ** 2,
        atol=1e-12)


def test_sample_node_carries_the_common_loss():
    sample = ErrorSample(*(np.zeros(2) for _ in range(4)),
                         loss_theta_db=[0.1, 0.2], loss_phi_db=[0.3, 0.4],
                         common_loss_db=0.25)

    assert sample.node(1) == NodeError(loss_theta_db=0.2, loss_phi_db=0.4,
                                       common_loss_db=0.25)


###############################################################################


def test_svd_program_reconstructs_block(rng):
    block = rng.integers(-4, 5, size=(8, 8))
    program = svd_program(block)

    assert program.sigma[0] == pytest.approx(1.0)
    assert all(a >= b for a, b in zip(program.sigma, program.sigma[1:]))
    assert program.n_nodes == 2 * 28 + 8
    assert program.permutation == tuple(range(8))
    np.testing.assert_allclose(program.reconstruct(), block, atol=1e-8)


def test_svd_program_attenuators():
    program = svd_program([[2, 0], [0, 1]])

    assert program.sigma == (1.0, 0.5)
    assert [node.role for node in program.attenuators] == \
        [NodeRole.ATTENUATOR] * 2
    assert all(node.phi == pytest.approx(ATTENUATOR_PHI)
               for node in program.attenuators)
    np.testing.assert_allclose(program._attenuation(), [1.0, 0.5], atol=1e-12)


def test_svd_program_with_zero_errors(rng):
    program = svd_program(rng.integers(-2, 3, size=(4, 4)))
    sample = ErrorSample.zeros(program.n_nodes)

    np.testing.assert_allclose(program.matrix(sample), program.matrix(),
                               atol=1e-12)


def test_svd_program_split_sample(rng):
    program = svd_program(rng.integers(-2, 3, size=(4, 4)))
    v_part, a_part, u_part = program.split_sample(
        ErrorSample.zeros(program.n_nodes))

    assert (v_part.n_nodes, a_part.n_nodes, u_part.n_nodes) == (6, 4, 6)

    with pytest.raises(ShapeMismatch):
        program.split_sample(ErrorSample.zeros(3))


def test_svd_program_rejects_zero_block():
    with pytest.raises(DecompositionError):
        svd_program(np.zeros((4, 4)))


def test_svd_program_rejects_non_square():
    with pytest.raises(ShapeMismatch):
        svd_program(np.ones((2, 4)))


def test_svd_program_common_loss(rng):
    program = svd_program(rng.integers(-3, 4, size=(4, 4)))
    sample = sample_errors(ErrorProfile(sigma_loss_db=0.02), program, seed=4)
    differential, loss = factor_common_loss(program, sample)

    np.testing.assert_allclose(loss[:, None] * program.matrix(differential),
                               program.matrix(sample), atol=1e-12)


def test_svd_program_triangular_loss_matches_the_row_norms(rng):
    program = svd_program(rng.integers(-3, 4, size=(4, 4)), Layout.TRIANGULAR)
    sample = sample_errors(ErrorProfile(sigma_loss_db=0.1), program, seed=4)
    _, loss = factor_common_loss(program, sample)
    ratio = np.linalg.norm(program.matrix(replace(
        ErrorSample.zeros(program.n_nodes),
        loss_theta_db=np.full(program.n_nodes, sample.common_loss_db),
        loss_phi_db=np.full(program.n_nodes, sample.common_loss_db),
        common_loss_db=sample.common_loss_db)), axis=1) \
        / np.linalg.norm(program.matrix(), axis=1)

    assert np.ptp(loss) > 1e-4
    np.testing.assert_allclose(loss, ratio, atol=1e-12)


###############################################################################


def test_permute_svd_keeps_the_operator(rng):
    block = rng.integers(-4, 5, size=(4, 4))
    program = svd_program(block)
    permuted = permute_svd(program, (2, 0, 3, 1))

    assert permuted.permutation == (2, 0, 3, 1)
    assert permuted.sigma == tuple(np.asarray(program.sigma)[[2, 0, 3, 1]])
    assert permuted.v_mesh != program.v_mesh
    np.testing.assert_allclose(permuted.reconstruct(), block, atol=1e-8)


def test_permute_svd_composes(rng):
    program = svd_program(rng.integers(-4, 5, size=(4, 4)))
    twice = permute_svd(permute_svd(program, (1, 2, 3, 0)), (1, 2, 3, 0))

    assert twice.permutation == (2, 3, 0, 1)


@pytest.mark.parametrize("permutation", [
    (0, 1, 2),
    (0, 0, 1, 2),
    (0, 1, 2, 4),
    (0.0, 1.0, 2.0, 3.0),
    "abcd",
])
def test_permute_svd_rejects(permutation, rng):
    program = svd_program(rng.integers(1, 5, size=(4, 4)))

    with pytest.raises(InvalidPermutation):
        permute_svd(program, permutation)


@pytest.mark.slow
def test_random_instances_round_trip(rng):
    for _ in range(100):
        n = int(rng.integers(2, 33))
        layout = list(Layout)[int(rng.integers(0, 2))]
        unitary = random_unitary(n, seed=int(rng.integers(1 << 31)))
        block = rng.integers(-4, 5, size=(n, n))

        while not np.any(block):
            block = rng.integers(-4, 5, size=(n, n))

        program = svd_program(block, layout)
        permuted = permute_svd(program, rng.permutation(n))

        np.testing.assert_allclose(
            reconstruct(decompose_unitary(unitary, layout)), unitary,
            atol=1e-9)
        np.testing.assert_allclose(program.reconstruct(), block, atol=1e-9)
        np.testing.assert_allclose(permuted.reconstruct(), block, atol=1e-9)


def test_cyclic_schedule():
    assert cyclic_schedule(4, 2) == [(0, 1, 2, 3), (3, 0, 1, 2)]
    assert cyclic_schedule(3, 1) == [(0, 1, 2)]


###############################################################################


def test_random_unitary():
    for n in (1, 2, 7):
        assert_unitary(random_unitary(n, seed=1))

    np.testing.assert_array_equal(random_unitary(5, seed=9),
                                  random_unitary(5, seed=9))
