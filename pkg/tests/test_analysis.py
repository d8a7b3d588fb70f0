import csv
import math

from dataclasses import replace

from decimal import Decimal

import numpy as np

import pytest

from lighthash.analysis import (
    CSV_COLUMNS, DISPERSION_COLUMNS, UNIT_TEMPLATE, EnergyModel, ScalingFit,
    alternate_rescale, correction_ratio, correction_sweep, dispersion_k_sweep,
    dispersion_rows, dispersion_sweep, energy_estimate, estimate_rho,
    feasibility_boundary, feasibility_sweep, fit_dispersion,
    fit_error_coefficients, measure_sigma_out, output_error_stats,
    overlap_error, population_threshold, predict_hash_error,
    predict_output_errors, required_bit_error, rescale_tap, row_distribution,
    scale_profile, scaling_sweep, simulate_cell, state_space,
    walk_distribution, write_dispersion_csv, write_sweep_csv
)
from lighthash.data_types import LightHashParams, Mode
from lighthash.error_model import ErrorProfile
from lighthash.exceptions import DegenerateFit, InvalidParameters
from lighthash.mesh import svd_program


def make_fit(n, k, profile, sigma_out, copies=1, eps_measured=0.0):
    return ScalingFit(n=n, k=k, profile=profile, sigma_out=sigma_out, rho=0.5,
                      t_int=1, eps_measured=eps_measured, eps_predicted=0.0,
                      bit_error=0.0, trials=100, copies=copies, seed=0,
                      wavelength=1550.0)


def test_overlap_error():
    assert overlap_error(1.0) == pytest.approx(0.158655, abs=1e-6)
    assert overlap_error(0.0) == 0.0
    assert overlap_error(0.1) < 1e-20


def test_walk_distribution():
    values, probabilities = walk_distribution(4, 2)

    np.testing.assert_array_equal(values, [-4, -2, 0, 2, 4])
    np.testing.assert_allclose(probabilities, np.array([1, 4, 6, 4, 1]) / 16)
    assert walk_distribution(8, 5)[1].sum() == pytest.approx(1.0)


@pytest.mark.parametrize("n, k, t_int", [(4, 2, 1), (8, 2, 3)])
def test_population_threshold(n, k, t_int):
    assert population_threshold(n, k) == t_int


@pytest.mark.parametrize("n, k, t_int, rho", [
    (4, 2, 1, 0.875),
    (8, 2, 3, 168 / 256),
])
def test_estimate_rho(n, k, t_int, rho):
    assert estimate_rho(n, k, t_int) == pytest.approx(rho)
    assert estimate_rho(n, k, t_int, samples=40000, seed=1) == \
        pytest.approx(rho, abs=0.01)


def test_predict_hash_error():
    prediction = predict_hash_error(0.875, 0.25)

    assert prediction.linear == pytest.approx(0.0071, abs=1e-4)
    assert prediction.exact == pytest.approx(prediction.linear, rel=0.01)
    assert predict_hash_error(1.0, 10.0).linear == 1.0


def test_required_bit_error():
    assert required_bit_error(0.01) == pytest.approx(3.926e-5, rel=1e-3)
    assert predict_hash_error(1.0, 0.0).exact == 0.0


@pytest.mark.parametrize("rho, sigma_out", [(0.5, 0.3), (0.2, 0.5)])
def test_digest_error_compounds_over_the_256_bits(rho, sigma_out):
    prediction = predict_hash_error(rho, sigma_out)

    assert prediction.bit_error == pytest.approx(
        rho * overlap_error(sigma_out))
    assert prediction.exact == pytest.approx(
        1.0 - (1.0 - prediction.bit_error) ** 256)
    assert prediction.exact <= prediction.linear


###############################################################################


def test_row_distribution():
    values, probabilities = row_distribution([1, -1])

    np.testing.assert_array_equal(values, [-2, -1, 0, 1, 2])
    np.testing.assert_allclose(probabilities, [0.25, 0, 0.5, 0, 0.25])

    values, probabilities = row_distribution([3, 1, 0])

    assert probabilities.sum() == pytest.approx(1.0)
    assert probabilities[values == 4] == pytest.approx(0.25)
    assert probabilities[values == 2] == pytest.approx(0.25)
    assert probabilities[values == 0] == 0.0


def test_exact_operators_predict_no_errors(rng):
    block = 2 * rng.integers(0, 2, size=(8, 8)) - 1
    program = svd_program(block)
    stats = output_error_stats(block, [program.matrix()], program.sigma_max)

    np.testing.assert_allclose(stats.gain, 0.0, atol=1e-9)
    np.testing.assert_allclose(stats.variance, 0.0, atol=1e-9)
    np.testing.assert_allclose(stats.incoherent, 0.0, atol=1e-9)
    np.testing.assert_allclose(predict_output_errors(block, stats, 3), 0.0,
                               atol=1e-12)


def test_output_error_stats_split_gain_from_spread(rng):
    block = 2 * rng.integers(0, 2, size=(4, 4)) - 1
    skew = rng.standard_normal((4, 4))
    skew -= (np.sum(skew * block, axis=1) / 4)[:, None] * block
    operators = [(1.1 * block + 0.2j * block + skew) / 2.0]
    stats = output_error_stats(block, operators, 2.0)

    np.testing.assert_allclose(stats.gain, 0.1)
    np.testing.assert_allclose(stats.gain_imag, 0.2)
    np.testing.assert_allclose(stats.variance, np.sum(skew ** 2, axis=1))
    np.testing.assert_allclose(stats.variance_imag, 0.0, atol=1e-12)
    np.testing.assert_allclose(stats.incoherent, 0.0, atol=1e-12)


def test_copies_that_disagree_are_incoherent(rng):
    block = 2 * rng.integers(0, 2, size=(4, 4)) - 1
    shift = 0.1 * rng.standard_normal((4, 4))
    stats = output_error_stats(block, [block + shift, block - shift], 1.0)

    np.testing.assert_allclose(stats.variance, 0.0, atol=1e-12)
    np.testing.assert_allclose(stats.incoherent, np.sum(shift ** 2, axis=1))


@pytest.mark.parametrize("mode", list(Mode))
def test_predicted_output_errors_match_sampled_flips(mode, rng):
    block = 2 * rng.integers(0, 2, size=(16, 16)) - 1
    noise = 0.2 * (rng.standard_normal((16, 16))
                   + 1j * rng.standard_normal((16, 16)))
    stats = output_error_stats(block, [(block + noise) / 4.0], 4.0)
    predicted = predict_output_errors(block, stats, 3, mode)

    inputs = 2 * rng.integers(0, 2, size=(20000, 16)) - 1
    ideal = inputs @ block.T
    outputs = inputs @ (block + noise).T

    if mode is Mode.SIGNED:
        wrong = (outputs.real > 0) != (ideal > 0)
    else:
        wrong = (np.abs(outputs) > 3) != (np.abs(ideal) > 3)

    assert predicted.mean() == pytest.approx(wrong.mean(), rel=0.2)
    np.testing.assert_allclose(predicted, wrong.mean(axis=0), atol=0.05)


###############################################################################


def test_error_free_cell():
    cell = simulate_cell(LightHashParams(n=8, k=4), ErrorProfile(),
                         trials=40, devices=2)

    assert cell.sigma_out < 1e-6
    assert cell.bit_error == cell.hash_error == 0.0
    assert cell.predicted_hash_error == pytest.approx(0.0, abs=1e-12)
    assert cell.trials == 40
    assert cell.deviations > 0


def test_cell_is_reproducible():
    params = LightHashParams(n=8, k=2)
    profile = ErrorProfile.scaled(0.01)

    assert simulate_cell(params, profile, 50, seed=3, devices=2) == \
        simulate_cell(params, profile, 50, seed=3, devices=2)


def test_small_errors_are_harmless():
    row, = feasibility_sweep([16], [4], [0.001], trials=200, devices=4)

    assert row.sigma_out < 0.2
    assert row.eps_measured < 0.02
    assert row.eps_predicted < 0.02


@pytest.mark.slow
def test_large_mesh_with_percent_errors_fails():
    row, = feasibility_sweep([64], [8], [0.01], trials=100, devices=1)

    assert row.eps_measured > 0.5
    assert row.eps_predicted > 0.5


def test_separate_kinds_run_every_error_alone():
    rows = feasibility_sweep([4], [2], [0.01], trials=20, devices=1,
                             separate_kinds=True)
    sigmas = [(row.profile.sigma_phase, row.profile.sigma_coupling,
               row.profile.sigma_loss_db) for row in rows]

    assert sigmas == [(0.01, 0.0, 0.0), (0.0, 0.01, 0.0),
                      (0.0, 0.0, pytest.approx(0.03))]

    for row in rows:
        assert row.eps_scalar == predict_hash_error(row.rho,
                                                    row.sigma_out).linear
        assert 0.0 <= row.bit_predicted <= 1.0


def test_feasibility_boundary():
    profile = ErrorProfile(sigma_phase=0.01)
    rows = [
        make_fit(32, 2, profile, 0.2, eps_measured=0.05),
        make_fit(32, 2, profile.isolated("phase"), 0.1, eps_measured=0.01),
        make_fit(32, 4, profile, 0.4, eps_measured=0.3),
        make_fit(32, 8, profile, 0.8, eps_measured=0.9),
    ]
    boundary = feasibility_boundary(rows)

    assert boundary.nk_low == pytest.approx(2 ** 6.2)
    assert boundary.nk_high == pytest.approx(2 ** (7 + 1 / 3))
    assert boundary.doublings == pytest.approx(1 + 2 / 15)


def test_feasibility_boundary_not_reached():
    rows = [make_fit(8, 2, ErrorProfile(sigma_phase=0.01), 0.1,
                     eps_measured=0.2)]
    boundary = feasibility_boundary(rows)

    assert boundary.nk_low is None
    assert boundary.doublings is None


@pytest.fixture(scope="module")
def kind_sweep():
    return feasibility_sweep([16, 32], [2, 3, 4, 5, 6, 8, 16], [0.01],
                             trials=600, separate_kinds=True)


@pytest.mark.slow
def test_percent_errors_break_down_within_one_doubling(kind_sweep):
    worst = {}

    for row in kind_sweep:
        worst[row.n * row.k] = max(worst.get(row.n * row.k, 0.0),
                                   row.eps_measured)

    boundary = feasibility_boundary(kind_sweep)

    assert worst[64] <= 0.1
    assert worst[512] >= 0.5
    assert 64 < boundary.nk_low <= boundary.nk_high < 512
    assert boundary.doublings <= 1.0
    assert feasibility_boundary(kind_sweep, low=0.05).doublings <= 1.0


@pytest.mark.slow
def test_predicted_digest_error_tracks_the_measured_one(kind_sweep):
    rows = kind_sweep + feasibility_sweep([32], [2],
                                          [0.006, 0.008, 0.01, 0.012],
                                          trials=1000)
    checked = [row for row in rows
               if max(1e-3, 20 / row.trials) <= row.eps_measured <= 0.3]

    assert checked

    for row in checked:
        assert 0.5 <= row.eps_predicted / row.eps_measured <= 2.0


def test_measure_sigma_out_single_kind():
    fit = measure_sigma_out(LightHashParams(n=8, k=2),
                            ErrorProfile(sigma_phase=0.005), trials=200,
                            devices=4)

    assert fit.t_int == 3
    assert fit.rho == pytest.approx(168 / 256)
    assert fit.k_phase > 0
    assert fit.k_coupling is None and fit.k_loss is None
    assert fit.wavelength == 1550.0


def test_measure_sigma_out_isolated_kinds():
    fit = measure_sigma_out(LightHashParams(n=8, k=2),
                            ErrorProfile(sigma_phase=0.004,
                                         sigma_coupling=0.004),
                            trials=200, devices=4, isolate=True)

    assert fit.k_phase > 0
    assert fit.k_coupling > 0
    assert fit.k_loss is None


@pytest.mark.slow
def test_output_error_scales_with_n_and_k():
    rows = scaling_sweep([8, 16, 32], [2, 4], [0.005],
                         ErrorProfile(sigma_phase=1.0), trials=200,
                         devices=4)
    coefficient = fit_error_coefficients(rows)["phase"]

    assert len(rows) == 6

    for row in rows:
        assert row.k_phase == pytest.approx(coefficient, rel=0.3)


@pytest.mark.slow
def test_error_kinds_add_in_quadrature():
    params = LightHashParams(n=16, k=2)
    profile = ErrorProfile.scaled(0.005)
    together = measure_sigma_out(params, profile, trials=2000, devices=8,
                                 isolate=True)
    alone = [
        math.sqrt(together.k_phase) * 16 * 2 * profile.sigma_phase,
        math.sqrt(together.k_coupling) * 16 * 2 * profile.sigma_coupling,
        math.sqrt(together.k_loss) * 16 * 2 * profile.sigma_loss_db,
    ]

    assert together.trials == 2000
    assert min(alone) > 0
    assert together.sigma_out == pytest.approx(
        math.sqrt(sum(value ** 2 for value in alone)), rel=0.2)


@pytest.mark.slow
def test_permuted_copies_average_errors_out():
    rows = correction_sweep(8, 2, ErrorProfile(sigma_phase=0.002), [1, 4],
                            trials=400, devices=8)

    assert [row.copies for row in rows] == [1, 4]
    assert correction_ratio(rows) == pytest.approx(2.0, abs=0.3)


###############################################################################


def test_fit_error_coefficients():
    phase = ErrorProfile(sigma_phase=0.01)
    loss = ErrorProfile(sigma_loss_db=0.03)
    rows = [
        make_fit(8, 2, phase, math.sqrt(0.5) * 8 * 2 * 0.01),
        make_fit(16, 4, phase, math.sqrt(0.5) * 16 * 4 * 0.01),
        make_fit(8, 2, loss, 0.1 * 8 * 2 * 0.03),
        make_fit(8, 2, ErrorProfile.scaled(0.01), 1.0),
    ]

    coefficients = fit_error_coefficients(rows)

    assert set(coefficients) == {"phase", "loss"}
    assert coefficients["phase"] == pytest.approx(0.5)
    assert coefficients["loss"] == pytest.approx(0.01)


def test_correction_ratio():
    profile = ErrorProfile(sigma_phase=0.01)
    rows = [make_fit(8, 2, profile, 0.4, 1), make_fit(8, 2, profile, 0.2, 4)]

    assert correction_ratio(rows) == pytest.approx(2.0)


def test_scale_profile():
    profile = scale_profile(UNIT_TEMPLATE, 0.01)

    assert profile.sigma_phase == pytest.approx(0.01)
    assert profile.sigma_loss_db == pytest.approx(0.03)
    assert profile.mean_loss_db == pytest.approx(0.09)


###############################################################################


def test_fit_dispersion():
    wavelengths = [1540, 1545, 1550, 1555, 1560]
    rates = [0.1 * (1 + 0.01 * (w - 1550) ** 2) for w in wavelengths]
    fit = fit_dispersion(wavelengths, rates, 1550.0)

    assert fit.epsilon_center == pytest.approx(0.1)
    assert fit.d_epsilon == pytest.approx(0.01)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.vertex == pytest.approx(1550.0)
    assert fit.points[0] == (1540.0, pytest.approx(0.2))


def test_fit_dispersion_without_errors():
    with pytest.raises(DegenerateFit):
        fit_dispersion([1540, 1550, 1560], [0.0, 0.0, 0.0], 1550.0)


def test_dispersion_raises_output_error_away_from_centre():
    profile = ErrorProfile(sigma_phase=0.01, mu_eta=0.002)
    rows = dispersion_rows(LightHashParams(n=8, k=2), profile,
                           [1540.0, 1550.0, 1560.0], trials=100, devices=4)
    edge, centre, other = (row.sigma_out for row in rows)

    assert [row.wavelength for row in rows] == [1540.0, 1550.0, 1560.0]
    assert edge > 1.3 * centre
    assert other > 1.3 * centre


@pytest.mark.slow
def test_dispersion_sweep():
    profile = ErrorProfile(sigma_phase=0.01, mu_eta=0.002)
    fit = dispersion_sweep(LightHashParams(n=16, k=4), profile,
                           [1540.0, 1545.0, 1550.0, 1555.0, 1560.0],
                           trials=400, devices=4)

    assert len(fit.points) == 5
    assert fit.epsilon_center > 0
    assert fit.d_epsilon > 0
    assert (fit.n, fit.k, fit.metric) == (16, 4, "hash")


def test_dispersion_sweep_rejects_unknown_metric():
    with pytest.raises(InvalidParameters):
        dispersion_sweep(LightHashParams(n=8, k=2), ErrorProfile.scaled(0.1),
                         [1540.0, 1550.0, 1560.0], trials=10, devices=1,
                         metric="colour")


@pytest.mark.slow
def test_dispersion_falls_as_resolution_grows():
    profile = replace(scale_profile(UNIT_TEMPLATE, 0.05), mu_eta=0.004,
                      mu_bs=4e-4)
    low, high = dispersion_k_sweep(8, [2, 8], profile,
                                   [1540.0, 1545.0, 1550.0, 1555.0, 1560.0],
                                   trials=1000, metric="bit")

    assert (low.k, high.k) == (2, 8)
    assert low.metric == high.metric == "bit"
    assert low.d_epsilon > high.d_epsilon > 0
    assert low.r_squared > 0.9
    assert 1540.0 <= low.vertex <= 1560.0
    assert abs(low.vertex - profile.lambda_c) < 5.0


###############################################################################


def test_write_sweep_csv(tmp_path):
    path = str(tmp_path / "sweep.csv")
    fit = make_fit(8, 2, ErrorProfile(sigma_phase=0.1), 1 / 3)
    write_sweep_csv([fit, fit], path)

    with open(path) as file:
        rows = list(csv.reader(file))

    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 3
    assert rows[1] == rows[2]
    assert float(rows[1][CSV_COLUMNS.index("sigma_out")]) == 1 / 3
    assert rows[1][CSV_COLUMNS.index("n")] == "8"


def test_write_dispersion_csv(tmp_path):
    path = str(tmp_path / "dispersion.csv")
    wavelengths = [1540, 1550, 1560]
    fits = [
        replace(fit_dispersion(wavelengths, [0.3, 0.1, 0.3], 1550.0), n=8,
                k=k, metric="bit")
        for k in (2, 4)
    ]
    write_dispersion_csv(fits, path)

    with open(path) as file:
        rows = list(csv.DictReader(file))

    assert tuple(rows[0]) == DISPERSION_COLUMNS
    assert [row["k"] for row in rows] == ["2", "4"]
    assert rows[0]["metric"] == "bit"
    assert float(rows[0]["d_epsilon"]) == pytest.approx(0.02)


###############################################################################


def test_state_space():
    space = state_space(4, 9)

    assert space.count == 104976
    assert space.log10 == pytest.approx(math.log10(104976))
    assert state_space(64, 2).count == 4 ** 64


def test_energy_estimate():
    estimate = energy_estimate(64)

    assert estimate.photonic_pj_per_hash == Decimal("10.496")
    assert estimate.digital_matmul_pj_per_hash == Decimal("1638.4")
    assert estimate.sha_asic_pj_per_hash == Decimal("10")
    assert estimate.ratio.quantize(Decimal("0.1")) == Decimal("156.1")
    assert estimate.to_dict()["photonic_pj_per_hash"] == "10.496"


def test_energy_estimate_custom_model():
    model = EnergyModel(comparator_fj_per_bit="9", digital_op_pj="1")
    estimate = energy_estimate(16, model=model)

    assert estimate.photonic_pj_per_hash == Decimal("2.56")
    assert estimate.digital_matmul_pj_per_hash == Decimal("4096")


@pytest.mark.parametrize("n, k", [(3, 2), (512, 2), (64, 1)])
def test_energy_estimate_rejects(n, k):
    with pytest.raises(InvalidParameters):
        energy_estimate(n, k)


def test_energy_model_rejects_negative_values():
    with pytest.raises(InvalidParameters):
        EnergyModel(modulator_fj_per_bit=Decimal("-1"))


###############################################################################


def test_rescale_tap():
    result = rescale_tap(1.0, 4.0, 1.0)

    assert result.xi == pytest.approx(0.8)
    assert result.responsivity_ratio == pytest.approx(0.25)


@pytest.mark.parametrize("rescale", [rescale_tap, alternate_rescale])
def test_rescaled_reference_matches_threshold(rescale):
    result = rescale(2.5, 0.3, 0.6, power=2.0, n=16)

    assert result.c_out * result.p_th * (
        result.responsivity_ratio if rescale is alternate_rescale else 1.0) \
        == pytest.approx(result.c_ref)


@pytest.mark.parametrize("values", [
    (0.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, 0.0), (1.0, 1.0, 1.5),
])
def test_rescale_rejects(values):
    with pytest.raises(InvalidParameters):
        rescale_tap(*values)
