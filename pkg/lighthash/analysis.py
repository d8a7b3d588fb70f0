"""
Here are defined the quantitative models of the hash and the Monte-Carlo
harness measuring them on simulated hardware: output error scaling, hash
error prediction, feasibility and dispersion sweeps, error correction,
state-space size, energy accounting and the photodetector rescaling
calculators.

Output deviations are measured in integer-grid units (detected amplitudes
rescaled by `sigma_max * sqrt(N)`), where neighbouring attainable outputs
are 2 apart and a threshold sits 1 away from each of them.
"""

import csv
import itertools
import logging
import math
import multiprocessing

from dataclasses import dataclass, replace
from decimal import Decimal
from typing import (
    Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union
)

import numpy as np

from numpy.polynomial.hermite_e import hermegauss
from scipy.special import erfc, ndtr

from lighthash.data_types import DIGEST_BITS, LightHashParams, Mode
from lighthash.digest import corrected_operators, oracle_matvec, propagate
from lighthash.error_model import (
    ERROR_KINDS, ErrorProfile, detection_noise
)
from lighthash.exceptions import DegenerateFit, InvalidParameters
from lighthash.helpers import derive_seed, grid_parity, is_power_of_two
from lighthash.mesh import Layout, svd_program

logger = logging.getLogger(__name__)

DEFAULT_TRIALS = 2000
DEFAULT_DEVICES = 8

CSV_COLUMNS = ("n", "k", "sigma_phase", "sigma_coupling", "sigma_loss_db",
               "lambda_nm", "r_copies", "sigma_out", "rho", "eps_predicted",
               "eps_measured", "trials", "seed")

DISPERSION_COLUMNS = ("n", "k", "metric", "lambda_c", "epsilon_center",
                      "d_epsilon", "r_squared", "vertex")

# Error rate a dispersion fit runs on, by name: the ScalingFit attribute.
DISPERSION_METRICS = {"hash": "eps_measured", "bit": "bit_error"}

# Phase and coupling sigma 1 rad, loss sigma 3 dB: multiplied by a sweep's
# sigma this is the 0.01 rad / 0.03 dB pairing.
UNIT_TEMPLATE = ErrorProfile(sigma_phase=1.0, sigma_coupling=1.0,
                             sigma_loss_db=3.0)


###############################################################################
# Closed-form models


def overlap_error(sigma_out: float) -> float:
    """
    Probability that a `Normal(0, sigma_out)` deviation crosses the half
    grid spacing to the threshold: `0.5 erfc(1 / (sigma_out sqrt 2))`.

    Example:
        overlap_error(1.0) -> 0.15866
    """
    if sigma_out <= 0:
        return 0.0

    return float(0.5 * erfc(1.0 / (sigma_out * math.sqrt(2))))


def walk_distribution(n: int, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exact distribution of one row output `s` over uniform input bits and
    block-random Q: the N-fold convolution of the uniform step law on
    `{2q - K - 1}`.

    Returns:
        Attainable values (spaced 2 apart) and their probabilities.
    """
    step = np.full(k, 1.0 / k)
    probabilities = np.array([1.0])

    for _ in range(n):
        probabilities = np.convolve(probabilities, step)

    values = np.arange(-n * (k - 1), n * (k - 1) + 1, 2)

    return values, probabilities


def population_threshold(n: int, k: int) -> int:
    """
    The grid midpoint splitting the walk distribution closest to one half,
    ties towards the smaller threshold.
    """
    values, probabilities = walk_distribution(n, k)
    magnitudes = np.abs(values)
    best, best_score = None, None

    for t_int in range(1 - grid_parity(n, k), n * (k - 1) + 2, 2):
        score = abs(probabilities[magnitudes > t_int].sum() - 0.5)

        if best_score is None or score < best_score - 1e-15:
            best, best_score = t_int, score

    return best


def estimate_rho(n: int, k: int, t_int: int, samples: int = None,
                 seed: int = 0) -> float:
    """
    Mass of the two output spikes adjacent to the threshold,
    `P(|s| = t - 1) + P(|s| = t + 1)`.

    Arguments:
        n, k:
            Block size and resolution.
        t_int:
            Grid threshold.
        samples:
            Monte-Carlo draws; exact from `walk_distribution` when `None`.
        seed:
            Seed of the Monte-Carlo draws.

    Example:
        estimate_rho(4, 2, 1) -> 0.875
    """
    adjacent = (t_int - 1, t_int + 1)

    if samples is None:
        values, probabilities = walk_distribution(n, k)

        return float(probabilities[np.isin(np.abs(values), adjacent)].sum())

    rng = np.random.default_rng(seed)
    steps = 2 * rng.integers(1, k + 1, size=(samples, n)) - k - 1
    signs = 1 - 2 * rng.integers(0, 2, size=(samples, n))
    outputs = np.abs((steps * signs).sum(axis=1))

    return float(np.isin(outputs, adjacent).mean())


@dataclass(frozen=True)
class HashErrorPrediction:
    """
    Attributes:
        bit_error (float):
            Per-bit error `rho * E(sigma_out)`.
        linear (float):
            `min(1, 256 * bit_error)`.
        exact (float):
            `1 - (1 - bit_error)^256`.
    """
    bit_error: float
    linear: float
    exact: float


def predict_hash_error(rho: float, sigma_out: float) -> HashErrorPrediction:
    """
    Expected fraction of wrong 256-bit digests.

    Example:
        predict_hash_error(0.875, 0.25).linear -> 0.0071
    """
    bit_error = rho * overlap_error(sigma_out)

    return HashErrorPrediction(
        bit_error=bit_error,
        linear=min(1.0, DIGEST_BITS * bit_error),
        exact=1.0 - (1.0 - bit_error) ** DIGEST_BITS,
    )


def required_bit_error(target: float) -> float:
    """
    Per-bit error giving the `target` digest error rate.

    Example:
        required_bit_error(0.01) -> 3.926e-05
    """
    return 1.0 - (1.0 - target) ** (1.0 / DIGEST_BITS)


###############################################################################
# Monte-Carlo simulation


HERMITE_NODES = 24


def row_distribution(row) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exact law of `s = q . x` for one integer row `q` over uniform +-1
    inputs.

    Returns:
        Values `-sum|q| .. sum|q|` and their probabilities (zero for the
        values of the wrong parity).

    Example:
        row_distribution([1, 1]) -> ([-2, -1, 0, 1, 2], [.25, 0, .5, 0, .25])
    """
    row = np.abs(np.asarray(row, dtype=int))
    probabilities = np.array([1.0])

    for entry in row[row > 0]:
        kernel = np.zeros(2 * entry + 1)
        kernel[0] = kernel[-1] = 0.5
        probabilities = np.convolve(probabilities, kernel)

    span = int(row.sum())

    return np.arange(-span, span + 1), probabilities


@dataclass(frozen=True)
class OutputErrorStats:
    """
    Second-order statistics of the output errors of one programmed block,
    in grid units, given the ideal output `s` of each row.

    Attributes:
        gain, gain_imag (np.ndarray):
            Mean error per unit of `s`, in phase and in quadrature.
        variance, variance_imag, covariance (np.ndarray):
            Spread of the error not explained by `s`.
        incoherent (np.ndarray):
            Mean power the R copies disagree by; zero for R = 1.
    """
    gain: np.ndarray
    gain_imag: np.ndarray
    variance: np.ndarray
    variance_imag: np.ndarray
    covariance: np.ndarray
    incoherent: np.ndarray


def output_error_stats(block, operators: Sequence[np.ndarray],
                       sigma_max: float) -> OutputErrorStats:
    """
    Error statistics of every output row of calibrated `operators` against
    the integer `block`.
    """
    block = np.asarray(block, dtype=float)
    errors = np.stack([sigma_max * operator for operator in operators]) \
        - block[None]
    mean = errors.mean(axis=0)
    norms = np.sum(block ** 2, axis=1)
    projection = np.divide(np.sum(mean * block, axis=1), norms,
                           out=np.zeros(block.shape[0], dtype=complex),
                           where=norms > 0)
    rest = mean - projection[:, None] * block

    return OutputErrorStats(
        gain=projection.real,
        gain_imag=projection.imag,
        variance=np.sum(rest.real ** 2, axis=1),
        variance_imag=np.sum(rest.imag ** 2, axis=1),
        covariance=np.sum(rest.real * rest.imag, axis=1),
        incoherent=np.mean(np.sum(np.abs(errors - mean[None]) ** 2, axis=2),
                           axis=0),
    )


def _flip_unsigned(magnitude: np.ndarray, t_int: int, stats, row: int) \
        -> np.ndarray:
    nodes, weights = hermegauss(HERMITE_NODES)
    weights = weights / math.sqrt(2 * math.pi)
    variance_imag = stats.variance_imag[row]
    a = magnitude[:, None]
    z = nodes[None, :]

    eta, shift, variance = 0.0, 0.0, stats.variance[row]

    if variance_imag > 0:
        eta = math.sqrt(variance_imag)
        shift = stats.covariance[row] / eta
        variance -= shift ** 2

    quadrature = a * stats.gain_imag[row] + eta * z
    mean = a * stats.gain[row] + shift * z

    sd = math.sqrt(max(variance, 0.0)) or 1e-12
    reach = t_int ** 2 - quadrature ** 2 - stats.incoherent[row]
    edge = np.sqrt(np.clip(reach, 0.0, None))
    above = ndtr((a + mean - edge) / sd) \
        + ndtr((-edge - a - mean) / sd)
    above = np.where(reach <= 0, 1.0, above) @ weights

    return np.where(magnitude > t_int, 1.0 - above, above)


def _flip_signed(values: np.ndarray, stats, row: int) -> np.ndarray:
    sd = math.sqrt(stats.variance[row]) or 1e-12
    a = np.abs(values).astype(float)
    flipped = ndtr(-(a + a * stats.gain[row]) / sd)

    return np.where(values == 0, 0.5, flipped)


def predict_output_errors(block, stats: OutputErrorStats, t_int: int,
                          mode: Union[Mode, str] = Mode.UNSIGNED) \
        -> np.ndarray:
    """
    Probability that each output bit of a programmed block is wrong for a
    uniformly random input.

    Every row is weighted by its own output law (`row_distribution`); given
    `s` its error is Gaussian with the row's gain, in-phase and quadrature
    spread, and the quadrature part is integrated out by Gauss-Hermite
    quadrature. Detection noise is not included.
    """
    block = np.asarray(block)
    mode = Mode(mode)
    flips = np.empty(block.shape[0])

    for row in range(block.shape[0]):
        values, probabilities = row_distribution(block[row])
        present = probabilities > 0
        values, probabilities = values[present], probabilities[present]

        if mode is Mode.SIGNED:
            flip = _flip_signed(values, stats, row)
        else:
            flip = _flip_unsigned(np.abs(values).astype(float), t_int,
                                  stats, row)

        flips[row] = float(probabilities @ flip)

    return flips


@dataclass(frozen=True)
class CellMeasurement:
    """
    Measured error rates of one cell and their per-output prediction
    (`predict_output_errors`) on the same devices.
    """
    sigma_out: float
    bit_error: float
    hash_error: float
    deviations: int
    trials: int
    predicted_bit_error: float = 0.0
    predicted_hash_error: float = 0.0


def _device_sizes(trials: int, devices: int) -> List[int]:
    return [trials // devices + (1 if index < trials % devices else 0)
            for index in range(devices)]


def simulate_cell(params: LightHashParams, profile: ErrorProfile,
                  trials: int = DEFAULT_TRIALS, seed: int = 0,
                  devices: int = DEFAULT_DEVICES, copies: int = 1,
                  wavelength: float = None,
                  layout: Union[Layout, str] = Layout.RECTANGULAR) \
        -> CellMeasurement:
    """
    Hash `trials` random 256-bit inputs on `devices` simulated chips and
    compare with the exact integer outputs.

    Every device has its own random Q (256 / N blocks) and a static error
    sample per block; the inputs are shared out over the devices. Only
    outputs with a nonzero ideal value enter `sigma_out`.

    Returns:
        RMS grid deviation, per-bit and per-digest error rates.
    """
    n, k = params.n, params.k
    t_int = params.t_int if params.t_int is not None \
        else population_threshold(n, k)
    n_blocks = params.n_blocks
    squared = 0.0
    deviations = 0
    wrong_bits = 0
    wrong_hashes = 0
    predicted_bits = 0.0
    predicted_hashes = 0.0

    for device, size in enumerate(_device_sizes(trials, max(1, devices))):
        if size == 0:
            continue

        rng = np.random.default_rng(derive_seed(seed, "device", device))
        blocks = 2 * rng.integers(1, k + 1, size=(n_blocks, n, n)) - k - 1
        bits = rng.integers(0, 2, size=(size, n_blocks, n))
        hash_wrong = np.zeros(size, dtype=bool)
        flips = []

        for index in range(n_blocks):
            program = svd_program(blocks[index], layout)
            operators = corrected_operators(
                program, copies, None, profile,
                derive_seed(seed, "device", device, "block", index),
                wavelength)
            flips.append(predict_output_errors(
                blocks[index],
                output_error_stats(blocks[index], operators,
                                   program.sigma_max),
                t_int, params.mode))
            chunk = bits[:, index, :]
            ideal = oracle_matvec(blocks[index], chunk)
            powers, plus, minus = 0.0, 0.0, 0.0

            for copy, operator in enumerate(operators):
                fields = propagate(operator, chunk)
                detected = np.abs(fields) ** 2

                if profile.detection_noise_sigma > 0:
                    detected = detection_noise(
                        detected, profile.detection_noise_sigma,
                        derive_seed(seed, "detect", device, index, copy))

                powers = powers + detected

                if params.mode is Mode.SIGNED:
                    plus = plus + np.abs(fields + 1) ** 2
                    minus = minus + np.abs(fields - 1) ** 2

            amplitude = np.sqrt(powers / len(operators)) \
                * program.sigma_max * math.sqrt(n)
            nonzero = ideal != 0
            error = amplitude[nonzero] - np.abs(ideal[nonzero])
            squared += float(np.sum(error ** 2))
            deviations += error.size

            if params.mode is Mode.SIGNED:
                measured = plus > minus
                expected = ideal > 0
            else:
                measured = amplitude > t_int
                expected = np.abs(ideal) > t_int

            wrong = measured != expected
            wrong_bits += int(np.count_nonzero(wrong))
            hash_wrong |= wrong.any(axis=1)

        wrong_hashes += int(np.count_nonzero(hash_wrong))
        flips = np.concatenate(flips)
        predicted_bits += size * float(flips.mean())
        predicted_hashes += size * (1.0 - float(np.prod(1.0 - flips)))

    sigma_out = math.sqrt(squared / deviations) if deviations else 0.0

    return CellMeasurement(
        sigma_out=sigma_out,
        bit_error=wrong_bits / (trials * DIGEST_BITS) if trials else 0.0,
        hash_error=wrong_hashes / trials if trials else 0.0,
        deviations=deviations,
        trials=trials,
        predicted_bit_error=predicted_bits / trials if trials else 0.0,
        predicted_hash_error=predicted_hashes / trials if trials else 0.0,
    )


@dataclass(frozen=True)
class ScalingFit:
    """
    One measured cell of an error sweep.

    Attributes:
        n, k (int):
            Block size and resolution.
        profile (ErrorProfile):
            The error statistics simulated.
        sigma_out (float):
            RMS output deviation in grid units.
        rho (float):
            Mass of the two spikes adjacent to `t_int`.
        k_phase, k_coupling, k_loss (Optional[float]):
            `sigma_out^2 / (N^2 K^2 sigma^2)` of every error kind measured
            in isolation.
        t_int (int):
            Threshold used.
        eps_measured (float):
            Fraction of wrong digests.
        eps_predicted (float):
            Digest error predicted output by output from the error
            statistics of the simulated devices.
        bit_error (float):
            Fraction of wrong output bits.
        bit_predicted (Optional[float]):
            Per-bit error predicted the same way.
        eps_scalar (Optional[float]):
            The single-sigma estimate `min(1, 256 rho E(sigma_out))`.
        trials, copies, seed (int):
            Run settings.
        wavelength (float):
            Wavelength of the simulated light in nm.
    """
    n: int
    k: int
    profile: ErrorProfile
    sigma_out: float
    rho: float
    t_int: int
    eps_measured: float
    eps_predicted: float
    bit_error: float
    trials: int
    copies: int
    seed: int
    wavelength: float
    k_phase: Optional[float] = None
    k_coupling: Optional[float] = None
    k_loss: Optional[float] = None
    bit_predicted: Optional[float] = None
    eps_scalar: Optional[float] = None

    def csv_row(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "k": self.k,
            "sigma_phase": self.profile.sigma_phase,
            "sigma_coupling": self.profile.sigma_coupling,
            "sigma_loss_db": self.profile.sigma_loss_db,
            "lambda_nm": self.wavelength,
            "r_copies": self.copies,
            "sigma_out": self.sigma_out,
            "rho": self.rho,
            "eps_predicted": self.eps_predicted,
            "eps_measured": self.eps_measured,
            "trials": self.trials,
            "seed": self.seed,
        }


def _coefficient(sigma_out: float, n: int, k: int, sigma: float) -> float:
    return sigma_out ** 2 / (n ** 2 * k ** 2 * sigma ** 2)


def _active_kinds(profile: ErrorProfile) -> List[str]:
    return [kind for kind in ERROR_KINDS if profile.sigma_of(kind) > 0]


def measure_sigma_out(params: LightHashParams, profile: ErrorProfile,
                      trials: int = DEFAULT_TRIALS, seed: int = 0,
                      devices: int = DEFAULT_DEVICES, copies: int = 1,
                      wavelength: float = None,
                      isolate: bool = False) -> ScalingFit:
    """
    Measure the output deviation, the error rates and their prediction for
    one (N, K, profile) cell.

    Arguments:
        params:
            N, K, mode and optionally the threshold (the population
            threshold of the walk distribution by default).
        profile:
            Error statistics.
        trials:
            Number of simulated 256-bit hashes.
        seed:
            Base seed; isolated runs reuse it, so error kinds share draws.
        devices:
            Number of simulated chips the trials are spread over.
        copies:
            Error-correction copies R.
        wavelength:
            Wavelength in nm, `profile.lambda_c` by default.
        isolate:
            Also run every active error kind alone and fill the k
            coefficients.

    Returns:
        The measured cell.

    Example:
        measure_sigma_out(LightHashParams(8, 2), ErrorProfile(sigma_phase=
                          0.005)).k_phase
    """
    if trials < 1000:
        logger.warning("Only %d trials: statistical error of the cell will "
                       "be large", trials)

    n, k = params.n, params.k
    t_int = params.t_int if params.t_int is not None \
        else population_threshold(n, k)
    params = params.with_threshold(t_int)
    cell = simulate_cell(params, profile, trials, seed, devices, copies,
                         wavelength)
    rho = estimate_rho(n, k, t_int)
    coefficients = {}
    active = _active_kinds(profile)

    if len(active) == 1:
        kind = active[0]
        coefficients[kind] = _coefficient(cell.sigma_out, n, k,
                                          profile.sigma_of(kind))
    elif isolate:
        for kind in active:
            alone = simulate_cell(params, profile.isolated(kind), trials,
                                  seed, devices, copies, wavelength)
            coefficients[kind] = _coefficient(alone.sigma_out, n, k,
                                              profile.sigma_of(kind))

    logger.debug("Cell N=%d K=%d R=%d: sigma_out=%.4g eps=%.4g", n, k,
                 copies, cell.sigma_out, cell.hash_error)

    return ScalingFit(
        n=n,
        k=k,
        profile=profile,
        sigma_out=cell.sigma_out,
        rho=rho,
        t_int=t_int,
        eps_measured=cell.hash_error,
        eps_predicted=cell.predicted_hash_error,
        bit_error=cell.bit_error,
        trials=trials,
        copies=copies,
        seed=seed,
        wavelength=profile.lambda_c if wavelength is None else wavelength,
        k_phase=coefficients.get("phase"),
        k_coupling=coefficients.get("coupling"),
        k_loss=coefficients.get("loss"),
        bit_predicted=cell.predicted_bit_error,
        eps_scalar=predict_hash_error(rho, cell.sigma_out).linear,
    )


def fit_error_coefficients(fits: Iterable[ScalingFit]) -> Dict[str, float]:
    """
    Least-squares fit through the origin of `sigma_out^2` against
    `N^2 K^2 sigma^2` for every error kind, using the cells where that kind
    was the only one switched on.

    Returns:
        `{"phase": k, "coupling": k, "loss": k}` for the kinds present.
    """
    sums: Dict[str, List[float]] = {}

    for fit in fits:
        active = _active_kinds(fit.profile)

        if len(active) != 1:
            continue

        kind = active[0]
        x = (fit.n * fit.k * fit.profile.sigma_of(kind)) ** 2
        y = fit.sigma_out ** 2
        totals = sums.setdefault(kind, [0.0, 0.0])
        totals[0] += x * y
        totals[1] += x * x

    return {kind: xy / xx for kind, (xy, xx) in sums.items() if xx > 0}


###############################################################################
# Sweeps


def scale_profile(template: ErrorProfile, sigma: float) -> ErrorProfile:
    """
    Multiply every sigma (and the common-mode loss) of a template by
    `sigma`; dispersion and wavelength stay as they are.
    """
    return replace(template,
                   sigma_phase=template.sigma_phase * sigma,
                   sigma_coupling=template.sigma_coupling * sigma,
                   sigma_loss_db=template.sigma_loss_db * sigma,
                   mean_loss_db=template.mean_loss_db * sigma)


def _run_cell(task) -> ScalingFit:
    params, profile, trials, seed, devices, copies, wavelength = task

    return measure_sigma_out(params, profile, trials, seed, devices, copies,
                             wavelength)


def _map(function: Callable, tasks: Sequence, jobs: int) -> List:
    if jobs > 1 and len(tasks) > 1:
        with multiprocessing.Pool(jobs) as pool:
            return pool.map(function, tasks)

    return [function(task) for task in tasks]


def feasibility_sweep(n_list: Sequence[int], k_list: Sequence[int],
                      sigma_list: Sequence[float],
                      template: ErrorProfile = None,
                      trials: int = DEFAULT_TRIALS, seed: int = 0,
                      devices: int = DEFAULT_DEVICES, copies: int = 1,
                      wavelength: float = None, jobs: int = 1,
                      separate_kinds: bool = False) -> List[ScalingFit]:
    """
    Measured and predicted hash error over a (N, K, sigma) grid.

    Cell `i` of the grid (N slowest, sigma fastest) is simulated with seed
    `derive_seed(seed, i)`, so the rows do not depend on `jobs`. With
    `separate_kinds` every error kind of the template runs alone, one row
    per (N, K, sigma, kind), and a cell is only as feasible as its worst
    kind (see `feasibility_boundary`).

    Example:
        feasibility_sweep([32, 64], [2, 8], [0.01])
    """
    template = template or UNIT_TEMPLATE
    kinds = _active_kinds(template) if separate_kinds else [None]
    tasks = []
    cells = itertools.product(n_list, k_list, sigma_list, kinds)

    for index, (n, k, sigma, kind) in enumerate(cells):
        profile = scale_profile(template, sigma)

        if kind is not None:
            profile = profile.isolated(kind)

        tasks.append((LightHashParams(n=n, k=k), profile, trials,
                      derive_seed(seed, index), devices, copies, wavelength))

    return _map(_run_cell, tasks, jobs)


@dataclass(frozen=True)
class FeasibilityBoundary:
    """
    Where the digest error of a sweep crosses from usable to useless.

    Attributes:
        nk_low (Optional[float]):
            NK at which the worst error first reaches `low`.
        nk_high (Optional[float]):
            NK at which it first reaches `high`.
        low, high (float):
            The two error levels.
    """
    nk_low: Optional[float]
    nk_high: Optional[float]
    low: float
    high: float

    @property
    def doublings(self) -> Optional[float]:
        """
        Width of the transition in doublings of NK.
        """
        if self.nk_low is None or self.nk_high is None:
            return None

        return math.log2(self.nk_high / self.nk_low)


def _crossing(points: Sequence[Tuple[float, float]],
              level: float) -> Optional[float]:
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        if y0 < level <= y1:
            return x0 + (level - y0) / (y1 - y0) * (x1 - x0)

    return None


def feasibility_boundary(rows: Iterable[ScalingFit], low: float = 0.1,
                         high: float = 0.5) -> FeasibilityBoundary:
    """
    Interpolate, linearly in `log2(NK)`, the NK at which the digest error
    crosses `low` and `high`. Rows of equal NK count with their worst
    error, so per-kind rows give the worst-kind boundary.

    Example:
        feasibility_boundary(feasibility_sweep([32], [2, 4, 8], [0.01],
                                               separate_kinds=True))
    """
    worst: Dict[int, float] = {}

    for row in rows:
        nk = row.n * row.k
        worst[nk] = max(worst.get(nk, 0.0), row.eps_measured)

    points = [(math.log2(nk), error) for nk, error in sorted(worst.items())]
    crossings = [_crossing(points, level) for level in (low, high)]

    return FeasibilityBoundary(
        *(None if value is None else 2.0 ** value for value in crossings),
        low=low, high=high)


def scaling_sweep(n_list: Sequence[int], k_list: Sequence[int],
                  sigma_list: Sequence[float], template: ErrorProfile = None,
                  trials: int = DEFAULT_TRIALS, seed: int = 0,
                  devices: int = DEFAULT_DEVICES,
                  jobs: int = 1) -> List[ScalingFit]:
    """
    Like `feasibility_sweep`, but every error kind of the template runs in
    isolation, one row per (N, K, sigma, kind); feed the rows to
    `fit_error_coefficients`.
    """
    template = template or UNIT_TEMPLATE
    tasks = []
    cells = itertools.product(n_list, k_list, sigma_list,
                              _active_kinds(template))

    for index, (n, k, sigma, kind) in enumerate(cells):
        profile = scale_profile(template, sigma).isolated(kind)
        tasks.append((LightHashParams(n=n, k=k), profile, trials,
                      derive_seed(seed, index), devices, 1, None))

    return _map(_run_cell, tasks, jobs)


def correction_sweep(n: int, k: int, profile: ErrorProfile,
                     r_list: Sequence[int] = (1, 4),
                     trials: int = DEFAULT_TRIALS, seed: int = 0,
                     devices: int = DEFAULT_DEVICES,
                     jobs: int = 1) -> List[ScalingFit]:
    """
    The same devices measured with R cyclic-permutation copies for every R
    in `r_list`; copies draw independent errors.
    """
    tasks = [(LightHashParams(n=n, k=k, copies=copies), profile, trials, seed,
              devices, copies, None) for copies in r_list]

    return _map(_run_cell, tasks, jobs)


def correction_ratio(rows: Sequence[ScalingFit], low: int = 1,
                     high: int = 4) -> float:
    """
    `sigma_out(R=low) / sigma_out(R=high)`, ideally `sqrt(high / low)`.
    """
    by_copies = {row.copies: row.sigma_out for row in rows}

    return by_copies[low] / by_copies[high]


@dataclass(frozen=True)
class DispersionFit:
    """
    Quadratic error dispersion `eps = eps_c (1 + D (lambda - lambda_c)^2)`.

    Attributes:
        epsilon_center (float):
            Fitted error rate at the centre wavelength.
        d_epsilon (float):
            Relative dispersion D in nm^-2.
        lambda_c (float):
            Centre wavelength in nm.
        r_squared (float):
            Coefficient of determination of the fit.
        vertex (Optional[float]):
            Minimum of a free quadratic fit, `None` when it opens downwards.
        points (Tuple[Tuple[float, float], ...]):
            Measured `(lambda, eps)` pairs.
        n, k (Optional[int]):
            The cell swept, when the fit comes from a sweep.
        metric (str):
            Error rate fitted, a key of `DISPERSION_METRICS`.
    """
    epsilon_center: float
    d_epsilon: float
    lambda_c: float
    r_squared: float
    vertex: Optional[float]
    points: Tuple[Tuple[float, float], ...]
    n: Optional[int] = None
    k: Optional[int] = None
    metric: str = "hash"

    def csv_row(self) -> Dict[str, Any]:
        return {column: getattr(self, column)
                for column in DISPERSION_COLUMNS}


def fit_dispersion(wavelengths: Sequence[float], rates: Sequence[float],
                   lambda_c: float) -> DispersionFit:
    """
    Least-squares fit of `eps = a + b (lambda - lambda_c)^2`.

    Raises:
        DegenerateFit:
            The fitted centre error rate is not positive.
    """
    offsets = np.asarray(wavelengths, dtype=float) - lambda_c
    rates = np.asarray(rates, dtype=float)
    design = np.column_stack([np.ones_like(offsets), offsets ** 2])
    (a, b), *_ = np.linalg.lstsq(design, rates, rcond=None)

    if a <= 0:
        raise DegenerateFit

    residual = float(np.sum((rates - design @ np.array([a, b])) ** 2))
    total = float(np.sum((rates - rates.mean()) ** 2))
    r_squared = 1.0 - residual / total if total > 0 else 1.0

    curvature, slope, _ = np.polyfit(offsets, rates, 2)
    vertex = lambda_c - slope / (2 * curvature) if curvature > 0 else None

    return DispersionFit(
        epsilon_center=float(a),
        d_epsilon=float(b / a),
        lambda_c=lambda_c,
        r_squared=r_squared,
        vertex=vertex,
        points=tuple(zip(map(float, wavelengths), map(float, rates))),
    )


def dispersion_rows(params: LightHashParams, profile: ErrorProfile,
                    lambda_list: Sequence[float],
                    trials: int = DEFAULT_TRIALS, seed: int = 0,
                    devices: int = DEFAULT_DEVICES,
                    jobs: int = 1) -> List[ScalingFit]:
    """
    Measure one cell per wavelength.

    All wavelengths share one seed, so they see the same fabricated
    devices and differ only by the dispersion terms.
    """
    offsets = np.asarray(lambda_list, dtype=float) - profile.lambda_c

    if not np.isclose(offsets.min(), -offsets.max()):
        logger.warning("Wavelengths do not span %.2f nm symmetrically",
                       profile.lambda_c)

    if params.t_int is None:
        params = params.with_threshold(population_threshold(params.n,
                                                            params.k))

    tasks = [(params, profile, trials, seed, devices, params.copies,
              wavelength) for wavelength in lambda_list]

    return _map(_run_cell, tasks, jobs)


def dispersion_sweep(params: LightHashParams, profile: ErrorProfile,
                     lambda_list: Sequence[float],
                     trials: int = DEFAULT_TRIALS, seed: int = 0,
                     devices: int = DEFAULT_DEVICES, jobs: int = 1,
                     metric: str = "hash") -> DispersionFit:
    """
    Measure the error rate at every wavelength and fit the quadratic
    dispersion law around `profile.lambda_c`.

    Arguments:
        metric:
            "hash" fits the digest error, "bit" the per-bit error, which
            does not saturate at 1.

    Raises:
        InvalidParameters:
            Unknown metric.
        DegenerateFit:
            No error at the centre wavelength.
    """
    if metric not in DISPERSION_METRICS:
        raise InvalidParameters("the dispersion metric must be one of "
                                "{names}".format(names=", ".join(
                                    sorted(DISPERSION_METRICS))))

    rows = dispersion_rows(params, profile, lambda_list, trials, seed,
                           devices, jobs)
    rates = [getattr(row, DISPERSION_METRICS[metric]) for row in rows]

    try:
        fit = fit_dispersion([row.wavelength for row in rows], rates,
                             profile.lambda_c)
    except DegenerateFit:
        logger.warning("Zero error rate at the centre wavelength")
        raise

    return replace(fit, n=params.n, k=params.k, metric=metric)


def dispersion_k_sweep(n: int, k_list: Sequence[int], profile: ErrorProfile,
                       lambda_list: Sequence[float],
                       trials: int = DEFAULT_TRIALS, seed: int = 0,
                       devices: int = DEFAULT_DEVICES, jobs: int = 1,
                       metric: str = "hash") -> List[DispersionFit]:
    """
    One dispersion fit per resolution K at fixed N.

    The same wavelength offset raises every K's output error by about the
    same factor, and a larger error sits on a flatter part of the error
    curve, so the relative dispersion D falls as K grows.

    Example:
        dispersion_k_sweep(8, [2, 8], profile, [1540, 1550, 1560])
    """
    return [dispersion_sweep(LightHashParams(n=n, k=k), profile, lambda_list,
                             trials, seed, devices, jobs, metric)
            for k in k_list]


def _csv_value(value: Any) -> Any:
    if value is None:
        return ""

    return repr(value) if isinstance(value, float) else value


def write_sweep_csv(rows: Iterable[ScalingFit], path: str) -> None:
    """
    Write sweep rows with the columns of `CSV_COLUMNS`; floats use `repr`,
    so equal rows give byte-identical files.
    """
    with open(path, "w", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)

        for row in rows:
            values = row.csv_row()
            writer.writerow([_csv_value(values[column])
                             for column in CSV_COLUMNS])


def write_dispersion_csv(fits: Iterable[DispersionFit], path: str) -> None:
    """
    One row per fit with the columns of `DISPERSION_COLUMNS`.
    """
    with open(path, "w", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(DISPERSION_COLUMNS)

        for fit in fits:
            values = fit.csv_row()
            writer.writerow([_csv_value(values[column])
                             for column in DISPERSION_COLUMNS])


###############################################################################
# State space, energy, rescaling


@dataclass(frozen=True)
class StateSpace:
    count: int
    log10: float


def state_space(n: int, k: int) -> StateSpace:
    """
    Number `(2K)^N` of distinct row computations, the size of a lookup table
    an attacker would have to cache.

    Example:
        state_space(4, 9).count -> 104976
    """
    count = (2 * k) ** n

    return StateSpace(count=count, log10=n * math.log10(2 * k))


@dataclass(frozen=True)
class EnergyModel:
    """
    Attributes:
        comparator_fj_per_bit (Decimal):
            Energy of one output comparator decision.
        modulator_fj_per_bit (Decimal):
            Energy of one input phase modulation.
        digital_op_pj (Decimal):
            Energy A of one digital multiply-accumulate.
        sha_asic_pj_per_hash (Decimal):
            Energy of one SHA-256 evaluation on an ASIC, for reference.
    """
    comparator_fj_per_bit: Decimal = Decimal("40")
    modulator_fj_per_bit: Decimal = Decimal("1")
    digital_op_pj: Decimal = Decimal("0.1")
    sha_asic_pj_per_hash: Decimal = Decimal("10")

    def __post_init__(self) -> None:
        for name in ("comparator_fj_per_bit", "modulator_fj_per_bit",
                     "digital_op_pj", "sha_asic_pj_per_hash"):
            value = Decimal(str(getattr(self, name)))

            if value < 0:
                raise InvalidParameters("{name} must not be negative".format(
                    name=name))

            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class EnergyEstimate:
    photonic_pj_per_hash: Decimal
    digital_matmul_pj_per_hash: Decimal
    sha_asic_pj_per_hash: Decimal
    ratio: Decimal

    def to_dict(self) -> Dict[str, str]:
        return {
            "photonic_pj_per_hash": str(self.photonic_pj_per_hash),
            "digital_matmul_pj_per_hash": str(
                self.digital_matmul_pj_per_hash),
            "sha_asic_pj_per_hash": str(self.sha_asic_pj_per_hash),
            "ratio": str(self.ratio),
        }


def energy_estimate(n: int, k: int = 2,
                    model: EnergyModel = None) -> EnergyEstimate:
    """
    Energy per hash of the photonic matrix product (one modulation and one
    comparison per bit) against the digital one (`256 N` operations).

    Raises:
        InvalidParameters:
            N does not divide 256.

    Example:
        energy_estimate(64).photonic_pj_per_hash -> Decimal("10.496")
    """
    if not is_power_of_two(n) or n > DIGEST_BITS:
        raise InvalidParameters("N must be a power of two dividing 256")

    if k < 2:
        raise InvalidParameters("K must be at least 2")

    model = model or EnergyModel()
    photonic = DIGEST_BITS * (model.modulator_fj_per_bit
                              + model.comparator_fj_per_bit) / 1000
    digital = DIGEST_BITS * n * model.digital_op_pj

    return EnergyEstimate(
        photonic_pj_per_hash=photonic,
        digital_matmul_pj_per_hash=digital,
        sha_asic_pj_per_hash=model.sha_asic_pj_per_hash,
        ratio=digital / photonic if photonic else Decimal("Infinity"),
    )


@dataclass(frozen=True)
class RescaleResult:
    """
    Attributes:
        xi (float):
            Fraction of the input power tapped off as the reference.
        responsivity_ratio (float):
            Detector responsivity ratio `eta_ref / eta_out`.
        c_out, c_ref (float):
            Power scale of the output and reference detectors.
        sigma_max, p_th, loss_fraction, power (float):
            The inputs.
        n (int):
            Number of ports.
    """
    xi: float
    responsivity_ratio: float
    c_out: float
    c_ref: float
    sigma_max: float
    p_th: float
    loss_fraction: float
    power: float
    n: int


def _check_rescale(sigma_max: float, p_th: float,
                   loss_fraction: float) -> None:
    if sigma_max <= 0:
        raise InvalidParameters("sigma_max must be positive")

    if p_th <= 0:
        raise InvalidParameters("p_th must be positive")

    if not 0 < loss_fraction <= 1:
        raise InvalidParameters("the loss fraction L must be in (0, 1]")


def rescale_tap(sigma_max: float, p_th: float, loss_fraction: float,
                power: float = 1.0, n: int = 1) -> RescaleResult:
    """
    Tap fraction `xi = 1 / (1 + sigma_max^2 / (p_th L))` at which the
    reference detector sees exactly the threshold power with equal
    responsivities.

    Example:
        rescale_tap(1.0, 4.0, 1.0).xi -> 0.8
    """
    _check_rescale(sigma_max, p_th, loss_fraction)
    ratio = sigma_max ** 2 / (p_th * loss_fraction)
    xi = 1.0 / (1.0 + ratio)

    return RescaleResult(
        xi=xi,
        responsivity_ratio=ratio,
        c_out=(1 - xi) * power * loss_fraction / (sigma_max ** 2 * n),
        c_ref=xi * power / n,
        sigma_max=sigma_max,
        p_th=p_th,
        loss_fraction=loss_fraction,
        power=power,
        n=n,
    )


def alternate_rescale(sigma_max: float, p_th: float, loss_fraction: float,
                      power: float = 1.0, n: int = 1) -> RescaleResult:
    """
    The fixed half tap: `xi = 0.5` and the threshold is set by the
    responsivity ratio `eta_ref / eta_out = sigma_max^2 / (p_th L)` instead.
    """
    _check_rescale(sigma_max, p_th, loss_fraction)
    ratio = sigma_max ** 2 / (p_th * loss_fraction)

    return RescaleResult(
        xi=0.5,
        responsivity_ratio=ratio,
        c_out=0.5 * power * loss_fraction / (sigma_max ** 2 * n),
        c_ref=0.5 * power / n,
        sigma_max=sigma_max,
        p_th=p_th,
        loss_fraction=loss_fraction,
        power=power,
        n=n,
    )
