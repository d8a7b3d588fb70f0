"""
Here is defined the statistical model of systematic photonic errors: phase,
coupling and loss deviations of every MZI node, including their wavelength
dispersion, and the deterministic sampling of one concrete draw.

A draw is static per programmed device (one `ErrorSample` per mesh, reused
for every input), because fabrication and programming errors do not change
from shot to shot.
"""

import json
import logging
import math

from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Optional, Union

import numpy as np

from lighthash.exceptions import InvalidProfile, ShapeMismatch

logger = logging.getLogger(__name__)

PROFILE_KEYS = (
    "sigma_phase",
    "sigma_coupling",
    "sigma_loss_db",
    "mean_loss_db",
    "mu_bs",
    "mu_eta",
    "lambda_c",
    "detection_noise_sigma",
)
ERROR_KINDS = ("phase", "coupling", "loss")


@dataclass(frozen=True)
class ErrorProfile:
    """
    Statistical parameters of the systematic errors of a photonic mesh.

    Attributes:
        sigma_phase (float):
            Standard deviation of every phase shift, in radians.
        sigma_coupling (float):
            Standard deviation of every 50:50 coupler angle, in radians.
        sigma_loss_db (float):
            Standard deviation of every phase-shifter loss, in dB.
        mean_loss_db (float):
            Common-mode loss of every phase shifter, in dB. Defaults to
            `3 * sigma_loss_db`, which keeps the clamp at 0 dB negligible.
        mu_bs (float):
            Coupling dispersion in rad/nm^2.
        mu_eta (float):
            Phase dispersion in rad/nm.
        lambda_c (float):
            Centre wavelength in nm.
        detection_noise_sigma (float):
            Additive photodetection noise in power units (off by default).
    """
    sigma_phase: float = 0.0
    sigma_coupling: float = 0.0
    sigma_loss_db: float = 0.0
    mean_loss_db: Optional[float] = None
    mu_bs: float = 0.0
    mu_eta: float = 0.0
    lambda_c: float = 1550.0
    detection_noise_sigma: float = 0.0

    def __post_init__(self) -> None:
        if self.mean_loss_db is None:
            object.__setattr__(self, "mean_loss_db", 3 * self.sigma_loss_db)

        for item in fields(self):
            value = float(getattr(self, item.name))

            if not math.isfinite(value):
                raise InvalidProfile(
                    "{name} must be finite, got {value}".format(
                        name=item.name, value=value))

            object.__setattr__(self, item.name, value)

        for name in ("sigma_phase", "sigma_coupling", "sigma_loss_db",
                     "mean_loss_db", "detection_noise_sigma"):
            if getattr(self, name) < 0:
                raise InvalidProfile("{name} must not be negative".format(
                    name=name))

        if self.lambda_c <= 0:
            raise InvalidProfile("lambda_c must be positive")

    @classmethod
    def zero(cls) -> "ErrorProfile":
        """
        The error-free profile.
        """
        return cls()

    @classmethod
    def scaled(cls, sigma: float, **overrides: float) -> "ErrorProfile":
        """
        Profile with `sigma` rad of phase and coupling error and `3 * sigma`
        dB of loss error.

        Example:
            ErrorProfile.scaled(0.01)  # 0.01 rad, 0.01 rad, 0.03 dB
        """
        values = dict(sigma_phase=sigma, sigma_coupling=sigma,
                      sigma_loss_db=3 * sigma)
        values.update(overrides)

        return cls(**values)

    def isolated(self, kind: str) -> "ErrorProfile":
        """
        Copy of this profile where only one error type stays switched on.

        Arguments:
            kind:
                One of "phase", "coupling" or "loss".

        Raises:
            InvalidProfile:
                Unknown error kind.
        """
        if kind == "phase":
            return replace(self, sigma_coupling=0.0, sigma_loss_db=0.0,
                           mean_loss_db=0.0, mu_bs=0.0)
        elif kind == "coupling":
            return replace(self, sigma_phase=0.0, sigma_loss_db=0.0,
                           mean_loss_db=0.0, mu_eta=0.0)
        elif kind == "loss":
            return replace(self, sigma_phase=0.0, sigma_coupling=0.0,
                           mu_bs=0.0, mu_eta=0.0)

        raise InvalidProfile("unknown error kind {kind!r}, use one of "
                             "{kinds}".format(kind=kind, kinds=ERROR_KINDS))

    def sigma_of(self, kind: str) -> float:
        """
        The sigma belonging to an error kind (rad or dB).
        """
        return {
            "phase": self.sigma_phase,
            "coupling": self.sigma_coupling,
            "loss": self.sigma_loss_db,
        }[kind]

    @property
    def is_zero(self) -> bool:
        return all(getattr(self, name) == 0 for name in PROFILE_KEYS
                   if name != "lambda_c")

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ErrorProfile":
        """
        Build a profile from a mapping with (a subset of) `PROFILE_KEYS`.

        Raises:
            InvalidProfile:
                Unknown keys or invalid values.
        """
        unknown = sorted(set(data) - set(PROFILE_KEYS))

        if unknown:
            raise InvalidProfile("unknown error profile keys: {keys}".format(
                keys=", ".join(unknown)))

        try:
            return cls(**data)
        except (TypeError, ValueError) as error:
            raise InvalidProfile("invalid error profile: {error}".format(
                error=error))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ErrorProfile":
        try:
            data = json.loads(text)
        except ValueError as error:
            raise InvalidProfile("malformed error profile JSON: {error}"
                                 .format(error=error))

        if not isinstance(data, dict):
            raise InvalidProfile("an error profile must be a JSON object")

        return cls.from_dict(data)


@dataclass(frozen=True)
class NodeError:
    """
    Concrete errors of one MZI node.

    Attributes:
        delta_theta, delta_phi (float):
            Phase deviations of the internal / external phase shifter (rad).
        delta_l, delta_r (float):
            Coupling deviations of the left / right 50:50 coupler (rad).
        loss_theta_db, loss_phi_db (float):
            Loss of the internal / external phase-shifter arm (dB).
        common_loss_db (float):
            Loss of the matched arm opposite each phase shifter (dB).
    """
    delta_theta: float = 0.0
    delta_phi: float = 0.0
    delta_l: float = 0.0
    delta_r: float = 0.0
    loss_theta_db: float = 0.0
    loss_phi_db: float = 0.0
    common_loss_db: float = 0.0


_SAMPLE_ARRAYS = ("delta_theta", "delta_phi", "delta_l", "delta_r",
                  "loss_theta_db", "loss_phi_db")


@dataclass(frozen=True, eq=False)
class ErrorSample:
    """
    One concrete draw of per-node errors for a whole (flattened) mesh.

    The loss arrays hold the loss of every phase-shifter arm in dB;
    `common_loss_db` is the loss of the matched arm opposite every phase
    shifter and of the loss-matched idle segments of a rectangular mesh. A
    differential sample returned by `lighthash.mesh.factor_common_loss`
    has `common_loss_db == 0` and may hold negative (relative) losses.
    """
    delta_theta: np.ndarray
    delta_phi: np.ndarray
    delta_l: np.ndarray
    delta_r: np.ndarray
    loss_theta_db: np.ndarray
    loss_phi_db: np.ndarray
    common_loss_db: float = 0.0
    wavelength: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        sizes = set()

        for name in _SAMPLE_ARRAYS:
            array = np.array(getattr(self, name), dtype=float).reshape(-1)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
            sizes.add(array.size)

        if len(sizes) > 1:
            raise ShapeMismatch("error sample arrays", "equal lengths",
                                sorted(sizes))

    @classmethod
    def zeros(cls, n_nodes: int, wavelength: float = None) -> "ErrorSample":
        zeros = np.zeros(n_nodes)

        return cls(*(zeros for _ in _SAMPLE_ARRAYS), wavelength=wavelength,
                   seed=None)

    @property
    def n_nodes(self) -> int:
        return self.delta_theta.size

    def slice(self, start: int, stop: int) -> "ErrorSample":
        """
        The errors of nodes `start .. stop - 1`.
        """
        arrays = {name: getattr(self, name)[start:stop]
                  for name in _SAMPLE_ARRAYS}

        return replace(self, **arrays)

    def node(self, index: int) -> NodeError:
        values = {name: float(getattr(self, name)[index])
                  for name in _SAMPLE_ARRAYS}

        return NodeError(common_loss_db=self.common_loss_db, **values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ErrorSample):
            return NotImplemented

        return all(np.array_equal(getattr(self, name), getattr(other, name))
                   for name in _SAMPLE_ARRAYS) \
            and self.common_loss_db == other.common_loss_db \
            and self.wavelength == other.wavelength \
            and self.seed == other.seed

    __hash__ = None


def sample_errors(profile: ErrorProfile, mesh_shape: Union[int, Any],
                  wavelength: float = None, seed: int = 0) -> ErrorSample:
    """
    Draw one concrete error sample for a mesh.

    Coupling deviations follow `Normal(mu_bs * (lambda - lambda_c)^2,
    sigma_coupling)`, phase deviations `Normal(mu_eta * (lambda -
    lambda_c), sigma_phase)` and every phase-shifter loss is
    `max(0, mean_loss_db + Normal(0, sigma_loss_db))`. The same seed at two
    wavelengths shares the fabrication part of the draw.

    Arguments:
        profile:
            The error statistics.
        mesh_shape:
            Number of nodes, or any program exposing `n_nodes`.
        wavelength:
            Wavelength in nm, `profile.lambda_c` by default.
        seed:
            Seed of the draw.

    Returns:
        The error sample.

    Example:
        sample_errors(ErrorProfile.scaled(0.01), program, seed=3)
    """
    n_nodes = int(getattr(mesh_shape, "n_nodes", mesh_shape))

    if wavelength is None:
        wavelength = profile.lambda_c

    offset = wavelength - profile.lambda_c
    coupling_mean = profile.mu_bs * offset ** 2
    phase_mean = profile.mu_eta * offset

    rng = np.random.default_rng(seed)

    delta_l = rng.normal(coupling_mean, profile.sigma_coupling, n_nodes)
    delta_r = rng.normal(coupling_mean, profile.sigma_coupling, n_nodes)
    delta_theta = rng.normal(phase_mean, profile.sigma_phase, n_nodes)
    delta_phi = rng.normal(phase_mean, profile.sigma_phase, n_nodes)
    loss_theta = np.maximum(0.0, profile.mean_loss_db
                            + rng.normal(0.0, profile.sigma_loss_db, n_nodes))
    loss_phi = np.maximum(0.0, profile.mean_loss_db
                          + rng.normal(0.0, profile.sigma_loss_db, n_nodes))

    return ErrorSample(
        delta_theta=delta_theta,
        delta_phi=delta_phi,
        delta_l=delta_l,
        delta_r=delta_r,
        loss_theta_db=loss_theta,
        loss_phi_db=loss_phi,
        common_loss_db=profile.mean_loss_db,
        wavelength=float(wavelength),
        seed=seed,
    )


def detection_noise(powers: np.ndarray, sigma: float,
                    seed: int = 0) -> np.ndarray:
    """
    Add independent `Normal(0, sigma)` noise to detected powers, clamping
    the result at zero.

    Raises:
        InvalidProfile:
            Negative sigma.
    """
    if sigma < 0:
        raise InvalidProfile("detection noise sigma must not be negative")

    powers = np.asarray(powers, dtype=float)

    if sigma == 0:
        return powers.copy()

    rng = np.random.default_rng(seed)

    return np.maximum(0.0, powers + rng.normal(0.0, sigma, powers.shape))
