"""
Here is defined the run configuration shared by every command.

Values come, in this order of precedence, from command-line flags, the
`LIGHTHASH_SEED` environment variable (seed only), a configuration file
(`--config` or `.lighthash.yml` in the working directory) and the defaults
below. Configuration files are YAML; JSON documents are accepted as they
are.
"""

import json
import logging
import os
import os.path

from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Mapping, Optional, Tuple

import yaml

from lighthash.chain import DifficultySchedule
from lighthash.data_types import LightHashParams
from lighthash.error_model import ErrorProfile
from lighthash.exceptions import InvalidConfig, InvalidParameters

logger = logging.getLogger(__name__)

CONFIG_FILE = ".lighthash.yml"
SEED_VARIABLE = "LIGHTHASH_SEED"


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a run depends on; a run is reproducible from its snapshot.

    Example:
        RunConfig(n=8, k=4, difficulty=DifficultySchedule(12), seed=7)
    """
    chain_dir: str = "chain"
    n: int = 8
    k: int = 4
    mode: str = "unsigned"
    copies: int = 1
    batch: int = 64
    layout: str = "rectangular"
    profile: ErrorProfile = field(default_factory=ErrorProfile)
    wavelength: Optional[float] = None
    difficulty: DifficultySchedule = field(
        default_factory=DifficultySchedule)
    n_list: Tuple[int, ...] = (8, 16, 32)
    k_list: Tuple[int, ...] = (2, 4)
    sigma_list: Tuple[float, ...] = (0.005,)
    lambda_list: Tuple[float, ...] = (1540.0, 1545.0, 1550.0, 1555.0,
                                      1560.0)
    r_list: Tuple[int, ...] = (1, 4)
    seed: int = 0
    trials: int = 2000
    devices: int = 8
    jobs: int = 1
    output: Optional[str] = None

    def __post_init__(self) -> None:
        for name in ("n_list", "k_list", "r_list"):
            object.__setattr__(self, name,
                               tuple(int(value) for value in
                                     getattr(self, name)))

        for name in ("sigma_list", "lambda_list"):
            object.__setattr__(self, name,
                               tuple(float(value) for value in
                                     getattr(self, name)))

        for name in ("trials", "devices", "jobs"):
            if getattr(self, name) < 1:
                raise InvalidConfig("{name} must be at least 1".format(
                    name=name))

        if not 0 <= self.seed < 1 << 64:
            raise InvalidConfig("seed must be an unsigned 64-bit integer")

        try:
            self.params
        except InvalidParameters as error:
            raise InvalidConfig(str(error))

    @property
    def params(self) -> LightHashParams:
        return LightHashParams(n=self.n, k=self.k, mode=self.mode,
                               copies=self.copies, batch=self.batch)

    def to_dict(self) -> Dict[str, Any]:
        data = {}

        for item in fields(self):
            value = getattr(self, item.name)

            if isinstance(value, ErrorProfile):
                value = value.to_dict()
            elif isinstance(value, DifficultySchedule):
                value = value.to_dict()
            elif isinstance(value, tuple):
                value = list(value)

            data[item.name] = value

        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        """
        Raises:
            InvalidConfig:
                Unknown keys or invalid values.
        """
        known = {item.name for item in fields(cls)}
        unknown = sorted(set(data) - known)

        if unknown:
            raise InvalidConfig("unknown configuration keys: {keys}".format(
                keys=", ".join(unknown)))

        values = dict(data)

        try:
            if "profile" in values and not isinstance(values["profile"],
                                                      ErrorProfile):
                values["profile"] = ErrorProfile.from_dict(
                    values["profile"] or {})

            if "difficulty" in values and not isinstance(
                    values["difficulty"], DifficultySchedule):
                values["difficulty"] = _schedule(values["difficulty"])

            return cls(**values)
        except InvalidConfig:
            raise
        except (InvalidParameters, TypeError, ValueError) as error:
            raise InvalidConfig("invalid configuration: {error}".format(
                error=error))

    def write_snapshot(self, output: str) -> str:
        """
        Write the resolved configuration next to an output file.

        Returns:
            The snapshot path, `<output>.config.json`.
        """
        path = output + ".config.json"

        with open(path, "w") as file:
            file.write(self.to_json())

        return path


def _schedule(value: Any) -> DifficultySchedule:
    if isinstance(value, int):
        return DifficultySchedule(default=value)

    if isinstance(value, Mapping):
        unknown = set(value) - {"default", "steps"}

        if unknown:
            raise InvalidConfig("unknown difficulty keys: {keys}".format(
                keys=", ".join(sorted(map(str, unknown)))))

        return DifficultySchedule(**value)

    raise InvalidConfig("difficulty must be an integer or a mapping with "
                        "'default' and 'steps'")


def read_config_file(path: str) -> Dict[str, Any]:
    """
    Parse a configuration file.

    Raises:
        InvalidConfig:
            Missing file, invalid syntax or not a mapping.
    """
    try:
        with open(path) as file:
            content = yaml.safe_load(file.read())
    except FileNotFoundError:
        raise InvalidConfig("configuration file {path} not found".format(
            path=path))
    except yaml.YAMLError as error:
        raise InvalidConfig("cannot parse {path}: {error}".format(
            path=path, error=error))

    if content is None:
        return {}

    if not isinstance(content, dict):
        raise InvalidConfig("{path} must contain a mapping".format(path=path))

    return content


def load_config(path: str = None, overrides: Mapping[str, Any] = None,
                environ: Mapping[str, str] = None) -> RunConfig:
    """
    Resolve the run configuration.

    Arguments:
        path:
            Configuration file; `.lighthash.yml` is used when it exists and
            no path is given.
        overrides:
            Values of command-line flags; `None` values are ignored.
        environ:
            Environment, `os.environ` by default.

    Raises:
        InvalidConfig:
            Anything wrong with the file, the environment or the values.
    """
    environ = os.environ if environ is None else environ

    if path is not None:
        data = read_config_file(path)
    elif os.path.isfile(CONFIG_FILE):
        logger.debug("Using %s", CONFIG_FILE)
        data = read_config_file(CONFIG_FILE)
    else:
        data = {}

    seed = environ.get(SEED_VARIABLE)

    if seed is not None:
        try:
            data["seed"] = int(seed, 0)
        except ValueError:
            raise InvalidConfig("{name} must be an integer, got {seed!r}"
                                .format(name=SEED_VARIABLE, seed=seed))

    for name, value in (overrides or {}).items():
        if value is not None:
            data[name] = value

    return RunConfig.from_dict(data)


def with_overrides(config: RunConfig, **values: Any) -> RunConfig:
    """
    Copy of a configuration with some values replaced (`None` ignored).
    """
    values = {name: value for name, value in values.items()
              if value is not None}

    try:
        return replace(config, **values)
    except (InvalidParameters, TypeError) as error:
        raise InvalidConfig(str(error))
