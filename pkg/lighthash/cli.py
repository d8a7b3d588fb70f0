"""
Here are defined command line interfaces (CLI) as functions.

Note:
    The CLI docstrings have very short documentation, because they're
    taken as CLI description. The rest is written in comments or help
    arguments of each parameter.

Exit codes: 0 success, 1 a validation failure (or a block that could not be
mined), 2 a usage or input error.
"""

import contextlib
import functools
import json
import logging
import os.path

from dataclasses import replace
from decimal import Decimal
from typing import Iterator, List, Optional

import click

from lighthash.analysis import (
    DISPERSION_METRICS, UNIT_TEMPLATE, EnergyModel, correction_ratio,
    correction_sweep, dispersion_k_sweep, dispersion_rows, energy_estimate,
    feasibility_boundary, feasibility_sweep, fit_dispersion,
    fit_error_coefficients, scale_profile, scaling_sweep,
    write_dispersion_csv, write_sweep_csv
)
from lighthash.chain import (
    FORMAT_CHECK, BackendFactory, ChainStore, generate_block_matrix,
    mine_block, threshold_seed, validate_block, validate_chain
)
from lighthash.config import RunConfig, load_config
from lighthash.data_types import LightHashParams
from lighthash.digest import (
    BACKENDS, lighthash_trace, parse_header, select_threshold
)
from lighthash.error_model import ErrorProfile
from lighthash.exceptions import (
    ChainStoreError, DegenerateFit, LightHashError
)
from lighthash.helpers import derive_seed, parse_hex

logger = logging.getLogger(__name__)

SWEEP_KINDS = ("scaling", "feasibility", "dispersion", "dispersion-k",
               "correction")


@contextlib.contextmanager
def usage_errors() -> Iterator[None]:
    """
    Turn errors about user input into a usage error (exit code 2).
    """
    try:
        yield
    except LightHashError as error:
        raise click.UsageError(str(error))


class EchoHandler(logging.Handler):
    """
    Log records go to the standard error stream click currently uses.
    """

    def emit(self, record: logging.LogRecord) -> None:
        click.echo(self.format(record), err=True)


def _configure_logging(verbose: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    package_logger = logging.getLogger("lighthash")

    if not any(isinstance(handler, EchoHandler)
               for handler in package_logger.handlers):
        handler = EchoHandler()
        handler.setFormatter(
            logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        package_logger.addHandler(handler)

    package_logger.setLevel(level)


def _config(ctx: click.Context, **overrides) -> RunConfig:
    with usage_errors():
        return load_config(ctx.obj.get("config"), overrides)


def _int_list(ctx, param, value: Optional[str]):
    if value is None:
        return None

    try:
        return [int(item) for item in value.split(",") if item.strip()]
    except ValueError:
        raise click.BadParameter("expected comma separated integers")


def _float_list(ctx, param, value: Optional[str]):
    if value is None:
        return None

    try:
        return [float(item) for item in value.split(",") if item.strip()]
    except ValueError:
        raise click.BadParameter("expected comma separated numbers")


def _read_profile(path: Optional[str]) -> Optional[ErrorProfile]:
    if path is None:
        return None

    with open(path) as file, usage_errors():
        return ErrorProfile.from_json(file.read())


def _backend_factory(name: str, config: RunConfig,
                     profile: ErrorProfile) -> Optional[BackendFactory]:
    """
    Builder of the named backend for a block matrix; `None` stands for the
    integer oracle.
    """
    if name == "oracle":
        return None

    return functools.partial(BACKENDS[name], profile=profile,
                             wavelength=config.wavelength, seed=config.seed,
                             layout=config.layout)


def read_transactions(path: str) -> List[bytes]:
    """
    One transaction per non-empty line: hexadecimal when the line parses as
    hex, UTF-8 text otherwise.
    """
    transactions = []

    with open(path) as file:
        for line in file:
            line = line.strip()

            if not line:
                continue

            try:
                transactions.append(bytes.fromhex(line))
            except ValueError:
                transactions.append(line.encode("utf-8"))

    return transactions


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True,
                                                        dir_okay=False),
              help="Configuration file (YAML or JSON).")
@click.option("-v", "--verbose", count=True,
              help="Log more (-v info, -vv debug) to standard error.")
@click.pass_context
def cli(ctx: click.Context, config_path: str, verbose: int) -> None:
    """
    LightHash optical proof of work: hash, mine, verify and analyse.
    """
    _configure_logging(verbose)
    ctx.ensure_object(dict)
    ctx.obj["config"] = config_path


@cli.command("hash")
@click.argument("header", required=False)
@click.option("--header-file", type=click.Path(exists=True, dir_okay=False),
              help="File with the raw header bytes.")
@click.option("--nonce", type=click.IntRange(0, (1 << 64) - 1), default=0,
              show_default=True, help="Unsigned 64-bit nonce.")
@click.option("--backend", type=click.Choice(sorted(BACKENDS)),
              default="oracle", show_default=True)
@click.option("--profile", "profile_path",
              type=click.Path(exists=True, dir_okay=False),
              help="Error profile JSON for the photonic backends.")
@click.option("--copies", type=int, help="Correction copies R.")
@click.option("--mode", type=click.Choice(["unsigned", "signed"]))
@click.option("--wavelength", type=float, help="Wavelength in nm.")
@click.option("--seed", type=int, help="Seed of the simulated device.")
@click.option("--trace", is_flag=True,
              help="Print every chunk's outputs, powers and bits.")
@click.pass_context
def hash_(ctx: click.Context, header: Optional[str], header_file: str,
          nonce: int, backend: str, profile_path: str, copies: int,
          mode: str, wavelength: float, seed: int, trace: bool) -> None:
    """
    Compute the digest of a header and nonce.
    """
    #
    # N, K, t_int and the seeds of Q are read from the header itself.
    #
    config = _config(ctx, seed=seed, copies=copies, mode=mode,
                     wavelength=wavelength)

    if (header is None) == (header_file is None):
        raise click.UsageError("give either a HEADER in hex or "
                               "--header-file")

    if header_file is not None:
        with open(header_file, "rb") as file:
            data = file.read()
    else:
        try:
            data = parse_hex(header)
        except ValueError as error:
            raise click.BadParameter(str(error), param_hint="HEADER")

    profile = _read_profile(profile_path) or config.profile

    with usage_errors():
        fields = parse_header(data)
        params = LightHashParams(n=fields.n, k=fields.k, t_int=fields.t_int,
                                 mode=config.mode, copies=config.copies)
        block_matrix = generate_block_matrix(fields.prev_hash,
                                             fields.merkle_root, fields.n,
                                             fields.k)

        factory = _backend_factory(backend, config, profile) \
            or BACKENDS["oracle"]
        engine = factory(block_matrix, params)

        result = lighthash_trace(data, nonce, block_matrix, params, engine)

    if trace:
        for line in result.lines():
            click.echo(line)
    else:
        click.echo(result.digest.hex())


@cli.command()
@click.option("--count", type=click.IntRange(1), default=1, show_default=True,
              help="Number of blocks to mine.")
@click.option("--transactions", "transactions_path",
              type=click.Path(exists=True, dir_okay=False),
              help="One transaction per line (hex or text).")
@click.option("--chain-dir", help="Chain directory.")
@click.option("-n", type=int, help="Ports per block N.")
@click.option("-k", type=int, help="Numerical resolution K.")
@click.option("--difficulty", type=click.IntRange(0, 256),
              help="Constant difficulty D (overrides the schedule).")
@click.option("--batch", type=int, help="Nonces per evaluation window.")
@click.option("--max-attempts", type=click.IntRange(1),
              help="Give up a block after this many nonces.")
@click.option("--backend", type=click.Choice(sorted(BACKENDS)),
              default="oracle", show_default=True,
              help="Hardware evaluating the nonces.")
@click.option("--profile", "profile_path",
              type=click.Path(exists=True, dir_okay=False),
              help="Error profile JSON for the photonic backends.")
@click.option("--seed", type=int, help="Base seed of the start nonces.")
@click.option("--jobs", type=click.IntRange(1), help="Worker processes.")
@click.pass_context
def mine(ctx: click.Context, count: int, transactions_path: str,
         chain_dir: str, n: int, k: int, difficulty: int, batch: int,
         max_attempts: int, backend: str, profile_path: str, seed: int,
         jobs: int) -> None:
    """
    Mine blocks on top of the chain directory.
    """
    config = _config(ctx, chain_dir=chain_dir, n=n, k=k,
                     difficulty=difficulty, batch=batch, seed=seed,
                     jobs=jobs)
    factory = _backend_factory(backend, config,
                               _read_profile(profile_path) or config.profile)
    store = ChainStore(config.chain_dir)
    given = read_transactions(transactions_path) if transactions_path \
        else None

    with usage_errors():
        tip = store.tip()

        for _ in range(count):
            height = 0 if tip is None else tip.height + 1
            transactions = given or ["coinbase {}".format(height).encode()]
            result = mine_block(tip, transactions, config.params,
                                backend_factory=factory,
                                max_attempts=max_attempts,
                                difficulty=config.difficulty,
                                seed=derive_seed(config.seed, height),
                                jobs=config.jobs)

            if result.exhausted:
                click.echo("height {height}: exhausted after {attempts} "
                           "attempts".format(height=height,
                                             attempts=result.attempts))
                ctx.exit(1)

            #
            # Hardware digests may be wrong; only blocks the oracle accepts
            # join the chain.
            #
            violation = validate_block(result.block, tip)

            if violation is not None:
                click.echo("height {height}: nonce {nonce} failed {check}: "
                           "{message}".format(height=height,
                                              nonce=result.block.nonce,
                                              check=violation.check,
                                              message=violation.message))
                ctx.exit(1)

            store.append(result.block)
            click.echo("height {height} nonce {nonce} attempts {attempts} "
                       "elapsed {elapsed:.3f}s hash {hash}".format(
                           height=height, nonce=result.block.nonce,
                           attempts=result.attempts, elapsed=result.elapsed,
                           hash=result.block.hash.hex()))
            tip = result.block

    config.write_snapshot(os.path.join(config.chain_dir, "mine"))


@cli.command()
@click.argument("directory", required=False)
@click.option("--check-schedule", is_flag=True,
              help="Also check difficulties against the configured "
                   "schedule.")
@click.pass_context
def verify(ctx: click.Context, directory: str, check_schedule: bool) -> None:
    """
    Validate every block of a chain directory.
    """
    config = _config(ctx, chain_dir=directory)

    try:
        blocks = ChainStore(config.chain_dir).load()
    except ChainStoreError as error:
        if error.index is None:
            raise click.UsageError(str(error))

        click.echo("block {index} ({file}) failed {check}: {message}".format(
            index=error.index, file=os.path.basename(error.path),
            check=FORMAT_CHECK, message=error.reason))
        ctx.exit(1)

    with usage_errors():
        violation = validate_chain(
            blocks, config.difficulty if check_schedule else None)

    if violation is not None:
        block = blocks[violation.index]
        click.echo("block {index} (height {height}, {file}) failed "
                   "{check}: {message}".format(
                       index=violation.index, height=block.height,
                       file=block.file_name, check=violation.check,
                       message=violation.message))
        ctx.exit(1)

    click.echo("OK: {count} blocks".format(count=len(blocks)))


@cli.command()
@click.argument("kind", type=click.Choice(SWEEP_KINDS))
@click.option("--output", help="CSV file to write.")
@click.option("--n-list", callback=_int_list, help="e.g. 8,16,32")
@click.option("--k-list", callback=_int_list, help="e.g. 2,4")
@click.option("--sigma-list", callback=_float_list, help="e.g. 0.005,0.01")
@click.option("--lambda-list", callback=_float_list,
              help="Wavelengths in nm, e.g. 1540,1550,1560")
@click.option("--r-list", callback=_int_list, help="e.g. 1,4")
@click.option("-n", type=int, help="N of dispersion / correction sweeps.")
@click.option("-k", type=int, help="K of dispersion / correction sweeps.")
@click.option("--profile", "profile_path",
              type=click.Path(exists=True, dir_okay=False),
              help="Error profile JSON.")
@click.option("--separate-kinds", is_flag=True,
              help="Feasibility: run every error kind alone.")
@click.option("--metric", type=click.Choice(sorted(DISPERSION_METRICS)),
              default="hash", show_default=True,
              help="Dispersion: error rate to fit.")
@click.option("--trials", type=click.IntRange(1), help="Hashes per cell.")
@click.option("--devices", type=click.IntRange(1),
              help="Simulated chips per cell.")
@click.option("--seed", type=int, help="Base seed.")
@click.option("--jobs", type=click.IntRange(1), help="Worker processes.")
@click.pass_context
def sweep(ctx: click.Context, kind: str, output: str, n_list, k_list,
          sigma_list, lambda_list, r_list, n: int, k: int,
          profile_path: str, separate_kinds: bool, metric: str, trials: int,
          devices: int, seed: int, jobs: int) -> None:
    """
    Run an analysis sweep and write plot-ready CSV.
    """
    config = _config(ctx, output=output, n_list=n_list, k_list=k_list,
                     sigma_list=sigma_list, lambda_list=lambda_list,
                     r_list=r_list, n=n, k=k, profile=_read_profile(
                         profile_path), trials=trials, devices=devices,
                     seed=seed, jobs=jobs)
    output = config.output or "{kind}.csv".format(kind=kind)
    profile = config.profile
    #
    # Grid sweeps multiply the unit template by every sigma and keep the
    # dispersion and detection settings of the configured profile.
    #
    template = replace(UNIT_TEMPLATE, mu_bs=profile.mu_bs,
                       mu_eta=profile.mu_eta, lambda_c=profile.lambda_c,
                       detection_noise_sigma=profile.detection_noise_sigma)

    if profile.sigma_phase == profile.sigma_coupling \
            == profile.sigma_loss_db == 0:
        profile = scale_profile(template, config.sigma_list[0])

    common = dict(trials=config.trials, seed=config.seed,
                  devices=config.devices, jobs=config.jobs)

    if kind == "dispersion-k":
        try:
            fits = dispersion_k_sweep(config.n, config.k_list, profile,
                                      config.lambda_list, metric=metric,
                                      **common)
        except DegenerateFit as error:
            click.echo(str(error), err=True)
            ctx.exit(1)
        except LightHashError as error:
            raise click.UsageError(str(error))

        for fit in fits:
            click.echo("K={k}: eps_c = {eps:.6g}, D = {d:.6g} nm^-2, R^2 = "
                       "{r2:.4f}".format(k=fit.k, eps=fit.epsilon_center,
                                         d=fit.d_epsilon, r2=fit.r_squared))

        write_dispersion_csv(fits, output)
        config.write_snapshot(output)
        click.echo("{count} rows written to {output}".format(
            count=len(fits), output=output))
        return

    with usage_errors():
        if kind == "feasibility":
            rows = feasibility_sweep(config.n_list, config.k_list,
                                     config.sigma_list, template,
                                     separate_kinds=separate_kinds, **common)
            boundary = feasibility_boundary(rows)

            if boundary.doublings is not None:
                click.echo("error reaches {low:.0%} at NK={nk_low:.4g} and "
                           "{high:.0%} at NK={nk_high:.4g}: {width:.2f} "
                           "doublings".format(low=boundary.low,
                                              high=boundary.high,
                                              nk_low=boundary.nk_low,
                                              nk_high=boundary.nk_high,
                                              width=boundary.doublings))
        elif kind == "scaling":
            rows = scaling_sweep(config.n_list, config.k_list,
                                 config.sigma_list, template, **common)

            for name, value in sorted(fit_error_coefficients(rows).items()):
                click.echo("k_{name} = {value:.6g}".format(name=name,
                                                         value=value))
        elif kind == "correction":
            rows = correction_sweep(config.n, config.k, profile,
                                    config.r_list, **common)

            if {1, 4} <= set(config.r_list):
                click.echo("sigma_out ratio R=1/R=4: {ratio:.4g}".format(
                    ratio=correction_ratio(rows)))
        else:
            rows = dispersion_rows(config.params, profile,
                                   config.lambda_list, **common)

            try:
                fit = fit_dispersion([row.wavelength for row in rows],
                                     [getattr(row, DISPERSION_METRICS[metric])
                                      for row in rows],
                                     profile.lambda_c)
            except DegenerateFit as error:
                click.echo(str(error), err=True)
            else:
                click.echo("eps_c = {eps:.6g}, D = {d:.6g} nm^-2, R^2 = "
                           "{r2:.4f}".format(eps=fit.epsilon_center,
                                             d=fit.d_epsilon,
                                             r2=fit.r_squared))

    write_sweep_csv(rows, output)
    config.write_snapshot(output)
    click.echo("{count} rows written to {output}".format(count=len(rows),
                                                         output=output))


@cli.command()
@click.option("-n", type=int, default=64, show_default=True,
              help="Ports per block N.")
@click.option("-k", type=int, default=2, show_default=True,
              help="Numerical resolution K.")
@click.option("--comparator-fj", type=str, help="fJ per comparator bit.")
@click.option("--modulator-fj", type=str, help="fJ per modulated bit.")
@click.option("--digital-op-pj", type=str,
              help="pJ per digital operation (A).")
@click.option("--sha-pj", type=str, help="pJ per SHA hash on an ASIC.")
@click.option("--json", "as_json", is_flag=True, help="Print JSON.")
def energy(n: int, k: int, comparator_fj: str, modulator_fj: str,
           digital_op_pj: str, sha_pj: str, as_json: bool) -> None:
    """
    Compare photonic and digital energy per hash.
    """
    overrides = {
        "comparator_fj_per_bit": comparator_fj,
        "modulator_fj_per_bit": modulator_fj,
        "digital_op_pj": digital_op_pj,
        "sha_asic_pj_per_hash": sha_pj,
    }

    try:
        values = {name: Decimal(value) for name, value in overrides.items()
                  if value is not None}
    except ArithmeticError:
        raise click.BadParameter("energies must be decimal numbers")

    with usage_errors():
        model = EnergyModel(**values)
        estimate = energy_estimate(n, k, model)

    if as_json:
        click.echo(json.dumps(estimate.to_dict(), sort_keys=True))
        return

    click.echo("photonic  {value} pJ/hash".format(
        value=estimate.photonic_pj_per_hash))
    click.echo("digital   {value} nJ/hash".format(
        value=estimate.digital_matmul_pj_per_hash / 1000))
    click.echo("sha asic  {value} pJ/hash".format(
        value=estimate.sha_asic_pj_per_hash))
    click.echo("ratio     {value}".format(
        value=estimate.ratio.quantize(Decimal("0.1"))))


@cli.command()
@click.option("--prev-hash", required=True, help="Previous block hash (hex).")
@click.option("--merkle-root", required=True, help="Merkle root (hex).")
@click.option("-n", type=int, required=True, help="Ports per block N.")
@click.option("-k", type=int, required=True, help="Numerical resolution K.")
def threshold(prev_hash: str, merkle_root: str, n: int, k: int) -> None:
    """
    Print the threshold t_int validators derive for a block.
    """
    try:
        prev = parse_hex(prev_hash, 32)
        root = parse_hex(merkle_root, 32)
    except ValueError as error:
        raise click.BadParameter(str(error))

    with usage_errors():
        block_matrix = generate_block_matrix(prev, root, n, k)
        click.echo(select_threshold(block_matrix, seed=threshold_seed(root)))
