"""
tfem/main.py
Command-line entry point: gen, run, sweep, audit_bounds and pca.

Every subcommand reads the [section] of an optional TOML file, applies the
flags on top and writes its artifacts under --out. A failure prints one
JSON line on stderr and exits with the error's code.
"""

import json
import logging
from typing import Annotated, Callable, Optional

import coloredlogs
import typer

from tfem.commands import (
    AuditConfig,
    GenConfig,
    PcaConfig,
    RunConfig,
    SweepConfig,
    cmd_audit_bounds,
    cmd_gen,
    cmd_pca,
    cmd_run,
    cmd_sweep,
    resolve,
)
from tfem.config import settings
from tfem.errors import ConfigError, TfemError

logger = logging.getLogger("tfem")

app = typer.Typer(
    add_completion=False,
    no_args_is_help=True,
    help="Transformers with constructed weights running Lloyd EM and power-iteration PCA.",
)

ConfigOpt = Annotated[Optional[str], typer.Option("--config", help="TOML file; its [command] section seeds the options")]
SeedOpt = Annotated[int, typer.Option("--seed", help="Base seed")]
OutOpt = Annotated[Optional[str], typer.Option("--out", help="Output directory (default: TFEM_OUTPUT_DIR or ./out)")]
VerboseOpt = Annotated[bool, typer.Option("--verbose", "-v", help="Debug logging")]

KOpt = Annotated[Optional[int], typer.Option("--k", help="Number of clusters")]
DOpt = Annotated[Optional[int], typer.Option("--d", help="Dimension")]
PerClusterOpt = Annotated[Optional[int], typer.Option("--per-cluster", help="Points per cluster")]
DeltaOpt = Annotated[Optional[float], typer.Option("--delta", help="Minimum pairwise mean distance")]
SigmaOpt = Annotated[Optional[float], typer.Option("--sigma", help="Noise standard deviation")]
SigmaRangeOpt = Annotated[Optional[str], typer.Option("--sigma-range", help="lo,hi per-point noise range")]
ImbalanceOpt = Annotated[Optional[float], typer.Option("--imbalance", help="Smallest-to-largest cluster ratio in (0, 1)")]

TauOpt = Annotated[Optional[int], typer.Option("--tau", help="EM rounds")]
MHeadsOpt = Annotated[Optional[int], typer.Option("--m-heads", help="Random features per fitted function")]
BetaOpt = Annotated[Optional[float], typer.Option("--beta", help="Assignment temperature (default 50 ln N)")]
FeatureSeedOpt = Annotated[Optional[int], typer.Option("--feature-seed", help="Seed of the random-feature fits")]
InitOpt = Annotated[Optional[str], typer.Option("--init", help="spectral or kmeanspp")]
ArmsOpt = Annotated[Optional[str], typer.Option("--arms", help="Comma list of lloyd, tf, tf_plus")]
InstanceOpt = Annotated[Optional[str], typer.Option("--instance", help="Instance CSV to load instead of generating")]
SaveParamsOpt = Annotated[Optional[bool], typer.Option("--save-params/--no-save-params", help="Write .tfem containers")]


# ================================
# Helpers
# ================================

def _split(raw: Optional[str], cast: Callable, name: str):
    if raw is None:
        return None
    try:
        return [cast(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"--{name} expects a comma-separated list, got {raw!r}")


def _check_environment() -> tuple[str, str]:
    """Validate the TFEM_* variables once; returns (log level, default output dir)."""
    try:
        settings.workers()
        settings.debug()
        return settings.log_level(), settings.output_dir()
    except OSError as e:
        raise ConfigError(str(e))


def _execute(model, section: str, config_file, overrides: dict, command: Callable, out, verbose: bool, **kwargs):
    """Resolve the config, run the command and turn its status into the exit code."""
    try:
        level, default_out = _check_environment()
        coloredlogs.install(level="DEBUG" if verbose else level, logger=logger,
                            fmt="%(asctime)s %(name)s %(levelname)s %(message)s")
        config = resolve(model, config_file, section, overrides)
        status = command(config, out or default_out, **kwargs)
    except TfemError as e:
        logger.debug("%s failed", section, exc_info=True)
        typer.echo(json.dumps(e.to_dict(), sort_keys=True), err=True)
        raise typer.Exit(e.exit_code)
    raise typer.Exit(status)


def _instance_overrides(seed, k, d, per_cluster, delta, sigma, sigma_range, imbalance) -> dict:
    return {
        "seed": seed, "k": k, "d": d, "per_cluster": per_cluster, "delta": delta, "sigma": sigma,
        "sigma_range": _split(sigma_range, float, "sigma-range"), "imbalance": imbalance,
    }


def _run_overrides(tau, m_heads, beta, feature_seed, init, arms, save_params) -> dict:
    return {
        "tau": tau, "m_heads": m_heads, "beta": beta, "feature_seed": feature_seed, "init": init,
        "arms": _split(arms, str.strip, "arms"), "save_params": save_params,
    }


# ================================
# Commands
# ================================

@app.command("gen")
def gen(
    seed: SeedOpt,
    config: ConfigOpt = None,
    count: Annotated[Optional[int], typer.Option("--count", help="Number of instances")] = None,
    k: KOpt = None,
    d: DOpt = None,
    per_cluster: PerClusterOpt = None,
    delta: DeltaOpt = None,
    sigma: SigmaOpt = None,
    sigma_range: SigmaRangeOpt = None,
    imbalance: ImbalanceOpt = None,
    out: OutOpt = None,
    verbose: VerboseOpt = False,
):
    """Generate Gaussian-mixture instances."""
    overrides = _instance_overrides(seed, k, d, per_cluster, delta, sigma, sigma_range, imbalance)
    overrides["count"] = count
    _execute(GenConfig, "gen", config, overrides, cmd_gen, out, verbose)


@app.command("run")
def run(
    seed: SeedOpt,
    config: ConfigOpt = None,
    k: KOpt = None,
    d: DOpt = None,
    per_cluster: PerClusterOpt = None,
    delta: DeltaOpt = None,
    sigma: SigmaOpt = None,
    sigma_range: SigmaRangeOpt = None,
    imbalance: ImbalanceOpt = None,
    tau: TauOpt = None,
    m_heads: MHeadsOpt = None,
    beta: BetaOpt = None,
    feature_seed: FeatureSeedOpt = None,
    init: InitOpt = None,
    arms: ArmsOpt = None,
    instance: InstanceOpt = None,
    save_params: SaveParamsOpt = None,
    out: OutOpt = None,
    verbose: VerboseOpt = False,
):
    """Run Lloyd and the constructed transformers on one instance."""
    overrides = _instance_overrides(seed, k, d, per_cluster, delta, sigma, sigma_range, imbalance)
    overrides.update(_run_overrides(tau, m_heads, beta, feature_seed, init, arms, save_params))
    overrides["instance"] = instance
    _execute(RunConfig, "run", config, overrides, cmd_run, out, verbose)


@app.command("sweep")
def sweep(
    seed: SeedOpt,
    config: ConfigOpt = None,
    variable: Annotated[Optional[str], typer.Option("--variable", help="delta, dim, n, classes, imbalance or tau")] = None,
    grid: Annotated[Optional[str], typer.Option("--grid", help="Comma list of values")] = None,
    seeds: Annotated[Optional[int], typer.Option("--seeds", help="Seeds per grid point")] = None,
    workers: Annotated[Optional[int], typer.Option("--workers", help="Worker threads (default TFEM_WORKERS)")] = None,
    k: KOpt = None,
    d: DOpt = None,
    per_cluster: PerClusterOpt = None,
    delta: DeltaOpt = None,
    sigma: SigmaOpt = None,
    sigma_range: SigmaRangeOpt = None,
    imbalance: ImbalanceOpt = None,
    tau: TauOpt = None,
    m_heads: MHeadsOpt = None,
    beta: BetaOpt = None,
    feature_seed: FeatureSeedOpt = None,
    init: InitOpt = None,
    arms: ArmsOpt = None,
    progress: Annotated[bool, typer.Option("--progress/--no-progress", help="Progress bar on a terminal")] = True,
    out: OutOpt = None,
    verbose: VerboseOpt = False,
):
    """Sweep one variable over a grid and aggregate the metrics."""
    overrides = _instance_overrides(seed, k, d, per_cluster, delta, sigma, sigma_range, imbalance)
    overrides.update(_run_overrides(tau, m_heads, beta, feature_seed, init, arms, None))
    overrides.update(variable=variable, grid=_split(grid, float, "grid"), seeds=seeds, workers=workers)
    _execute(SweepConfig, "sweep", config, overrides, cmd_sweep, out, verbose, progress=progress)


@app.command("audit_bounds")
def audit_bounds(
    seed: SeedOpt,
    config: ConfigOpt = None,
    draws: Annotated[Optional[int], typer.Option("--draws", help="Hardmax audit draws")] = None,
    d_max: Annotated[Optional[int], typer.Option("--d-max", help="Largest hardmax vector length")] = None,
    beta_range: Annotated[Optional[str], typer.Option("--beta-range", help="lo,hi log-uniform beta range")] = None,
    decay_ms: Annotated[Optional[str], typer.Option("--decay-ms", help="Comma list of feature counts")] = None,
    em_instances: Annotated[Optional[int], typer.Option("--em-instances", help="EM fidelity instances")] = None,
    pca_matrices: Annotated[Optional[int], typer.Option("--pca-matrices", help="PCA bound matrices")] = None,
    m_heads: MHeadsOpt = None,
    out: OutOpt = None,
    verbose: VerboseOpt = False,
):
    """Check the approximation bounds numerically; exits 1 on any violation."""
    overrides = {
        "seed": seed, "draws": draws, "d_max": d_max, "beta_range": _split(beta_range, float, "beta-range"),
        "decay_ms": _split(decay_ms, int, "decay-ms"), "em_instances": em_instances,
        "pca_matrices": pca_matrices, "m_heads": m_heads,
    }
    _execute(AuditConfig, "audit_bounds", config, overrides, cmd_audit_bounds, out, verbose)


@app.command("pca")
def pca(
    seed: SeedOpt,
    config: ConfigOpt = None,
    d: DOpt = None,
    k: Annotated[Optional[int], typer.Option("--k", help="Eigenvectors to extract")] = None,
    tau: Annotated[Optional[int], typer.Option("--tau", help="Total power steps")] = None,
    m_heads: MHeadsOpt = None,
    count: Annotated[Optional[int], typer.Option("--count", help="Random matrices")] = None,
    top: Annotated[Optional[str], typer.Option("--top", help="Comma list of the top eigenvalues")] = None,
    tail_hi: Annotated[Optional[float], typer.Option("--tail-hi", help="Upper end of the uniform tail spectrum")] = None,
    out: OutOpt = None,
    verbose: VerboseOpt = False,
):
    """Extract top eigenvectors with the PCA construction."""
    overrides = {
        "seed": seed, "d": d, "k": k, "tau": tau, "m_heads": m_heads, "count": count,
        "top": _split(top, float, "top"), "tail_hi": tail_hi,
    }
    _execute(PcaConfig, "pca", config, overrides, cmd_pca, out, verbose)


def main():
    app()


if __name__ == "__main__":
    main()
