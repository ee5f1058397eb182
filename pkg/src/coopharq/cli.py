"""Command line entry point: ``coopharq sweep|adapt|frame-trace|dist``."""

from __future__ import annotations

import functools
import sys

import click
import yaml

from . import adaptation, kernel, metrics
from .outage import format_set
from .protocol import ProtocolKind, simulate_frame
from .scenarios import (gamma_grid, get_scenario, load_presets, point_streams, run_sweep,
                        write_csv)

CONFIG_KEYS = {
    "scenario": str,
    "protocol": str,
    "gamma_db_start": float,
    "gamma_db_stop": float,
    "gamma_db_step": float,
    "frames": int,
    "adapt_frames": int,
    "seed": int,
    "adaptation": str,
    "t_override": int,
    "alpha_override": float,
    "workers": int,
}

DEFAULTS = {
    "scenario": "asym-3x3",
    "protocol": "all",
    "gamma_db_start": -15.0,
    "gamma_db_stop": 20.0,
    "gamma_db_step": 5.0,
    "frames": metrics.DEFAULT_FRAMES,
    "adapt_frames": adaptation.ADAPT_FRAMES,
    "seed": 0,
    "adaptation": "exhaustive",
    "t_override": None,
    "alpha_override": None,
    "workers": 1,
}


def load_config(path) -> dict:
    """Read a YAML config; unknown keys and bad types are errors."""
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise click.BadParameter("config must be a mapping of keys to values", param_hint="--config")
    cfg = {}
    for key, value in raw.items():
        norm = str(key).replace("-", "_")
        if norm not in CONFIG_KEYS:
            raise click.BadParameter(f"unknown config key {key!r}", param_hint="--config")
        if value is None:
            cfg[norm] = None
            continue
        try:
            cfg[norm] = CONFIG_KEYS[norm](value)
        except (TypeError, ValueError):
            raise click.BadParameter(f"bad value for {key!r}: {value!r}",
                                     param_hint="--config") from None
    return cfg


def merge_settings(config_path, flags: dict) -> dict:
    settings = dict(DEFAULTS)
    if config_path:
        settings.update(load_config(config_path))
    settings.update({k: v for k, v in flags.items() if v is not None})
    return settings


def _protocols(value):
    if value == "all":
        return [k.value for k in ProtocolKind]
    out = []
    for item in value.split(","):
        out.append(ProtocolKind.parse(item).value)
    return out


def _parse_rates(text, n_sources):
    rates = tuple(float(x) for x in text.split(","))
    if len(rates) != n_sources:
        raise click.BadParameter(f"need {n_sources} comma-separated rates", param_hint="--rates")
    return rates


def _guard(fn):
    """Turn configuration errors into a clean non-zero exit."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, OSError) as exc:
            raise click.ClickException(str(exc)) from None
    return wrapper


scenario_opt = click.option("--scenario", default=None,
                            help="Preset name (asym-3x3, asym-4x3, asym-5x3, sym-3, sym-4, sym-5).")
protocol_opt = click.option("--protocol", default=None, help="ir-mu, ir-su or cc.")
seed_opt = click.option("--seed", type=int, default=None, help="Master seed.")
alpha_opt = click.option("--alpha-override", type=float, default=None,
                         help="Replace the preset alpha (N2/N1).")
t_opt = click.option("--t-override", type=int, default=None,
                     help="Replace the preset number of retransmission rounds.")


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Monte-Carlo outage simulator for cooperative HARQ over the OMAMRC."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="YAML file with sweep settings; flags take precedence.")
@scenario_opt
@click.option("--protocol", default=None, help="Comma-separated list, or 'all'.")
@click.option("--gamma-db-start", type=float, default=None)
@click.option("--gamma-db-stop", type=float, default=None)
@click.option("--gamma-db-step", type=float, default=None)
@click.option("--frames", type=int, default=None, help="Frames for the final estimate.")
@click.option("--adapt-frames", type=int, default=None, help="Frames per scored rate tuple.")
@seed_opt
@click.option("--adaptation", type=click.Choice(["exhaustive", "ascent", "auto"]), default=None)
@t_opt
@alpha_opt
@click.option("--workers", type=int, default=None, help="Worker processes across sweep points.")
@click.option("-o", "--output", default="-", help="CSV path, '-' for standard output.")
@_guard
def sweep(config_path, output, **flags):
    """Sweep gamma, adapt the rates at each point and write a CSV table."""
    s = merge_settings(config_path, flags)
    scenario = get_scenario(s["scenario"])
    grid = gamma_grid(s["gamma_db_start"], s["gamma_db_stop"], s["gamma_db_step"])
    if s["frames"] < 1 or s["adapt_frames"] < 1:
        raise ValueError("frame counts must be positive")
    rows = run_sweep(scenario, _protocols(s["protocol"]), grid, n_frames=s["frames"],
                     seed=s["seed"], mode=s["adaptation"], adapt_frames=s["adapt_frames"],
                     alpha=s["alpha_override"], max_rounds=s["t_override"],
                     workers=s["workers"])
    if output == "-":
        write_csv(rows, sys.stdout)
    else:
        with open(output, "w", newline="") as fh:
            write_csv(rows, fh)


@main.command()
@scenario_opt
@protocol_opt
@click.option("--gamma-db", type=float, required=True)
@click.option("--adapt-frames", type=int, default=adaptation.ADAPT_FRAMES)
@seed_opt
@click.option("--adaptation", "mode", type=click.Choice(["exhaustive", "ascent", "auto"]),
              default="exhaustive")
@t_opt
@alpha_opt
@_guard
def adapt(scenario, protocol, gamma_db, adapt_frames, seed, mode, t_override, alpha_override):
    """Print the rate allocation chosen at one gamma."""
    sc = get_scenario(scenario or DEFAULTS["scenario"])
    cfg = sc.config(protocol or "ir-mu", alpha_override, t_override)
    stream, _ = point_streams(gamma_db)
    rates, est = adaptation.adapt(sc.cdi(gamma_db), cfg, mode, n_frames=adapt_frames,
                                  seed=seed or 0, stream=stream)
    click.echo(f"scenario={sc.name} protocol={cfg.kind.value} gamma_db={gamma_db:g} "
               f"alpha={cfg.alpha:g} T={cfg.max_rounds}")
    click.echo("rates: " + " ".join(f"s{i + 1}={r:g}" for i, r in enumerate(rates)))
    click.echo(f"eta: {est.eta:.6g} (se {est.eta_se:.3g})  E[T_used]: {est.expected_t_used:.6g}")


@main.command("frame-trace")
@scenario_opt
@protocol_opt
@click.option("--gamma-db", type=float, required=True)
@click.option("--rates", required=True, help="Comma-separated rate per source.")
@seed_opt
@click.option("--frame-index", type=int, default=0)
@t_opt
@alpha_opt
@_guard
def frame_trace(scenario, protocol, gamma_db, rates, seed, frame_index, t_override,
                alpha_override):
    """Dump one frame round by round."""
    sc = get_scenario(scenario or DEFAULTS["scenario"])
    cfg = sc.config(protocol or "ir-mu", alpha_override, t_override)
    cdi = sc.cdi(gamma_db)
    rates = _parse_rates(rates, cdi.n_sources)
    trace = []
    _, stream = point_streams(gamma_db)
    result = simulate_frame(cdi, rates, cfg, seed or 0, frame_index, stream, trace=trace)
    for state in trace:
        if state.round == 0:
            click.echo("round 0 (first phase)")
        else:
            rec = state.history[-1]
            helped = "" if rec.helped_source is None else f" helping s{rec.helped_source + 1}"
            click.echo(f"round {state.round}: {cdi.label(rec.node)} transmits "
                       f"{format_set(rec.decoding_set)}{helped}")
        for node, dec in enumerate(state.decoding_sets):
            click.echo(f"  {cdi.label(node):>3} {format_set(dec)}")
    flags = " ".join(f"s{i + 1}={'OUT' if f else 'ok'}" for i, f in enumerate(result.outage_flags))
    click.echo(f"t_used={result.t_used} {flags}")


@main.command()
@scenario_opt
@protocol_opt
@click.option("--gamma-db", type=float, required=True)
@click.option("--rates", default=None, help="Comma-separated rates; adapted when omitted.")
@click.option("--frames", type=int, default=metrics.DEFAULT_FRAMES)
@click.option("--adapt-frames", type=int, default=adaptation.ADAPT_FRAMES)
@seed_opt
@t_opt
@alpha_opt
@_guard
def dist(scenario, protocol, gamma_db, rates, frames, adapt_frames, seed, t_override,
         alpha_override):
    """Print the distribution of retransmission rounds used per frame."""
    sc = get_scenario(scenario or DEFAULTS["scenario"])
    cfg = sc.config(protocol or "ir-mu", alpha_override, t_override)
    cdi = sc.cdi(gamma_db)
    adapt_stream, final_stream = point_streams(gamma_db)
    if rates is None:
        rates, _ = adaptation.adapt(cdi, cfg, "exhaustive", n_frames=adapt_frames,
                                    seed=seed or 0, stream=adapt_stream)
    else:
        rates = _parse_rates(rates, cdi.n_sources)
    est = metrics.estimate(cdi, rates, cfg, frames, seed or 0, final_stream)
    click.echo("t_used,count,probability")
    for t, c in enumerate(est.t_used_counts):
        click.echo(f"{t},{int(c)},{c / est.frames:.6g}")
    click.echo(f"# mean={est.expected_t_used:.6g} rates={','.join(f'{r:g}' for r in rates)}",
               err=True)


@main.command("presets")
def list_presets():
    """List the available scenario presets."""
    for name, sc in sorted(load_presets().items()):
        params = ", ".join(f"{k.value}: alpha={v['alpha']:g} T={v['max_rounds']}"
                           for k, v in sc.protocols.items())
        click.echo(f"{name}  M={sc.n_sources} L={sc.n_relays}  {params}")


@main.command()
def backend():
    """Report which frame simulator backend is active."""
    click.echo(kernel.BACKEND)


if __name__ == "__main__":
    main()
