"""Configuration files, experiment runs and the UAV-count sweep.

Config files are INI-style with four sections, ``[scenario]``, ``[channel]``,
``[train]`` and ``[weights]``, whose keys are the fields of
:class:`ScenarioConfig`, :class:`ChannelParams`, :class:`TrainConfig` and
:class:`RewardWeights`. Missing keys take their defaults, so an empty file is
a valid config. Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelParams
from .diffusion import save_params
from .env import RewardWeights, active_uavs, save_edge_list, total_reward
from .errors import ArtifactIOError, ConfigError, InfeasibleError
from .game import AliceParams, select_combination
from .scenario import Scenario, ScenarioConfig, generate_scenario
from .trainer import TrainConfig, TrainHistory, final_topology, train_gdpo

HISTORY_COLUMNS = ("iter", "mean_reward", "std_reward", "grad_norm", "wall_ms")
SWEEP_COLUMNS = ("size", "utility", "feasible")


@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    train: TrainConfig = field(default_factory=TrainConfig)

    def make_scenario(self) -> Scenario:
        return generate_scenario(self.scenario.seed, cfg=self.scenario, channel=self.channel)


_SECTIONS = {
    "scenario": ScenarioConfig,
    "channel": ChannelParams,
    "train": TrainConfig,
    "weights": RewardWeights,
}


def _plain_fields(cls):
    return [f for f in dataclasses.fields(cls) if f.name != "weights"]


def _default_of(f):
    if f.default is not dataclasses.MISSING:
        return f.default
    return f.default_factory()


def _line_of(lines: list[str], section: str, key: str | None = None) -> int:
    current = None
    for i, line in enumerate(lines, start=1):
        stripped = line.strip()
        m = re.fullmatch(r"\[(.+)\]", stripped)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if current == section and key is not None:
            name = re.split(r"[=:]", stripped, maxsplit=1)[0].strip().lower()
            if name == key:
                return i
    return 0


def _convert(raw: str, default, where: str):
    try:
        if isinstance(default, bool):
            lowered = raw.strip().lower()
            if lowered in ("true", "yes", "on", "1"):
                return True
            if lowered in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        where = f"{source}:{line}" if line is not None else source
        raise ConfigError(f"{where}: {str(exc).splitlines()[0]}") from None
    lines = text.splitlines()

    values = {name: {} for name in _SECTIONS}
    for section in parser.sections():
        if section not in _SECTIONS:
            line = _line_of(lines, section)
            raise ConfigError(
                f"{source}:{line}: unknown section [{section}]; expected one of {sorted(_SECTIONS)}"
            )
        known = {f.name: f for f in _plain_fields(_SECTIONS[section])}
        for key, raw in parser.items(section):
            line = _line_of(lines, section, key)
            if key not in known:
                raise ConfigError(f"{source}:{line}: unknown key {key!r} in [{section}]")
            values[section][key] = _convert(raw, _default_of(known[key]), f"{source}:{line}: {key}")

    try:
        weights = RewardWeights(**values["weights"])
        return RunConfig(
            scenario=ScenarioConfig(**values["scenario"]),
            channel=ChannelParams(**values["channel"]),
            train=TrainConfig(weights=weights, **values["train"]),
        )
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dumps_config(run: RunConfig) -> str:
    objects = {
        "scenario": run.scenario,
        "channel": run.channel,
        "train": run.train,
        "weights": run.train.weights,
    }
    out = []
    for section, obj in objects.items():
        out.append(f"[{section}]")
        for f in _plain_fields(type(obj)):
            out.append(f"{f.name} = {_format_value(getattr(obj, f.name))}")
        out.append("")
    return "\n".join(out)


def save_config(run: RunConfig, path) -> None:
    _write_text(path, dumps_config(run))


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {path}: {exc}") from exc


def _csv_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def emit_csv(rows, path, header) -> None:
    """Header row then one row per record, ``\\n`` terminated, floats in repr form."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                if len(row) != len(header):
                    raise ConfigError(f"row {row!r} does not match header {header!r}")
                w.writerow([_csv_cell(v) for v in row])
    except OSError as exc:
        raise ArtifactIOError(f"cannot write CSV {path}: {exc}") from exc


@dataclass
class RunArtifacts:
    history_csv: Path
    topology: Path
    equilibrium: Path
    config_snapshot: Path
    checkpoint: Path
    scenario: Path
    history: TrainHistory | None = field(default=None, repr=False)


def equilibrium_report(sc: Scenario, topology, weights: RewardWeights, zeta: float) -> dict:
    """Game outcome for the UAVs that relay in ``topology``, plus its reward terms."""
    eq = sc.equilibrium(zeta)
    active = tuple(int(j) for j in np.flatnonzero(active_uavs(topology)))
    report = dataclasses.replace(
        eq,
        combination=active,
        combination_value=float(sum(eq.alice_utilities[j] for j in active)),
        reward_rate=float(np.mean(eq.reward_rates[list(active)])) if active else math.nan,
    ).to_dict()
    report["reward"] = dataclasses.asdict(total_reward(topology, sc, weights, zeta))
    return report


def run_experiment(run: RunConfig, out_dir, sc: Scenario | None = None) -> RunArtifacts:
    """Train, then write history, final topology, game report, checkpoint and config."""
    out = ensure_dir(out_dir)
    sc = sc if sc is not None else run.make_scenario()
    cfg = run.train

    art = RunArtifacts(
        history_csv=out / "history.csv",
        topology=out / "topology.json",
        equilibrium=out / "equilibrium.json",
        config_snapshot=out / "config.ini",
        checkpoint=out / "policy.txt",
        scenario=out / "scenario.json",
    )
    save_config(run, art.config_snapshot)
    _write_text(art.scenario, json.dumps(sc.to_dict(), indent=2) + "\n")

    hist = train_gdpo(cfg, sc)
    emit_csv(hist.rows(), art.history_csv, HISTORY_COLUMNS)
    graph = final_topology(cfg, sc, hist.params)
    save_edge_list(graph, art.topology)
    report = equilibrium_report(sc, graph, cfg.weights, cfg.zeta)
    _write_text(art.equilibrium, json.dumps(report, indent=2) + "\n")
    save_params(hist.params, art.checkpoint)
    art.history = hist
    return art


def sweep_uav_count(
    sc: Scenario, sizes, ap: AliceParams | None = None, zeta: float = 1e-6
) -> list[tuple[int, float, bool]]:
    """Best budget-feasible utility for each exact combination size."""
    ap = ap or sc.alice
    sizes = list(sizes)
    if not sizes:
        raise ConfigError("no subset sizes to sweep")
    if max(sizes) > sc.n_uavs or sc.n_uavs > 12 or min(sizes) < 1:
        raise ConfigError(f"sizes must lie in [1, {sc.n_uavs}] with at most 12 UAVs")
    rows = []
    for k in sizes:
        try:
            eq = select_combination(sc.uav_game, ap, zeta, exact_size=k)
            rows.append((k, eq.combination_value, True))
        except InfeasibleError:
            rows.append((k, math.nan, False))
    return rows


def parse_sizes(spec: str) -> list[int]:
    """``"1-9"`` or ``"1,2,5"`` into a list of ints."""
    out = []
    for part in spec.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def ensure_dir(path) -> Path:
    p = Path(path)
    try:
        os.makedirs(p, exist_ok=True)
    except OSError as exc:
        raise ArtifactIOError(f"cannot create output directory {p}: {exc}") from exc
    return p
