"""Experiment configuration: JSON loading, validation, bundled presets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path


from .core import TemperatureLadder, build_ladder

KNOWN_TARGETS = ("circle", "elliptic", "wave1d", "gaussfield")
KNOWN_ALGORITHMS = ("rwm", "pcn", "pt", "rpt", "psdpt", "ugpt", "wgpt")
UNTEMPERED = ("rwm", "pcn")
PERM_SCHEMES = ("full", "adjacent-pairwise", "adjacent-window")


class ConfigError(ValueError):
    """Schema violation, reported with the offending field path."""


def _need(d: dict, key: str, kind, path: str):
    if key not in d:
        raise ConfigError(f"{path}{key}: missing required field")
    v = d[key]
    if kind is float and isinstance(v, int):
        v = float(v)
    if not isinstance(v, kind):
        raise ConfigError(f"{path}{key}: expected {getattr(kind, '__name__', kind)}, got {type(v).__name__}")
    return v


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; `raw` echoes the normalized JSON."""

    target: str
    algorithms: tuple[str, ...]
    K: int
    ladder: TemperatureLadder
    steps: tuple[float, ...]
    base_step: float
    base_kind: str
    N: int
    n_runs: int
    seed: int
    data_seed: int
    burn_frac: float = 0.2
    n_s: int = 1
    perm_scheme: str = "full"
    perm_window: int = 1
    include_identity: bool = True
    cost_parity: bool = True
    target_params: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        target = _need(d, "target", str, "")
        if target not in KNOWN_TARGETS:
            raise ConfigError(f"target: unknown target {target!r}; choose from {KNOWN_TARGETS}")

        algos = d.get("algorithms", d.get("algorithm"))
        if algos is None:
            raise ConfigError("algorithms: missing required field (or singular 'algorithm')")
        if isinstance(algos, str):
            algos = [algos]
        if not isinstance(algos, list) or not algos:
            raise ConfigError("algorithms: expected a name or non-empty list of names")
        for a in algos:
            if a not in KNOWN_ALGORITHMS:
                raise ConfigError(f"algorithms: unknown algorithm {a!r}; choose from {KNOWN_ALGORITHMS}")
        if len(set(algos)) != len(algos):
            raise ConfigError("algorithms: duplicate entries")

        K = _need(d, "K", int, "")
        if K < 2:
            raise ConfigError("K: need at least 2 temperatures")

        lad = _need(d, "ladder", dict, "")
        if ("a" in lad) == ("temperatures" in lad):
            raise ConfigError("ladder: give exactly one of 'a' or 'temperatures'")
        if "a" in lad:
            try:
                ladder = build_ladder(float(lad["a"]), K)
            except ValueError as exc:
                raise ConfigError(f"ladder.a: {exc}") from exc
        else:
            temps = lad["temperatures"]
            if not isinstance(temps, list) or len(temps) != K:
                raise ConfigError(f"ladder.temperatures: expected a list of K={K} values")
            try:
                ladder = TemperatureLadder.from_temperatures([float(t) for t in temps])
            except ValueError as exc:
                raise ConfigError(f"ladder.temperatures: {exc}") from exc

        steps = _need(d, "steps", list, "")
        if len(steps) != K:
            raise ConfigError(f"steps: expected K={K} entries, got {len(steps)}")
        if any(not isinstance(s, (int, float)) or s <= 0 for s in steps):
            raise ConfigError("steps: entries must be positive numbers")

        base_kind = d.get("base_kind", "rwm")
        if base_kind not in UNTEMPERED:
            raise ConfigError(f"base_kind: must be 'rwm' or 'pcn', got {base_kind!r}")
        base_step = d.get("base_step", steps[0])
        if not isinstance(base_step, (int, float)) or base_step <= 0:
            raise ConfigError("base_step: must be a positive number")

        for a in algos:
            kind = a if a in UNTEMPERED else base_kind
            if kind == "pcn" and target != "gaussfield":
                raise ConfigError(f"algorithms: pcn requires a normal prior; target {target!r} has none")

        N = _need(d, "N", int, "")
        if N < 1:
            raise ConfigError("N: must be >= 1")
        n_runs = _need(d, "n_runs", int, "")
        if n_runs < 1:
            raise ConfigError("n_runs: must be >= 1")
        burn = d.get("burn_frac", 0.2)
        if not isinstance(burn, (int, float)) or not 0.0 <= burn < 1.0:
            raise ConfigError("burn_frac: must lie in [0, 1)")
        n_s = d.get("n_s", 1)
        if not isinstance(n_s, int) or n_s < 1:
            raise ConfigError("n_s: must be an integer >= 1")

        scheme = d.get("perm_scheme", "full")
        if scheme not in PERM_SCHEMES:
            raise ConfigError(f"perm_scheme: unknown scheme {scheme!r}; choose from {PERM_SCHEMES}")
        window = d.get("perm_window", 1)
        if not isinstance(window, int) or window < 1:
            raise ConfigError("perm_window: must be an integer >= 1")

        seed = d.get("seed", 0)
        data_seed = d.get("data_seed", 0)
        for name, v in (("seed", seed), ("data_seed", data_seed)):
            if not isinstance(v, int):
                raise ConfigError(f"{name}: must be an integer")

        params = d.get("target_params", {})
        if not isinstance(params, dict):
            raise ConfigError("target_params: must be an object")

        raw = dict(d)
        raw["algorithms"] = list(algos)
        raw.pop("algorithm", None)
        return cls(
            target=target, algorithms=tuple(algos), K=K, ladder=ladder,
            steps=tuple(float(s) for s in steps), base_step=float(base_step),
            base_kind=base_kind, N=N, n_runs=n_runs, seed=seed, data_seed=data_seed,
            burn_frac=float(burn), n_s=n_s, perm_scheme=scheme, perm_window=window,
            include_identity=bool(d.get("include_identity", True)),
            cost_parity=bool(d.get("cost_parity", True)),
            target_params=params, raw=raw,
        )

    def with_overrides(self, **kw) -> "ExperimentConfig":
        raw = dict(self.raw)
        raw.update(kw)
        return ExperimentConfig.from_dict(raw)


def preset_path(name: str) -> Path:
    p = resources.files("tempering.presets").joinpath(f"{name}.json")
    return Path(str(p))


def load_config(path_or_name: str | Path) -> ExperimentConfig:
    """Load a config from a JSON path, or from the bundled presets by name."""
    p = Path(path_or_name)
    if not p.exists():
        candidate = preset_path(str(path_or_name))
        if candidate.exists():
            p = candidate
        else:
            raise ConfigError(f"config file not found: {path_or_name}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: top level must be an object")
    return ExperimentConfig.from_dict(doc)
