"""YAML run configuration with line-anchored error messages.

Layout::

    array:     ArrayConfig fields
    solver:    SolverParams fields, plus ``normalize``
    doa:       grid_step
    detector:  h_factor
    bench:     num_trials, n_jobs, resolution_threshold_deg, write_json,
               sweeps: [{axis, values, overrides}]

Every section and key is optional; missing values take the library defaults.
"""

import dataclasses
import math
from dataclasses import dataclass, field

import yaml

from .array import ArrayConfig, ConfigError
from .bench import RESOLUTION_THRESHOLD_DEG, SWEEP_AXES
from .decomposer import SolverParams
from .doa import DEFAULT_GRID_STEP


class ConfigFileError(ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = f"{path}" if path else "<config>"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}")


@dataclass
class SweepSpec:
    axis: str
    values: list
    overrides: dict = field(default_factory=dict)


@dataclass
class BenchSettings:
    num_trials: int = 1000
    n_jobs: int = 1
    resolution_threshold_deg: float = RESOLUTION_THRESHOLD_DEG
    write_json: bool = False
    sweeps: list = field(default_factory=list)


@dataclass
class RunConfig:
    array: ArrayConfig = field(default_factory=ArrayConfig)
    solver: SolverParams = field(default_factory=SolverParams)
    normalize: str = "snapshots"
    grid_step: float = DEFAULT_GRID_STEP
    h_factor: float = 10.0
    bench: BenchSettings = field(default_factory=BenchSettings)

    def to_dict(self):
        return {
            "array": self.array.to_dict(),
            "solver": {**self.solver.to_dict(), "normalize": self.normalize},
            "doa": {"grid_step": self.grid_step},
            "detector": {"h_factor": self.h_factor},
            "bench": {
                "num_trials": self.bench.num_trials,
                "n_jobs": self.bench.n_jobs,
                "resolution_threshold_deg": self.bench.resolution_threshold_deg,
                "write_json": self.bench.write_json,
                "sweeps": [
                    {"axis": s.axis, "values": list(s.values), "overrides": dict(s.overrides)}
                    for s in self.bench.sweeps
                ],
            },
        }

    def to_yaml(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


_FIELDS = {
    "array": {f.name for f in dataclasses.fields(ArrayConfig)},
    "solver": {f.name for f in dataclasses.fields(SolverParams)} | {"normalize"},
    "doa": {"grid_step"},
    "detector": {"h_factor"},
    "bench": {"num_trials", "n_jobs", "resolution_threshold_deg", "write_json", "sweeps"},
}
_SWEEP_KEYS = {"axis", "values", "overrides"}


def _line(node):
    return node.start_mark.line + 1


def _check_keys(node, allowed, section, path):
    if not isinstance(node, yaml.MappingNode):
        raise ConfigFileError(f"section '{section}' must be a mapping", path, _line(node))
    for key_node, _ in node.value:
        if key_node.value not in allowed:
            raise ConfigFileError(
                f"unknown key '{key_node.value}' in section '{section}'", path, _line(key_node)
            )


def _key_lines(node):
    return {k.value: _line(k) for k, _ in node.value} if isinstance(node, yaml.MappingNode) else {}


def _as_float(value):
    # YAML 1.1 leaves "inf" as a string; accept it for SNR and epsilon
    if isinstance(value, str):
        return float(value)
    return value


def parse_config(text, path=None):
    """Parse YAML text into a :class:`RunConfig`."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigFileError(f"invalid YAML: {exc}", path, mark.line + 1 if mark else None) from None
    if root is None:
        return RunConfig()
    if not isinstance(root, yaml.MappingNode):
        raise ConfigFileError("top level must be a mapping", path, _line(root))
    sections = {}
    for key_node, value_node in root.value:
        name = key_node.value
        if name not in _FIELDS:
            raise ConfigFileError(f"unknown section '{name}'", path, _line(key_node))
        _check_keys(value_node, _FIELDS[name], name, path)
        sections[name] = value_node
    data = yaml.safe_load(text) or {}

    def build(section, fn):
        node = sections.get(section)
        raw = dict(data.get(section) or {})
        try:
            return fn(raw)
        except (TypeError, ValueError, ConfigError) as exc:
            lines = _key_lines(node)
            line = _line(node) if node is not None else None
            for key in raw:
                if key in str(exc):
                    line = lines.get(key, line)
                    break
            raise ConfigFileError(f"section '{section}': {exc}", path, line) from None

    def make_array(raw):
        if "snr_db" in raw:
            raw["snr_db"] = _as_float(raw["snr_db"])
        return ArrayConfig(**raw)

    array = build("array", make_array)

    def make_solver(raw):
        normalize = raw.pop("normalize", "snapshots")
        if normalize not in ("snapshots", "none"):
            raise ValueError(f"normalize must be 'snapshots' or 'none', got {normalize!r}")
        if "epsilon" in raw:
            raw["epsilon"] = _as_float(raw["epsilon"])
        raw.setdefault("gamma_max", array.gamma_max)
        return SolverParams(**raw), normalize

    solver, normalize = build("solver", make_solver)

    def make_positive(section, key, default):
        def fn(raw):
            value = float(raw.get(key, default))
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{key} must be positive")
            return value
        return build(section, fn)

    grid_step = make_positive("doa", "grid_step", DEFAULT_GRID_STEP)
    h_factor = make_positive("detector", "h_factor", 10.0)
    bench = _parse_bench(sections.get("bench"), data.get("bench") or {}, path)
    return RunConfig(array, solver, normalize, grid_step, h_factor, bench)


def _parse_bench(node, raw, path):
    lines = _key_lines(node)
    settings = BenchSettings(
        num_trials=int(raw.get("num_trials", 1000)),
        n_jobs=int(raw.get("n_jobs", 1)),
        resolution_threshold_deg=float(raw.get("resolution_threshold_deg", RESOLUTION_THRESHOLD_DEG)),
        write_json=bool(raw.get("write_json", False)),
    )
    if settings.num_trials < 1:
        raise ConfigFileError("num_trials must be positive", path, lines.get("num_trials"))
    if settings.n_jobs == 0:
        raise ConfigFileError("n_jobs must be nonzero", path, lines.get("n_jobs"))
    sweeps_node = None
    if node is not None:
        for k, v in node.value:
            if k.value == "sweeps":
                sweeps_node = v
    for i, item in enumerate(raw.get("sweeps") or []):
        item_node = sweeps_node.value[i]
        _check_keys(item_node, _SWEEP_KEYS, f"bench.sweeps[{i}]", path)
        item_lines = _key_lines(item_node)
        axis = item.get("axis")
        if axis not in SWEEP_AXES:
            raise ConfigFileError(
                f"sweep axis must be one of {', '.join(SWEEP_AXES)}, got {axis!r}",
                path, item_lines.get("axis", _line(item_node)),
            )
        values = item.get("values") or []
        if not values:
            raise ConfigFileError("sweep needs a non-empty 'values' list", path,
                                  item_lines.get("values", _line(item_node)))
        overrides = dict(item.get("overrides") or {})
        bad = set(overrides) - _FIELDS["array"]
        if bad:
            raise ConfigFileError(f"unknown override key(s) {sorted(bad)}", path,
                                  item_lines.get("overrides"))
        values = [_as_float(v) if axis == "snr_db" else int(v) for v in values]
        settings.sweeps.append(SweepSpec(axis, values, overrides))
    return settings


def load_config(path):
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, str(path))
