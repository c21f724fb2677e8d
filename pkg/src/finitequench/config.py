"""Experiment configuration in TOML.

Every section and key is optional; missing values take the defaults below.
Unknown sections or keys are rejected, so typos cannot pass silently.

.. code-block:: toml

    [chain]
    n = 3                      # single-run chain length
    h_x = 0.2
    h_z = 0.0
    anisotropy_d = 0.5
    defect_e = 0.2
    j1_final = 1.0
    j2_final = 0.9
    spin_convention = "pauli"  # or "spin_half"

    [protocol]
    kind = "linear_ramp"       # sudden | linear_ramp | linear_then_powerlaw
    ramp_duration_T = 1.0      # also t* of linear_then_powerlaw unless t_star is set
    tail_power_p = 3.0
    # t_star = 1.0
    certificate_k_scale = 1.0  # multiplies K in verify-bounds (falsification runs)

    [integrator]
    scheme = "exponential_midpoint"
    # max_step = 0.001
    step_scale = 0.01
    norm_tolerance = 1e-9
    tail_cutoff = 1e-12
    dense_limit = 64

    [sweep]
    n_values = [3, 4, 5, 6, 7, 8, 9, 10]
    T_values = [1e-4, 1e-2, 1.0, 10.0, 100.0, 1000.0]

    [observable]
    kind = "total_sx"          # total_sx | total_sz | custom_site_op
    axis = "x"                 # custom_site_op only
    site = 1

    [averaging]
    min_window = 200.0
    periods = 50.0
    max_window = 2000.0
    convergence_tol = 0.01
    max_doublings = 3          # W -> 2 W while the half-window check fails
    oversample = 2.0
    amplitude_floor = 1e-10
    degeneracy_tol = 1e-9
    gap_tol = 1e-9
    gap_scan_max_levels = 512

    [bounds]
    t_max_factor = 100.0
    samples = 16

    [timeseries]
    post_ramp_time = 100.0
    points = 2001

    [output]
    out_dir = "results"
    format = "csv"             # csv | json
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import asdict, dataclass, field, fields, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

from .errors import ConfigError, InvalidArgumentError
from .evolution import IntegratorConfig
from .protocols import ProtocolKind, QuenchProtocol
from .spin_algebra import ChainSpec, Convention, single_site_operator, total_spin

__all__ = [
    "ChainSection",
    "ProtocolSection",
    "SweepSection",
    "ObservableSection",
    "AveragingSection",
    "BoundsSection",
    "TimeseriesSection",
    "OutputSection",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "serialize_config",
]

N_RANGE = (2, 14)
DEFAULT_T_VALUES = (1e-4, 1e-2, 1.0, 10.0, 100.0, 1000.0)
DEFAULT_N_VALUES = tuple(range(3, 11))


def _fail(section, key, message):
    raise ConfigError(f"{section}.{key}: {message}", field=f"{section}.{key}")


def _positive(section, key, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        _fail(section, key, f"must be a finite number > 0, got {value!r}")


@dataclass(frozen=True)
class ChainSection:
    n: int = 3
    h_x: float = 0.2
    h_z: float = 0.0
    anisotropy_d: float = 0.5
    defect_e: float = 0.2
    j1_final: float = 1.0
    j2_final: float = 0.9
    spin_convention: str = "pauli"

    def validate(self):
        _check_n("chain", "n", self.n)
        for f in fields(self):
            v = getattr(self, f.name)
            if f.type == "float" and not (isinstance(v, (int, float)) and math.isfinite(v)):
                _fail("chain", f.name, f"must be a finite number, got {v!r}")
        if self.spin_convention not in {c.value for c in Convention}:
            _fail("chain", "spin_convention", f"unknown convention {self.spin_convention!r}")

    def spec(self, n: int | None = None) -> ChainSpec:
        return ChainSpec(n_sites=self.n if n is None else n, h_x=self.h_x, h_z=self.h_z,
                         anisotropy_d=self.anisotropy_d, defect_e=self.defect_e,
                         j1_final=self.j1_final, j2_final=self.j2_final,
                         spin_convention=Convention(self.spin_convention))


@dataclass(frozen=True)
class ProtocolSection:
    kind: str = "linear_ramp"
    ramp_duration_T: float = 1.0
    tail_power_p: float = 3.0
    t_star: float | None = None
    certificate_k_scale: float = 1.0

    def validate(self):
        if self.kind not in {k.value for k in ProtocolKind}:
            _fail("protocol", "kind", f"unknown protocol {self.kind!r}")
        _positive("protocol", "ramp_duration_T", self.ramp_duration_T)
        if self.kind == ProtocolKind.LINEAR_THEN_POWERLAW.value:
            _positive("protocol", "tail_power_p", self.tail_power_p)
        if self.t_star is not None:
            _positive("protocol", "t_star", self.t_star)
        _positive("protocol", "certificate_k_scale", self.certificate_k_scale)

    def build(self, T: float | None = None) -> QuenchProtocol:
        """Protocol with ramp duration ``T`` (the configured one by default)."""
        T = self.ramp_duration_T if T is None else T
        kind = ProtocolKind(self.kind)
        if kind is ProtocolKind.SUDDEN:
            return QuenchProtocol.sudden()
        if kind is ProtocolKind.LINEAR_RAMP:
            return QuenchProtocol(kind, ramp_duration=T, t_star=self.t_star)
        return QuenchProtocol.linear_then_powerlaw(self.t_star or T, self.tail_power_p)


@dataclass(frozen=True)
class SweepSection:
    n_values: tuple[int, ...] = DEFAULT_N_VALUES
    T_values: tuple[float, ...] = DEFAULT_T_VALUES

    def validate(self):
        if not self.n_values:
            _fail("sweep", "n_values", "must not be empty")
        for n in self.n_values:
            _check_n("sweep", "n_values", n)
        if not self.T_values:
            _fail("sweep", "T_values", "must not be empty")
        for T in self.T_values:
            _positive("sweep", "T_values", T)


@dataclass(frozen=True)
class ObservableSection:
    kind: str = "total_sx"
    axis: str = "x"
    site: int = 1

    def validate(self):
        if self.kind not in ("total_sx", "total_sz", "custom_site_op"):
            _fail("observable", "kind", f"unknown observable {self.kind!r}")
        if self.axis not in ("x", "y", "z"):
            _fail("observable", "axis", f"must be x, y or z, got {self.axis!r}")
        if not isinstance(self.site, int) or self.site < 1:
            _fail("observable", "site", f"must be an integer >= 1, got {self.site!r}")

    def operator(self, n: int, convention: str = "pauli"):
        if self.kind == "total_sx":
            return total_spin("x", n, convention)
        if self.kind == "total_sz":
            return total_spin("z", n, convention)
        if self.site > n:
            raise ConfigError(f"observable.site: site {self.site} outside a {n}-site chain",
                              field="observable.site")
        return single_site_operator(self.axis, self.site, n, convention)


@dataclass(frozen=True)
class AveragingSection:
    """Window policy: [t_switch, t_switch + W] with
    W = min(max(min_window, periods * 2 pi / min_level_spacing), max_window).
    Fluctuations are compared over W and 2 W; while they differ by more than
    convergence_tol, W doubles, at most max_doublings times."""

    min_window: float = 200.0
    periods: float = 50.0
    max_window: float = 2000.0
    convergence_tol: float = 0.01
    max_doublings: int = 3
    oversample: float = 2.0
    amplitude_floor: float = 1e-10
    degeneracy_tol: float = 1e-9
    gap_tol: float = 1e-9
    gap_scan_max_levels: int = 512

    def validate(self):
        for name in ("min_window", "periods", "max_window", "convergence_tol", "oversample",
                     "degeneracy_tol", "gap_tol"):
            _positive("averaging", name, getattr(self, name))
        if self.max_window < self.min_window:
            _fail("averaging", "max_window", "must be >= min_window")
        if not (isinstance(self.amplitude_floor, (int, float)) and 0 <= self.amplitude_floor < 1e-3):
            _fail("averaging", "amplitude_floor", "must lie in [0, 1e-3)")
        if isinstance(self.max_doublings, bool) or not isinstance(self.max_doublings, int) \
                or not 0 <= self.max_doublings <= 10:
            _fail("averaging", "max_doublings", "must be an integer in [0, 10]")
        if not isinstance(self.gap_scan_max_levels, int) or self.gap_scan_max_levels < 1:
            _fail("averaging", "gap_scan_max_levels", "must be a positive integer")


@dataclass(frozen=True)
class BoundsSection:
    t_max_factor: float = 100.0
    samples: int = 16

    def validate(self):
        if not (isinstance(self.t_max_factor, (int, float)) and self.t_max_factor >= 10):
            _fail("bounds", "t_max_factor", "must be >= 10")
        if not isinstance(self.samples, int) or self.samples < 2:
            _fail("bounds", "samples", "must be an integer >= 2")


@dataclass(frozen=True)
class TimeseriesSection:
    post_ramp_time: float = 100.0
    points: int = 2001

    def validate(self):
        _positive("timeseries", "post_ramp_time", self.post_ramp_time)
        if not isinstance(self.points, int) or self.points < 2:
            _fail("timeseries", "points", "must be an integer >= 2")


@dataclass(frozen=True)
class OutputSection:
    out_dir: str = "results"
    format: str = "csv"

    def validate(self):
        if self.format not in ("csv", "json"):
            _fail("output", "format", f"must be csv or json, got {self.format!r}")


def _check_n(section, key, n):
    lo, hi = N_RANGE
    if isinstance(n, bool) or not isinstance(n, int) or not lo <= n <= hi:
        _fail(section, key, f"chain length must be an integer in [{lo}, {hi}], got {n!r}")


_SECTIONS = {
    "chain": ChainSection,
    "protocol": ProtocolSection,
    "integrator": IntegratorConfig,
    "sweep": SweepSection,
    "observable": ObservableSection,
    "averaging": AveragingSection,
    "bounds": BoundsSection,
    "timeseries": TimeseriesSection,
    "output": OutputSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    chain: ChainSection = field(default_factory=ChainSection)
    protocol: ProtocolSection = field(default_factory=ProtocolSection)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    sweep: SweepSection = field(default_factory=SweepSection)
    observable: ObservableSection = field(default_factory=ObservableSection)
    averaging: AveragingSection = field(default_factory=AveragingSection)
    bounds: BoundsSection = field(default_factory=BoundsSection)
    timeseries: TimeseriesSection = field(default_factory=TimeseriesSection)
    output: OutputSection = field(default_factory=OutputSection)

    def __post_init__(self):
        for name in _SECTIONS:
            section = getattr(self, name)
            if hasattr(section, "validate"):
                section.validate()

    def with_overrides(self, **sections) -> ExperimentConfig:
        """Copy with individual keys replaced, e.g. ``protocol={"kind": "sudden"}``."""
        return replace(self, **{k: replace(getattr(self, k), **v) for k, v in sections.items()})


def _coerce(section: str, key: str, value, annotation: str):
    # Integers are accepted where floats are expected; lists become tuples.
    where = f"{section}.{key}"
    if annotation.startswith("tuple"):
        if not isinstance(value, list):
            _fail(section, key, f"must be a list, got {value!r}")
        inner = "int" if "int" in annotation else "float"
        return tuple(_coerce(section, key, v, inner) for v in value)
    if "float" in annotation:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: must be a number, got {value!r}", field=where)
        return float(value)
    if annotation.startswith("int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: must be an integer, got {value!r}", field=where)
        return value
    if annotation.startswith("str"):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: must be a string, got {value!r}", field=where)
        return value
    return value


def _build_section(name: str, table) -> object:
    cls = _SECTIONS[name]
    if not isinstance(table, dict):
        raise ConfigError(f"{name}: expected a table", field=name)
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in table.items():
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown key", field=f"{name}.{key}")
        kwargs[key] = _coerce(name, key, value, str(known[key].type))
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except InvalidArgumentError as exc:
        # Integrator validation lives in IntegratorConfig itself.
        bad = next((k for k in kwargs if k in str(exc)), next(iter(kwargs), "?"))
        raise ConfigError(f"{name}.{bad}: {exc}", field=f"{name}.{bad}") from exc


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a TOML experiment configuration."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        lineno = getattr(exc, "lineno", None)
        if lineno is None:
            m = re.search(r"line (\d+)", str(exc))
            lineno = int(m.group(1)) if m else None
        raise ConfigError(f"syntax error at line {lineno}: {exc}", lineno=lineno) from exc
    sections = {}
    for name, table in data.items():
        if name not in _SECTIONS:
            raise ConfigError(f"{name}: unknown section", field=name)
        sections[name] = _build_section(name, table)
    return ExperimentConfig(**sections)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(config: ExperimentConfig) -> str:
    """TOML text that :func:`parse_config` maps back to ``config``."""
    data = {}
    for name in _SECTIONS:
        table = {}
        for key, value in asdict(getattr(config, name)).items():
            if value is None:
                continue
            table[key] = list(value) if isinstance(value, tuple) else value
        data[name] = table
    return tomli_w.dumps(data)
