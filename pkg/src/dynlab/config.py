"""Experiment configuration: a TOML file with sectioned tables, validated into dataclasses."""

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from dynlab.slicing import INF


class ConfigError(ValueError):
    pass


@dataclass
class Bumps:
    c_H: float = 0.25
    r_rest: float = 0.3
    r_on: float = 0.45
    u_inner: float = 0.7


@dataclass
class Chart:
    y0: list = field(default_factory=lambda: [0.3, 0.6])
    gamma: float = 0.04

    def y0_for(self, d):
        """Base fiber point; shorter lists are repeated to length d."""
        return [self.y0[i % len(self.y0)] for i in range(d)]


@dataclass
class Sigma:
    max: float = 0.2
    n_grid: int = 8
    samples: int = 10000
    n_back: int = 2


@dataclass
class Samples:
    lyapunov_steps: int = 100000
    slowed_orbits: int = 100
    slowed_steps: int = 10000
    audit_points: int = 1000
    central_orbits: int = 2000
    central_steps: int = 20000


@dataclass
class Kac:
    center: list = field(default_factory=lambda: [0.3, 0.7])
    radius: float = 0.1
    samples: int = 20000


@dataclass
class DeltaSearch:
    candidates: int = 64
    gamma_min: float = 0.01
    gamma_max: float = 0.05
    density: int = 1
    recheck_density: int = 10


@dataclass
class Slice:
    ell: object = 3  # positive integer or "inf"
    dim: int = 3
    k_max: int = 8
    omega: float = 0.5
    width: float = 0.3
    epsilon: float = 0.1
    r: int = 1
    C: float = 1.0
    n_orbits: int = 100
    n_steps: int = 10000
    n_seeds: int = 100


@dataclass
class Flatness:
    n_max: int = 3


SECTIONS = {
    "bumps": Bumps,
    "chart": Chart,
    "sigma": Sigma,
    "samples": Samples,
    "kac": Kac,
    "delta_search": DeltaSearch,
    "slice": Slice,
    "flatness": Flatness,
}


@dataclass
class ExperimentConfig:
    seed: int
    m: int = 5
    t: float = 1.0
    step: float = 1e-3
    output: str = "out"
    bumps: Bumps = field(default_factory=Bumps)
    chart: Chart = field(default_factory=Chart)
    sigma: Sigma = field(default_factory=Sigma)
    samples: Samples = field(default_factory=Samples)
    kac: Kac = field(default_factory=Kac)
    delta_search: DeltaSearch = field(default_factory=DeltaSearch)
    slice: Slice = field(default_factory=Slice)
    flatness: Flatness = field(default_factory=Flatness)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an integer in [0, 2^64)")
        if isinstance(self.m, bool) or not isinstance(self.m, int) or self.m < 5:
            raise ConfigError("m must be an integer >= 5")
        if not 0.0 < self.t <= 1.0:
            raise ConfigError("t must lie in (0, 1]")
        n = round(self.t / self.step) if self.step > 0 else 0
        if n < 1 or abs(n * self.step - self.t) > 1e-9 * self.t:
            raise ConfigError("step must be positive and divide t")
        if not 0.0 < self.chart.gamma < 0.1:
            raise ConfigError("chart.gamma must lie in (0, 0.1)")
        if not self.chart.y0:
            raise ConfigError("chart.y0 must be non-empty")
        if not 0.0 < self.sigma.max <= 1.0:
            raise ConfigError("sigma.max must lie in (0, 1]")
        if self.sigma.n_grid < 4 or self.sigma.samples < 1000 or self.sigma.samples % 4:
            raise ConfigError("sigma needs n_grid >= 4 and samples >= 1000, a multiple of 4")
        if not 0.0 < self.kac.radius < 0.5:
            raise ConfigError("kac.radius must lie in (0, 0.5)")
        ell = self.slice.ell
        if not (ell == INF or (isinstance(ell, int) and not isinstance(ell, bool) and ell >= 1)):
            raise ConfigError('slice.ell must be a positive integer or "inf"')
        if self.slice.dim < 2 or self.slice.epsilon <= 0 or self.slice.r < 1 or self.slice.C <= 0:
            raise ConfigError("slice needs dim >= 2, epsilon > 0, r >= 1, C > 0")
        if self.samples.lyapunov_steps < 1000 or self.samples.slowed_steps < 1000:
            raise ConfigError("Lyapunov runs need at least 1000 steps")

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "seed" not in data:
            raise ConfigError("seed is required")
        top = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - top
        if unknown:
            raise ConfigError(f"unknown keys: {sorted(unknown)}")
        for name, kind in SECTIONS.items():
            if name in data:
                sec = data[name]
                if not isinstance(sec, dict):
                    raise ConfigError(f"[{name}] must be a table")
                known = {f.name for f in dataclasses.fields(kind)}
                bad = set(sec) - known
                if bad:
                    raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
                data[name] = kind(**sec)
        for key in ("t", "step"):
            if key in data and isinstance(data[key], int):
                data[key] = float(data[key])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self):
        return dataclasses.asdict(self)

    def with_overrides(self, seed=None, output=None):
        d = self.to_dict()
        if seed is not None:
            d["seed"] = seed
        if output is not None:
            d["output"] = output
        return ExperimentConfig.from_dict(d)

    def hash(self):
        """sha256 of the canonical JSON form, excluding the output directory."""
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def load_config(path):
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from exc
    return ExperimentConfig.from_dict(data)
