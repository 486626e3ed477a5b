"""Run configuration: YAML text with unit-suffixed keys, loaded into dataclasses."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


@dataclass
class KanamoriConfig:
    U: float = 0.0
    U0: float = 0.0
    J: float = 0.0
    density_only: bool = False


@dataclass
class SystemConfig:
    """``type`` is ``aim`` (explicit impurity model), ``bethe`` or ``lattice`` (file)."""

    type: str = "aim"
    kanamori: KanamoriConfig = field(default_factory=KanamoriConfig)
    h_corr_ev: list = field(default_factory=lambda: [[0.0]])
    bath_energies_ev: list = field(default_factory=list)
    bath_hybridization_ev: list = field(default_factory=list)
    half_bandwidth_ev: float = 2.0
    n_corr: int = 1
    n_dos_points: int = 400
    lattice_file: str | None = None
    corr_mask: list | None = None


@dataclass
class ThermoConfig:
    beta_inv_ev: float = 0.025
    eps_b: float = 1e-4
    n_matsu: int = 2047


@dataclass
class QpeConfig:
    n_qval: int = 7
    t0_per_ev: float = 6.0
    e_orig_ev: float = -0.5
    n_setting: int = 3
    shots: int = 0
    warn_alias: bool = True


@dataclass
class QavgConfig:
    multiplicities_e: list = field(default_factory=lambda: [1, 1, 1])
    multiplicities_h: list = field(default_factory=lambda: [1, 1, 1])
    energy_range_ev: list | None = None
    width_range_ev: list | None = None
    tau_dec_per_ev: float = 1.0
    weight_mode: str = "counts"
    n_steps: int = 40000
    n_runs: int = 256
    tau_metro_start: float = 500.0
    tau_metro_end: float = 4000.0
    swap_prob: float = 0.1
    spin_block: bool = True
    gamma_source: str = "histograms"


@dataclass
class DmftBlock:
    solver: str = "fci"
    n_bath: int = 3
    tol_ev: float = 1e-3
    max_iter: int = 30
    mixing: float = 0.7
    target_occupancy: float | None = None
    mu_ev: float = 0.0
    n_metric: int = 100
    diagonal_bath: bool = True
    n_fit_starts: int = 20


@dataclass
class OutputConfig:
    dos_delta_ev: float = 0.02
    omega_min_ev: float = -6.0
    omega_max_ev: float = 6.0
    n_omega: int = 601
    n_matsu_out: int = 20
    channel_grid_ev: list = field(default_factory=lambda: [-3.0, 3.0, 601])


@dataclass
class RunConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    thermo: ThermoConfig = field(default_factory=ThermoConfig)
    qpe: QpeConfig = field(default_factory=QpeConfig)
    qavg: QavgConfig = field(default_factory=QavgConfig)
    dmft: DmftBlock = field(default_factory=DmftBlock)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int | None = None

    @property
    def beta(self) -> float:
        return 1.0 / self.thermo.beta_inv_ev

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    def config_hash(self) -> str:
        """Hash of the physics content; the seed is recorded separately."""
        d = self.to_dict()
        d.pop("seed", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def validate(self) -> "RunConfig":
        s, t, q, a, d = self.system, self.thermo, self.qpe, self.qavg, self.dmft
        _require(s.type in ("aim", "bethe", "lattice"), "system.type", "must be aim, bethe or lattice")
        _require(t.beta_inv_ev > 0, "thermo.beta_inv_ev", "must be positive")
        _require(0 <= t.eps_b < 1, "thermo.eps_b", "must lie in [0, 1)")
        _require(t.n_matsu >= 0, "thermo.n_matsu", "must be nonnegative")
        _require(s.kanamori.U >= 0, "system.kanamori.U", "must be nonnegative")
        _require(q.n_qval >= 1, "qpe.n_qval", "must be >= 1")
        _require(q.t0_per_ev > 0, "qpe.t0_per_ev", "must be positive")
        _require(q.n_setting >= 1, "qpe.n_setting", "must be >= 1")
        _require(q.shots >= 0, "qpe.shots", "must be nonnegative")
        _require(a.weight_mode in ("uniform", "counts", "gamma"), "qavg.weight_mode", "unknown mode")
        _require(a.gamma_source in ("histograms", "exact"), "qavg.gamma_source", "must be histograms or exact")
        _require(all(int(x) >= 1 for x in a.multiplicities_e + a.multiplicities_h),
                 "qavg.multiplicities_e", "multiplicities must be >= 1")
        _require(a.n_steps >= 0 and a.n_runs >= 1, "qavg.n_steps", "need n_steps >= 0 and n_runs >= 1")
        _require(d.solver in ("fci", "qavg"), "dmft.solver", "must be fci or qavg")
        _require(0 < d.mixing <= 1, "dmft.mixing", "must lie in (0, 1]")
        _require(d.n_bath >= 1, "dmft.n_bath", "must be >= 1")
        if s.type == "lattice":
            _require(bool(s.lattice_file), "system.lattice_file", "required for a lattice system")
        if s.type == "bethe":
            _require(s.half_bandwidth_ev > 0, "system.half_bandwidth_ev", "must be positive")
        return self


def _require(cond: bool, name: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{name}: {msg}")


REQUIRED = (("thermo", "beta_inv_ev"),)


def _build(cls, data, path: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown key(s) in {path or 'config'}: {', '.join(sorted(unknown))}")
    kwargs = {}
    for name, value in data.items():
        sub = _NESTED.get((cls, name))
        kwargs[name] = _build(sub, value, f"{path}.{name}" if path else name) if sub else value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


_NESTED = {
    (RunConfig, "system"): SystemConfig,
    (RunConfig, "thermo"): ThermoConfig,
    (RunConfig, "qpe"): QpeConfig,
    (RunConfig, "qavg"): QavgConfig,
    (RunConfig, "dmft"): DmftBlock,
    (RunConfig, "output"): OutputConfig,
    (SystemConfig, "kanamori"): KanamoriConfig,
}


def from_dict(data: dict, require: bool = True) -> RunConfig:
    """Build and validate; with ``require`` the inverse temperature must be given explicitly."""
    if require:
        for block, key in REQUIRED:
            if not isinstance(data, dict) or key not in (data.get(block) or {}):
                raise ConfigError(f"missing required field {block}.{key}")
    return _build(RunConfig, data, "").validate()


def loads(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    return from_dict(data or {})


def load(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text)
