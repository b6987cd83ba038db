"""Pipeline configuration shared by the command line driver.

A config is a JSON object; every section is optional and unknown keys are
rejected before any computation starts.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .audio import CepstraConfig, ChannelFilterSpec
from .exceptions import InputError, ValidationError
from .harness import ChartConfig


@dataclass(frozen=True)
class SolverConfig:
    tol_x: float | None = None
    max_iter: int = 50
    step_fraction: float = 0.05
    self_test_points: int = 100
    self_test_tol: float = 1e-5

    def __post_init__(self):
        if self.max_iter < 1 or self.step_fraction <= 0 or self.self_test_points < 1 or self.self_test_tol <= 0:
            raise ValidationError("solver settings must be positive", **asdict(self))


@dataclass(frozen=True)
class IsoclineConfig:
    """``levels_*`` of ``None`` means every integer level inside the lattice range."""

    levels_1: tuple | None = None
    levels_2: tuple | None = None
    resolution: int = 41
    region: tuple | None = None

    def __post_init__(self):
        if self.resolution < 3:
            raise ValidationError("isocline resolution must be at least 3", resolution=self.resolution)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a full run depends on.

    ``grid`` is ``"auto"`` (box over the central ``mass_fraction`` of the
    data per axis) or ``{"lo": [...], "hi": [...]}``. ``reference_times``
    is ``[t0, t_1, ..., t_N]`` or ``"auto"``.
    """

    cepstra: CepstraConfig = field(default_factory=CepstraConfig)
    channel_filter: ChannelFilterSpec = field(default_factory=ChannelFilterSpec)
    pca_k: int = 2
    grid: object = "auto"
    grid_counts: tuple = (7, 9)
    mass_fraction: float = 0.95
    radius_factor: float = 1.0
    min_samples: int | None = None
    cond_max: float = 1e6
    reference_times: object = None
    reference_scale: float = 1.0
    history_window_s: float | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    isoclines: IsoclineConfig = field(default_factory=IsoclineConfig)
    seed: int = 0

    def __post_init__(self):
        if self.pca_k < 1:
            raise ValidationError("pca_k must be positive", pca_k=self.pca_k)
        if self.grid != "auto":
            if not isinstance(self.grid, dict) or set(self.grid) != {"lo", "hi"}:
                raise ValidationError('grid must be "auto" or {"lo": [...], "hi": [...]}')
        if len(self.grid_counts) < 1 or any(int(c) < 2 for c in self.grid_counts):
            raise ValidationError("grid_counts need at least two nodes per axis", grid_counts=list(self.grid_counts))
        if not 0 < self.mass_fraction <= 1:
            raise ValidationError("mass_fraction must be in (0, 1]", mass_fraction=self.mass_fraction)
        rt = self.reference_times
        if rt is not None and rt != "auto":
            if not isinstance(rt, (list, tuple)) or len(rt) < 2:
                raise ValidationError('reference_times must be [t0, t_1, ..., t_N] or "auto"')
        if self.history_window_s is not None and self.history_window_s <= 0:
            raise ValidationError("history_window_s must be positive")

    def chart_config(self) -> ChartConfig:
        box = None if self.grid == "auto" else (tuple(self.grid["lo"]), tuple(self.grid["hi"]))
        return ChartConfig(
            counts=tuple(int(c) for c in self.grid_counts),
            mass_fraction=self.mass_fraction,
            box=box,
            radius_factor=self.radius_factor,
            min_samples=self.min_samples,
            cond_max=self.cond_max,
            reference_scale=self.reference_scale,
            history_window_s=self.history_window_s,
            tol_x=self.solver.tol_x,
            max_iter=self.solver.max_iter,
            step_fraction=self.solver.step_fraction,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("grid_counts",):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        if not isinstance(d, dict):
            raise ValidationError("config must be a JSON object")
        kw = _strict(cls, d, "config")
        nested = {"cepstra": CepstraConfig, "channel_filter": ChannelFilterSpec,
                  "solver": SolverConfig, "isoclines": IsoclineConfig}
        for key, typ in nested.items():
            if key in kw:
                sub = kw[key]
                if not isinstance(sub, dict):
                    raise ValidationError(f"config section {key!r} must be an object")
                kw[key] = typ(**_tupled(_strict(typ, sub, key)))
        if "grid_counts" in kw:
            kw["grid_counts"] = tuple(kw["grid_counts"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ValidationError(f"bad config value: {exc}") from exc


def _strict(cls, d: dict, where: str) -> dict:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ValidationError(f"unknown keys in {where}", keys=unknown)
    return dict(d)


def _tupled(d: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


def load_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}", path=str(path)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc}", path=str(path)) from exc
    return PipelineConfig.from_dict(data)
