"""Run configuration: environment, KEY=VALUE config files and CLI overrides.

Precedence is CLI flag, then config file, then environment, then defaults.
"""
import importlib.util
import logging
import os
import shutil
from pathlib import Path
from typing import Any, Literal, Optional

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from annealing.alignment import AnnealSchedule
from annealing.centroid import NestedEndpoints
from annealing.workers import default_workers
from errors import ConfigError

load_dotenv()

logger = logging.getLogger(__name__)

TOOL_VERSION = "0.1.0"

ACTIONS = (
    "ingest",
    "validate",
    "augment",
    "compress",
    "distance",
    "distance-matrix",
    "ablation",
    "centroid",
    "repair",
    "synth",
    "dist-error",
    "centroid-error",
    "mantel",
    "mine",
)


def _env_flag(name: str) -> bool:
    return os.getenv(name, "false").lower() == "true"


class Settings(BaseModel):
    """Process-wide defaults taken from the environment."""

    solver: Optional[str] = None
    workers: int = Field(default_factory=default_workers, ge=1)
    seed: int = 0
    debug: bool = False
    solver_timeout: float = Field(default=300.0, gt=0)

    @classmethod
    def from_env(cls) -> "Settings":
        values: dict[str, Any] = {"debug": _env_flag("DEBUG_MODE")}
        for key, env in (("solver", "STG_SOLVER"), ("workers", "STG_WORKERS"), ("seed", "STG_SEED"), ("solver_timeout", "STG_SOLVER_TIMEOUT")):
            if os.getenv(env):
                values[key] = os.getenv(env)
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigError(f"Invalid environment settings: {e}")


class PipelineConfig(BaseModel):
    """One end-to-end run. Defaults are the reference hyperparameters."""

    model_config = ConfigDict(extra="forbid")

    pipeline: Literal[ACTIONS] = "distance"
    inputs: list[Path] = Field(default_factory=list)
    out: Path = Path("out")
    seed: int = 0
    workers: int = Field(default=1, ge=1)
    solver: Optional[str] = None
    solver_timeout: float = Field(default=300.0, gt=0)
    lns: bool = True
    levels: Optional[list[str]] = None
    exhaustive: bool = False
    dump_perm: bool = False
    dump_smt: bool = False

    align_steps: int = Field(default=2000, ge=1)
    align_t_max: float = 2.0
    align_t_min: float = 0.01
    centroid_steps: int = Field(default=1000, ge=1)
    centroid_t_max: float = 2.5
    centroid_t_min: float = 0.05
    nested_t_initial_max: float = 1.0
    nested_t_final_max: float = 0.05
    nested_steps_initial: int = Field(default=500, ge=1)
    nested_steps_final: int = Field(default=5, ge=1)
    nested_t_min: float = 0.01

    repair: bool = True
    k: int = Field(default=10, ge=1)
    k_values: list[int] = Field(default_factory=lambda: list(range(3, 15)))
    p_grid: list[float] = Field(default_factory=lambda: [round(0.1 * i, 1) for i in range(1, 31)])
    edits: Optional[int] = Field(default=None, ge=0)
    subgraph_size: int = Field(default=5, ge=2, le=5)
    centroid: Optional[Path] = None
    permutations: int = Field(default=9999, ge=1)
    exact: bool = False

    @field_validator("inputs", "levels", "k_values", "p_grid", mode="before")
    @classmethod
    def _split_lists(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @model_validator(mode="after")
    def _check_schedules(self) -> "PipelineConfig":
        for name in ("align", "centroid"):
            if getattr(self, f"{name}_t_min") >= getattr(self, f"{name}_t_max"):
                raise ValueError(f"{name}_t_min must be below {name}_t_max")
        return self

    def align_schedule(self) -> AnnealSchedule:
        return AnnealSchedule(steps=self.align_steps, t_max=self.align_t_max, t_min=self.align_t_min, seed=self.seed)

    def outer_schedule(self) -> AnnealSchedule:
        return AnnealSchedule(steps=self.centroid_steps, t_max=self.centroid_t_max, t_min=self.centroid_t_min, seed=self.seed)

    def nested_endpoints(self) -> NestedEndpoints:
        return NestedEndpoints(
            t_initial_max=self.nested_t_initial_max,
            t_final_max=self.nested_t_final_max,
            steps_initial=self.nested_steps_initial,
            steps_final=self.nested_steps_final,
            t_min=self.nested_t_min,
        )

    @property
    def needs_solver(self) -> bool:
        if self.pipeline == "repair":
            return True
        return self.repair and self.pipeline in ("centroid", "centroid-error")


def read_config_file(path: Path) -> dict[str, str]:
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    values = {key.lower().replace("-", "_"): value for key, value in dotenv_values(path).items() if value is not None}
    logger.debug(f"Read {len(values)} settings from {path}.")
    return values


def load_config(path: Optional[Path] = None, overrides: Optional[dict[str, Any]] = None, settings: Optional[Settings] = None) -> PipelineConfig:
    settings = settings or Settings.from_env()
    values: dict[str, Any] = {
        "seed": settings.seed,
        "workers": settings.workers,
        "solver": settings.solver,
        "solver_timeout": settings.solver_timeout,
    }
    if path is not None:
        values.update(read_config_file(path))
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})
    try:
        config = PipelineConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"Invalid pipeline configuration: {e}")
    if config.needs_solver:
        config.solver = resolve_solver(config.solver)
    return config


def _packaged_z3() -> Optional[str]:
    spec = importlib.util.find_spec("z3")
    if spec is None or not spec.submodule_search_locations:
        return None
    package = Path(list(spec.submodule_search_locations)[0])
    for candidate in (package / "bin" / "z3", package.parent / "bin" / "z3"):
        if candidate.is_file() and os.access(candidate, os.X_OK):
            return str(candidate)
    return None


def find_solver(explicit: Optional[str] = None) -> Optional[str]:
    """Solver binary from the flag, STG_SOLVER, z3 on PATH, or the z3-solver package; None if absent."""
    for candidate in (explicit, os.getenv("STG_SOLVER")):
        if candidate:
            return shutil.which(candidate) or (candidate if Path(candidate).is_file() else None)
    return shutil.which("z3") or _packaged_z3()


def resolve_solver(explicit: Optional[str] = None) -> str:
    solver = find_solver(explicit)
    if solver is None:
        raise ConfigError("No SMT solver found. Pass --solver, set STG_SOLVER or install z3.")
    logger.debug(f"Using solver {solver}.")
    return solver
