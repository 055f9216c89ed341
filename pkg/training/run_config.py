from typing import Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from tasks.grid import (
    AMHARIC,
    MULTISCRIPT,
    MULTISCRIPT_NAMES,
    SCRIPT_KEYS,
    GridTaskSpec,
    parse_spec,
    single_script_spec,
)
from tasks.labels import FACTOR_MODES

from .losses import OBJECTIVES

# (sigma1, sigma2) presets per grid
SIGMA_PRESETS: Dict[Tuple[int, int], Tuple[float, float]] = {
    (MULTISCRIPT.rows, MULTISCRIPT.cols): (0.2, 0.3),
    (AMHARIC.rows, AMHARIC.cols): (0.65, 0.35),
}
DEFAULT_SIGMAS = SIGMA_PRESETS[(MULTISCRIPT.rows, MULTISCRIPT.cols)]

SINGLE_ALIASES = {"lat": "latin", "arab": "arabic", "kan": "kannada"}


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: str = "new"
    spec: str = "3x10"
    epochs: int = Field(15, ge=1)
    batch_size: int = Field(32, ge=1)
    lr: float = Field(1e-3, gt=0)
    seed: int = Field(0, ge=0)
    repeats: int = Field(3, ge=1)
    sigma1: Optional[float] = Field(None, ge=0)
    sigma2: Optional[float] = Field(None, ge=0)
    factor_mode: str = "normalized"
    val_fraction: float = Field(0.16, gt=0, lt=1)
    train_limit: Optional[int] = Field(None, ge=1)
    test_limit: Optional[int] = Field(None, ge=1)
    out: str = "runs"
    latin_dir: Optional[str] = None
    arabic_dir: Optional[str] = None
    kannada_dir: Optional[str] = None
    grid_dir: Optional[str] = None

    @field_validator("factor_mode")
    @classmethod
    def _factor_mode(cls, value: str) -> str:
        if value not in FACTOR_MODES:
            raise ValueError(f"factor_mode must be one of {', '.join(FACTOR_MODES)}")
        return value

    @field_validator("spec")
    @classmethod
    def _spec(cls, value: str) -> str:
        return parse_spec(value).tag

    @model_validator(mode="after")
    def _model_name(self) -> "RunConfig":
        # resolves and validates the name; raises for unknown models
        self.objective  # noqa: B018
        return self

    @property
    def single_script(self) -> Optional[str]:
        """Script key for single-script models, else None."""
        name = self.model.lower()
        if name in SINGLE_ALIASES:
            return SINGLE_ALIASES[name]
        if name.startswith("single:"):
            script = name.split(":", 1)[1]
            script = SINGLE_ALIASES.get(script, script)
            if script not in SCRIPT_KEYS:
                raise ValueError(f"Unknown script {script!r} in model {self.model!r}")
            return script
        return None

    @property
    def objective(self) -> str:
        if self.single_script is not None:
            return "single"
        name = self.model.lower()
        if name not in OBJECTIVES or name == "single":
            raise ValueError(
                f"Unknown model {self.model!r}; expected base, wloss, new, lat, arab, kan or single:<script>"
            )
        return name

    @property
    def grid(self) -> GridTaskSpec:
        if self.single_script is not None:
            return single_script_spec(MULTISCRIPT_NAMES[SCRIPT_KEYS.index(self.single_script)])
        return parse_spec(self.spec)

    @property
    def data_source(self) -> str:
        if self.single_script is not None:
            return self.single_script
        grid = self.grid
        return "multiscript" if (grid.rows, grid.cols) == (MULTISCRIPT.rows, MULTISCRIPT.cols) else "grid"

    @property
    def sigmas(self) -> Tuple[float, float]:
        grid = self.grid
        preset = SIGMA_PRESETS.get((grid.rows, grid.cols), DEFAULT_SIGMAS)
        return (
            preset[0] if self.sigma1 is None else self.sigma1,
            preset[1] if self.sigma2 is None else self.sigma2,
        )

    @property
    def report_columns(self) -> int:
        """Per-script accuracy columns in the metrics CSV (at least the three scripts)."""
        return max(self.grid.rows, len(SCRIPT_KEYS))

    @property
    def script_offset(self) -> int:
        """Column a single-script model's accuracy lands in."""
        return SCRIPT_KEYS.index(self.single_script) if self.single_script else 0

    @property
    def run_id(self) -> str:
        name = self.model.lower().replace(":", "-")
        return f"{name}-{self.grid.tag}-s{self.seed}"

    def data_dirs(self) -> Dict[str, Optional[str]]:
        return {
            "latin": self.latin_dir,
            "arabic": self.arabic_dir,
            "kannada": self.kannada_dir,
            "grid": self.grid_dir,
        }
