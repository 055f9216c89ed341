import re
from dataclasses import dataclass, field
from typing import Tuple

from errors import ConfigError

MULTISCRIPT_NAMES = ("Latin", "Arabic", "Kannada")
# data directory keys, in script order
SCRIPT_KEYS = ("latin", "arabic", "kannada")

_SPEC_RE = re.compile(r"^\s*(\d+)\s*[xX]\s*(\d+)\s*$")


@dataclass(frozen=True)
class GridTaskSpec:
    """Factorization of the main label space into rows (scripts) x columns (digits)."""
    rows: int
    cols: int
    script_names: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError(f"Grid extents must be positive, got {self.rows}x{self.cols}")
        names = tuple(self.script_names) or tuple(f"row_{i}" for i in range(self.rows))
        if len(names) != self.rows:
            raise ConfigError(f"Expected {self.rows} script names, got {len(names)}")
        object.__setattr__(self, "script_names", names)

    @property
    def num_classes(self) -> int:
        return self.rows * self.cols

    @property
    def tag(self) -> str:
        return f"{self.rows}x{self.cols}"

    def head_widths(self) -> dict:
        return {"main": self.num_classes, "digit": self.cols, "script": self.rows, "aux": 4}


MULTISCRIPT = GridTaskSpec(3, 10, MULTISCRIPT_NAMES)
AMHARIC = GridTaskSpec(11, 7, tuple(f"row_{i}" for i in range(11)))


def single_script_spec(name: str, cols: int = 10) -> GridTaskSpec:
    return GridTaskSpec(1, cols, (name,))


def parse_spec(text: str) -> GridTaskSpec:
    """'RxC' -> GridTaskSpec, reusing the preset names for 3x10 and 11x7."""
    match = _SPEC_RE.match(text or "")
    if not match:
        raise ConfigError(f"Invalid grid spec {text!r}; expected RxC such as 3x10 or 11x7")
    rows, cols = int(match.group(1)), int(match.group(2))
    for preset in (MULTISCRIPT, AMHARIC):
        if (rows, cols) == (preset.rows, preset.cols):
            return preset
    if rows == 1 and cols == 10:
        return single_script_spec(MULTISCRIPT_NAMES[0])
    return GridTaskSpec(rows, cols)
