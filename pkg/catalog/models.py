"""
MODELS.PY - Problem configuration and command results

Nothing here is persisted; a command validates its options into a
ProblemConfig, runs, and hands a RunResult to the report writer.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import pandas as pd


@dataclass(frozen=True)
class ProblemConfig:
    """Validated options of one command"""

    command: str
    system: Optional[str]
    params: Dict[str, float] = field(default_factory=dict)
    options: Dict[str, Any] = field(default_factory=dict)
    out: Path = Path('.')

    def get(self, key: str, default: Any = None) -> Any:
        value = self.options.get(key)
        return default if value is None else value


@dataclass
class RunResult:
    """
    What a command produced. ``payload`` goes to ``<name>.json``, each frame
    to ``<name>[_<key>].csv``. ``negative`` marks a well-defined negative
    answer (hypotheses fail), reported with exit status 2.
    """

    name: str
    payload: Dict[str, Any]
    frames: Dict[str, pd.DataFrame] = field(default_factory=dict)
    negative: bool = False
    message: str = ''
