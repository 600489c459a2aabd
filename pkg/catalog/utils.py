"""
UTILS.PY - Report writing and config loading for the command line
Features:
- JSON reports with sorted keys and strict (finite) numbers
- CSV curves with 17 significant digits
- JSON config files mirroring the long flag names
- Parsing of comma-separated vectors from flags
"""

import dataclasses
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from django.utils.functional import Promise
from django.utils.translation import gettext_lazy as _

from core.exceptions import InvalidInputError
from core.utils import get_setting

logger = logging.getLogger(__name__)

FORMATS = ('csv', 'json')

# process exit statuses of the viscprof command
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NEGATIVE = 2
EXIT_USAGE = 64


# ================ SERIALIZATION ================

def to_jsonable(value: Any) -> Any:
    """
    Plain JSON types from numpy values, dataclasses, lazy strings and
    objects with ``to_dict``; non-finite floats become null
    """
    if hasattr(value, 'to_dict') and not isinstance(value, pd.DataFrame):
        return to_jsonable(value.to_dict())
    if isinstance(value, pd.DataFrame):
        return to_jsonable(value.to_dict(orient='list'))
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(dataclasses.asdict(value))
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, complex):
        return {'real': to_jsonable(value.real), 'imag': to_jsonable(value.imag)}
    if isinstance(value, (Promise, Path)):
        return str(value)
    return value


def dumps(results: Any) -> str:
    return json.dumps(to_jsonable(results), indent=2, sort_keys=True, allow_nan=False) + '\n'


def emit_report(results: Any, fmt: str, path: Union[str, Path]) -> Path:
    """
    Write ``results`` as JSON (any mapping) or CSV (a DataFrame or a mapping
    of equal-length columns) and return the path written. Floats are
    printed with ``CLI.float_digits`` significant digits in CSV; JSON uses
    the shortest repr that reads back to the same double.
    """
    if fmt not in FORMATS:
        raise InvalidInputError(_('unknown report format {!r}').format(fmt))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == 'json':
        path.write_text(dumps(results), encoding='utf-8')
    else:
        frame = results if isinstance(results, pd.DataFrame) else pd.DataFrame(results)
        digits = int(get_setting('CLI', 'float_digits'))
        frame.to_csv(path, index=False, float_format=f'%.{digits}g')
    logger.info(f"Wrote {fmt} report {path}")
    return path


# ================ CONFIG ================

def load_config(path: Optional[Union[str, Path]]) -> Dict[str, Any]:
    """Options from a JSON config file; keys are long flag names, dashes or underscores"""
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise InvalidInputError(_('config file {} is not valid JSON: {}').format(path, e))
    if not isinstance(data, dict):
        raise InvalidInputError(_('config file {} must hold a JSON object').format(path))
    return {str(k).replace('-', '_'): v for k, v in data.items()}


def merge_options(flags: Dict[str, Any], config: Dict[str, Any]) -> Dict[str, Any]:
    """Config values fill the options not given as flags"""
    merged = dict(config)
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged


def parse_vector(text: Union[str, float, List[float]]) -> List[float]:
    """'0.5,1' -> [0.5, 1.0]; numbers and lists pass through"""
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(part) for part in str(text).replace(' ', '').split(',') if part]
    except ValueError:
        raise InvalidInputError(_('expected comma-separated numbers, got {!r}').format(text))


def parse_params(items: Optional[List[str]]) -> Dict[str, float]:
    """['gamma=1.67', 'kappa=2'] -> {'gamma': 1.67, 'kappa': 2.0}"""
    params = {}
    for item in items or []:
        key, sep, value = str(item).partition('=')
        if not sep or not key:
            raise InvalidInputError(_('system parameters are given as NAME=VALUE, got {!r}').format(item))
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise InvalidInputError(_('parameter {} needs a number, got {!r}').format(key, value))
    return params
