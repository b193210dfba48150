"""
Base classes and interfaces for the experiment system
"""

import hashlib
import json
import math
import time
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import ConfigError, DomainError, InvalidInputError


@dataclass
class ExperimentContext:
    """Everything an experiment needs to run: merged parameters and solver settings"""
    params: Dict[str, Any]
    config: SolverConfig = DEFAULT_CONFIG
    output_format: str = 'csv'
    cache_enabled: bool = False
    debug: bool = False


@dataclass
class Table:
    """Rows destined for a CSV file"""
    columns: List[str]
    rows: List[Sequence[Any]] = field(default_factory=list)


@dataclass
class ExperimentResult:
    """
    Outcome of one experiment

    `table` is the primary CSV output, `summary` goes to the JSON sidecar
    and `acceptance` is the named pass/fail vector recorded in the manifest.
    """
    experiment_name: str
    summary: Dict[str, Any]
    table: Optional[Table] = None
    acceptance: Dict[str, bool] = field(default_factory=dict)
    seeds: Dict[str, int] = field(default_factory=dict)
    document: Optional[str] = None
    from_cache: bool = False

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop('from_cache')
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentResult':
        table = data.get('table')
        return cls(
            experiment_name=data['experiment_name'],
            summary=data['summary'],
            table=Table(**table) if table else None,
            acceptance=data.get('acceptance', {}),
            seeds=data.get('seeds', {}),
            document=data.get('document'),
            from_cache=True,
        )


def to_jsonable(value: Any) -> Any:
    """Plain JSON types for numpy scalars/arrays, fractions and tuples"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value


class Experiment(ABC):
    """Base class for all experiments; one per CLI subcommand"""

    command: str = ''
    description: str = ''
    defaults: Dict[str, Any] = {}
    required: Tuple[str, ...] = ()

    def __init__(self, priority: int = 0):
        self.priority = priority
        self.name = self.command or self.__class__.__name__

    def resolve_params(self, params: Dict[str, Any]) -> Dict[str, Any]:
        """Defaults overlaid by the given parameters; missing required keys rejected"""
        merged = dict(self.defaults)
        merged.update({k: v for k, v in params.items() if v is not None})
        missing = [key for key in self.required if merged.get(key) is None]
        if missing:
            raise ConfigError(f"{self.name}: missing parameter(s) {', '.join(missing)}")
        return merged

    @abstractmethod
    def validate(self, context: ExperimentContext):
        """Raise InvalidInputError/DomainError/SizeError before any work is done"""
        pass

    @abstractmethod
    def run(self, context: ExperimentContext) -> ExperimentResult:
        pass

    def __lt__(self, other):
        """Enable sorting by priority (higher priority first)"""
        return self.priority > other.priority


class TimingMixin:
    """Mixin to add timing capabilities to experiments"""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.timing_data = {}

    def time_operation(self, operation_name: str, func, *args, **kwargs):
        """Time an operation and store the result"""
        start_time = time.time()
        try:
            result = func(*args, **kwargs)
            self.timing_data[operation_name] = time.time() - start_time
            return result
        except Exception:
            self.timing_data[f"{operation_name}_failed"] = time.time() - start_time
            raise

    def get_timing_summary(self) -> Dict[str, float]:
        return self.timing_data.copy()


class CacheableExperiment(TimingMixin, Experiment):
    """Experiment whose result may be served from the result cache"""

    def get_cache_key(self, context: ExperimentContext) -> str:
        """md5 of the experiment name, its parameters and the solver settings"""
        key_data = json.dumps({
            'experiment': self.name,
            'params': to_jsonable(context.params),
            'solver': to_jsonable(asdict(context.config)),
        }, sort_keys=True)
        return hashlib.md5(key_data.encode()).hexdigest()

    def should_use_cache(self, context: ExperimentContext) -> bool:
        return context.cache_enabled


# Shared parameter checks

def require_finite(params: Dict[str, Any], *names: str):
    for name in names:
        value = params.get(name)
        try:
            number = float(value)
        except (TypeError, ValueError):
            raise InvalidInputError(f"{name} must be a number, got {value!r}")
        if not math.isfinite(number):
            raise InvalidInputError(f"{name} must be finite, got {value!r}")


def require_nonnegative(params: Dict[str, Any], *names: str):
    require_finite(params, *names)
    for name in names:
        if float(params[name]) < 0:
            raise DomainError(f"{name} must be nonnegative, got {params[name]}")


def require_int(params: Dict[str, Any], name: str, minimum: int) -> int:
    value = params.get(name)
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) and not (
            isinstance(value, float) and value.is_integer()):
        raise InvalidInputError(f"{name} must be an integer, got {value!r}")
    if int(value) < minimum:
        raise DomainError(f"{name} must be at least {minimum}, got {value}")
    return int(value)


def float_list(value: Any, name: str) -> List[float]:
    """A list of numbers from a list or a comma-separated string"""
    if isinstance(value, str):
        items = [item for item in value.split(',') if item.strip()]
    elif isinstance(value, (list, tuple)):
        items = list(value)
    else:
        items = [value]
    try:
        numbers = [float(item) for item in items]
    except (TypeError, ValueError):
        raise InvalidInputError(f"{name} must be a list of numbers, got {value!r}")
    if not numbers or not all(math.isfinite(x) for x in numbers):
        raise InvalidInputError(f"{name} must be a non-empty list of finite numbers, got {value!r}")
    return numbers


def int_list(value: Any, name: str) -> List[int]:
    numbers = float_list(value, name)
    if not all(x.is_integer() for x in numbers):
        raise InvalidInputError(f"{name} must be a list of integers, got {value!r}")
    return [int(x) for x in numbers]
