"""Monte Carlo laboratory for Steinhaus random multiplicative functions and multiplicative chaos."""

from .chaos import ChaosParams, Grid, GridMeasure
from .config import ExperimentConfig, load_config, parse_config_text
from .errors import ConfigError, ModelError, PrecisionError, RangeError, ResourceError, RMFError, SamplingError
from .experiments import ResultRecord, run
from .multfunc import MultiplicativeFunction, family_by_name
from .primes import Factorization, PrimeTable, build_prime_table, factor, smooth_numbers
from .steinhaus import SteinhausRealization
from .sums import StepWeight, TruncationScheme

__all__ = [
    "ChaosParams",
    "ConfigError",
    "ExperimentConfig",
    "Factorization",
    "Grid",
    "GridMeasure",
    "ModelError",
    "MultiplicativeFunction",
    "PrecisionError",
    "PrimeTable",
    "RMFError",
    "RangeError",
    "ResourceError",
    "ResultRecord",
    "SamplingError",
    "SteinhausRealization",
    "StepWeight",
    "TruncationScheme",
    "build_prime_table",
    "factor",
    "family_by_name",
    "load_config",
    "parse_config_text",
    "run",
    "smooth_numbers",
]
