import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Dict, List, Optional

import jsonschema

from pycmc.exceptions import ConfigError

SCHEMA_PATH = os.path.join(os.path.dirname(__file__), "schemas", "experiment.schema.json")


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by every module.

    Attributes:
        equality: float, default tolerance for "equal" comparisons.
        singular: float, determinant threshold below which a loop is singular.
        truncation: float, accepted Laurent truncation residual.
        ode_rtol: float, relative tolerance of the z-ODE integrator.
        ode_atol: float, absolute tolerance of the z-ODE integrator.
        probe: float, accepted disagreement between the two z-probes of zap.
        pole: float, relative size of an index −1 Laurent coefficient that
            marks a genuine pole.
        bandwidth: int, initial Laurent bandwidth K (K⁻ = K⁺ = K).
        samples: int, initial number of λ-samples M on a circle.
        max_bandwidth: int, bandwidth ceiling for doubling-on-demand.
    """

    equality: float = 1e-10
    singular: float = 1e-12
    truncation: float = 1e-10
    ode_rtol: float = 1e-11
    ode_atol: float = 1e-13
    probe: float = 1e-8
    pole: float = 1e-6
    bandwidth: int = 64
    samples: int = 256
    max_bandwidth: int = 512

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Optional[Dict]) -> "Tolerances":
        if not d:
            return cls()
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown tolerance keys: {sorted(unknown)}")
        return replace(cls(), **d)


DEFAULT_TOLERANCES = Tolerances()


@dataclass
class ExperimentConfig:
    """Resolved experiment configuration (all defaults filled).

    Attributes:
        residue: Dict, keys a_re, a_im, b_re, b_im, c.
        r: float, radius of the circle C_r, in (0, 1].
        perturbation: List[Dict], potential terms, each
            {"k": z-power, "lambda_power": int, "matrix": 2x2 of [re, im]}.
        grid: Dict, keys x_min, x_max, nx, ny.
        lambda_sym: List[float], Sym point as [re, im] on the unit circle.
        H: float, mean curvature.
        factors: List[Dict], simple factors {"lam0": [re, im],
            "line": [[re, im], [re, im]]}.
        outputs: Dict, file names of the obj, csv and json artifacts.
        tolerances: Tolerances.
        verify: Dict, harness parameters (z_decades, n_target, windows,
            growth_lambdas).
    """

    residue: Dict
    r: float = 1.0
    perturbation: List[Dict] = field(default_factory=list)
    grid: Dict = field(default_factory=dict)
    lambda_sym: List[float] = field(default_factory=lambda: [1.0, 0.0])
    H: float = 1.0
    factors: List[Dict] = field(default_factory=list)
    outputs: Dict = field(default_factory=dict)
    tolerances: Tolerances = DEFAULT_TOLERANCES
    verify: Dict = field(default_factory=dict)

    def __post_init__(self):
        grid = {"x_min": -4.0, "x_max": 0.0, "nx": 64, "ny": 32}
        grid.update(self.grid)
        self.grid = grid
        outputs = {"obj": "surface.obj", "csv": "report.csv", "json": "summary.json"}
        outputs.update(self.outputs)
        self.outputs = outputs
        verify = {
            "z_min": 1e-4,
            "z_max": 1e-1,
            "n_z": 7,
            "n_target": 1,
            "windows": 10,
            "growth_lambdas": 20,
        }
        verify.update(self.verify)
        self.verify = verify
        if not 0.0 < self.r <= 1.0:
            raise ConfigError(f"r must lie in (0, 1], got {self.r}")
        if self.a == 0 or self.b == 0:
            raise ConfigError("residue parameters a and b must be nonzero")

    @property
    def a(self) -> complex:
        return complex(self.residue.get("a_re", 0.0), self.residue.get("a_im", 0.0))

    @property
    def b(self) -> complex:
        return complex(self.residue.get("b_re", 0.0), self.residue.get("b_im", 0.0))

    @property
    def c(self) -> float:
        return float(self.residue.get("c", 0.0))

    @property
    def lam_sym(self) -> complex:
        return complex(self.lambda_sym[0], self.lambda_sym[1])

    def to_dict(self) -> Dict:
        d = asdict(self)
        d["tolerances"] = self.tolerances.to_dict()
        return d


def load_schema() -> Dict:
    with open(SCHEMA_PATH, "r") as f:
        return json.load(f)


def validate_config(raw: Dict) -> None:
    """Validates a raw config dict against the experiment schema.

    Raises:
        jsonschema.ValidationError: if the dict violates the schema.
    """
    jsonschema.validate(instance=raw, schema=load_schema())


def config_from_dict(raw: Dict) -> ExperimentConfig:
    validate_config(raw)
    raw = dict(raw)
    raw["tolerances"] = Tolerances.from_dict(raw.get("tolerances"))
    return ExperimentConfig(**raw)


def load_config(path: str) -> ExperimentConfig:
    """Loads and validates an experiment config file.

    Args:
        path: str, path of a JSON config file.

    Returns:
        config: ExperimentConfig with all defaults filled.

    Raises:
        ConfigError: if the file is missing or not valid JSON.
        jsonschema.ValidationError: if the content violates the schema.
    """
    if not os.path.exists(path):
        raise ConfigError(f"config file {path} does not exist")
    try:
        with open(path, "r") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}")
    logging.debug(f"loaded config from {path}")
    return config_from_dict(raw)
