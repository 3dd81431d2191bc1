"""Model constants for the concrete geometric Lorenz model."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass

from .errors import InputError

SQRT2 = math.sqrt(2.0)
CONE_ALPHA = 1.0 / (SQRT2 - 1.0)


@dataclass(frozen=True)
class ModelParams:
    """All constants of the model.

    The quotient map is ``f(x) = sign(x) (mu |x|**rho - 1)`` and the second
    component of the return map is ``H(x, y) = -sign(x) c + b y |x|**nu``.
    The eigenvalues of the singularity drive the cube flow; coherence
    requires ``rho = -lambda2/lambda3`` and ``nu = -lambda1/lambda3``.
    """

    mu: float = 1.95
    rho: float = 0.75
    c: float = 0.45
    b: float = 0.25
    nu: float = 2.0
    lambda1: float = -4.0
    lambda2: float = -1.5
    lambda3: float = 2.0
    r0: float = 1.0
    eps_ext: float = 0.02
    extended: bool = False

    def __post_init__(self):
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if field.name == "extended":
                continue
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise InputError(f"parameter {field.name}={value!r} is not a finite number")

    @property
    def lambda0(self) -> float:
        """Minimum slope of f on [-1, 1], attained at |x| = 1."""
        return self.mu * self.rho

    @property
    def y_plus(self) -> float:
        """y-coordinate of z+ = lim P(x, y) as x -> 0+."""
        return -self.c

    @property
    def y_minus(self) -> float:
        return self.c

    @property
    def domain(self) -> tuple[float, float]:
        e = self.eps_ext if self.extended else 0.0
        return (-1.0 - e, 1.0 + e)

    def roof(self, x: float) -> float:
        """Return time r(x) = r0 + ln(1/|x|)/lambda3."""
        return self.r0 - math.log(abs(x)) / self.lambda3

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)


def params_hash(params: ModelParams) -> str:
    """Stable short hash of the parameter set, used to stamp reports."""
    blob = json.dumps(params.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


DEFAULT_PARAMS = ModelParams()
