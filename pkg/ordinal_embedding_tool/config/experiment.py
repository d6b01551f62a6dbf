"""
Configuración de experimentos de tasas, cargada desde JSON y validada con pydantic.

Los parámetros de diseño (r_n, K_n, ℓ_n) pueden ser números o expresiones de
`n`, `d`, `diam` y `h`, evaluadas con un recorrido del AST restringido.
"""

import ast
import json
import math
import operator
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from ..core.embedders import RefineSchedule
from ..core.geometry import Ball, DomainSpec
from ..exceptions import ConfigException

Schedule = Union[float, str]

_OPERATORS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.FloorDiv: operator.floordiv,
    ast.Mod: operator.mod,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}

_FUNCTIONS = {
    "ceil": math.ceil,
    "floor": math.floor,
    "sqrt": math.sqrt,
    "log": math.log,
    "round": round,
    "min": min,
    "max": max,
}


def evaluate_schedule(expression: Schedule, **names: float) -> float:
    """Evalúa una expresión aritmética de planificación sin `eval`."""
    if isinstance(expression, (int, float)):
        return float(expression)
    try:
        tree = ast.parse(str(expression), mode="eval")
    except SyntaxError as e:
        raise ConfigException(f"Invalid schedule expression: {expression}") from e

    def walk(node: ast.AST) -> Any:
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise ConfigException(f"Unknown name in schedule: {node.id}")
            return names[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPERATORS:
            return _OPERATORS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPERATORS:
            return _OPERATORS[type(node.op)](walk(node.operand))
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCTIONS
            and not node.keywords
        ):
            return _FUNCTIONS[node.func.id](*(walk(arg) for arg in node.args))
        raise ConfigException(f"Unsupported construct in schedule: {ast.dump(node)}")

    try:
        return float(walk(tree))
    except (ArithmeticError, ValueError, TypeError) as e:
        raise ConfigException(f"Schedule {expression!r} failed: {e}") from e


class BallModel(BaseModel):
    center: List[float]
    radius: float = Field(gt=0.0)


class DomainModel(BaseModel):
    balls: List[BallModel] = Field(
        default_factory=lambda: [BallModel(center=[0.0, 0.0], radius=1.0)]
    )

    def to_domain(self) -> DomainSpec:
        return DomainSpec(tuple(Ball(b.center, b.radius) for b in self.balls))


class DesignModel(BaseModel):
    kind: Literal[
        "quadruple", "triple", "local", "landmark_triple", "landmark_quadruple", "knn"
    ] = "quadruple"
    radius: Optional[Schedule] = None
    neighbors: Optional[Schedule] = None
    landmarks: Optional[Schedule] = None
    transform: str = "identity"
    jitter: bool = False

    def evaluate(self, n: int, d: int, diam: float, h: float) -> Dict[str, Any]:
        names = {"n": float(n), "d": float(d), "diam": diam, "h": h}
        params: Dict[str, Any] = {"radius": None, "neighbors": None, "landmarks": None}
        if self.radius is not None:
            params["radius"] = evaluate_schedule(self.radius, **names)
        if self.neighbors is not None:
            params["neighbors"] = int(round(evaluate_schedule(self.neighbors, **names)))
        if self.landmarks is not None:
            params["landmarks"] = int(round(evaluate_schedule(self.landmarks, **names)))
        return params


class EmbedderModel(BaseModel):
    kind: Literal["refine", "rejection", "landmark"] = "refine"
    init: Literal["random", "spectral"] = "random"
    iterations: int = Field(2000, ge=1)
    restarts: int = Field(5, ge=1)
    learning_rate: float = Field(0.05, gt=0.0)
    margin: Optional[float] = Field(None, ge=0.0)
    margin_stages: int = Field(3, ge=1)
    check_every: int = Field(25, ge=1)
    batch_size: Optional[int] = Field(None, ge=1)
    enforce_outside: bool = False
    stage1: Literal["refine", "exact"] = "refine"
    cell_samples: int = Field(2000, ge=1)
    placement: Literal["monte_carlo", "chebyshev"] = "monte_carlo"
    max_draws: int = Field(1_000_000, ge=1)

    def schedule(self, workers: int = 1) -> RefineSchedule:
        return RefineSchedule(
            iterations=self.iterations,
            restarts=self.restarts,
            learning_rate=self.learning_rate,
            margin=self.margin,
            margin_stages=self.margin_stages,
            check_every=self.check_every,
            batch_size=self.batch_size,
            enforce_outside=self.enforce_outside,
            workers=workers,
        )


class ExperimentConfig(BaseModel):
    domain: DomainModel = Field(default_factory=DomainModel)
    n_grid: List[int]
    design: DesignModel = Field(default_factory=DesignModel)
    embedder: EmbedderModel = Field(default_factory=EmbedderModel)
    trials: int = Field(20, ge=1)
    master_seed: int = Field(0, ge=0, lt=2**64)
    output_dir: str = "results"
    hausdorff_resolution: Optional[float] = Field(None, gt=0.0)
    interior_h: Optional[float] = Field(None, gt=0.0)
    slope_gate: Optional[float] = None
    ratio_gate: Optional[float] = Field(None, gt=0.0)
    workers: int = Field(1, ge=1)

    @field_validator("n_grid")
    @classmethod
    def _strictly_increasing(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("n_grid must not be empty")
        if value[0] < 2:
            raise ValueError("sample sizes must be at least 2")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("n_grid must be strictly increasing")
        return value

    @model_validator(mode="after")
    def _schedules_valid(self) -> "ExperimentConfig":
        try:
            domain = self.domain.to_domain()
        except Exception as e:
            raise ValueError(f"invalid domain: {e}") from e
        d, diam, h = domain.dim, domain.diameter(), domain.h
        kind = self.design.kind
        for n in self.n_grid:
            try:
                params = self.design.evaluate(n, d, diam, h)
            except ConfigException as e:
                raise ValueError(e.detail) from e
            if kind == "local":
                if (params["radius"] is None) == (params["neighbors"] is None):
                    raise ValueError("local design needs exactly one of radius or neighbors")
                if params["radius"] is not None and params["radius"] <= 0:
                    raise ValueError(f"radius schedule gives {params['radius']} at n={n}")
                if params["neighbors"] is not None and not 1 <= params["neighbors"] < n:
                    raise ValueError(f"neighbors schedule gives {params['neighbors']} at n={n}")
            if kind == "knn":
                if params["neighbors"] is None or not 1 <= params["neighbors"] < n:
                    raise ValueError(f"knn design needs 1 <= K < n at n={n}")
            if kind.startswith("landmark"):
                ell = params["landmarks"]
                if ell is None or not d + 1 <= ell <= n:
                    raise ValueError(f"landmark schedule needs d+1 <= ell <= n at n={n}")
        if kind.startswith("landmark") and self.embedder.kind != "landmark":
            raise ValueError("landmark designs need the landmark embedder")
        return self


def load_experiment_config(path: str) -> ExperimentConfig:
    """Lee y valida un ExperimentConfig; cualquier fallo es ConfigException."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigException(f"Cannot read config {path}: {e}") from e
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigException(f"Invalid config {path}: {e}") from e
