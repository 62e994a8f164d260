"""
Experiment definitions for the Heavy Ball lab.
This module parses TOML experiment files into frozen dataclasses and validates them.
"""
import logging
import math
import re
import tomllib
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

from config import (
    COMMANDS,
    COORDINATE_FIELD_PATTERN,
    DEFAULT_OUTPUT_FIELDS,
    DEFAULT_POLICY,
    DEFAULT_SEED,
    NAMED_INITS,
    OUTPUT_FIELDS,
    PARAM_RULES,
    PROBLEM_KINDS,
    SPECTRUM_RULES,
    ALPHA_FRACTION,
    BETA_FRACTION,
    DEFAULT_EPS,
    DEFAULT_MAX_ITERS,
    DEFAULT_PEAK_STEPS,
)
from restart import parse_policy
from utils import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProblemSpec:
    """Objective to build: explicit eigenvalues or a generated spectrum."""
    kind: str
    eigenvalues: Optional[Tuple[float, ...]] = None
    mu: Optional[float] = None
    L: Optional[float] = None
    dim: Optional[int] = None
    spectrum: str = "log-uniform"

    @property
    def dimension(self) -> int:
        if self.kind == "nonconvex-pl":
            return 1
        if self.eigenvalues is not None:
            return len(self.eigenvalues)
        return self.dim or 0


@dataclass(frozen=True)
class MethodSpec:
    params: str = "optimal"
    alpha: Optional[float] = None
    beta: Optional[float] = None
    alpha_fraction: float = ALPHA_FRACTION
    beta_fraction: float = BETA_FRACTION
    L0: Optional[float] = None
    eps: float = DEFAULT_EPS


@dataclass(frozen=True)
class InitSpec:
    """Exactly one of standard_from, (x0, x1) or named."""
    standard_from: Optional[Tuple[float, ...]] = None
    x0: Optional[Tuple[float, ...]] = None
    x1: Optional[Tuple[float, ...]] = None
    named: Optional[str] = None

    @property
    def style(self) -> str:
        if self.named is not None:
            return "named"
        if self.standard_from is not None:
            return "standard"
        return "pair"


@dataclass(frozen=True)
class RunSpec:
    max_iters: int = DEFAULT_MAX_ITERS
    grad_tol: Optional[float] = None


@dataclass(frozen=True)
class OutputSpec:
    csv_path: Optional[str] = None
    fields: Tuple[str, ...] = DEFAULT_OUTPUT_FIELDS


@dataclass(frozen=True)
class RecurrenceSpec:
    """Scalar recurrence for the peak command: a double root rho or coefficients (a1, a2)."""
    rho: Optional[float] = None
    a1: Optional[float] = None
    a2: Optional[float] = None
    x0: float = 0.0
    x1: float = 1.0
    K: int = DEFAULT_PEAK_STEPS


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    command: Optional[str] = None
    seed: int = DEFAULT_SEED
    problem: Optional[ProblemSpec] = None
    method: MethodSpec = field(default_factory=MethodSpec)
    init: Optional[InitSpec] = None
    run: RunSpec = field(default_factory=RunSpec)
    outputs: OutputSpec = field(default_factory=OutputSpec)
    policy: str = DEFAULT_POLICY
    policies: Tuple[str, ...] = ()
    recurrence: Optional[RecurrenceSpec] = None

    def with_seed(self, seed: Optional[int]) -> "ExperimentConfig":
        return self if seed is None else replace(self, seed=seed)


_TOP_KEYS = {"name", "command", "seed", "problem", "method", "init", "run", "outputs", "restart", "recurrence"}
_TABLE_KEYS = {
    "problem": {"kind", "eigenvalues", "mu", "L", "dim", "spectrum"},
    "method": {"params", "alpha", "beta", "alpha_fraction", "beta_fraction", "L0", "eps"},
    "init": {"standard_from", "x0", "x1", "named"},
    "run": {"max_iters", "grad_tol"},
    "outputs": {"csv_path", "fields"},
    "restart": {"policy", "policies"},
    "recurrence": {"rho", "a1", "a2", "x0", "x1", "K"},
}


def _reject_unknown(table: Dict[str, Any], allowed: set, path: str) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys {unknown}", path or "config")


def _table(raw: Dict[str, Any], name: str) -> Optional[Dict[str, Any]]:
    value = raw.get(name)
    if value is None:
        return None
    if not isinstance(value, dict):
        raise ConfigError("must be a table", name)
    _reject_unknown(value, _TABLE_KEYS[name], name)
    return value


def _number(table: Dict[str, Any], key: str, path: str, default: Optional[float] = None) -> Optional[float]:
    value = table.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", f"{path}.{key}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError("must be finite", f"{path}.{key}")
    return value


def _integer(table: Dict[str, Any], key: str, path: str, default: Optional[int] = None) -> Optional[int]:
    value = table.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", f"{path}.{key}")
    return value


def _vector(table: Dict[str, Any], key: str, path: str) -> Optional[Tuple[float, ...]]:
    value = table.get(key)
    if value is None:
        return None
    if not isinstance(value, list):
        raise ConfigError(f"expected a list of numbers, got {value!r}", f"{path}.{key}")
    out = []
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"entry {i} is not a finite number: {v!r}", f"{path}.{key}")
        out.append(float(v))
    return tuple(out)


def _string(table: Dict[str, Any], key: str, path: str, default: Optional[str] = None) -> Optional[str]:
    value = table.get(key, default)
    if value is None:
        return None
    if not isinstance(value, str):
        raise ConfigError(f"expected a string, got {value!r}", f"{path}.{key}")
    return value


def _strings(table: Dict[str, Any], key: str, path: str) -> Optional[Tuple[str, ...]]:
    value = table.get(key)
    if value is None:
        return None
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ConfigError(f"expected a list of strings, got {value!r}", f"{path}.{key}")
    return tuple(value)


def _build(raw: Dict[str, Any]) -> ExperimentConfig:
    _reject_unknown(raw, _TOP_KEYS, "")

    problem = None
    t = _table(raw, "problem")
    if t is not None:
        problem = ProblemSpec(
            kind=_string(t, "kind", "problem", "diagonal-quadratic"),
            eigenvalues=_vector(t, "eigenvalues", "problem"),
            mu=_number(t, "mu", "problem"),
            L=_number(t, "L", "problem"),
            dim=_integer(t, "dim", "problem"),
            spectrum=_string(t, "spectrum", "problem", "log-uniform"),
        )

    t = _table(raw, "method") or {}
    method = MethodSpec(
        params=_string(t, "params", "method", "optimal"),
        alpha=_number(t, "alpha", "method"),
        beta=_number(t, "beta", "method"),
        alpha_fraction=_number(t, "alpha_fraction", "method", ALPHA_FRACTION),
        beta_fraction=_number(t, "beta_fraction", "method", BETA_FRACTION),
        L0=_number(t, "L0", "method"),
        eps=_number(t, "eps", "method", DEFAULT_EPS),
    )

    init = None
    t = _table(raw, "init")
    if t is not None:
        init = InitSpec(
            standard_from=_vector(t, "standard_from", "init"),
            x0=_vector(t, "x0", "init"),
            x1=_vector(t, "x1", "init"),
            named=_string(t, "named", "init"),
        )

    t = _table(raw, "run") or {}
    run = RunSpec(
        max_iters=_integer(t, "max_iters", "run", DEFAULT_MAX_ITERS),
        grad_tol=_number(t, "grad_tol", "run"),
    )

    t = _table(raw, "outputs") or {}
    outputs = OutputSpec(
        csv_path=_string(t, "csv_path", "outputs"),
        fields=_strings(t, "fields", "outputs") or DEFAULT_OUTPUT_FIELDS,
    )

    t = _table(raw, "restart") or {}
    policy = _string(t, "policy", "restart", DEFAULT_POLICY)
    policies = _strings(t, "policies", "restart")
    if policies is not None and not policies:
        raise ConfigError("at least one policy is required", "restart.policies")

    recurrence = None
    t = _table(raw, "recurrence")
    if t is not None:
        recurrence = RecurrenceSpec(
            rho=_number(t, "rho", "recurrence"),
            a1=_number(t, "a1", "recurrence"),
            a2=_number(t, "a2", "recurrence"),
            x0=_number(t, "x0", "recurrence", 0.0),
            x1=_number(t, "x1", "recurrence", 1.0),
            K=_integer(t, "K", "recurrence", DEFAULT_PEAK_STEPS),
        )

    seed = _integer(raw, "seed", "config", DEFAULT_SEED)
    name = _string(raw, "name", "config", "experiment")
    command = _string(raw, "command", "config")
    if command is not None and command not in COMMANDS:
        raise ConfigError(f"unknown command '{command}', expected one of {COMMANDS}", "command")
    return ExperimentConfig(
        name=name,
        command=command,
        seed=seed,
        problem=problem,
        method=method,
        init=init,
        run=run,
        outputs=outputs,
        policy=policy,
        policies=policies or (),
        recurrence=recurrence,
    )


class ConfigValidator:
    """Validates experiment definitions; every check raises ConfigError naming the field."""

    @staticmethod
    def validate_problem(problem: ProblemSpec) -> None:
        if problem.kind not in PROBLEM_KINDS:
            raise ConfigError(f"unknown kind '{problem.kind}', expected one of {PROBLEM_KINDS}", "problem.kind")
        if problem.kind == "nonconvex-pl":
            if any(v is not None for v in (problem.eigenvalues, problem.mu, problem.L, problem.dim)):
                raise ConfigError("the nonconvex PL problem takes no spectrum", "problem")
            return
        if problem.eigenvalues is not None:
            if any(v is not None for v in (problem.mu, problem.L, problem.dim)):
                raise ConfigError("give either eigenvalues or (mu, L, dim), not both", "problem")
            if len(problem.eigenvalues) == 0:
                raise ConfigError("must not be empty", "problem.eigenvalues")
            if any(v <= 0 for v in problem.eigenvalues):
                raise ConfigError("must be positive", "problem.eigenvalues")
            return
        for key in ("mu", "L", "dim"):
            if getattr(problem, key) is None:
                raise ConfigError("is required without explicit eigenvalues", f"problem.{key}")
        if problem.dim < 1:
            raise ConfigError(f"must be positive, got {problem.dim}", "problem.dim")
        if not 0 < problem.mu <= problem.L:
            raise ConfigError(f"need 0 < mu <= L, got mu={problem.mu}, L={problem.L}", "problem.mu")
        if problem.dim == 1 and problem.mu != problem.L:
            raise ConfigError("a one-dimensional spectrum needs mu == L", "problem.dim")
        if problem.spectrum not in SPECTRUM_RULES:
            raise ConfigError(f"unknown rule '{problem.spectrum}', expected one of {SPECTRUM_RULES}",
                              "problem.spectrum")

    @staticmethod
    def validate_method(method: MethodSpec) -> None:
        if method.params not in PARAM_RULES:
            raise ConfigError(f"unknown rule '{method.params}', expected one of {PARAM_RULES}", "method.params")
        if method.params == "explicit":
            if method.alpha is None or method.alpha <= 0:
                raise ConfigError("explicit parameters need alpha > 0", "method.alpha")
            if method.beta is None or method.beta < 0:
                raise ConfigError("explicit parameters need beta >= 0", "method.beta")
        if not 0 < method.alpha_fraction < 1:
            raise ConfigError(f"must lie in (0, 1), got {method.alpha_fraction}", "method.alpha_fraction")
        if not 0 <= method.beta_fraction <= 1:
            raise ConfigError(f"must lie in [0, 1], got {method.beta_fraction}", "method.beta_fraction")
        if method.L0 is not None and method.L0 <= 0:
            raise ConfigError(f"must be positive, got {method.L0}", "method.L0")
        if method.eps <= 0:
            raise ConfigError(f"must be positive, got {method.eps}", "method.eps")

    @staticmethod
    def validate_init(init: InitSpec, problem: ProblemSpec) -> None:
        styles = [init.standard_from is not None, init.x0 is not None or init.x1 is not None,
                  init.named is not None]
        if sum(styles) != 1:
            raise ConfigError("give exactly one of standard_from, (x0, x1) or named", "init")
        if init.named is not None:
            if init.named not in NAMED_INITS:
                raise ConfigError(f"unknown init '{init.named}', expected one of {NAMED_INITS}", "init.named")
            if problem.kind != "diagonal-quadratic":
                raise ConfigError("named inits need a diagonal-quadratic problem", "init.named")
            eig = problem.eigenvalues
            if init.named.startswith("worst-case") and eig is not None and list(eig) != sorted(eig):
                raise ConfigError("worst-case inits need eigenvalues in ascending order", "init.named")
            return
        if init.standard_from is None and (init.x0 is None or init.x1 is None):
            raise ConfigError("a pair init needs both x0 and x1", "init")
        dim = problem.dimension
        for key in ("standard_from", "x0", "x1"):
            vec = getattr(init, key)
            if vec is not None and len(vec) != dim:
                raise ConfigError(f"has dimension {len(vec)}, problem has {dim}", f"init.{key}")

    @staticmethod
    def validate_run(run: RunSpec) -> None:
        if run.max_iters < 1:
            raise ConfigError(f"must be at least 1, got {run.max_iters}", "run.max_iters")
        if run.grad_tol is not None and run.grad_tol <= 0:
            raise ConfigError(f"must be positive, got {run.grad_tol}", "run.grad_tol")

    @staticmethod
    def validate_outputs(outputs: OutputSpec, dim: int) -> None:
        if not outputs.fields:
            raise ConfigError("at least one field is required", "outputs.fields")
        if len(set(outputs.fields)) != len(outputs.fields):
            raise ConfigError("fields must be unique", "outputs.fields")
        for name in outputs.fields:
            if name in OUTPUT_FIELDS:
                continue
            match = re.match(COORDINATE_FIELD_PATTERN, name)
            if match is None:
                raise ConfigError(f"unknown field '{name}', expected {OUTPUT_FIELDS} or x1..x{dim}",
                                  "outputs.fields")
            if int(match.group(1)) > dim:
                raise ConfigError(f"coordinate '{name}' exceeds dimension {dim}", "outputs.fields")

    @staticmethod
    def validate_policies(policy: str, policies: Tuple[str, ...]) -> None:
        for path, name in [("restart.policy", policy)] + [("restart.policies", p) for p in policies]:
            try:
                parse_policy(name)
            except ValueError as e:
                raise ConfigError(str(e), path) from e

    @staticmethod
    def validate_recurrence(rec: RecurrenceSpec) -> None:
        has_rho = rec.rho is not None
        has_coeffs = rec.a1 is not None or rec.a2 is not None
        if has_rho == has_coeffs:
            raise ConfigError("give either rho or (a1, a2)", "recurrence")
        if has_coeffs and (rec.a1 is None or rec.a2 is None):
            raise ConfigError("coefficients need both a1 and a2", "recurrence")
        if has_rho and not 0 < rec.rho < 1:
            raise ConfigError(f"must lie in (0, 1), got {rec.rho}", "recurrence.rho")
        if rec.K < 2:
            raise ConfigError(f"must be at least 2, got {rec.K}", "recurrence.K")


def validate_config(cfg: ExperimentConfig) -> List[str]:
    """
    Run every validator that applies to the config.

    Returns:
        Names of the sections that were checked

    Raises:
        ConfigError: On the first failed check
    """
    checked = []
    if cfg.problem is not None:
        ConfigValidator.validate_problem(cfg.problem)
        checked.append("problem")
        if cfg.init is not None:
            ConfigValidator.validate_init(cfg.init, cfg.problem)
            checked.append("init")
        ConfigValidator.validate_outputs(cfg.outputs, cfg.problem.dimension)
        checked.append("outputs")
    elif cfg.init is not None:
        raise ConfigError("an init needs a problem", "init")
    ConfigValidator.validate_method(cfg.method)
    ConfigValidator.validate_run(cfg.run)
    ConfigValidator.validate_policies(cfg.policy, cfg.policies)
    checked.extend(["method", "run", "restart"])
    if cfg.recurrence is not None:
        ConfigValidator.validate_recurrence(cfg.recurrence)
        checked.append("recurrence")
    return checked


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """
    Parse and validate an experiment definition.

    Args:
        text: TOML document
        source: Name used in error messages

    Raises:
        ConfigError: On TOML syntax errors (with line) or invalid values (with field path)
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML in {source}: {e}", "toml") from e
    cfg = _build(raw)
    checked = validate_config(cfg)
    logger.debug(f"Validated {source}: {', '.join(checked)}")
    return cfg


def load_config(path: str) -> ExperimentConfig:
    """
    Load an experiment definition from a TOML file.

    Raises:
        ConfigError: If the file cannot be read or is invalid
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}", "config") from e
    return parse_config(text, source=path)
