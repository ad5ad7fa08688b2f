# core/experiment.py
"""
Experiment configs: a JSON document validated with pydantic and turned into the
MDP, policy, interpolation parameters, initial table and schedule of a run.
"""
import asyncio
import json
import logging
import sys
import os
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError as SchemaError, model_validator

# Add project root to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from config import (
    BISECTION_TOL,
    DEFAULT_SCHEDULE_C,
    DEFAULT_SCHEDULE_RHO,
    EULER_DT,
    EULER_HORIZON,
    LAMBDA_SAMPLES,
    MAX_CONCURRENT_RUNS,
    MC_BOOTSTRAP,
    MC_SAMPLES,
    MC_TRUNCATION_EPS,
    PROB_TOL,
    QDP_MAX_ITERS,
)
from core.analysis import distance_to_fixed_point_set, return_quantiles, value_sup_error
from core.distributions import RewardModel, dirac, from_atoms, gaussian, uniform
from core.errors import ConfigError, QuantrixError
from core.mdp import TERMINAL_REWARD, Mdp, Mrp, Policy, compile_mrp, truncation_horizon
from core.qtd import StepSchedule, make_rng, run_asynchronous, run_monte_carlo, run_synchronous, td_run
from core.quantiles import InterpolationParams, QuantileTable, corner_lambdas
from core.reports import write_run, write_td_run

logger = logging.getLogger(__name__)


# ---------------- Schema ----------------
class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class RewardSpec(_Strict):
    kind: Literal["dirac", "finite", "gaussian", "uniform"]
    value: Optional[float] = None
    atoms: Optional[List[Tuple[float, float]]] = None
    mean: Optional[float] = None
    std: Optional[float] = None
    low: Optional[float] = None
    high: Optional[float] = None

    @model_validator(mode="after")
    def _fields_for_kind(self):
        needed = {"dirac": ("value",), "finite": ("atoms",), "gaussian": ("mean", "std"),
                  "uniform": ("low", "high")}[self.kind]
        missing = [name for name in needed if getattr(self, name) is None]
        if missing:
            raise ValueError(f"reward kind '{self.kind}' needs {', '.join(missing)}")
        return self

    def build(self) -> RewardModel:
        if self.kind == "dirac":
            return dirac(self.value)
        if self.kind == "finite":
            return from_atoms(self.atoms)
        if self.kind == "gaussian":
            return gaussian(self.mean, self.std)
        return uniform(self.low, self.high)


class MdpSpec(_Strict):
    states: List[str] = Field(min_length=1)
    actions: List[str] = Field(default_factory=lambda: ["a"], min_length=1)
    transitions: Dict[str, List[List[float]]] = Field(default_factory=dict)
    rewards: Dict[str, List[RewardSpec]] = Field(default_factory=dict)
    policy: Optional[Dict[str, List[float]]] = None
    gamma: float = Field(ge=0.0, lt=1.0)
    terminal: List[str] = Field(default_factory=list)
    deterministic_after_k: Optional[int] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _names_are_known(self):
        if len(set(self.states)) != len(self.states):
            raise ValueError("state names must be unique")
        known = set(self.states)
        for where, names in (("transitions", self.transitions), ("rewards", self.rewards),
                             ("policy", self.policy or {}), ("terminal", self.terminal)):
            unknown = [name for name in names if name not in known]
            if unknown:
                raise ValueError(f"{where} refers to unknown states {unknown}")
        return self


class ScheduleSpec(_Strict):
    kind: Literal["polynomial", "constant"] = "polynomial"
    c: float = DEFAULT_SCHEDULE_C
    rho: float = DEFAULT_SCHEDULE_RHO
    alpha: Optional[float] = None


class StateSourceSpec(_Strict):
    kind: Literal["trajectory", "iid"] = "iid"
    weights: Optional[List[float]] = None


class TolerancesSpec(_Strict):
    qdp_tol_inf: Optional[float] = Field(default=None, gt=0)
    bisection_tol: float = Field(default=BISECTION_TOL, gt=0)
    max_iters: int = Field(default=QDP_MAX_ITERS, ge=1)


class AnalysisSpec(_Strict):
    n_samples: int = Field(default=MC_SAMPLES, ge=1)
    horizon: Optional[int] = Field(default=None, ge=1)
    lambda_samples: int = Field(default=LAMBDA_SAMPLES, ge=1)
    bootstrap: int = Field(default=MC_BOOTSTRAP, ge=0)
    match_tol: Optional[float] = Field(default=None, gt=0)
    seed: int = 0


class DynamicsSpec(_Strict):
    dt: float = Field(default=EULER_DT, gt=0)
    horizon: float = Field(default=EULER_HORIZON, ge=0)


class ExperimentConfig(_Strict):
    mdp: MdpSpec
    algo: Literal["qdp", "qtd-sync", "qtd-async", "td", "mc"] = "qdp"
    m: int = Field(default=1, ge=1)
    lambda_: Union[Literal["corners"], float, List[List[float]]] = Field(default=0.0, alias="lambda")
    init: Union[Literal["zeros", "vmin", "vmax"], float, List[List[float]]] = "zeros"
    schedule: ScheduleSpec = Field(default_factory=ScheduleSpec)
    steps: int = Field(default=0, ge=0)
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)
    snapshot_every: int = Field(default=0, ge=0)
    state_source: StateSourceSpec = Field(default_factory=StateSourceSpec)
    tolerances: TolerancesSpec = Field(default_factory=TolerancesSpec)
    analysis: AnalysisSpec = Field(default_factory=AnalysisSpec)
    dynamics: DynamicsSpec = Field(default_factory=DynamicsSpec)
    grid: Optional[str] = None


# ---------------- Loading ----------------
def parse_config(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, f"line {e.lineno}, column {e.colno}") from e
    try:
        return ExperimentConfig.model_validate(data)
    except SchemaError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "config"
        raise ConfigError(first["msg"], location) from e


def load_config(path: str) -> ExperimentConfig:
    """Reads and validates a config file; every failure surfaces as ConfigError."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", path) from e
    config = parse_config(text)
    logger.info("Loaded config %s (algo=%s, m=%d)", path, config.algo, config.m)
    return config


# ---------------- Construction ----------------
def build_mdp(config: ExperimentConfig) -> Mdp:
    spec = config.mdp
    states, actions = spec.states, spec.actions
    num_states, num_actions = len(states), len(actions)
    terminal = np.array([name in spec.terminal for name in states])
    transition = np.zeros((num_states, num_actions, num_states))
    rewards = []
    for s, name in enumerate(states):
        if terminal[s]:
            transition[s, :, s] = 1.0
            rewards.append(tuple(TERMINAL_REWARD for _ in actions))
            continue
        rows = spec.transitions.get(name)
        if rows is None or len(rows) != num_actions:
            raise ConfigError(f"expected one row per action ({num_actions})", f"mdp.transitions.{name}")
        for a, row in enumerate(rows):
            where = f"mdp.transitions.{name}[{a}]"
            row = np.asarray(row, dtype=float)
            if row.shape != (num_states,):
                raise ConfigError(f"row has {row.size} entries, expected {num_states}", where)
            if np.any(row < 0) or abs(row.sum() - 1.0) > PROB_TOL:
                raise ConfigError(f"row must be nonnegative and sum to 1, sums to {row.sum()!r}", where)
            transition[s, a] = row
        reward_specs = spec.rewards.get(name)
        if reward_specs is None or len(reward_specs) != num_actions:
            raise ConfigError(f"expected one reward per action ({num_actions})", f"mdp.rewards.{name}")
        try:
            rewards.append(tuple(r.build() for r in reward_specs))
        except QuantrixError as e:
            raise ConfigError(str(e), f"mdp.rewards.{name}") from e
    try:
        return Mdp(transition, tuple(rewards), spec.gamma, terminal, tuple(states), spec.deterministic_after_k)
    except QuantrixError as e:
        raise ConfigError(str(e), "mdp") from e


def build_policy(config: ExperimentConfig) -> Optional[Policy]:
    spec = config.mdp
    if spec.policy is None:
        return None
    uniform_row = [1.0 / len(spec.actions)] * len(spec.actions)
    probs = np.array([spec.policy.get(name, uniform_row) for name in spec.states], dtype=float)
    try:
        return Policy(probs)
    except QuantrixError as e:
        raise ConfigError(str(e), "mdp.policy") from e


def build_mrp(config: ExperimentConfig) -> Mrp:
    return compile_mrp(build_mdp(config), build_policy(config))


def build_lambdas(config: ExperimentConfig, num_states: int) -> List[InterpolationParams]:
    value = config.lambda_
    try:
        if value == "corners":
            return list(corner_lambdas(num_states, config.m))
        if isinstance(value, list):
            return [InterpolationParams(np.asarray(value, dtype=float))]
        return [InterpolationParams.constant(num_states, config.m, value)]
    except QuantrixError as e:
        raise ConfigError(str(e), "lambda") from e


def value_range(mrp: Mrp) -> Tuple[float, float]:
    """(R_MIN / (1 - gamma), R_MAX / (1 - gamma)) from the reward support hints."""
    hints = [model.support_hint for model in mrp.rewards]
    if any(h is None or not model.bounded for h, model in zip(hints, mrp.rewards)):
        raise ConfigError("vmin/vmax initialisation needs bounded reward models", "init")
    scale = 1.0 / (1.0 - mrp.discount)
    return min(h[0] for h in hints) * scale, max(h[1] for h in hints) * scale


def build_init(config: ExperimentConfig, mrp: Mrp) -> QuantileTable:
    """Initial table; terminal rows start at zero except for an explicit matrix."""
    value = config.init
    shape = (mrp.num_states, config.m)
    if isinstance(value, list):
        theta = np.asarray(value, dtype=float)
        if theta.shape != shape:
            raise ConfigError(f"init matrix has shape {theta.shape}, expected {shape}", "init")
        return QuantileTable(theta)
    if value == "zeros":
        fill = 0.0
    elif value in ("vmin", "vmax"):
        v_min, v_max = value_range(mrp)
        fill = v_min if value == "vmin" else v_max
    else:
        fill = float(value)
    theta = np.full(shape, fill)
    theta[mrp.terminal] = 0.0
    return QuantileTable(theta)


def build_schedule(config: ExperimentConfig) -> StepSchedule:
    spec = config.schedule
    try:
        if spec.kind == "constant":
            if spec.alpha is None:
                raise ConfigError("constant schedule needs alpha", "schedule.alpha")
            return StepSchedule.constant(spec.alpha)
        return StepSchedule.polynomial(spec.c, spec.rho)
    except ConfigError:
        raise
    except QuantrixError as e:
        raise ConfigError(str(e), "schedule") from e


def build_state_source(config: ExperimentConfig):
    spec = config.state_source
    if spec.kind == "trajectory":
        return "trajectory"
    if spec.weights is not None and len(spec.weights) != len(config.mdp.states):
        raise ConfigError(f"expected {len(config.mdp.states)} weights", "state_source.weights")
    return "iid", spec.weights


def parse_grid(spec: str) -> List[np.ndarray]:
    """'x0:x1:n,y0:y1:n' -> two evenly spaced axes."""
    axes = []
    parts = spec.split(",")
    if len(parts) != 2:
        raise ConfigError(f"grid must have two axes, got '{spec}'", "grid")
    for part in parts:
        try:
            lo, hi, n = part.split(":")
            axis = np.linspace(float(lo), float(hi), int(n))
        except ValueError as e:
            raise ConfigError(f"cannot parse axis '{part}' (expected lo:hi:n)", "grid") from e
        if axis.size < 1:
            raise ConfigError(f"axis '{part}' has no points", "grid")
        axes.append(axis)
    return axes


# ---------------- Seed fan-out ----------------
def run_seed(config: ExperimentConfig, mrp: Mrp, seed: int, out_dir: str) -> Tuple[int, float, str]:
    """Runs one seed of a learning algorithm, writes its run file and returns its summary row."""
    schedule = build_schedule(config)
    init = build_init(config, mrp)
    rng = make_rng(seed)
    analysis_rng = make_rng(config.analysis.seed)
    path = os.path.join(out_dir, f"run_{seed}.csv")
    steps, every = config.steps, config.snapshot_every

    if config.algo == "td":
        history: list = []
        values = td_run(mrp, schedule, steps, init.theta.mean(axis=1), rng, every, history)
        write_td_run(history, values, mrp.state_names, steps, seed, path)
        return seed, value_sup_error(mrp, values), "value_sup_error"

    if config.algo == "mc":
        horizon = config.analysis.horizon or truncation_horizon(mrp, MC_TRUNCATION_EPS)
        record = run_monte_carlo(mrp, config.m, schedule, steps, init, rng, horizon, every, seed)
        write_run(record, mrp.state_names, steps, path)
        truth = return_quantiles(mrp, config.m, config.analysis.n_samples, analysis_rng, horizon)
        return seed, record.final.sup_distance(truth), "mc_quantile_sup_error"

    if config.algo == "qtd-async":
        record = run_asynchronous(mrp, config.m, schedule, steps, init, rng,
                                  build_state_source(config), every, seed)
    else:
        record = run_synchronous(mrp, config.m, schedule, steps, init, rng, every, seed)
    write_run(record, mrp.state_names, steps, path)
    distance = distance_to_fixed_point_set(mrp, record.final, config.analysis.lambda_samples, analysis_rng)
    logger.info("Run for seed %d complete.", seed)
    return seed, distance, "fixed_point_set"


async def run_all_seeds(config: ExperimentConfig, mrp: Mrp, seeds: List[int],
                        out_dir: str) -> List[Tuple[int, float, str]]:
    """Dispatches one worker thread per seed, at most MAX_CONCURRENT_RUNS at a time."""
    semaphore = asyncio.Semaphore(MAX_CONCURRENT_RUNS)

    async def run_one(seed: int):
        async with semaphore:
            return await asyncio.to_thread(run_seed, config, mrp, seed, out_dir)

    logger.info("Starting %d seed runs...", len(seeds))
    results = await asyncio.gather(*(run_one(seed) for seed in seeds))
    logger.info("All seed runs completed.")
    return list(results)
