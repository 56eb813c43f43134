"""Adaptive loops: network enhancement on a fixed mesh, adaptive refinement
of the integration mesh for a fixed network, and the combination of both."""

import csv
import logging
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .enhance import (
    GrowthHistory,
    MarkParams,
    global_growth,
    init_uniform,
    init_uniform_count,
    mark,
    plan_global,
    plan_local,
)
from .exceptions import RefinementBudgetError, SingularSystemError
from .linsolve import fit_output
from .network import ReluModel, forward, parameter_count
from .optimize import TrainConfig, adam_train
from .partition import build_partition, total_estimator
from .quadrature import refine_cells, sample, uniform_mesh

__all__ = [
    "AneConfig",
    "IterationRecord",
    "RunReport",
    "AmrResult",
    "initial_model",
    "enhance_model",
    "cell_indicators",
    "ane_fixed_mesh",
    "amr_integration",
    "ane_full",
    "amr_only",
    "fixed_network",
    "relative_error",
]

logger = logging.getLogger(__name__)

ENHANCEMENTS = ("local_average", "local_bulk", "global")


@dataclass
class AneConfig:
    epsilon: float = 0.005
    enhancement: str = "local_average"
    gamma1: float = 0.7
    alpha2: float = 1.0
    global_init: str = "uniform"
    output_init: str = "solve"
    gamma2: float = 0.9
    amr: bool = True
    amr_strategy: str = "average"
    amr_gamma1: float = 0.7
    max_cells: int = 2_000_000
    max_amr_steps: int = 20
    initial_m0: int = 9
    initial_mesh_counts: tuple = (1000,)
    train: TrainConfig = field(default_factory=TrainConfig)
    max_outer_iters: int = 10
    max_neurons: int = None
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0.0 < self.gamma2 < 1.0:
            raise ValueError("gamma2 must lie in (0, 1)")
        if self.enhancement not in ENHANCEMENTS:
            raise ValueError(f"enhancement must be one of {ENHANCEMENTS}")
        if self.global_init not in ("uniform", "random"):
            raise ValueError("global_init must be 'uniform' or 'random'")
        if self.output_init not in ("solve", "zero"):
            raise ValueError("output_init must be 'solve' or 'zero'")
        if self.amr_strategy not in ("average", "bulk"):
            raise ValueError("amr_strategy must be 'average' or 'bulk'")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be at least 1")


@dataclass
class IterationRecord:
    iteration: int
    n_neurons: int
    n_parameters: int
    n_cells: int
    train_loss: float
    estimator: float
    n_elements: int
    n_marked: int
    train_iterations: int
    wall_time: float

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]


@dataclass
class RunReport:
    records: list = field(default_factory=list)
    model: ReluModel = None
    mesh: object = None
    partition: object = None
    converged: bool = False
    loss_traces: list = field(default_factory=list)
    amr_history: list = field(default_factory=list)

    @property
    def final(self):
        return self.records[-1]

    def neuron_counts(self):
        return [r.n_neurons for r in self.records]

    def write_csv(self, path, include_time=False):
        """One row per outer iteration.  Wall time is left out by default so
        that repeated runs produce identical files."""
        cols = [c for c in IterationRecord.columns() if include_time or c != "wall_time"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.records:
                w.writerow([_fmt(getattr(r, c)) for c in cols])

    def rows(self, include_time=False):
        cols = [c for c in IterationRecord.columns() if include_time or c != "wall_time"]
        return [tuple(getattr(r, c) for c in cols) for r in self.records]


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else v


@dataclass
class AmrResult:
    mesh: object
    model: ReluModel
    steps: int
    history: list
    train_results: list


def initial_model(f_values, mesh, m0, output_init="solve"):
    """Uniform hinges plus output weights from the linear system."""
    omega, b = init_uniform(m0, mesh.domain)
    model = ReluModel(omega, b)
    if output_init == "solve":
        model = fit_output(model, mesh, f_values)
    return model


def enhance_model(model, plan, mesh, f_values, output_init="solve"):
    """Append the planned neurons; re-solve every output weight if asked.

    A singular mass matrix (coinciding or dead hinges) leaves the new output
    weights at zero and keeps the old ones.
    """
    grown = model.with_neurons(plan.omega, plan.b)
    if output_init == "solve":
        try:
            grown = fit_output(grown, mesh, f_values)
        except SingularSystemError as exc:
            logger.warning("output re-solve failed (%s); new output weights set to zero", exc)
    return grown


def _plan(config, partition, model, mesh, history, estimator, rng):
    room = None if config.max_neurons is None else config.max_neurons - model.n_neurons
    if config.enhancement == "global":
        history.append(model.n_neurons, estimator)
        n_next = global_growth(history, config.epsilon, config.alpha2)
        n_new = n_next - model.n_neurons
        if room is not None:
            n_new = min(n_new, room)
        return plan_global(max(n_new, 0), mesh.domain, config.global_init, rng)
    strategy = "average" if config.enhancement == "local_average" else "bulk"
    return plan_local(partition, mesh.domain, MarkParams(strategy, config.gamma1), max_new=room)


def _estimate(model, mesh, f_values):
    partition = build_partition(model, mesh, f_values)
    return partition, total_estimator(partition, mesh, f_values)


def _outer_loop(f, mesh, config, model, amr_step=None):
    rng = np.random.default_rng(config.seed)
    report = RunReport()
    history = GrowthHistory()
    f_values = sample(mesh, f)
    if model is None:
        model = initial_model(f_values, mesh, config.initial_m0, config.output_init)
    for k in range(1, config.max_outer_iters + 1):
        t0 = time.perf_counter()
        res = adam_train(model, mesh, f_values, config.train)
        model = res.model
        report.loss_traces.append(res.loss_trace)
        train_iters = res.iterations
        train_loss = res.final_loss
        if amr_step is not None:
            amr = amr_step(f, model, mesh)
            report.amr_history.append(amr.history)
            if amr.steps:
                mesh, model = amr.mesh, amr.model
                f_values = sample(mesh, f)
                train_loss = amr.train_results[-1].final_loss
                train_iters += sum(r.iterations for r in amr.train_results)
        partition, xi = _estimate(model, mesh, f_values)
        done = xi < config.epsilon
        at_cap = config.max_neurons is not None and model.n_neurons >= config.max_neurons
        plan = None
        if not done and k < config.max_outer_iters and not at_cap:
            plan = _plan(config, partition, model, mesh, history, xi, rng)
        report.records.append(
            IterationRecord(
                iteration=k,
                n_neurons=model.n_neurons,
                n_parameters=parameter_count(model.n_neurons, model.dim),
                n_cells=mesh.n_cells,
                train_loss=train_loss,
                estimator=xi,
                n_elements=len(partition),
                n_marked=0 if plan is None else plan.n_new,
                train_iterations=train_iters,
                wall_time=time.perf_counter() - t0,
            )
        )
        logger.info(
            "outer %d: n=%d cells=%d xi=%.6g marked=%s",
            k, model.n_neurons, mesh.n_cells, xi, "-" if plan is None else plan.n_new,
        )
        report.partition = partition
        if done:
            report.converged = True
            break
        if plan is None or plan.n_new == 0:
            break
        model = enhance_model(model, plan, mesh, f_values, config.output_init)
    report.model = model
    report.mesh = mesh
    return report


def ane_fixed_mesh(f, mesh, config, model=None):
    """Grow the network on a fixed integration mesh until the estimator
    drops below ``config.epsilon`` or the iteration budget runs out.

    The returned report has ``converged=False`` when the tolerance was not
    met; no exception is raised in that case.
    """
    return _outer_loop(f, mesh, config, model)


def cell_indicators(model, mesh, f_values):
    """Per-cell residual contributions ``|f - v|(x_T) * sqrt(|T|)``."""
    r = f_values - forward(model, mesh.points)[0]
    return np.abs(r) * np.sqrt(mesh.volumes)


def amr_integration(f, model, mesh, gamma2=0.9, train=None, strategy="average",
                    gamma1=0.7, max_cells=2_000_000, max_steps=20):
    """Refine the integration mesh for a fixed network architecture.

    Each step marks cells by their residual contribution, splits them,
    retrains from the current parameters and keeps the refinement only if
    the global residual norm dropped to at most ``gamma2`` times its
    previous value.  Returns the last accepted mesh and the model trained
    on it.
    """
    train = train or TrainConfig()
    params = MarkParams(strategy, gamma1)
    f_values = sample(mesh, f)
    eta = float(np.sqrt(np.sum((f_values - forward(model, mesh.points)[0]) ** 2 * mesh.volumes)))
    history = [(mesh.n_cells, eta)]
    results = []
    steps = 0
    while eta > 0.0 and steps < max_steps:
        marked = mark(cell_indicators(model, mesh, f_values), params)
        if not marked:
            break
        fine = refine_cells(mesh, marked)
        if fine.n_cells > max_cells:
            raise RefinementBudgetError(fine.n_cells, max_cells)
        fine_values = sample(fine, f)
        res = adam_train(model, fine, fine_values, train)
        history.append((fine.n_cells, res.final_loss))
        logger.info("amr: %d -> %d cells, eta %.6g -> %.6g", mesh.n_cells, fine.n_cells, eta, res.final_loss)
        if res.final_loss > gamma2 * eta:
            break
        mesh, model, f_values, eta = fine, res.model, fine_values, res.final_loss
        results.append(res)
        steps += 1
    return AmrResult(mesh, model, steps, history, results)


def amr_only(f, config, mesh=None, model=None):
    """Train the starting network once, then adapt the mesh to it.

    The network architecture never changes.  The report holds a single
    record measured on the final mesh.
    """
    if mesh is None:
        mesh = uniform_mesh(f.domain, config.initial_mesh_counts)
    t0 = time.perf_counter()
    f_values = sample(mesh, f)
    if model is None:
        model = initial_model(f_values, mesh, config.initial_m0, config.output_init)
    first = adam_train(model, mesh, f_values, config.train)
    amr = amr_integration(
        f, first.model, mesh, config.gamma2, config.train, config.amr_strategy,
        config.amr_gamma1, config.max_cells, config.max_amr_steps,
    )
    train_loss = amr.train_results[-1].final_loss if amr.steps else first.final_loss
    partition, xi = _estimate(amr.model, amr.mesh, sample(amr.mesh, f))
    report = RunReport(
        model=amr.model,
        mesh=amr.mesh,
        partition=partition,
        converged=xi < config.epsilon,
        loss_traces=[first.loss_trace] + [r.loss_trace for r in amr.train_results],
        amr_history=[amr.history],
    )
    report.records.append(
        IterationRecord(
            iteration=1,
            n_neurons=amr.model.n_neurons,
            n_parameters=parameter_count(amr.model.n_neurons, amr.model.dim),
            n_cells=amr.mesh.n_cells,
            train_loss=train_loss,
            estimator=xi,
            n_elements=len(partition),
            n_marked=0,
            train_iterations=first.iterations + sum(r.iterations for r in amr.train_results),
            wall_time=time.perf_counter() - t0,
        )
    )
    return report


def ane_full(f, config, mesh=None, model=None):
    """Network enhancement with adaptive integration meshes.

    Each outer iteration trains on the current mesh, refines the mesh for
    the current network, estimates the error on the resulting mesh and
    enhances the network if needed.  The mesh carries over between outer
    iterations.
    """
    if mesh is None:
        mesh = uniform_mesh(f.domain, config.initial_mesh_counts)
    amr_step = None
    if config.amr:
        def amr_step(f_, model_, mesh_):
            return amr_integration(
                f_, model_, mesh_, config.gamma2, config.train, config.amr_strategy,
                config.amr_gamma1, config.max_cells, config.max_amr_steps,
            )
    return _outer_loop(f, mesh, config, model, amr_step)


def fixed_network(f, mesh, n_neurons, config):
    """Train a single network of ``n_neurons`` uniformly placed hinges.

    When ``n_neurons`` is a multiple of the dimension the hinges match the
    adaptive runs' starting grid; otherwise they are spread over the axes
    at cell midpoints.
    """
    d = mesh.dim
    if n_neurons < 1:
        raise ValueError("n_neurons must be positive")
    f_values = sample(mesh, f)
    if n_neurons % d == 0:
        model = initial_model(f_values, mesh, n_neurons // d - 1, "solve")
    else:
        model = fit_output(ReluModel(*init_uniform_count(n_neurons, mesh.domain)), mesh, f_values)
    cfg = AneConfig(**{**{fl.name: getattr(config, fl.name) for fl in fields(config)}, "max_outer_iters": 1})
    return _outer_loop(f, mesh, cfg, model)


def relative_error(model, mesh, f, chunk=200_000):
    """``||f - v||_T / ||f||_T`` evaluated in chunks (for large test meshes)."""
    num = den = 0.0
    for s in range(0, mesh.n_cells, chunk):
        X = mesh.points[s : s + chunk]
        w = mesh.volumes[s : s + chunk]
        fv = np.asarray(f(X), dtype=float)
        r = fv - forward(model, X)[0]
        num += float(np.sum(r * r * w))
        den += float(np.sum(fv * fv * w))
    return float(np.sqrt(num / den))
