"""Stochastic ADMM for the AIR-regularized objective.

The problem is

    min_w  L(w) + lambda1 ||w||^2 + sum_g lambda_g ||v_g||_2   s.t.  v = F w

and each iteration runs a linearized w-step (closed form because F^T F is
diagonal), a group soft-thresholding v-step, a dual ascent u-step, grows
rho geometrically up to ``rho_max`` and folds the new iterates into
non-uniform running averages.  The averaged weights are the trained model.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, InvalidInputError, NonFiniteError
from .losses import MiniBatch, default_loss, loss_and_gradient
from .regularizer import RegConfig, group_norm_value, label_activations, prox_all
from .tensor import assemble_group_operator

log = logging.getLogger(__name__)

LAMBDA1_MODES = ("exact-quadratic", "paper-literal")
SCHEDULES = ("decaying", "fixed-eta")


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters of a SADMM run.

    ``lambda1_mode="exact-quadratic"`` folds 2*lambda1 into the diagonal
    solve; ``"paper-literal"`` instead subtracts (lambda1/2) w_k on the
    right-hand side.  ``schedule="decaying"`` uses eta_{k+1} = theta_{k+1} = 2/(k+2);
    ``"fixed-eta"`` keeps eta at ``eta0`` and averages with the same theta.
    """

    rho0: float = 10.0
    beta: float = 1.1
    rho_max: float = 1e4
    batch_size: int = 100
    epochs: int = 30
    tol: float = 1e-4
    min_epochs: int = 1
    seed: int = 0
    reg: RegConfig = field(default_factory=RegConfig)
    lambda1_mode: str = "exact-quadratic"
    schedule: str = "decaying"
    eta0: float = 1.0
    scale_gradient: bool = True
    loss: str = None
    threads: int = 1
    backend: str = None
    record_activations: bool = False
    divergence_factor: float = 1e6

    def __post_init__(self):
        if not self.rho0 > 0:
            raise InvalidInputError("rho0 must be positive")
        if not self.beta >= 1:
            raise InvalidInputError("beta must be >= 1")
        if not self.rho_max >= self.rho0:
            raise InvalidInputError("rho_max must be >= rho0")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        if self.epochs < 0:
            raise InvalidInputError("epochs must be >= 0")
        if not self.tol > 0:
            raise InvalidInputError("tol must be positive")
        if self.lambda1_mode not in LAMBDA1_MODES:
            raise InvalidInputError(f"lambda1_mode must be one of {LAMBDA1_MODES}")
        if self.schedule not in SCHEDULES:
            raise InvalidInputError(f"schedule must be one of {SCHEDULES}")
        if self.threads < 1:
            raise InvalidInputError("threads must be >= 1")


@dataclass(eq=False)
class SolverState:
    w: np.ndarray
    v: np.ndarray
    u: np.ndarray
    rho: float
    k: int = 0
    w_bar: np.ndarray = None
    v_bar: np.ndarray = None
    u_bar: np.ndarray = None
    residuals: list = field(default_factory=list)

    def copy(self):
        return SolverState(
            self.w.copy(), self.v.copy(), self.u.copy(), self.rho, self.k,
            self.w_bar.copy(), self.v_bar.copy(), self.u_bar.copy(), list(self.residuals),
        )


@dataclass(frozen=True, eq=False)
class AirProblem:
    """Dataset plus its group operator and the precomputed diagonal of F^T F."""

    data: object
    op: object
    gram: np.ndarray
    loss: str


def make_problem(data, reg=None, loss=None, backend=None, threads=1):
    reg = reg or RegConfig()
    total = data.n * data.num_classes
    groups = reg.active_groups(total)
    weights = reg.group_weight(data.p, total, groups)
    op = assemble_group_operator(data.features, data.num_classes, weights, groups, backend)
    return AirProblem(data, op, op.gram_diagonal(threads), loss or default_loss(data))


def air_objective(w, problem, lambda1, threads=1):
    """Full objective: loss over all examples + ridge + weighted group norm of Fw."""
    loss, _ = loss_and_gradient(problem.loss, w, problem.data)
    reg = group_norm_value(problem.op.forward(w, threads=threads), problem.op.weights)
    return loss + lambda1 * float(np.sum(w * w)) + reg


def init_state(problem, cfg):
    p, C = problem.op.group_size, problem.op.num_classes
    m = problem.op.n_groups
    w = np.zeros((p, C))
    v = np.zeros((m, p))
    u = np.zeros((m, p))
    return SolverState(w, v, u, float(cfg.rho0), 0, w.copy(), v.copy(), u.copy())


def step_size(k, cfg):
    """eta_{k+1}, the proximal step used while computing iterate k+1."""
    if cfg.schedule == "fixed-eta":
        return cfg.eta0
    return 2.0 / (k + 2)


def averaging_weight(k):
    return 2.0 / (k + 2)


def update_w(state, g, problem, cfg, threads=1):
    """Closed-form minimizer of the linearized augmented Lagrangian in w."""
    g = np.asarray(g, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise NonFiniteError(
            f"non-finite gradient at iteration {state.k}",
            {"k": state.k, "rho": state.rho, "max_abs_w": float(np.max(np.abs(state.w)))},
        )
    eta = step_size(state.k, cfg)
    lam1 = cfg.reg.lambda1
    rhs = -g + problem.op.adjoint(state.v, state.u, a=state.rho, b=1.0, threads=threads)
    rhs += state.w / eta
    denom = state.rho * problem.gram + 1.0 / eta
    if cfg.lambda1_mode == "exact-quadratic":
        denom = denom + 2.0 * lam1
    else:
        rhs -= 0.5 * lam1 * state.w
    return rhs / denom


def update_v(state, problem, cfg, threads=1):
    """Group prox of F w - u / rho; expects ``state.w`` to hold the new w."""
    target = problem.op.forward(state.w, threads=threads) - state.u / state.rho
    return prox_all(target, problem.op.weights / state.rho, threads, problem.op.backend)


def update_u_rho(state, problem, cfg, threads=1):
    """Dual ascent on v = F w, then grow rho (capped at rho_max)."""
    u = state.u + state.rho * (state.v - problem.op.forward(state.w, threads=threads))
    return u, min(cfg.beta * state.rho, cfg.rho_max)


def average_iterates(state):
    """Running averages with weight 2/(k+2) on the newest iterate."""
    theta = averaging_weight(state.k)
    w_bar = (1 - theta) * state.w_bar + theta * state.w
    v_bar = (1 - theta) * state.v_bar + theta * state.v
    u_bar = (1 - theta) * state.u_bar + theta * state.u
    return w_bar, v_bar, u_bar


def _gradient(state, problem, cfg, batch):
    if not cfg.scale_gradient:
        batch = MiniBatch(batch.indices, 1.0)
    _, g = loss_and_gradient(problem.loss, state.w, problem.data, batch)
    return g


def step(state, problem, cfg, batch=None, rng=None, fused=True):
    """One SADMM iteration; mutates and returns ``state``.

    The batch is drawn uniformly from ``rng`` when not given.
    """
    threads = cfg.threads
    if batch is None:
        if rng is None:
            raise InvalidInputError("step needs a batch or an rng")
        batch = MiniBatch.sample(problem.data.n, cfg.batch_size, rng)
    g = _gradient(state, problem, cfg, batch)
    state.w = update_w(state, g, problem, cfg, threads)
    op = problem.op
    if fused:
        res = np.empty(op.n_groups)
        op.backend.vu_update(
            op.features, np.ascontiguousarray(state.w.T), state.v, state.u,
            op.ex, op.cls, float(state.rho), op.weights / state.rho, res, threads,
        )
        residual = float(np.sqrt(res.sum()))
        state.rho = min(cfg.beta * state.rho, cfg.rho_max)
    else:
        state.v = update_v(state, problem, cfg, threads)
        state.u, state.rho = update_u_rho(state, problem, cfg, threads)
        diff = state.v - op.forward(state.w, threads=threads)
        residual = float(np.sqrt(np.sum(diff * diff)))
    state.k += 1
    state.w_bar, state.v_bar, state.u_bar = average_iterates(state)
    state.residuals.append(residual)
    return state


@dataclass(eq=False)
class TrainResult:
    model: np.ndarray
    state: object
    history: list
    activations: list
    problem: object


def epoch_batches(n, batch_size, rng, scaled=True):
    """Shuffle once and cut into consecutive batches."""
    perm = rng.permutation(n)
    for lo in range(0, n, batch_size):
        idx = np.sort(perm[lo:lo + batch_size])
        yield MiniBatch(idx, n / idx.size if scaled else 1.0)


def train(data, cfg, problem=None, callback=None):
    """Run SADMM for ``cfg.epochs`` epochs or until the primal residual drops below ``cfg.tol``.

    ``callback`` receives one record per epoch.  Raises ``DivergenceError``
    when the residual grows by more than ``cfg.divergence_factor`` over its
    first nonzero value or turns non-finite.
    """
    if problem is None:
        problem = make_problem(data, cfg.reg, cfg.loss, cfg.backend, cfg.threads)
    state = init_state(problem, cfg)
    rng = np.random.default_rng(cfg.seed)
    history, series = [], []
    reference = None
    labels = problem.data.labels
    for epoch in range(cfg.epochs):
        for batch in epoch_batches(problem.data.n, cfg.batch_size, rng):
            step(state, problem, cfg, batch)
            r = state.residuals[-1]
            if reference is None and r > 0:
                reference = r
            if not np.isfinite(r) or (reference and r > cfg.divergence_factor * reference):
                raise DivergenceError(
                    f"primal residual diverged at iteration {state.k}",
                    {"k": state.k, "residual": r, "reference": reference, "rho": state.rho},
                )
        record = {
            "epoch": epoch + 1,
            "k": state.k,
            "objective": air_objective(state.w_bar, problem, cfg.reg.lambda1, cfg.threads),
            "residual": state.residuals[-1],
            "rho": state.rho,
        }
        history.append(record)
        if cfg.record_activations and not problem.data.multilabel:
            series.append(label_activations(problem.op, state.v, labels, cfg.threads))
        log.debug("sadmm epoch %d k=%d objective=%.6g residual=%.3g rho=%.4g",
                  epoch + 1, state.k, record["objective"], record["residual"], state.rho)
        if callback is not None:
            callback(record)
        if state.residuals[-1] <= cfg.tol and epoch + 1 >= cfg.min_epochs:
            break
    return TrainResult(state.w_bar.copy(), state, history, series, problem)
