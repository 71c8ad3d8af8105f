"""Derivative-free optimization of preparation and measurement circuits.

Preparation maximizes the QFI of the encoded probe; pre-measurement
maximizes the CFI of a fixed encoded probe under a readout model.  Both
use the same protocol: start each seed near the identity, run a
simplex-family local optimizer, then grow the circuit one zero-filled
layer at a time, warm-starting from the previous optimum.  Growing by an
identity layer cannot change the objective, so the per-seed best is
non-increasing in depth by construction.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.optimize

from .analysis import default_cutoff
from .circuits import AnsatzParams, InteractionBudget, interaction_budget, run_circuit
from .dynamics import coherent_input_state
from .encoding import DEFAULT_PHI, PhaseFamily, encoded_family
from .hilbert import CompositeState
from .metrology import DEFAULT_DELTA, MeasurementModel, cfi, qfi_fidelity

log = logging.getLogger(__name__)


class OptimizationError(RuntimeError):
    """Objective returned a non-finite value or inputs were unusable."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Protocol knobs for the layer-growing optimization.

    ``max_iters`` caps objective evaluations per (seed, depth) stage;
    ``initial_step`` is the opening trust-region radius of the cobyla
    method (radians, the natural scale of the periodic gates) and is
    ignored by the simplex default.  ``seed_indices`` restricts a run to
    an explicit subset of the seed pool; the random stream of seed k is
    the same whether it runs alone or in the full batch, which lets a
    scheduler farm seeds out and merge records.
    """

    max_iters: int = 1000
    tol: float = 1e-10
    method: str = "nelder-mead"
    init_scale: float = 1e-2
    seeds: int = 10
    d_max: int = 10
    master_seed: int = 11
    initial_step: float = 1.0
    seed_indices: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.seed_indices is not None and any(s < 0 for s in self.seed_indices):
            raise ValueError("seed indices must be non-negative")

    @property
    def seed_pool(self) -> tuple[int, ...]:
        if self.seed_indices is not None:
            return tuple(self.seed_indices)
        return tuple(range(self.seeds))


@dataclass(frozen=True, eq=False)
class OptRecord:
    """Outcome of one (seed, depth) optimization stage."""

    kind: str
    n_mean: float
    seed: int
    d: int
    best_params: np.ndarray
    best_objective: float
    iters_used: int
    budget: InteractionBudget
    wall_time: float

    @property
    def best_fisher(self) -> float:
        return -self.best_objective

    @property
    def inv_fisher(self) -> float:
        f = self.best_fisher
        return 1.0 / f if f > 0 else float("inf")


def seed_stream(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator per worker: one keyed counter-based stream.

    Philox is counter-based, so advancing by disjoint 2^64 blocks gives
    non-overlapping streams for any worker index without handshaking.
    """
    bits = np.random.Philox(key=master_seed)
    bits.advance(index * (1 << 64))
    return np.random.Generator(bits)


class _Tracked:
    """Best-seen wrapper: guarantees f_best <= f(x0) and finite values."""

    def __init__(self, fn):
        self.fn = fn
        self.nfev = 0
        self.best_f = np.inf
        self.best_x: np.ndarray | None = None

    def __call__(self, x: np.ndarray) -> float:
        value = float(self.fn(np.asarray(x, dtype=float)))
        self.nfev += 1
        if not np.isfinite(value):
            raise OptimizationError(
                f"objective returned {value!r} at evaluation {self.nfev}"
            )
        if value < self.best_f:
            self.best_f = value
            self.best_x = np.array(x, dtype=float, copy=True)
        return value


def minimize(objective, x0: np.ndarray, config: OptimizerConfig) -> tuple[np.ndarray, float, int]:
    """Local derivative-free minimization; returns (x_best, f_best, evals).

    The reported optimum is the best point ever evaluated, not the
    method's final iterate, so it can never regress below the start.
    """
    x0 = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise OptimizationError("starting point contains non-finite entries")
    tracked = _Tracked(objective)
    method = config.method.lower().replace("_", "-")
    if method == "cobyla":
        scipy.optimize.minimize(
            tracked, x0, method="COBYLA", tol=config.tol,
            options={"maxiter": config.max_iters, "rhobeg": config.initial_step},
        )
    elif method == "nelder-mead":
        scipy.optimize.minimize(
            tracked, x0, method="Nelder-Mead",
            options={"maxfev": config.max_iters, "xatol": config.tol,
                     "fatol": config.tol},
        )
    else:
        raise ValueError(f"unknown optimizer method {config.method!r}")
    assert tracked.best_x is not None
    return tracked.best_x, tracked.best_f, tracked.nfev


def _cutoff_for(n_mean: float, cutoff: int | None) -> int:
    return cutoff if cutoff is not None else default_cutoff(n_mean)


def _layer_width(kind: str) -> int:
    return 3 if kind == "jc" else 2


def _grown(x: np.ndarray, kind: str, d: int) -> np.ndarray:
    """Pad a parameter vector with zero layers up to depth d."""
    width = _layer_width(kind)
    out = np.zeros(width * d)
    out[: x.size] = x
    return out


def _run_schedule(kind: str, n_mean: float, objective_at, d_schedule, config,
                  ) -> list[OptRecord]:
    """Shared seed/depth loop. ``objective_at(d)`` returns the stage objective."""
    d_schedule = list(d_schedule)
    if not d_schedule or any(b <= a for a, b in zip(d_schedule, d_schedule[1:])):
        raise ValueError("d_schedule must be non-empty and strictly increasing")
    width = _layer_width(kind)
    records: list[OptRecord] = []
    for seed in config.seed_pool:
        rng = seed_stream(config.master_seed, seed)
        x = rng.uniform(-config.init_scale, config.init_scale, size=width * d_schedule[0])
        try:
            for d in d_schedule:
                x = _grown(x, kind, d)
                objective = objective_at(d)
                start = time.perf_counter()
                x, f_best, nfev = minimize(objective, x, config)
                elapsed = time.perf_counter() - start
                params = AnsatzParams.from_vector(kind, x)
                records.append(OptRecord(
                    kind=kind, n_mean=n_mean, seed=seed, d=d, best_params=x,
                    best_objective=f_best, iters_used=nfev,
                    budget=interaction_budget(params), wall_time=elapsed,
                ))
        except OptimizationError as err:
            log.warning("seed %d aborted: %s", seed, err)
    if not records:
        raise OptimizationError("every seed aborted")
    return records


def optimize_preparation(kind: str, n_mean: float, d_schedule, config: OptimizerConfig,
                         phi: float = DEFAULT_PHI, delta: float = DEFAULT_DELTA,
                         cutoff: int | None = None) -> list[OptRecord]:
    """Maximize QFI over preparation-circuit parameters, growing layers."""
    cut = _cutoff_for(n_mean, cutoff)
    psi0 = coherent_input_state(kind, n_mean, cut)

    def objective_at(_d: int):
        def objective(x: np.ndarray) -> float:
            probe = run_circuit(AnsatzParams.from_vector(kind, x), psi0)
            return -qfi_fidelity(probe, phi, delta).value
        return objective

    return _run_schedule(kind, n_mean, objective_at, d_schedule, config)


def _measured_family(params: AnsatzParams, family: PhaseFamily) -> PhaseFamily:
    """Push the encoded state and its derivative through the measurement circuit."""
    return PhaseFamily(run_circuit(params, family.state),
                       run_circuit(params, family.derivative), family.phi)


def optimize_measurement(kind: str, prepared_params: AnsatzParams, model: MeasurementModel,
                         n_mean: float, d_schedule, config: OptimizerConfig,
                         phi: float = DEFAULT_PHI,
                         cutoff: int | None = None) -> list[OptRecord]:
    """Maximize CFI over pre-measurement parameters for a fixed probe.

    The probe is rebuilt from ``prepared_params``, encoded once, and the
    analytic phase derivative is propagated through the (phase-
    independent) measurement circuit at every objective call.
    """
    cut = _cutoff_for(n_mean, cutoff)
    psi0 = coherent_input_state(kind, n_mean, cut)
    family = encoded_family(run_circuit(prepared_params, psi0), phi)

    def objective_at(_d: int):
        def objective(x: np.ndarray) -> float:
            measured = _measured_family(AnsatzParams.from_vector(kind, x), family)
            return -cfi(measured, model).value
        return objective

    return _run_schedule(kind, n_mean, objective_at, d_schedule, config)


@dataclass(frozen=True)
class ThetaAblation:
    """CFI comparison: free angle alone vs circuit at fixed angle vs both."""

    theta_only: tuple[float, float]          # (theta_opt, fisher)
    fixed_theta: list[OptRecord]             # theta = 0, circuit optimized
    joint: list[OptRecord]                   # theta and circuit optimized together


def ablation_theta(kind: str, prepared_params: AnsatzParams, n_mean: float,
                   config: OptimizerConfig, phi: float = DEFAULT_PHI,
                   cutoff: int | None = None,
                   grid=None) -> ThetaAblation:
    """Compare homodyne readout strategies on one fixed probe.

    Arms: (a) optimize the quadrature angle with no measurement circuit,
    (b) fix theta=0 and optimize the circuit, (c) optimize both jointly.
    """
    from .metrology import QuadratureGrid

    grid = grid if grid is not None else QuadratureGrid()
    cut = _cutoff_for(n_mean, cutoff)
    psi0 = coherent_input_state(kind, n_mean, cut)
    family = encoded_family(run_circuit(prepared_params, psi0), phi)

    def theta_objective(x: np.ndarray) -> float:
        model = MeasurementModel("homodyne", include_emitters=(kind == "jc"),
                                 theta=float(x[0]), grid=grid)
        return -cfi(family, model).value

    rng = seed_stream(config.master_seed, 0)
    x0 = rng.uniform(-config.init_scale, config.init_scale, size=1)
    x_best, f_best, _ = minimize(theta_objective, x0, config)
    theta_arm = (float(x_best[0]), -f_best)

    model0 = MeasurementModel("homodyne", include_emitters=(kind == "jc"),
                              theta=0.0, grid=grid)
    schedule = list(range(1, config.d_max + 1))
    fixed = optimize_measurement(kind, prepared_params, model0, n_mean,
                                 schedule, config, phi=phi, cutoff=cut)

    width = _layer_width(kind)

    def joint_objective_at(_d: int):
        def objective(x: np.ndarray) -> float:
            model = MeasurementModel("homodyne", include_emitters=(kind == "jc"),
                                     theta=float(x[-1]), grid=grid)
            measured = _measured_family(AnsatzParams.from_vector(kind, x[:-1]), family)
            return -cfi(measured, model).value
        return objective

    # The joint arm appends theta as a trailing parameter; the shared
    # schedule loop assumes whole layers, so run its loop inline here.
    joint: list[OptRecord] = []
    for seed in config.seed_pool:
        rng = seed_stream(config.master_seed, seed)
        x = rng.uniform(-config.init_scale, config.init_scale, size=width + 1)
        try:
            for d in schedule:
                grown = np.zeros(width * d + 1)
                grown[: x.size - 1] = x[:-1]
                grown[-1] = x[-1]
                start = time.perf_counter()
                x, f_best, nfev = minimize(joint_objective_at(d), grown, config)
                elapsed = time.perf_counter() - start
                params = AnsatzParams.from_vector(kind, x[:-1])
                joint.append(OptRecord(
                    kind=kind, n_mean=n_mean, seed=seed, d=d, best_params=x,
                    best_objective=f_best, iters_used=nfev,
                    budget=interaction_budget(params), wall_time=elapsed,
                ))
        except OptimizationError as err:
            log.warning("joint-theta seed %d aborted: %s", seed, err)
    return ThetaAblation(theta_arm, fixed, joint)


def paired_depth_scan(kind: str, prep_best_by_d: dict[int, AnsatzParams],
                      model: MeasurementModel, n_mean: float, config: OptimizerConfig,
                      phi: float = DEFAULT_PHI, cutoff: int | None = None,
                      ) -> tuple[dict[int, float], list[OptRecord]]:
    """Grow probe and measurement circuits together across depths.

    For each depth d the probe is the best prepared circuit at d; the
    measurement circuit is warm-started from the previous depth and its
    identity setting is always evaluated, so the reported CFI at every
    depth is at least the circuit-free value.  Returns the circuit-free
    CFI per depth and the optimization records.
    """
    depths = sorted(prep_best_by_d)
    if depths != list(range(depths[0], depths[0] + len(depths))):
        raise ValueError("paired scan needs consecutive depths")
    cut = _cutoff_for(n_mean, cutoff)
    psi0 = coherent_input_state(kind, n_mean, cut)
    families = {d: encoded_family(run_circuit(prep_best_by_d[d], psi0), phi)
                for d in depths}
    plain = {d: cfi(families[d], model).value for d in depths}

    width = _layer_width(kind)
    records: list[OptRecord] = []
    for seed in config.seed_pool:
        rng = seed_stream(config.master_seed, seed)
        x = rng.uniform(-config.init_scale, config.init_scale, size=width * depths[0])
        try:
            for d in depths:
                x = _grown(x, kind, d)
                family = families[d]

                def objective(v: np.ndarray, family=family) -> float:
                    measured = _measured_family(AnsatzParams.from_vector(kind, v), family)
                    return -cfi(measured, model).value

                start = time.perf_counter()
                x, f_best, nfev = minimize(objective, x, config)
                if -plain[d] < f_best:
                    # identity circuit beats the local optimum; keep the honest best
                    x = np.zeros(width * d)
                    f_best = -plain[d]
                elapsed = time.perf_counter() - start
                params = AnsatzParams.from_vector(kind, x)
                records.append(OptRecord(
                    kind=kind, n_mean=n_mean, seed=seed, d=d, best_params=x,
                    best_objective=f_best, iters_used=nfev,
                    budget=interaction_budget(params), wall_time=elapsed,
                ))
        except OptimizationError as err:
            log.warning("paired-scan seed %d aborted: %s", seed, err)
    return plain, records


def best_record(records: list[OptRecord], d: int | None = None) -> OptRecord:
    """Record with the largest Fisher information, optionally at one depth."""
    pool = [r for r in records if d is None or r.d == d]
    if not pool:
        raise ValueError(f"no records at depth {d}")
    return min(pool, key=lambda r: r.best_objective)


def write_records(records: list[OptRecord], csv_path: str | Path,
                  params_dir: str | Path | None = None,
                  comment: str | None = None) -> None:
    """Write records as CSV plus one flat-vector JSON sidecar per record."""
    csv_path = Path(csv_path)
    with csv_path.open("w", newline="") as fh:
        if comment is not None:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["kind", "N", "d", "seed", "objective", "inv_fisher",
                         "budget", "iters", "wall_time"])
        for r in records:
            writer.writerow([r.kind, repr(float(r.n_mean)), r.d, r.seed,
                             repr(float(r.best_objective)), repr(float(r.inv_fisher)),
                             repr(float(r.budget.total)), r.iters_used,
                             repr(float(r.wall_time))])
    if params_dir is not None:
        params_dir = Path(params_dir)
        params_dir.mkdir(parents=True, exist_ok=True)
        for r in records:
            name = f"{r.kind}_N{r.n_mean:g}_d{r.d}_seed{r.seed}.json"
            payload = {"kind": r.kind, "n_mean": r.n_mean, "d": r.d, "seed": r.seed,
                       "params": [float(v) for v in r.best_params]}
            (params_dir / name).write_text(json.dumps(payload, indent=1))


def load_params(path: str | Path) -> AnsatzParams:
    """Rebuild ansatz parameters from a sidecar file."""
    payload = json.loads(Path(path).read_text())
    vec = np.asarray(payload["params"], dtype=float)
    kind = payload["kind"]
    if kind == "jc" and vec.size % 3 == 1 or kind == "kerr" and vec.size % 2 == 1:
        vec = vec[:-1]  # joint-theta records carry the angle as a trailing entry
    return AnsatzParams.from_vector(kind, vec)
