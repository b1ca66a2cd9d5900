"""Experiment definitions: target functions, test sets, configs and runners.

Each ``run_*`` function takes an :class:`ExperimentConfig` and returns a
list of row dicts; :func:`write_rows` renders them as CSV. All experiments
use a zero prior mean.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .conditioning import GP, constrain, posterior
from .domain import FinitePoints, constraint_set_from_dict, diagonal, latin_hypercube, quadrature, rect_boundary, segment
from .kernels import Kernel, SquaredExponential, kernel_from_dict
from .spectral import BACKENDS, FormSpec, interpolation_form, nystrom_eig, spectral_form, sum_kernel_form, write_eigen_csv
from .verify import interpolant_build, reproduce_check

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "boundary_target",
    "diagonal_target",
    "boundary_test_set",
    "diagonal_test_set",
    "reproduce_functions",
    "run_reproduce",
    "run_boundary",
    "run_diagonal",
    "run_eig",
    "run_condition",
    "run",
    "write_rows",
    "COLUMNS",
    "EXPERIMENTS",
]

EXPERIMENTS = ("reproduce", "boundary", "diagonal", "eig", "condition")

COLUMNS = {
    "reproduce": ["function", "backend", "N", "n_effective", "max_error"],
    "boundary": ["backend", "N", "n_effective", "max_error"],
    "diagonal": ["backend", "N", "n_effective", "max_error"],
    "condition": None,  # probe coordinates vary with the dimension
    "eig": None,  # written by spectral.write_eigen_csv
}

UNIT_BOX = ((-1.0, -1.0), (1.0, 1.0))


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def boundary_target(P: np.ndarray) -> np.ndarray:
    """Smooth test surface for the boundary experiment."""
    t1, t2 = P[:, 0], P[:, 1]
    return 0.5 * np.exp(0.2 * (t1 - 0.5) ** 2) * np.sin(np.pi * t1 / 2) + np.exp(-t2**2) * np.cos(np.pi * t2 / 2)


def diagonal_target(P: np.ndarray) -> np.ndarray:
    """Test surface for the diagonal experiment (defined for ``t1 >= -1``)."""
    t1, t2 = P[:, 0], P[:, 1]
    return (
        t2
        * np.sqrt(1.0 + t1)
        * np.cos(np.pi * t2)
        * np.sin(np.pi * (t1 - t2) / 2 + 1.0)
        * np.exp(0.5 * (t1 + t2) ** 2)
    )


TARGETS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "zero": lambda P: np.zeros(P.shape[0]),
    "boundary": boundary_target,
    "diagonal": diagonal_target,
}


def boundary_test_set(n: int = 200) -> np.ndarray:
    """``n`` points on the boundary of the unit box shrunk by 0.9."""
    path = rect_boundary(*UNIT_BOX)
    return 0.9 * path.embed(np.linspace(-1.0, 1.0, n, endpoint=False))


def diagonal_test_set(n: int = 200, offset: float = 0.1) -> np.ndarray:
    """``n`` points on each of the lines ``t2 = t1 +- offset`` inside the unit box."""
    up = np.linspace(-1.0, 1.0 - offset, n)
    down = np.linspace(-1.0 + offset, 1.0, n)
    return np.vstack([np.c_[up, up + offset], np.c_[down, down - offset]])


@dataclass
class ExperimentConfig:
    """Settings for one CLI run; round-trips through JSON.

    ``backends`` is a list of form-spec dicts (see
    :class:`gpb.spectral.FormSpec`) without resolution fields; ``nodes``
    lists the N values swept (node count for interpolation, retained
    eigenpairs on a ``quad_nodes`` rule for series backends; 0 means no
    constraint).
    """

    experiment: str
    kernel: dict | None = None
    backends: list = field(default_factory=lambda: [{"backend": "interpolation"}, {"backend": "spectral"}])
    nodes: list = field(default_factory=lambda: [5, 10, 20, 40, 60])
    m_points: int = 10
    seed: int = 1
    out: str | None = None
    grid: int = 200
    quad_nodes: int = 64
    rule: str = "midpoint"
    n_interp_points: int = 6
    constraint: dict | None = None
    target: str = "zero"
    probes: object = "nodes"
    dat: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        nodes = [int(n) for n in self.nodes]
        if any(n < 0 for n in nodes) or any(b <= a for a, b in zip(nodes[:-1], nodes[1:])):
            raise ConfigError(f"nodes must be nonnegative and strictly ascending, got {self.nodes}")
        self.nodes = nodes
        if self.m_points < 0:
            raise ConfigError("m_points must be >= 0")
        if self.grid < 1 or self.quad_nodes < 1:
            raise ConfigError("grid and quad_nodes must be positive")
        if not self.backends:
            raise ConfigError("at least one backend is required")
        for b in self.backends:
            if not isinstance(b, dict) or b.get("backend") not in BACKENDS:
                raise ConfigError(f"backend entries need a 'backend' in {BACKENDS}, got {b!r}")
        if self.target not in TARGETS:
            raise ConfigError(f"target must be one of {tuple(TARGETS)}, got {self.target!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if "experiment" not in d:
            raise ConfigError("config is missing 'experiment'")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str, source: str = "<config>") -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        return cls.from_dict(d)


def _kernel(config: ExperimentConfig, dimension: int) -> Kernel:
    if config.kernel is None:
        return SquaredExponential(1.0, dimension)
    spec = json.loads(json.dumps(config.kernel))
    if spec.get("family") in ("squared_exponential", "matern"):
        spec.setdefault("params", {}).setdefault("dimension", dimension)
    try:
        k = kernel_from_dict(spec)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad kernel spec: {exc}") from exc
    if k.dimension != dimension:
        raise ConfigError(f"kernel dimension {k.dimension} does not match the experiment's {dimension}")
    return k


def _form_spec(entry: dict, config: ExperimentConfig) -> FormSpec:
    d = dict(entry)
    d.setdefault("rule", config.rule)
    d.pop("n_nodes", None)
    d.pop("n_eig", None)
    try:
        return FormSpec.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad backend spec {entry!r}: {exc}") from exc


def _label(spec: FormSpec) -> str:
    if spec.nugget > 0:
        return f"{spec.backend}(nugget={spec.nugget:g})"
    return spec.backend


def _sweep_forms(kernel: Kernel, cset, spec: FormSpec, Ns: list[int], quad_nodes: int):
    """Yield ``(N, n_effective, form or None)`` for each requested N."""
    basis = None
    for N in Ns:
        if N == 0:
            yield N, 0, None
        elif spec.backend == "interpolation":
            pts = quadrature(cset, N, spec.rule).points
            yield N, N, interpolation_form(kernel, pts, spec.nugget, spec.jitter)
        else:
            if basis is None:
                quad = quadrature(cset, quad_nodes, spec.rule)
                if spec.backend == "sum_kernel":
                    basis = sum_kernel_form(kernel, spec.q, quad, None, spec.nugget, spec.truncation).basis
                else:
                    basis = nystrom_eig(kernel, quad, spec.truncation)
            n = min(N, len(basis))
            backend = "sum_kernel" if spec.backend == "sum_kernel" else None
            yield N, n, spectral_form(basis, n, spec.nugget, kernel=kernel, backend=backend)


def _field_experiment(config: ExperimentConfig, cset, target, test_points) -> list[dict]:
    kernel = _kernel(config, 2)
    prior = GP(kernel)
    X = latin_hypercube(config.m_points, 2, config.seed) if config.m_points > 0 else np.zeros((0, 2))
    fX = target(X)
    ftest = target(test_points)
    rows = []
    for entry in config.backends:
        spec = _form_spec(entry, config)
        for N, n_eff, form in _sweep_forms(kernel, cset, spec, config.nodes, config.quad_nodes):
            base = prior if form is None else constrain(prior, cset, target, form=form)
            model = posterior(base, X, fX) if X.shape[0] else base
            err = float(np.max(np.abs(model.mean(test_points) - ftest)))
            rows.append({"backend": _label(spec), "N": N, "n_effective": n_eff, "max_error": err})
    return rows


def run_boundary(config: ExperimentConfig) -> list[dict]:
    """Boundary of the unit box as constraint set, M interior LHS observations."""
    return _field_experiment(config, rect_boundary(*UNIT_BOX), boundary_target, boundary_test_set(config.grid))


def run_diagonal(config: ExperimentConfig) -> list[dict]:
    """Diagonal of the unit box as constraint set, M interior LHS observations."""
    return _field_experiment(config, diagonal(*UNIT_BOX), diagonal_target, diagonal_test_set(config.grid))


def reproduce_functions(config: ExperimentConfig, kernel: Kernel | None = None):
    """The kernel-basis and polynomial interpolants of seeded data on ``[-1, 1]``.

    Returns ``(f1, f2, x, y)``.
    """
    kernel = _kernel(config, 1) if kernel is None else kernel
    x = np.linspace(-1.0, 1.0, config.n_interp_points)
    y = np.random.default_rng(config.seed).uniform(-1.0, 1.0, config.n_interp_points)
    f1 = interpolant_build(zip(x, y), "kernel_sections", kernel)
    f2 = interpolant_build(zip(x, y), "polynomial")
    return f1, f2, x, y


def run_reproduce(config: ExperimentConfig) -> list[dict]:
    """Reproduction error of ``<f, k_t> = f(t)`` on ``[-1, 1]`` versus N.

    Interpolation uses N equispaced nodes (endpoints included); series
    backends use the first N eigenpairs of a ``quad_nodes`` rule.
    """
    kernel = _kernel(config, 1)
    f1, f2, _, _ = reproduce_functions(config, kernel)
    test = np.linspace(-1.0, 1.0, config.grid)
    T = segment(-1.0, 1.0)
    rows = []
    for name, f in (("f1", f1), ("f2", f2)):
        for entry in config.backends:
            spec = _form_spec(entry, config)
            for N in config.nodes:
                if N == 0:
                    continue
                if spec.backend == "interpolation":
                    form = interpolation_form(kernel, np.linspace(-1.0, 1.0, N), spec.nugget, spec.jitter)
                    n_eff = N
                else:
                    (_, n_eff, form), = _sweep_forms(kernel, T, spec, [N], config.quad_nodes)
                report = reproduce_check(form, f, test, n=N)
                rows.append({"function": name, "backend": _label(spec), "N": N,
                             "n_effective": n_eff, "max_error": report.max_error})
    return rows


def _constraint_set(config: ExperimentConfig):
    spec = config.constraint or {"variant": "rect_boundary", "params": {"lo": [-1, -1], "hi": [1, 1]}}
    try:
        return constraint_set_from_dict(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad constraint spec: {exc}") from exc


def run_eig(config: ExperimentConfig):
    """Nyström basis of the kernel on ``quad_nodes`` nodes of the constraint set."""
    cset = _constraint_set(config)
    kernel = _kernel(config, cset.ambient_dimension)
    spec = _form_spec(config.backends[0], config)
    return nystrom_eig(kernel, quadrature(cset, config.quad_nodes, spec.rule), spec.truncation)


def run_condition(config: ExperimentConfig) -> list[dict]:
    """Constrained mean and variance at probe points.

    The form uses ``quad_nodes`` nodes; series backends keep up to
    ``max(nodes)`` eigenpairs.

    ``probes`` is ``"nodes"`` (the form nodes), an integer ``m`` (an
    ``m``-per-axis grid over ``[-1, 1]^d``), or an explicit list of points.
    """
    cset = _constraint_set(config)
    d = cset.ambient_dimension
    kernel = _kernel(config, d)
    spec = _form_spec(config.backends[0], config)
    if spec.backend == "interpolation":
        spec = dataclasses.replace(spec, n_nodes=config.quad_nodes)
    else:
        n_eig = max(config.nodes) if config.nodes else None
        spec = dataclasses.replace(spec, n_nodes=config.quad_nodes, n_eig=n_eig or None, clamp=True)
    target = TARGETS[config.target]
    model = constrain(GP(kernel), cset, target, spec)
    if config.m_points > 0:
        X = latin_hypercube(config.m_points, d, config.seed)
        model = posterior(model, X, target(X))
    if isinstance(config.probes, str):
        if config.probes != "nodes":
            raise ConfigError(f"probes must be 'nodes', an integer, or a point list, got {config.probes!r}")
        P = model.form.nodes if hasattr(model, "form") else model.base.form.nodes
    elif isinstance(config.probes, int):
        axes = [np.linspace(-1.0, 1.0, config.probes)] * d
        P = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    else:
        P = np.asarray(config.probes, dtype=float).reshape(-1, d)
    mean, var = model.mean(P), model.var(P)
    rows = []
    for p, m, v in zip(P, mean, var):
        row = {f"x{i + 1}": float(c) for i, c in enumerate(p)}
        row.update(mean=float(m), variance=float(v))
        rows.append(row)
    return rows


RUNNERS = {
    "reproduce": run_reproduce,
    "boundary": run_boundary,
    "diagonal": run_diagonal,
    "condition": run_condition,
}


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(rows: list[dict], fh, columns: list[str] | None = None, sep: str = ",") -> None:
    if columns is None:
        columns = list(rows[0]) if rows else []
    if sep == ",":
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])
    else:
        fh.write("# " + " ".join(columns) + "\n")
        for r in rows:
            fh.write(" ".join(_fmt(r[c]) for c in columns) + "\n")


def run(config: ExperimentConfig) -> str:
    """Run ``config`` and return the CSV text."""
    buf = io.StringIO()
    if config.experiment == "eig":
        write_eigen_csv(run_eig(config), buf)
        return buf.getvalue()
    rows = RUNNERS[config.experiment](config)
    write_rows(rows, buf, COLUMNS[config.experiment])
    return buf.getvalue()
