"""Experiment harness: named algorithm runners, bound checking and
seeded execution with CSV/JSON artifacts.

A runner is a callable ``(params, seed) -> (rows, constants)`` where
``rows`` is the trace (list of dicts) and ``constants`` are named scalars
(instance data such as operator norms or LP optima) that bound
expressions may reference.  ``run_experiment`` fans a config out over
seeds, writes one CSV per seed plus a seed-averaged aggregate, evaluates
the declared bound checks and writes a JSON report with verdicts.

Bound expressions are restricted arithmetic over logged metrics and
constants (names, + - * / **, sqrt/log/log2/exp/abs/min/max), evaluated
row by row; a bound passes when metric <= expression on every row.
"""

import ast
import math
import os

import numpy as np

from . import ardd, barycenter, games, ot, pagerank, primal_dual, sigm
from .errors import (
    AccoptError,
    DivergedError,
    InvalidInputError,
    NotConvergedError,
)
from .oracles import DeltaLOracle, DirDerivOracle, StochasticDeltaLOracle
from .geometry import euclidean_setup
from .trace import trace_digest, write_json, write_trace

__all__ = [
    "ALGORITHMS",
    "safe_eval",
    "check_bound",
    "run_experiment",
    "list_algorithms",
]


# ---------------------------------------------------------------------------
# bound expressions


_FUNCS = {"sqrt": math.sqrt, "log": math.log, "log2": math.log2,
          "exp": math.exp, "abs": abs, "min": min, "max": max}
_BINOPS = {ast.Add: lambda a, b: a + b, ast.Sub: lambda a, b: a - b,
           ast.Mult: lambda a, b: a * b, ast.Div: lambda a, b: a / b,
           ast.Pow: lambda a, b: a ** b}


def safe_eval(expr, names):
    """Evaluate a restricted arithmetic expression over ``names``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, (int, float)):
                return float(node.value)
            raise InvalidInputError(f"non-numeric literal {node.value!r}")
        if isinstance(node, ast.Name):
            if node.id in names:
                return float(names[node.id])
            raise InvalidInputError(f"unknown name {node.id!r} in bound")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            val = ev(node.operand)
            return -val if isinstance(node.op, ast.USub) else val
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id in _FUNCS and not node.keywords:
            return _FUNCS[node.func.id](*(ev(a) for a in node.args))
        raise InvalidInputError(
            f"disallowed syntax in bound expression: {ast.dump(node)}")

    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise InvalidInputError(f"cannot parse bound expression {expr!r}") from exc
    return ev(tree)


def check_bound(rows, bound_spec, constants=None):
    """Verify metric <= expr on every trace row.

    ``bound_spec``: {"name", "metric", "expr", optional "constants"}.
    Returns a verdict dict with the maximal violation margin (positive
    margin means the bound failed by that much).
    """
    metric = bound_spec["metric"]
    expr = bound_spec["expr"]
    base = dict(constants or {})
    base.update(bound_spec.get("constants", {}))
    margin = -math.inf
    checked = 0
    for row in rows:
        if metric not in row or row[metric] in ("", None):
            raise InvalidInputError(f"metric {metric!r} missing from trace row")
        names = dict(base)
        names.update({k: v for k, v in row.items()
                      if isinstance(v, (int, float)) and v is not None})
        rhs = safe_eval(expr, names)
        margin = max(margin, float(row[metric]) - rhs)
        checked += 1
    if checked == 0:
        raise InvalidInputError("empty trace in bound check")
    return {"name": bound_spec.get("name", metric), "metric": metric,
            "expr": expr, "passed": margin <= 0.0, "max_violation": margin,
            "rows_checked": checked}


# ---------------------------------------------------------------------------
# instance builders shared by runners


def _hyperplane(params, seed):
    rng = np.random.default_rng(seed)
    n = int(params.get("n", 5))
    gamma = float(params.get("gamma", 1.0))
    c = rng.normal(size=n)
    A = np.ones((1, n))
    b = np.array([1.0])
    prob = primal_dual.quadratic_problem(c, A, b, gamma=gamma)
    lam_star = gamma * (c.sum() - 1.0) / n
    return prob, {"A_norm": math.sqrt(n), "R": abs(lam_star), "gamma": gamma}


def _full_trace(solver, prob, iters, **kw):
    """Run a primal-dual solver past any stopping test."""
    try:
        _, _, rows = solver(prob, eps_f=0.0, eps_eq=0.0, max_iter=iters, **kw)
    except NotConvergedError as err:
        rows = err.trace
    return rows


# ---------------------------------------------------------------------------
# runners


def run_apdagd_hyperplane(params, seed):
    prob, consts = _hyperplane(params, seed)
    rows = _full_trace(primal_dual.apdagd_run, prob,
                       int(params.get("iters", 300)),
                       L0=float(params.get("L0", 1.0)))
    return rows, consts


def run_pdugdsdr_hyperplane(params, seed):
    prob, consts = _hyperplane(params, seed)
    _, _, rows = primal_dual.pdugdsdr_run(
        prob, eps_f=float(params.get("eps_f", 1e-6)),
        eps_eq=float(params.get("eps_eq", 1e-6)),
        max_iter=int(params.get("iters", 10 ** 4)))
    return rows, consts


def run_apdsgm_hyperplane(params, seed):
    prob, consts = _hyperplane(params, seed)
    L = consts["A_norm"] ** 2 / consts["gamma"]
    _, _, rows = primal_dual.apdsgm_run(
        prob, L=L, eps=float(params.get("eps", 1e-6)),
        N=int(params.get("iters", 300)), rng=np.random.default_rng(seed))
    return rows, dict(consts, L=L)


def run_ot_apdagd(params, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(int(params.get("n_min", 3)),
                         int(params.get("n_max", 8)) + 1))
    inst = ot.random_transport_instance(n, rng)
    eps = float(params.get("eps_factor", 0.05)) * float(inst.C.max())
    X, value, _ = ot.approx_ot(inst.C, inst.r, inst.c, eps)
    lp_star, _ = ot.ot_lp_exact(inst.C, inst.r, inst.c)
    row_sums, col_sums = X.sum(axis=1), X.sum(axis=0)
    feas = float(np.abs(row_sums - inst.r).sum() + np.abs(col_sums - inst.c).sum())
    rows = [{"k": 1, "n": n, "cost": value, "lp_star": lp_star, "eps": eps,
             "feas": feas}]
    return rows, {"lp_star": lp_star, "eps": eps}


def run_ot_sinkhorn(params, seed):
    rng = np.random.default_rng(seed)
    n = int(params.get("n", 6))
    inst = ot.random_transport_instance(n, rng)
    gamma = float(params.get("gamma_factor", 1e-3)) * float(inst.C.max())
    inst = ot.TransportInstance(C=inst.C, r=inst.r, c=inst.c, gamma=gamma)
    completed = 1
    try:
        ot.sinkhorn_run(inst, max_iter=int(params.get("max_iter", 10 ** 4)),
                        tol=float(params.get("tol", 1e-9)),
                        naive=bool(params.get("naive", False)))
    except (DivergedError, NotConvergedError):
        completed = 0
    return [{"k": 1, "n": n, "completed": completed}], {"gamma": gamma}


def run_sigm_quadratic(params, seed):
    rng = np.random.default_rng(seed)
    n = int(params.get("n", 8))
    L = float(params.get("L", 4.0))
    sigma = float(params.get("sigma", 0.0))
    x_star = rng.normal(size=n)
    f = lambda x: 0.5 * L * float(np.dot(x - x_star, x - x_star))
    g = lambda x: L * (x - x_star)
    oracle = DeltaLOracle(f, g, L=L)
    if sigma > 0:
        oracle = StochasticDeltaLOracle(oracle, sigma, seed=seed)
    prob = sigm.CompositeProblem(oracle=oracle, setup=euclidean_setup(n),
                                 exact_f=f, f_star=0.0)
    R = float(np.linalg.norm(x_star))
    sch = sigm.make_schedule(2.0, L, sigma, R)
    run = sigm.sigm_run(prob, sch, int(params.get("K", 1000)),
                        trace_every=int(params.get("trace_every", 1)))
    return run.trace, {"L": L, "R": R, "sigma": sigma,
                       "C1": sigm.C1, "C2": sigm.C2}


def run_sigm_restart(params, seed):
    rng = np.random.default_rng(seed)
    n = int(params.get("n", 6))
    mu = float(params.get("mu", 1.0))
    L = float(params.get("L", 6.0))
    outer = int(params.get("outer_N", 5))
    x_star = 0.3 * rng.normal(size=n)
    R0 = float(np.linalg.norm(x_star)) + 0.1
    H = np.diag(np.linspace(mu, L, n))
    f = lambda x: 0.5 * float((x - x_star) @ H @ (x - x_star))
    g = lambda x: H @ (x - x_star)
    prob = sigm.CompositeProblem(oracle=DeltaLOracle(f, g, L=L),
                                 setup=euclidean_setup(n), exact_f=f,
                                 f_star=0.0)
    cfg = sigm.RestartConfig(mu=mu, R0=R0, L=L,
                             sigma=float(params.get("sigma", 0.0)))
    run = sigm.sigm_restart_run(prob, cfg, outer)
    dist2 = float(np.dot(run.y - x_star, run.y - x_star))
    rows = [{"k": outer, "dist2": dist2, "calls": run.oracle_calls}]
    return rows, {"R0": R0, "mu": mu, "L": L}


def run_ardd_bench(params, seed):
    rng = np.random.default_rng(seed)
    variant = params.get("variant", "ardd")
    n = int(params.get("n", 6))
    L2 = float(params.get("L2", 2.0))
    eigs = np.linspace(0.5, L2, n)
    H = np.diag(eigs)
    f = lambda x: 0.5 * float(x @ H @ x)
    grad = lambda x: H @ x
    oracle = DirDerivOracle(grad, L2=L2,
                            sigma=float(params.get("sigma", 0.0)),
                            Delta_zeta=float(params.get("Delta_zeta", 0.0)),
                            Delta_eta=float(params.get("Delta_eta", 0.0)),
                            seed=seed)
    x0 = np.ones(n) / math.sqrt(n)
    cfg = ardd.ArddConfig(p=2, n=n, L2=L2)
    theta = 0.5 * float(np.dot(x0, x0))
    N = int(params.get("N", 200))
    if variant == "ardd":
        _, rows = ardd.ardd_run(oracle, cfg, x0, N,
                                m=int(params.get("m", 1)), rng=rng, f=f,
                                f_star=0.0)
    elif variant == "rdd":
        _, rows = ardd.rdd_run(oracle, cfg, x0, N,
                               m=int(params.get("m", 1)), rng=rng, f=f,
                               f_star=0.0)
    elif variant in ("arddsc", "rddsc"):
        cfg = ardd.ArddConfig(p=2, n=n, L2=L2, mu_p=float(eigs[0]),
                              R_p=float(np.linalg.norm(x0)) + 0.1)
        runner = ardd.arddsc_run if variant == "arddsc" else ardd.rddsc_run
        _, rows = runner(oracle, cfg, x0, int(params.get("K", 4)), rng=rng,
                         f=f, f_star=0.0)
    else:
        raise InvalidInputError(f"unknown ardd variant {variant!r}")
    return rows, {"n": n, "L2": L2, "Theta": theta}


def run_pagerank_gfpgm(params, seed):
    rng = np.random.default_rng(seed)
    dataset = pagerank.random_dataset(int(params.get("n_queries", 3)),
                                      int(params.get("n_vertices", 5)), rng)
    _, rows = pagerank.gfpgm_learn(dataset, dataset.phi_hat.copy(),
                                   L=float(params.get("L", 2.0)),
                                   eps=float(params.get("eps", 0.5)), rng=rng)
    step = max(1, len(rows) // int(params.get("n_logs", 50)))
    rows = rows[::step] + ([rows[-1]] if (len(rows) - 1) % step else [])
    return rows, {"m": dataset.m}


def run_pagerank_adaptive(params, seed):
    rng = np.random.default_rng(seed)
    dataset = pagerank.random_dataset(int(params.get("n_queries", 3)),
                                      int(params.get("n_vertices", 5)), rng)
    _, rows = pagerank.adaptive_pg_learn(dataset, dataset.phi_hat.copy(),
                                         L0=float(params.get("L0", 0.01)),
                                         eps=float(params.get("eps", 1e-3)))
    return rows, {"m": dataset.m}


def _matrix_game_spec():
    M = np.array([[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]])
    return games.GameSpec(
        A_x=np.zeros((3, 3)), A_y=np.zeros((3, 3)), B=np.eye(3), C=np.eye(3),
        theta=1.0, x0=np.zeros(3), y0=np.zeros(3),
        P=games.ControlSet("simplex", 3), Q=games.ControlSet("simplex", 3),
        X=games.ControlSet("ball", 3, radius=2.0),
        Y=games.ControlSet("ball", 3, radius=2.0),
        running=games.RunningCost("bilinear", M=M),
        terminal=games.TerminalCost())


def _lq_game_spec(free_terminal):
    term = (games.ControlSet("full", 2) if free_terminal
            else games.ControlSet("ball", 2, radius=3.0))
    return games.GameSpec(
        A_x=np.array([[0.0, 1.0], [0.0, 0.0]]), A_y=0.3 * np.eye(2),
        B=np.eye(2), C=np.eye(2), theta=1.0,
        x0=np.array([1.0, -0.5]), y0=np.array([-0.3, 0.8]),
        P=games.ControlSet("ball", 2, radius=1.0),
        Q=games.ControlSet("ball", 2, radius=1.0),
        X=term, Y=term,
        running=games.RunningCost("quad", au=1.0, av=1.0),
        terminal=games.TerminalCost(ax=1.0, ay=1.0))


def run_games_sda(params, seed):
    kind = params.get("instance", "matrix")
    if kind == "matrix":
        spec = _matrix_game_spec()
        game = games.discretize(spec, 1, integrator="euler")
        gamma_step = float(params.get("gamma_step", 3.0))
    elif kind == "lq":
        spec = _lq_game_spec(free_terminal=False)
        game = games.discretize(spec, int(params.get("T", 16)))
        gamma_step = float(params.get("gamma_step", 1.0))
    else:
        raise InvalidInputError(f"unknown game instance {kind!r}")
    _, rows = games.sda_run(game, spec, gamma_step=gamma_step,
                            K=int(params.get("K", 2000)),
                            n_logs=int(params.get("n_logs", 10)))
    return rows, {}


def run_games_dualext(params, seed):
    spec = _lq_game_spec(free_terminal=True)
    game = games.discretize(spec, int(params.get("T", 16)))
    _, rows = games.dual_extrapolation_run(game, spec,
                                           K=int(params.get("K", 2000)),
                                           n_logs=int(params.get("n_logs", 10)))
    return rows, {"L": games.dual_extrapolation_constant(game, spec)}


def run_barycenter(params, seed):
    rng = np.random.default_rng(int(params.get("instance_seed", 42)))
    m = int(params.get("m", 3))
    gamma = float(params.get("gamma", 0.2))
    pools = [rng.uniform(0, 1, size=(int(params.get("pool", 4)), 2))
             for _ in range(m)]
    measures = [barycenter.pool_measure(p, gamma) for p in pools]
    graph = barycenter.laplacian([(i, i + 1) for i in range(m - 1)], m)
    res = barycenter.barycenter_run(graph, measures, gamma,
                                    eps=float(params.get("eps", 0.1)),
                                    R_estimate=float(params.get("R", 1.0)),
                                    rng=seed,
                                    N=params.get("N"))
    return res.trace, {"R": res.R, "lambda_max": graph.lambda_max}


ALGORITHMS = {
    "apdagd-hyperplane": run_apdagd_hyperplane,
    "apdsgm-hyperplane": run_apdsgm_hyperplane,
    "pdugdsdr-hyperplane": run_pdugdsdr_hyperplane,
    "ot-apdagd": run_ot_apdagd,
    "ot-sinkhorn": run_ot_sinkhorn,
    "sigm-quadratic": run_sigm_quadratic,
    "sigm-restart": run_sigm_restart,
    "ardd-bench": run_ardd_bench,
    "pagerank-gfpgm": run_pagerank_gfpgm,
    "pagerank-adaptive": run_pagerank_adaptive,
    "games-sda": run_games_sda,
    "games-dualext": run_games_dualext,
    "barycenter": run_barycenter,
}


def list_algorithms():
    return sorted(ALGORITHMS)


# ---------------------------------------------------------------------------
# experiment execution


def _validate_config(config):
    if "algorithm" not in config:
        raise InvalidInputError("config missing 'algorithm'")
    if config["algorithm"] not in ALGORITHMS:
        raise InvalidInputError(f"unknown algorithm {config['algorithm']!r}")
    seeds = config.get("seeds", [])
    if not seeds:
        raise InvalidInputError("config needs a non-empty 'seeds' list")
    for bound in config.get("bounds", []):
        if "metric" not in bound or "expr" not in bound:
            raise InvalidInputError("bound specs need 'metric' and 'expr'")


def _aggregate(per_seed_rows):
    """Seed-mean/std per row index over the common prefix and the common
    numeric columns, in fixed seed order."""
    length = min(len(rows) for rows in per_seed_rows)
    keys = None
    for rows in per_seed_rows:
        numeric = [k for k, v in rows[0].items()
                   if isinstance(v, (int, float)) and v is not None]
        keys = numeric if keys is None else [k for k in keys if k in numeric]
    out = []
    for idx in range(length):
        row = {}
        for key in keys:
            vals = np.array([float(rows[idx][key]) for rows in per_seed_rows])
            row[key] = float(vals.mean())
            row[key + "_std"] = float(vals.std())
        out.append(row)
    return out


def run_experiment(config, output_root):
    """Execute a config over its seeds; returns the report dict.

    Writes <name>_seed<i>.csv per seed, <name>_aggregate.csv and
    <name>_report.json under ``output_root``.  Per-seed solver errors are
    captured and recorded; bounds are checked per seed (each with its own
    instance constants) and on the seed-averaged aggregate when
    ``"scope": "aggregate"`` is set.
    """
    _validate_config(config)
    name = config.get("name", config["algorithm"])
    runner = ALGORITHMS[config["algorithm"]]
    params = config.get("params", {})
    os.makedirs(output_root, exist_ok=True)

    per_seed, constants, failures = [], [], []
    digests = {}
    for seed in config["seeds"]:
        try:
            rows, consts = runner(params, int(seed))
        except AccoptError as exc:
            failures.append({"seed": int(seed), "error": str(exc)})
            continue
        path = os.path.join(output_root, f"{name}_seed{seed}.csv")
        write_trace(path, rows)
        digests[str(seed)] = trace_digest(rows)
        per_seed.append(rows)
        constants.append(consts)

    if not per_seed:
        raise InvalidInputError(
            "all seeds failed: " + "; ".join(f["error"] for f in failures))

    aggregate = _aggregate(per_seed)
    write_trace(os.path.join(output_root, f"{name}_aggregate.csv"), aggregate)

    verdicts = []
    for bound in config.get("bounds", []):
        if bound.get("scope", "per-seed") == "aggregate":
            verdicts.append(check_bound(aggregate, bound, constants[0]))
        else:
            margin, checked = -math.inf, 0
            for rows, consts in zip(per_seed, constants):
                v = check_bound(rows, bound, consts)
                margin = max(margin, v["max_violation"])
                checked += v["rows_checked"]
            verdicts.append({"name": bound.get("name", bound["metric"]),
                             "metric": bound["metric"], "expr": bound["expr"],
                             "passed": margin <= 0.0, "max_violation": margin,
                             "rows_checked": checked})

    report = {
        "name": name,
        "algorithm": config["algorithm"],
        "params": params,
        "seeds": [int(s) for s in config["seeds"]],
        "failures": failures,
        "trace_digests": digests,
        "verdicts": verdicts,
        "passed": bool(all(v["passed"] for v in verdicts) and not failures),
    }
    write_json(os.path.join(output_root, f"{name}_report.json"), report)
    return report
