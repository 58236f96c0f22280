"""Acceptance criteria 1-8.

Each test records one PASS/FAIL line (shown in the terminal summary) and
then asserts.  Replicated runs use a fixed master seed chosen before any
results were seen.
"""

import time

import numpy as np
import pytest

from dagsobol.basis import Normal, Uniform, group_basis, min_observations, tensor_basis
from dagsobol.cli import main
from dagsobol.dag import build_dag
from dagsobol.engines import (
    EngineConfig,
    fit_naive,
    fit_network,
    fit_sparse_network,
    replicate,
    simulator,
)
from dagsobol.errors import Underdetermined
from dagsobol.processes import ProcessSpec, builtin_injection_molding, builtin_welding, simulate
from dagsobol.sobol import sobol_from_pce, sobol_pick_freeze

from conftest import NET13_EDGES, net13_spec, linear_net13_spec, linear_indices

SEED = 2024
REPS = 50
TOL = 0.02

WELDING_INPUTS = ("h", "g", "t", "e", "l", "L", "Cp", "Tf", "Ti", "rho", "H")
WELDING_SN_FIRST = (0.280, 0.234, 0.225, 0.146, 0.108, 1.94e-3, 9.77e-4, 7.55e-5, 0, 0, 0)
WELDING_SN_TOTAL = (0.281, 0.235, 0.226, 0.148, 0.112, 1.95e-3, 9.77e-4, 7.55e-5, 0, 0, 0)
WELDING_NAIVE_FIRST = (0.278, 0.232, 0.229, 0.145, 0.107, 1.96e-3, 9.69e-4, 2.75e-4, 8.28e-6, 7.16e-6, 3.31e-10)

IM_INPUTS = ("Tinj", "Tej", "rho", "Tpol", "Cp", "eps", "Pinj")
IM_SN_FIRST = (0.478, 0.261, 0.226, 0.032)
IM_NAIVE_FIRST = (0.477, 0.262, 0.226, 0.0321, 2.61e-3, 7.76e-9, 4.77e-14)


def _by_name(report, names):
    pos = {v: i for i, v in enumerate(report.inputs)}
    return np.array([report.first[pos[v]] for v in names]), np.array([report.total[pos[v]] for v in names])


@pytest.fixture(scope="module")
def welding_sn():
    spec = builtin_welding()
    t0 = time.perf_counter()
    rep = replicate("sn", spec.dag, "E", spec.input_dists, EngineConfig.uniform(3, gamma=1e-3),
                    REPS, simulator(spec, 100), seed=SEED)
    return rep, time.perf_counter() - t0


def test_criterion_1_welding_sn_reproduction(welding_sn, criterion):
    rep, elapsed = welding_sn
    first, total = _by_name(rep, WELDING_INPUTS)
    err_f = np.max(np.abs(first - WELDING_SN_FIRST))
    err_t = np.max(np.abs(total - WELDING_SN_TOTAL))
    ok = err_f <= TOL and err_t <= TOL and elapsed < 60 and rep.reps == REPS
    criterion(1, ok, f"max|dS|={err_f:.4f} max|dST|={err_t:.4f} runtime={elapsed:.1f}s "
                     f"S(h,g,t,e,l)={np.round(first[:5], 3).tolist()}")
    assert ok


def test_criterion_2_welding_sparsity(welding_sn, criterion):
    rep, _ = welding_sn
    sizes = rep.extra["support_per_rep"]
    ok = len(sizes) == REPS and max(sizes) <= 20
    criterion(2, ok, f"support per replication: median={int(np.median(sizes))} max={max(sizes)} "
                     f"(>20 in {sum(s > 20 for s in sizes)} of {len(sizes)})")
    assert ok


def test_criterion_3_injection_molding_sn(criterion):
    spec = builtin_injection_molding()
    rep = replicate("sn", spec.dag, "E_reset", spec.input_dists, EngineConfig.uniform(4, gamma=1e-3),
                    REPS, simulator(spec, 200), seed=SEED)
    first, _ = _by_name(rep, IM_INPUTS)
    err = np.max(np.abs(first[:4] - IM_SN_FIRST))
    zeros = first[5] == 0.0 and first[6] == 0.0 and rep.first_sd[list(rep.inputs).index("eps")] == 0.0
    sizes = rep.extra["support_per_rep"]
    ok = err <= TOL and zeros and max(sizes) <= 15 and rep.reps == REPS
    criterion(3, ok, f"max|dS|={err:.4f} S_eps={first[5]} S_Pinj={first[6]} max support={max(sizes)} "
                     f"calibration: {spec.constants}")
    assert ok


def test_criterion_4_naive_agreement(criterion):
    out = []
    ok = True
    for spec, out_node, p, names, ref in (
        (builtin_welding(), "E", 3, WELDING_INPUTS, WELDING_NAIVE_FIRST),
        (builtin_injection_molding(), "E_reset", 4, IM_INPUTS, IM_NAIVE_FIRST),
    ):
        rep = replicate("naive", spec.dag, out_node, spec.input_dists, EngineConfig.uniform(p, mode="dense"),
                        REPS, simulator(spec, 500), seed=SEED)
        first, _ = _by_name(rep, names)
        err = float(np.max(np.abs(first - ref)))
        ok &= err <= TOL and rep.reps == REPS
        out.append(f"{spec.name} max|dS|={err:.4f}")
    criterion(4, ok, "; ".join(out))
    assert ok


def test_criterion_5_sample_size_bounds(criterion, capsys):
    got = [min_observations(11, 3), min_observations(6, 3), min_observations(7, 4), min_observations(5, 4)]
    capsys.readouterr()
    rc_w = main(["minobs", "--builtin", "welding"])
    text_w = capsys.readouterr().out
    rc_i = main(["minobs", "--builtin", "injection_molding"])
    text_i = capsys.readouterr().out

    def rows(text):
        return {ln.split()[0]: int(ln.split()[1]) for ln in text.splitlines() if ln.split()[:1] in (["naive"], ["network"])}

    cli = [rows(text_w)["naive"], rows(text_w)["network"], rows(text_i)["naive"], rows(text_i)["network"]]
    ok = got == [364, 84, 330, 126] and cli == got and rc_w == rc_i == 0
    criterion(5, ok, f"min_observations={got} cmd_minobs={cli}")
    assert ok


def test_criterion_6_mse_ordering(welding_sn, criterion):
    spec = builtin_welding()
    ref = sobol_pick_freeze(spec.model(), spec.input_dists, 100_000, rng=np.random.SeedSequence(SEED))

    def mse(rep):
        # mean over replications and inputs of the squared first-order error
        k = (rep.reps - 1) / rep.reps
        return float(np.mean((rep.first - ref.first) ** 2 + k * rep.first_sd**2))

    sn = mse(welding_sn[0])
    try:
        replicate("naive", spec.dag, "E", spec.input_dists, EngineConfig.uniform(3, mode="dense"),
                  REPS, simulator(spec, 100), seed=SEED)
        dense_fails = False
    except Underdetermined:
        dense_fails = True
    naive_sparse = mse(replicate("naive-sparse", spec.dag, "E", spec.input_dists, EngineConfig.uniform(3),
                                 REPS, simulator(spec, 100), seed=SEED))
    ok = sn <= 1e-4 and (dense_fails or naive_sparse > sn)
    criterion(6, ok, f"SN MSE={sn:.3e}; dense naive underdetermined={dense_fails}; "
                     f"sparse naive MSE={naive_sparse:.3e} ({'larger' if naive_sparse > sn else 'not larger'})")
    assert ok


def _gram_checks():
    worst = 0.0
    for dist in (Normal(0, 1), Normal(-4, 3), Uniform(-1, 1), Uniform(10, 12)):
        if isinstance(dist, Normal):
            z, w = np.polynomial.hermite_e.hermegauss(40)
            w = w / np.sqrt(2 * np.pi)
            x = {"x1": dist.mean + dist.stddev * z}
        else:
            z, w = np.polynomial.legendre.leggauss(40)
            w = w / 2
            x = {"x1": dist.loc + dist.scale * z}
        F = tensor_basis([dist], 8).evaluate(x)
        worst = max(worst, np.max(np.abs(F.T @ (w[:, None] * F) - np.eye(9))))
    # empirical groups are orthonormal under their own sample
    rng = np.random.default_rng(SEED)
    a = rng.gamma(2.0, size=400)
    b = a + rng.normal(size=400)
    F = group_basis({"a": a, "b": b}, 3).evaluate({"a": a, "b": b})
    worst = max(worst, np.max(np.abs(F.T @ F / 400 - np.eye(F.shape[1]))))
    return worst


def _bounds_check():
    rng = np.random.default_rng(SEED)
    b = tensor_basis({"a": Normal(0, 1), "b": Uniform(-1, 1), "c": Normal(1, 2)}, 3)
    for _ in range(200):
        r = sobol_from_pce(rng.normal(size=b.size) * rng.uniform(0, 3, size=b.size), b)
        if not (np.all(r.first >= 0) and np.all(r.total <= 1 + 1e-12) and np.all(r.first <= r.total + 1e-12)
                and r.first.sum() <= 1 + 1e-12):
            return False
    return True


def _additive_gap():
    dag = build_dag(["x1", "x2", "x3", "y"], [("x1", "y"), ("x2", "y"), ("x3", "y")])
    spec = ProcessSpec(dag, {"x1": Normal(0, 1), "x2": Uniform(-1, 1), "x3": Normal(3, 0.5)},
                       {"y": "x1 + 2 * x2 ^ 3 - 0.5 * x3 ^ 2"})
    data = simulate(spec, 300, seed=SEED)
    gap = 0.0
    for fn, cfg in ((fit_naive, EngineConfig.uniform(3, mode="dense")), (fit_network, EngineConfig(degrees=(3,))),
                    (fit_sparse_network, EngineConfig(degrees=(3,)))):
        r = fn(dag, "y", data, spec.input_dists, cfg)[1]
        gap = max(gap, float(np.max(np.abs(r.total - r.first))))
    return gap


def _linear_gaussian_error():
    rng = np.random.default_rng(SEED)
    coefs = {e: float(rng.uniform(0.3, 1.5) * rng.choice([-1, 1])) for e in NET13_EDGES}
    sds = {v: float(rng.uniform(0.5, 3.0)) for v in ("v1", "v3", "v4", "v5", "v6")}
    spec = linear_net13_spec(coefs, sds)
    data = simulate(spec, 100, seed=SEED)
    truth = linear_indices(coefs, sds)
    err = 0.0
    for fn, cfg in ((fit_network, EngineConfig(degrees=(1,))), (fit_naive, EngineConfig.uniform(1, mode="dense"))):
        r = fn(spec.dag, "v13", data, spec.input_dists, cfg)[1]
        exp = np.array([truth[v] for v in r.inputs])
        err = max(err, float(np.max(np.abs(r.first - exp))), float(np.max(np.abs(r.total - exp))))
    return err


def _engine_disagreement():
    spec = net13_spec()
    data = simulate(spec, 2000, seed=SEED)
    reps = [
        fit_naive(spec.dag, "v13", data, spec.input_dists, EngineConfig.uniform(3, mode="dense"))[1],
        fit_network(spec.dag, "v13", data, spec.input_dists, EngineConfig(degrees=(2,)))[1],
        fit_sparse_network(spec.dag, "v13", data, spec.input_dists, EngineConfig(degrees=(2,)))[1],
    ]
    worst = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            worst = max(worst, float(np.max(np.abs(reps[i].first - reps[j].first))),
                        float(np.max(np.abs(reps[i].total - reps[j].total))))
    return worst


def _pick_freeze_slope():
    dists = {"x1": Normal(0, 1), "x2": Normal(0, 1)}
    ns = np.array([1_000, 10_000, 100_000])
    rmse = []
    for n in ns:
        errs = [sobol_pick_freeze(lambda x: x["x1"] + x["x2"], dists, int(n),
                                  np.random.SeedSequence([SEED, int(n), k])).first[0] - 0.5 for k in range(30)]
        rmse.append(np.sqrt(np.mean(np.square(errs))))
    return float(-np.polyfit(np.log(ns), np.log(rmse), 1)[0])


def test_criterion_7_property_suite(criterion):
    gram = _gram_checks()
    bounds = _bounds_check()
    additive = _additive_gap()
    linear = _linear_gaussian_error()
    agree = _engine_disagreement()
    slope = _pick_freeze_slope()
    ok = gram <= 1e-8 and bounds and additive <= 1e-8 and linear <= 1e-6 and agree <= TOL and 0.35 <= slope <= 0.65
    criterion(7, ok, f"gram={gram:.1e} bounds={bounds} |ST-S| additive={additive:.1e} "
                     f"linear-Gaussian err={linear:.1e} engine gap={agree:.4f} pick-freeze slope={slope:.3f}")
    assert ok


def smooth_process():
    dag = build_dag(["x1", "x2", "x3", "u", "w", "y"],
                    [("x1", "u"), ("x2", "u"), ("x2", "w"), ("x3", "w"), ("u", "y"), ("w", "y")])
    funcs = {
        "u": lambda e: np.exp(0.4 * e["x1"]) + np.sin(e["x2"]),
        "w": lambda e: np.cos(e["x3"]) * (1 + 0.3 * e["x2"]),
        "y": lambda e: np.sin(e["u"]) + e["w"] + 0.2 * e["u"] * e["w"],
    }
    return ProcessSpec(dag, {"x1": Normal(0, 1), "x2": Uniform(-1, 1), "x3": Normal(0, 0.8)}, funcs)


def test_criterion_8_convergence(criterion):
    spec = smooth_process()
    train = simulate(spec, 5000, seed=SEED)
    test = simulate(spec, 5000, seed=SEED + 1)
    out, ok = [], True
    for name, fn in (("sn", fit_sparse_network), ("network", fit_network)):
        rmse = []
        for p in (1, 2, 3):
            model, _ = fn(spec.dag, "y", train, spec.input_dists, EngineConfig(degrees=(p,)))
            rmse.append(float(np.sqrt(np.mean((model.predict(test.columns) - test["y"]) ** 2))))
        ok &= all(b <= a for a, b in zip(rmse, rmse[1:]))
        out.append(f"{name} RMSE p=1,2,3: " + ", ".join(f"{r:.4f}" for r in rmse))
    criterion(8, ok, "; ".join(out))
    assert ok
