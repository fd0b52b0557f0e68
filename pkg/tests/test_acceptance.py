"""Acceptance criteria, one test per criterion (run with ``pytest -m acceptance``)."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from domcert import dissipativity as ds
from domcert import dominance as dm
from domcert import interconnect as ic
from domcert import models_sim as ms
from domcert import sdp
from domcert.errors import NotSatisfiable
from domcert.matrix_core import inertia_of

pytestmark = pytest.mark.acceptance

PUBLISHED_GAINS = {"x_p": 0.5636, "x_v": 0.5468}
_GAMMA = {}


def _lyap_worst(P, family, lam, eps=0.01):
    return max(sdp.verify_solution(P, dm.lyapunov_problem(family, lam, eps)))


@pytest.fixture(scope="module", autouse=True)
def warm_solver():
    # first cvxpy call pays one-off import and canonicalization costs
    dm.solve_dominance(dm.VertexFamily([[[-1.0]]]), 0.0)


def _min_gain(output):
    if output not in _GAMMA:
        fam = ms.open_family(ms.builtin("mass_spring_tanh_PI"), "v", output)
        _GAMMA[output] = ds.min_gain(fam, 2, 2.0, 0.01)
    return _GAMMA[output]


def test_criterion_1_convex_duffing(timer):
    fam = dm.VertexFamily([[[0, 1], [-1, -5]], [[0, 1], [-5, -5]]])
    with timer() as t:
        cert = dm.solve_dominance(fam, 0.0, 0.01)
    print(f"criterion 1: p={cert.p} margin={cert.margin:.3g} time={t.elapsed:.3f}s")
    assert cert.p == 0 and tuple(inertia_of(cert.P)) == (0, 0, 2)
    assert t.elapsed < 1.0


def test_criterion_2_double_well(timer):
    fam = dm.VertexFamily([[[0, 1], [2, -5]], [[0, 1], [-5, -5]]])
    with timer() as t:
        cert = dm.solve_dominance(fam, 2.0, 0.01)
    print(f"criterion 2: p={cert.p} time={t.elapsed:.3f}s")
    assert cert.p == 1
    assert t.elapsed < 1.0


def test_criterion_3_motor_and_pi(timer):
    with timer() as t1:
        c1 = dm.solve_dominance(ms.jacobian_vertices(ms.builtin("duffing_dc", {"L": 0.1})), 2.0)
    with timer() as t2:
        c2 = dm.solve_dominance(
            ms.jacobian_vertices(ms.builtin("duffing_dc_pi", {"k_P": 1.0, "k_I": 5.0})), 2.0)
    print(f"criterion 3: motor p={c1.p} ({t1.elapsed:.3f}s), PI p={c2.p} ({t2.elapsed:.3f}s)")
    assert c1.p == 1 and c2.p == 2
    assert t1.elapsed < 2.0 and t2.elapsed < 2.0


def test_criterion_4_published_storages():
    dw = ms.builtin("duffing")
    duff3 = ms.builtin("duffing", {"dalpha_lo": -3.0, "dalpha_hi": 3.0})
    loop = ms.builtin("mass_spring_tanh_PI")
    cases = [
        ("convex", [[0.8696, 0.1482], [0.1482, 0.1304]], (0, 0, 2),
         dm.lyapunov_problem(dm.VertexFamily([[[0, 1], [-1, -5]], [[0, 1], [-5, -5]]]), 0.0, 0.01)),
        ("double well", [[-5.1987, 3.6260], [3.6260, 6.1987]], (1, 0, 1),
         dm.lyapunov_problem(ms.jacobian_vertices(dw), 2.0, 0.01)),
        ("motor", [[-3.0942, 0.8985, -0.5355], [0.8985, 3.3771, 0.1935],
                   [-0.5355, 0.1935, 0.7171]], (1, 0, 2),
         dm.lyapunov_problem(ms.jacobian_vertices(ms.builtin("duffing_dc")), 2.0, 0.01)),
        ("passive mass", [[-2.0, -1.0], [-1.0, 0.0]], (1, 0, 1),
         ds.dissipativity_problem(ms.open_family(duff3, "u", "neg_x_p"),
                                  ds.passivity_supply(1), 2.0, 0.01)),
        ("gain x_p", [[-0.5522, 0.0498, -0.0171], [0.0498, 1.4946, 0.3068],
                      [-0.0171, 0.3068, 0.0576]], (2, 0, 1),
         ds.dissipativity_problem(ms.open_family(loop, "v", "x_p"),
                                  ds.gain_supply(1, 1, 0.5636), 2.0, 0.01)),
        ("gain x_v", [[-0.2859, -0.0028, -0.0131], [-0.0028, 1.2328, 0.2977],
                      [-0.0131, 0.2977, 0.0532]], (2, 0, 1),
         ds.dissipativity_problem(ms.open_family(loop, "v", "x_v"),
                                  ds.gain_supply(1, 1, 0.5468), 2.0, 0.01)),
    ]
    failures = []
    for name, P, inertia, prob in cases:
        worst = max(sdp.verify_solution(P, prob))
        got = tuple(inertia_of(P))
        print(f"criterion 4: {name}: worst={worst:.4g} inertia={got}")
        if worst > 0.05 or got != inertia:
            failures.append(name)
    assert not failures


@pytest.mark.parametrize("output", ["x_p", "x_v"])
def test_criterion_5_differential_gains(output, timer):
    with timer() as t:
        gamma, cert = _min_gain(output)
    target = PUBLISHED_GAINS[output]
    rel = abs(gamma - target) / target
    print(f"criterion 5 ({output}): gamma*={gamma:.4f} published={target} rel.err={rel:.1%} "
          f"time={t.elapsed:.2f}s")
    assert cert.p == 2
    assert t.elapsed < 30.0
    assert rel <= 0.10


def test_criterion_6_spectral_interval():
    lo, hi = (5 - math.sqrt(5)) / 2, (5 + math.sqrt(5)) / 2
    step = 0.01
    grid = np.round(np.arange(0.0, 5.0 + step / 2, step), 10)
    rep = dm.spectral_scan(ms.box_samples(ms.builtin("duffing"), 41), grid)
    bad = []
    for lam, split in zip(rep.lambda_grid, rep.per_lambda):
        inside = lo + step <= lam <= hi - step
        outside = lam <= lo - step or lam >= hi + step
        if (inside and split != 1) or (outside and split == 1):
            bad.append(lam)
    print(f"criterion 6: intervals={rep.intervals} closed form=({lo:.4f}, {hi:.4f})")
    assert not bad


SIMULATIONS = [
    ("duffing_dc", {"potential": "double_well", "V": 0.0}, [0.05, 0.0, 0.0], 200.0, 0.3,
     "fixed_point"),
    ("duffing_dc_pi", {"k_P": 1.0, "k_I": 5.0, "r": 0.0}, [0.05, 0.0, 0.0, 0.0], 200.0, 0.25,
     "periodic_orbit"),
    ("mass_spring_tanh_P", {}, [1.0, 0.0], 100.0, 0.5, "fixed_point"),
    ("mass_spring_tanh_PI", {"k_P": 0.0}, [1.0, 0.0, 0.0], 300.0, 0.25, "fixed_point"),
]


@pytest.mark.parametrize("name,params,x0,T,tail,kind", SIMULATIONS,
                         ids=[s[0] + ("_linear" if s[1].get("k_P") == 0 else "") for s in SIMULATIONS])
def test_criterion_7_simulations(name, params, x0, T, tail, kind, timer):
    with timer() as t:
        tr = ms.integrate(ms.builtin(name, params), x0, 1e-3, T)
        att = ms.classify_attractor(tr, tail)
    print(f"criterion 7 ({name}): {att.to_dict()} time={t.elapsed:.2f}s")
    assert att.kind == kind
    assert t.elapsed < 10.0
    if name == "mass_spring_tanh_P":
        root = brentq(lambda x: math.tanh(2 * x) - x, 0.5, 1.5)
        assert abs(abs(att.point[0]) - root) <= 1e-3


def test_criterion_8_composition():
    f1 = ms.open_family(ms.builtin("duffing", {"dalpha_lo": -3.0, "dalpha_hi": 3.0}), "u", "neg_x_p")
    f2 = ms.open_family(ms.builtin("pi_controller", {"k_I": -1.0}), "u_bar", "y_bar")
    c1 = ds.solve_dissipativity(f1, ds.passivity_supply(1), 2.0)
    c2 = ds.solve_dissipativity(f2, ds.passivity_supply(1), 2.0)
    H = np.array([[0.0, 1.0], [-1.0, 0.0]])
    closed = ic.build_closed_loop_family(f1, f2, H)
    cert = ic.aggregate_certificates(c1, c2, H, closed)
    prob = dm.lyapunov_problem(closed, 2.0, cert.epsilon)
    worst = max(sdp.verify_solution(cert.P.entries, prob))
    tol = 1e-7 * prob.scale()
    print(f"criterion 8: p1={c1.p} p2={c2.p} aggregate p={cert.p} worst={worst:.4g} tol={tol:.3g}")
    assert (c1.p, c2.p, cert.p) == (1, 1, 2)
    assert worst <= tol
    assert np.all(cert.P.entries[:2, 2:] == 0)


def test_criterion_9_property_suites():
    rng = np.random.default_rng(20240601)
    model = ms.builtin("duffing")
    fam = ms.jacobian_vertices(model)
    cert = dm.solve_dominance(fam, 2.0)
    P = cert.P.entries

    # homogeneity under P-scaling
    for c in rng.uniform(0.1, 10.0, 10):
        prob = dm.lyapunov_problem(fam, 2.0, c * cert.epsilon)
        assert max(sdp.verify_solution(c * P, prob)) <= 1e-7 * c * prob.scale()
        assert inertia_of(c * P) == inertia_of(P)

    # incremental decay on 20 trajectory pairs
    worst_decay = -np.inf
    for _ in range(20):
        x0, y0 = rng.uniform(-3, 3, 2), rng.uniform(-3, 3, 2)
        res = ms.check_incremental_decay(model, P, 2.0, x0, y0, T=5.0)
        worst_decay = max(worst_decay, res.worst)
        assert res.verdict

    # cone invariance on 20 starts
    worst_cone = -np.inf
    starts = 0
    while starts < 20:
        dx0 = rng.normal(size=2)
        if dx0 @ P @ dx0 > 0:
            continue
        starts += 1
        res = ms.cone_invariance_check(model, P, rng.uniform(-3, 3, 2), dx0, T=5.0)
        worst_cone = max(worst_cone, res.worst)
        assert res.verdict

    # small-gain truth table
    tol = 1e-9
    gammas = np.geomspace(0.2, 5.0, 10)
    for g1 in gammas:
        for g2 in gammas:
            ok = g1 * g2 <= 1 + tol
            try:
                ic.small_gain_check(g1, g2, tol)
                assert ok
            except NotSatisfiable:
                assert not ok

    # block formula against direct substitution on 50 random supply triples
    for _ in range(50):
        sups = []
        for _ in range(2):
            Q = rng.normal(size=(1, 1))
            R = rng.normal(size=(1, 1))
            sups.append(ds.SupplyRate(Q + Q.T, rng.normal(size=(1, 1)), R + R.T))
        H = rng.normal(size=(2, 2))
        y, v = rng.normal(size=2), rng.normal(size=2)
        u = H @ y + v
        direct = sups[0](y[:1], u[:1]) + sups[1](y[1:], u[1:])
        assert ic.compose_supplies(sups, H).supply(y, v) == pytest.approx(direct, rel=1e-9, abs=1e-12)
    print(f"criterion 9: worst decay step {worst_decay:.3g}, worst cone ratio {worst_cone:.3g}")


def test_criterion_10_small_gain_robustness(timer):
    gamma, _ = _min_gain("x_p")
    # the softening sign keeps the origin unstable; see the decisions ledger
    kappa = -0.9 / gamma
    model = ms.builtin("mass_spring_tanh_PI_spring", {"kappa": kappa})
    with timer() as t:
        cert = dm.solve_dominance(ms.jacobian_vertices(model), 2.0)
        tr = ms.integrate(model, [1.0, 0.0, 0.0], 1e-3, 100.0)
        att = ms.classify_attractor(tr)
    print(f"criterion 10: gamma={gamma:.4f} kappa={kappa:.4f} p={cert.p} attractor={att.kind} "
          f"time={t.elapsed:.2f}s")
    assert cert.p == 2
    assert att.kind == "periodic_orbit"
