import numpy as np
import pytest

from devport import (
    FiniteProbSpace,
    MarketModel,
    build_cvar,
    build_custom,
    build_mad,
    build_mixed_cvar,
    concave_order_leq,
    evaluate,
    inverse_solution_set,
    law_invariant_selector,
    mix,
    risk_identifiers,
    robust_mu,
    robust_selector,
    scale,
    solve_forward,
    verify_dichotomy,
)
from devport.errors import ValidationError, ZeroRiskPortfolio


def _mad_market():
    space = FiniteProbSpace.uniform(3)
    return MarketModel(
        np.array([[-1.0, -1.0, 2.0], [-2.0, 1.0, 1.0]]),
        np.array([0.4, 0.6]),
        0.0,
        0.5,
        space,
    )


def _cvar_market():
    space = FiniteProbSpace.uniform(3)
    return MarketModel(
        np.array([[-1.0, 0.0, 1.0], [0.0, -1.0, 1.0]]),
        np.array([1 / 3, 2 / 3]),
        0.0,
        0.5,
        space,
    )


def test_inverse_mad_golden():
    market = _mad_market()
    env = build_mad(FiniteProbSpace.uniform(3))
    inv = inverse_solution_set(market, env, [0.5, 0.5], 0.5)
    got = {tuple(np.round(v, 9)) for v in inv.polytope.vertices}
    assert got == {
        (round(1 / 3, 9), round(2 / 3, 9)),
        (round(2 / 3, 9), round(1 / 3, 9)),
    }
    assert inv.delta_scale == pytest.approx(0.5, abs=1e-12)


def test_inverse_cvar_golden():
    market = _cvar_market()
    env = build_cvar(FiniteProbSpace.uniform(3), 0.05)
    inv = inverse_solution_set(market, env, [0.5, 0.5], 0.5)
    got = {tuple(np.round(v, 9)) for v in inv.polytope.vertices}
    assert got == {(0.0, 1.0), (1.0, 0.0)}


def test_inverse_singleton():
    market = _cvar_market()
    env = build_cvar(FiniteProbSpace.uniform(3), 0.05)
    inv = inverse_solution_set(market, env, [0.2, 0.8], 0.4)
    assert inv.polytope.n_vertices == 1
    assert np.allclose(inv.polytope.vertices[0], [0.0, 0.5], atol=1e-9)
    assert len(inv.active_indices) == 1


def test_inverse_rejects_zero_risk():
    space = FiniteProbSpace.uniform(3)
    market = _cvar_market()
    # The envelope {1} sees no deviation anywhere.
    env = build_custom(space, [[1.0, 1.0, 1.0]])
    with pytest.raises(ZeroRiskPortfolio):
        inverse_solution_set(market, env, [0.5, 0.5], 0.5)


def test_inverse_rejects_nonpositive_target():
    market = _mad_market()
    env = build_mad(FiniteProbSpace.uniform(3))
    with pytest.raises(ValidationError):
        inverse_solution_set(market, env, [0.5, 0.5], 0.0)


def test_robust_selector_mad_formula():
    space = FiniteProbSpace.uniform(3)
    env = build_mad(space)
    q = robust_selector(env, np.array([-1.5, 0.0, 1.5])).values
    # Z = (-1, 0, 1), E[Z] = 0, Q = 1 - Z.
    assert np.allclose(q, [2.0, 1.0, 0.0], atol=1e-12)


def test_robust_selector_cvar_equalized():
    space = FiniteProbSpace.uniform(3)
    env = build_cvar(space, 0.05)
    q = robust_selector(env, np.array([-0.5, -0.5, 1.0])).values
    assert np.allclose(q, [1.5, 1.5, 0.0], atol=1e-12)


def test_robust_selector_matches_steiner_for_custom():
    # Identical polytope, declared "custom": the generic Steiner path must
    # agree with the CVaR closed form.
    rng = np.random.default_rng(31)
    space = FiniteProbSpace.uniform(4)
    env = build_cvar(space, 0.5)
    custom = build_custom(space, env.generators)
    for _ in range(10):
        x = rng.normal(size=4)
        q_cf = robust_selector(env, x).values
        q_st = robust_selector(custom, x).values
        assert np.allclose(q_cf, q_st, atol=1e-7)


def test_robust_selector_scale_and_mix():
    space = FiniteProbSpace.uniform(3)
    x = np.array([-1.0, 0.25, 0.75])
    mad = build_mad(space)
    half = scale(mad, 0.5)
    q_mad = robust_selector(mad, x).values
    q_half = robust_selector(half, x).values
    assert np.allclose(q_half, 0.5 + 0.5 * q_mad, atol=1e-12)
    cvar = build_cvar(space, 1 / 3)
    blend = mix([mad, cvar], [0.3, 0.4])
    q_blend = robust_selector(blend, x).values
    expected = 0.3 * q_mad + 0.4 * robust_selector(cvar, x).values + 0.3
    assert np.allclose(q_blend, expected, atol=1e-12)


def test_robust_selector_mixed_cvar():
    space = FiniteProbSpace.uniform(4)
    env = build_mixed_cvar(space, [0.25, 0.75], [0.5, 0.5])
    x = np.array([-2.0, -1.0, 0.5, 2.5])
    q = robust_selector(env, x).values
    q1 = robust_selector(build_cvar(space, 0.25), x).values
    q2 = robust_selector(build_cvar(space, 0.75), x).values
    assert np.allclose(q, 0.5 * q1 + 0.5 * q2, atol=1e-12)


def test_selector_is_identifier_random():
    rng = np.random.default_rng(37)
    space = FiniteProbSpace.uniform(5)
    envs = [build_mad(space), build_cvar(space, 0.4), scale(build_mad(space), 0.7)]
    for env in envs:
        for _ in range(15):
            x = rng.normal(size=5)
            q = robust_selector(env, x).values
            val = float(np.mean(x)) + float(np.mean(-x * q))
            assert val == pytest.approx(evaluate(env, x), abs=1e-8)


def test_law_invariant_selector_constant_on_ties():
    space = FiniteProbSpace.uniform(4)
    env = build_cvar(space, 0.5)
    x = np.array([-1.0, -1.0, 1.0, 1.0])
    q = law_invariant_selector(env, x).values
    assert q[0] == pytest.approx(q[1], abs=1e-12)
    assert q[2] == pytest.approx(q[3], abs=1e-12)
    val = float(np.mean(x)) + float(np.mean(-x * q))
    assert val == pytest.approx(evaluate(env, x), abs=1e-9)


def test_law_invariant_selector_permutation_equivariance():
    rng = np.random.default_rng(41)
    space = FiniteProbSpace.uniform(5)
    env = build_cvar(space, 0.4)
    for _ in range(10):
        x = rng.normal(size=5)
        perm = rng.permutation(5)
        q = law_invariant_selector(env, x).values
        q_perm = law_invariant_selector(env, x[perm]).values
        assert np.allclose(q_perm, q[perm], atol=1e-9)


def test_robust_mu_golden():
    market = _mad_market()
    env = build_mad(FiniteProbSpace.uniform(3))
    mu = robust_mu(market, env, [0.5, 0.5], 0.5)
    assert np.allclose(mu, [0.5, 0.5], atol=1e-9)


def test_robust_mu_lies_in_inverse_set():
    rng = np.random.default_rng(47)
    space = FiniteProbSpace.uniform(4)
    for _ in range(10):
        raw = rng.normal(size=(2, 4))
        raw -= raw.mean(axis=1, keepdims=True)
        try:
            market = MarketModel(raw, np.array([0.5, 0.5]), 0.0, 0.5, space)
        except Exception:
            continue
        env = build_mad(space)
        x_m = rng.uniform(0.2, 1.0, size=2)
        try:
            inv = inverse_solution_set(market, env, x_m, 0.5)
            mu = robust_mu(market, env, x_m, 0.5)
        except ZeroRiskPortfolio:
            continue
        from devport.geometry import contains

        assert contains(inv.polytope, mu, tol=1e-7)


def test_dichotomy_unique_inverse_branch():
    market = _cvar_market()
    env = build_cvar(FiniteProbSpace.uniform(3), 0.05)
    report = verify_dichotomy(market, env, [0.2, 0.8], 0.4)
    assert report["branch"] == "unique-inverse"
    assert report["inverse_vertices"] == 1
    assert report["forward_face_dim"] == 1


def test_dichotomy_unique_forward_branch():
    market = _mad_market()
    env = build_mad(FiniteProbSpace.uniform(3))
    report = verify_dichotomy(market, env, [0.5, 0.5], 0.5)
    assert report["branch"] in ("unique-forward", "degenerate-both")
    if report["branch"] == "unique-forward":
        # The bound n is tight: this very instance has a two-vertex segment.
        assert report["inverse_vertices"] >= market.n_assets
        assert report["active_span"] == market.n_assets
        assert report["inverse_affine_dim"] >= market.n_assets - 1


def test_dichotomy_random_sweep():
    rng = np.random.default_rng(53)
    checked = 0
    for _ in range(20):
        n = int(rng.integers(2, 4))
        big_n = int(rng.integers(3, 6))
        space = FiniteProbSpace.uniform(big_n)
        raw = rng.normal(size=(n, big_n))
        raw -= raw.mean(axis=1, keepdims=True)
        try:
            market = MarketModel(raw, rng.uniform(0.2, 1.0, n), 0.0, 0.5, space)
        except Exception:
            continue
        env = build_mad(space) if rng.random() < 0.5 else build_cvar(
            space, float(rng.uniform(0.2, 0.8))
        )
        x_m = rng.uniform(0.1, 1.0, size=n)
        try:
            report = verify_dichotomy(market, env, x_m, 0.5)
        except ZeroRiskPortfolio:
            continue
        assert report["branch"] in ("unique-inverse", "unique-forward", "degenerate-both")
        checked += 1
    assert checked >= 10


def test_forward_inverse_roundtrip():
    # Recovered mu makes x_M optimal: re-solving at the scaled target must
    # return the same deviation value as x_M scaled onto the constraint.
    market = _mad_market()
    env = build_mad(FiniteProbSpace.uniform(3))
    x_m = np.array([0.3, 0.7])
    mu = robust_mu(market, env, x_m, 0.5)
    market2 = MarketModel(market.centered_returns, mu, 0.0, 0.5, market.space)
    sol = solve_forward(market2, env, 0.5)
    x_scaled = x_m * (0.5 / float(mu @ x_m))
    dev = evaluate(env, market.portfolio_return(x_scaled).values)
    assert dev == pytest.approx(sol.value, abs=1e-8)


def test_concave_order_basics():
    space = FiniteProbSpace.uniform(3)
    x = np.array([0.0, 0.0, 0.0])
    y = np.array([-1.0, 0.0, 1.0])
    assert concave_order_leq(x, y, space)
    assert not concave_order_leq(y, x, space)
    with pytest.raises(ValidationError):
        concave_order_leq(x, y + 1.0, space)


def test_concave_order_general_weights():
    space = FiniteProbSpace(np.array([0.5, 0.25, 0.25]))
    x = np.array([0.0, 0.0, 0.0])
    y = np.array([-1.0, 1.0, 1.0])
    assert concave_order_leq(x, y, space)
    assert not concave_order_leq(y, x, space)
