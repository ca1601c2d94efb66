import numpy as np
import pytest
from hypothesis import given, strategies as st

from tagi.infer import (
    VAR_FLOOR,
    DegenerateInferenceError,
    ObservationModel,
    PosteriorDelta,
    assimilate,
    cross_cov_theta,
    cross_cov_z,
    infer_deltas,
    infer_observation,
    input_posterior,
    merge_batch,
    smooth_step,
    smooth_step_delta,
    update_output_layer,
)
from tagi.net import GaussianVector, InitSpec, LayerParams, NetworkArch, forward, init_network
from tagi.oracle import exact_parameter_posterior, mc_cross_covariances


def det(x):
    return GaussianVector.deterministic(np.asarray(x, dtype=float))


def small_net(seed, hidden=(5,), inputs=3, outputs=2, gain=1.0):
    return init_network(NetworkArch(inputs, hidden, outputs), InitSpec(gain=gain), rng_seed=seed)


def test_output_update_hand_example():
    p = LayerParams(np.array([[1.0]]), np.array([[0.5]]), np.array([0.0]), np.array([0.5]))
    _, caches = forward([p], det([1.0]))
    post = update_output_layer(caches[-1], [3.0], ObservationModel(np.array([1.0])))
    assert post.mean[0] == pytest.approx(1.0 + 0.5 * 2.0)
    assert post.var[0] == pytest.approx(0.5)


def test_unobserved_units_unchanged():
    params = small_net(0)
    _, caches = forward(params, det([0.1, 0.2, 0.3]))
    post = update_output_layer(caches[-1], [np.nan, 1.0], ObservationModel(np.ones(2)))
    assert post.mean[0] == caches[-1].mu_z[0] and post.var[0] == caches[-1].var_z[0]
    assert post.var[1] < caches[-1].var_z[1]


def test_observation_dimension_checked():
    params = small_net(0)
    _, caches = forward(params, det([0.1, 0.2, 0.3]))
    with pytest.raises(IndexError):
        update_output_layer(caches[-1], [1.0, 2.0, 3.0], ObservationModel(np.ones(3)))
    with pytest.raises(ValueError):
        ObservationModel(np.array([0.0]))


def test_cross_covariances_match_mc(rng):
    params = small_net(1, hidden=(4,))
    x = det(rng.normal(size=3))
    _, caches = forward(params, x)
    zz, zz_se, wz, wz_se, bz, bz_se = mc_cross_covariances(params, x, 1, 1_000_000, seed=2)
    analytic_zz = cross_cov_z(caches[1], params[1])
    analytic_wz, analytic_bz = cross_cov_theta(caches[1], params[1])
    assert np.all(np.abs(zz - analytic_zz) <= 4 * zz_se + 1e-12)
    assert np.all(np.abs(wz - analytic_wz) <= 4 * wz_se + 1e-12)
    assert np.all(np.abs(bz - analytic_bz) <= 4 * bz_se + 1e-12)


def test_smooth_step_without_innovation_is_identity():
    params = small_net(2)
    _, caches = forward(params, det([0.3, -0.1, 0.7]))
    prior = caches[2].prior
    prev_post, new = smooth_step(caches[1], params[1], prior, prior)
    np.testing.assert_array_equal(prev_post.mean, caches[1].mu_z)
    np.testing.assert_array_equal(prev_post.var, caches[1].var_z)
    assert new.equals(params[1])


def test_single_layer_matches_conjugate_linear_regression(rng):
    # one linear layer, one output: one observation gives the exact marginals
    w_var = rng.uniform(0.1, 1.0, (1, 4))
    p = LayerParams(rng.normal(size=(1, 4)), w_var, np.array([0.3]), np.array([0.2]))
    x, y, sv = rng.normal(size=4), 1.7, 0.5
    new = infer_deltas([p], forward([p], det(x))[1], [y], sv)[0]

    phi = np.append(x, 1.0)
    m = np.append(p.w_mean[0], p.b_mean)
    s = np.diag(np.append(w_var[0], p.b_var))
    k = s @ phi / (phi @ s @ phi + sv**2)
    post_m = m + k * (y - phi @ m)
    post_s = s - np.outer(k, phi @ s)
    np.testing.assert_allclose(new.w_mean[0], post_m[:4], rtol=1e-12)
    np.testing.assert_allclose(new.b_mean, post_m[4:], rtol=1e-12)
    np.testing.assert_allclose(new.w_var[0], np.diag(post_s)[:4], rtol=1e-12)
    np.testing.assert_allclose(new.b_var, np.diag(post_s)[4:], rtol=1e-12)


@pytest.mark.parametrize("hidden", [(1,), (2,), (1, 1)])
def test_tiny_linear_networks_match_exact_conditioning(hidden):
    arch = NetworkArch(2, hidden, 1, "linear")
    params = init_network(arch, InitSpec(gain=1.0, bias_var=0.1), rng_seed=3)
    x, y, sv = np.array([0.8, -0.4]), np.array([0.9]), 0.3
    ours = infer_deltas(params, forward(params, det(x), "linear")[1], y, sv)
    exact = exact_parameter_posterior(params, x, y, sv)
    for a, b in zip(ours, exact):
        for u, v in zip(a.arrays(), b.arrays()):
            np.testing.assert_allclose(u, v, rtol=0, atol=1e-8)


def test_huge_noise_leaves_parameters_unchanged(rng):
    params = small_net(4, hidden=(8, 6))
    x = rng.normal(size=3)
    new = infer_observation(params, forward(params, det(x))[1], [1.0, -1.0], ObservationModel(np.full(2, 1e12)))
    assert all(a.equals(b) for a, b in zip(new, params))


def test_assimilate_equals_forward_then_backward(rng):
    for act in ("relu", "tanh", "softplus"):
        params = init_network(NetworkArch(3, (6, 4), 2, act), rng_seed=5)
        x, y = rng.normal(size=3), rng.normal(size=2)
        a = assimilate(params, x, y, 0.4, act)
        b = infer_deltas(params, forward(params, det(x), act)[1], y, 0.4)
        assert all(u.equals(v) for u, v in zip(a, b))


def test_assimilate_partial_observation(rng):
    params = small_net(6)
    x = rng.normal(size=3)
    new = assimilate(params, x, [np.nan, 0.5], 0.3)
    ref = infer_deltas(params, forward(params, det(x))[1], [np.nan, 0.5], 0.3)
    assert all(u.equals(v) for u, v in zip(new, ref))


def test_hidden_unit_permutation_invariance(rng):
    params = small_net(7, hidden=(5,))
    perm = rng.permutation(5)
    p0, p1 = params
    permuted = [
        LayerParams(p0.w_mean[perm], p0.w_var[perm], p0.b_mean[perm], p0.b_var[perm]),
        LayerParams(p1.w_mean[:, perm], p1.w_var[:, perm], p1.b_mean, p1.b_var),
    ]
    x, y = rng.normal(size=3), rng.normal(size=2)
    a = assimilate(params, x, y, 0.5)
    b = assimilate(permuted, x, y, 0.5)
    np.testing.assert_allclose(a[0].w_mean[perm], b[0].w_mean, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(a[0].w_var[perm], b[0].w_var, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(a[1].w_mean[:, perm], b[1].w_mean, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(a[1].b_var, b[1].b_var, rtol=1e-13, atol=1e-15)


def test_zero_variance_with_nonzero_update_raises():
    params = small_net(8)
    _, caches = forward(params, det([0.1, 0.2, 0.3]))
    delta = PosteriorDelta(np.array([0.1, 0.0]), np.array([-0.1, 0.0]))
    with pytest.raises(DegenerateInferenceError):
        smooth_step_delta(caches[1], params[1], np.array([0.0, 1.0]), delta)


def test_zero_variance_without_update_is_fine():
    p = LayerParams(np.ones((1, 2)), np.zeros((1, 2)), np.zeros(1), np.zeros(1))
    new = assimilate([p], np.array([1.0, 2.0]), np.array([5.0]), 1.0, "linear")
    assert new[0].equals(p)


def test_variance_floor():
    prior = GaussianVector(np.zeros(3), np.array([1.0, 1e-14, 1.0]))
    post = PosteriorDelta(np.zeros(3), np.array([-1.0, -1.0, -0.5])).apply(prior)
    assert post.var[0] == VAR_FLOOR
    assert post.var[1] == 1e-14  # already below the floor, never raised
    assert post.var[2] == 0.5


def test_input_posterior_shrinks_uncertain_inputs(rng):
    params = small_net(9)
    x = GaussianVector(rng.normal(size=3), np.full(3, 0.5))
    _, caches = forward(params, x)
    post = input_posterior(params, caches, [0.2, -0.3], ObservationModel(np.full(2, 0.1)))
    assert np.all(post.var <= x.var)


def test_merge_batch_of_one_and_identical():
    params = small_net(10)
    post = assimilate(params, np.array([0.1, 0.2, 0.3]), np.array([1.0, 0.0]), 0.5)
    stacked = [LayerParams(*(np.stack([a, a]) for a in p.arrays())) for p in post]
    merged = merge_batch(params, stacked)
    for m, p in zip(merged, post):
        for u, v in zip(m.arrays(), p.arrays()):
            np.testing.assert_allclose(u, v, rtol=1e-15, atol=1e-15)


def test_merge_batch_averages_deltas():
    prior = [LayerParams(np.zeros((1, 1)), np.ones((1, 1)), np.zeros(1), np.ones(1))]
    posts = [LayerParams(np.array([[[1.0]], [[3.0]]]), np.array([[[0.5]], [[0.7]]]),
                         np.array([[0.0], [2.0]]), np.array([[0.9], [0.5]]))]
    merged = merge_batch(prior, posts)[0]
    assert merged.w_mean[0, 0] == 2.0
    assert merged.w_var[0, 0] == pytest.approx(0.6)
    assert merged.b_var[0] == pytest.approx(0.7)


@given(st.integers(0, 10_000), st.floats(0.05, 5.0))
def test_variances_never_increase(seed, sv):
    rng = np.random.default_rng(seed)
    params = small_net(seed % 7, hidden=(4, 3))
    new = assimilate(params, rng.normal(size=3), rng.normal(size=2) * 3, sv)
    for a, b in zip(new, params):
        assert np.all(a.w_var <= b.w_var) and np.all(a.b_var <= b.b_var)
        assert np.all(a.w_var > 0) and np.all(a.b_var > 0)


@given(st.integers(0, 10_000))
def test_batched_runs_match_individual(seed):
    rng = np.random.default_rng(seed)
    nets = [small_net(seed + r) for r in range(3)]
    stacked = [LayerParams(*(np.stack(t) for t in zip(*(n[j].arrays() for n in nets)))) for j in range(2)]
    xs, ys = rng.normal(size=(3, 3)), rng.normal(size=(3, 2))
    batched = assimilate(stacked, xs, ys, np.full((3, 1), 0.4))
    for r in range(3):
        single = assimilate(nets[r], xs[r], ys[r], 0.4)
        for j in range(2):
            for u, v in zip(batched[j].arrays(), single[j].arrays()):
                np.testing.assert_allclose(u[r], v, rtol=1e-13, atol=1e-15)


def test_assimilate_blocked_update_on_wide_layer(rng):
    # 784 x 200 weights span many row blocks
    params = init_network(NetworkArch(784, (200,), 3), rng_seed=11)
    x, y = rng.uniform(0, 1, 784), rng.normal(size=3)
    a = assimilate(params, x, y, 0.3)
    b = infer_deltas(params, forward(params, det(x))[1], y, 0.3)
    assert all(u.equals(v) for u, v in zip(a, b))
