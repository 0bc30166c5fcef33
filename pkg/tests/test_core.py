import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eireservoir.core import (
    ConfigError,
    Dale,
    EIReservoir,
    InputError,
    NetworkConfig,
    build_reservoir,
    excit_fraction_for_balance,
    global_balance,
    inverse_sigmoid,
    load_reservoir,
    local_balance,
    mu_inhibitory,
    run_open_loop,
    save_reservoir,
    shuffle_dale,
    sigmoid,
    step,
)


def small(**kw):
    base = dict(n_neurons=200, seed=3)
    base.update(kw)
    return NetworkConfig(**base)


def zero_reservoir(n=5, theta=0.0):
    z = np.zeros((n, n))
    return EIReservoir(z, z, np.zeros(n), theta, 0.0, 10.0, np.ones(n, bool))


class TestMuInhibitory:
    def test_default_table_value(self):
        assert mu_inhibitory(0.8, 0.025, 0.0, 50) == pytest.approx(0.1)

    def test_symmetric_populations(self):
        assert mu_inhibitory(0.5, 0.025, 0.0, 50) == pytest.approx(0.025)

    def test_over_excited_gives_negative_magnitude(self):
        # (0.8*0.025 - 1.5/50) / 0.2
        assert mu_inhibitory(0.8, 0.025, 1.5, 50) == pytest.approx(-0.05)

    def test_no_inhibitory_population(self):
        with pytest.raises(ZeroDivisionError):
            mu_inhibitory(1.0, 0.025, 0.0, 50)

    def test_excit_fraction_inverse(self):
        f = excit_fraction_for_balance(-1.0, 0.025, 4.0, 50)
        # expected balance k*mu_E*(f - (1-f)*ratio)
        assert 50 * 0.025 * (f - (1 - f) * 4.0) == pytest.approx(-1.0)
        assert excit_fraction_for_balance(0.0, 0.025, 4.0, 50) == pytest.approx(0.8)


class TestSigmoid:
    def test_midpoint(self):
        assert sigmoid(0.0, 10) == 0.5

    def test_hand_value(self):
        assert sigmoid(0.3, 10) == pytest.approx(1 / (1 + math.exp(-3)), abs=1e-12)
        assert sigmoid(0.3, 10) == pytest.approx(0.95257, abs=1e-5)

    def test_inverse_midpoint(self):
        assert inverse_sigmoid(0.5, 10) == 0.0

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
    def test_inverse_domain(self, p):
        with pytest.raises(ValueError):
            inverse_sigmoid(p, 10)

    @given(st.floats(-3, 3))
    def test_round_trip_unit_steepness(self, x):
        assert abs(inverse_sigmoid(sigmoid(x, 1.0), 1.0) - x) <= 1e-9

    @given(st.floats(-1.5, 1.5))
    def test_round_trip_default_steepness(self, x):
        # at c = 10 the upper tail of float64 limits |c*x| to ~15 for 1e-9 accuracy
        assert abs(inverse_sigmoid(sigmoid(x, 10.0), 10.0) - x) <= 1e-9


class TestBuild:
    def test_balanced_defaults_over_seeds(self):
        betas = [build_reservoir(NetworkConfig(seed=s)).global_balance() for s in range(20)]
        assert abs(np.mean(betas)) < 0.05

    def test_population_sizes(self):
        res = build_reservoir(NetworkConfig(seed=1))
        assert res.is_excitatory.sum() == 400
        assert res.n_neurons == 500

    def test_deterministic_weights(self):
        cfg = small(sigma_E=0.0, sigma_I=0.0)
        res = build_reservoir(cfg)
        n_exc = (res.A_E > 0).sum(axis=1)
        n_inh = (res.A_I > 0).sum(axis=1)
        mu_E, mu_I = 1 / 40, 0.1
        np.testing.assert_allclose(res.local_balance(), n_exc * mu_E - n_inh * mu_I, atol=1e-12)

    def test_k_larger_than_n(self):
        with pytest.raises(ConfigError):
            build_reservoir(NetworkConfig(n_neurons=20, mean_degree=50))

    def test_bad_fraction(self):
        with pytest.raises(ConfigError):
            build_reservoir(small(excit_fraction=1.0))

    def test_identical_seed_identical_reservoir(self):
        a, b = build_reservoir(small()), build_reservoir(small())
        for name in ("A_E", "A_I", "W_in", "theta", "r"):
            assert np.array_equal(getattr(a, name), getattr(b, name))
        assert not np.array_equal(a.A_E, build_reservoir(small(seed=4)).A_E)

    def test_initial_state(self):
        res = build_reservoir(small(theta=0.2))
        assert np.all(res.V == 0)
        np.testing.assert_allclose(res.r, sigmoid(-0.2, 10))

    def test_dale_structure(self):
        res = build_reservoir(small())
        for j in range(res.n_neurons):
            e_zero = not res.A_E[:, j].any()
            i_zero = not res.A_I[:, j].any()
            assert e_zero or i_zero
            if res.is_excitatory[j]:
                assert i_zero
            else:
                assert e_zero

    def test_input_weights(self):
        res = build_reservoir(small(input_spread=0.4))
        nz = res.W_in[res.W_in != 0]
        assert nz.size == 60
        assert np.all(np.abs(nz) <= 0.2)

    def test_excitatory_row_sum_expectation(self):
        sums = np.concatenate([build_reservoir(NetworkConfig(seed=s)).A_E.sum(axis=1) for s in range(10)])
        se = sums.std(ddof=1) / np.sqrt(sums.size)
        assert abs(sums.mean() - 1.0) < 3 * se

    def test_negative_inhibitory_mean_kept(self):
        res = build_reservoir(small(beta=2.0))
        vals = res.A_I[res.inh_links]
        assert vals.mean() < 0

    def test_inhib_fraction_mode(self):
        f = excit_fraction_for_balance(-1.0, 0.025, 4.0, 50)
        betas = [
            build_reservoir(small(balance_mode="InhibFraction", excit_fraction=f, mu_E=0.025, seed=s)).global_balance()
            for s in range(10)
        ]
        # population size is rounded, so the target is met only approximately
        assert np.mean(betas) == pytest.approx(-1.0, abs=0.15)

    def test_alpha_scales_everything(self):
        a = build_reservoir(small())
        b = build_reservoir(small(alpha=2.0))
        np.testing.assert_allclose(b.A_E, 2 * a.A_E)
        np.testing.assert_allclose(b.A_I, 2 * a.A_I)


class TestStep:
    def test_zero_weights(self):
        res = zero_reservoir()
        r = step(res, 0.0)
        assert np.all(r == 0.5)

    def test_single_link(self):
        res = zero_reservoir(3)
        res.A_E[1, 0] = 0.7
        res.r = np.array([0.3, 0.0, 0.0])
        step(res, 0.0)
        assert res.V[1] == 0.7 * 0.3

    def test_uses_previous_rates(self):
        res = zero_reservoir(2)
        res.A_E[1, 0] = 1.0
        res.A_E[0, 1] = 1.0
        res.r = np.array([0.2, 0.9])
        step(res, 0.0)
        assert res.V[0] == 0.9 and res.V[1] == 0.2

    def test_non_finite_input(self):
        res = zero_reservoir()
        with pytest.raises(InputError):
            step(res, float("nan"))

    def test_over_excited_saturates(self):
        res = build_reservoir(NetworkConfig(beta=1.5, seed=2))
        u = np.random.default_rng(0).uniform(size=200)
        assert run_open_loop(res, u).mean() > 0.95

    def test_leak(self):
        res = zero_reservoir(1)
        res.leak[:] = 0.5
        res.W_in[:] = 1.0
        step(res, 1.0)
        step(res, 0.0)
        assert res.V[0] == 0.5


class TestRun:
    def test_empty_input(self):
        res = build_reservoir(small())
        assert run_open_loop(res, []).shape == (0, 200)

    def test_constant_input_zero_weights(self):
        res = zero_reservoir()
        res.W_in[:] = np.linspace(-1, 1, 5)
        S = run_open_loop(res, np.full(7, 0.3))
        assert np.all(S == S[0])

    def test_rates_in_open_interval(self):
        res = build_reservoir(small())
        S = run_open_loop(res, np.random.default_rng(1).uniform(size=500))
        assert np.all((S > 0) & (S < 1))

    def test_state_after_run_equals_last_row(self):
        res = build_reservoir(small())
        S = res.run(np.random.default_rng(1).uniform(size=50))
        assert np.array_equal(res.r, S[-1])

    def test_run_matches_step(self):
        a = build_reservoir(small())
        b = a.copy()
        u = np.random.default_rng(5).uniform(size=30)
        S = a.run(u)
        for t, x in enumerate(u):
            assert np.array_equal(b.step(x), S[t])

    def test_non_finite_inputs(self):
        with pytest.raises(InputError):
            build_reservoir(small()).run([0.1, np.inf])

    def test_permutation_equivariance(self):
        res = build_reservoir(NetworkConfig(n_neurons=10, mean_degree=5, input_spread=1.0, seed=7))
        perm = np.random.default_rng(0).permutation(10)
        P = EIReservoir(
            res.A_E[np.ix_(perm, perm)], res.A_I[np.ix_(perm, perm)], res.W_in[perm],
            res.theta[perm], res.leak[perm], res.c, res.is_excitatory[perm],
        )
        u = np.random.default_rng(1).uniform(size=40)
        np.testing.assert_allclose(P.run(u), res.run(u)[:, perm], rtol=0, atol=1e-14)


class TestBalance:
    def test_row_sums_equal(self):
        n = 4
        A_E = np.full((n, n), 0.25)
        A_I = np.full((n, n), 0.25)
        res = EIReservoir(A_E, A_I, np.zeros(n), 0.0, 0.0, 10.0, np.ones(n, bool))
        assert global_balance(res) == 0
        assert np.all(local_balance(res) == 0)

    def test_pure_excitation(self):
        n = 4
        res = EIReservoir(np.full((n, n), 1.25 / n), np.zeros((n, n)), np.zeros(n), 0.0, 0.0, 10.0, np.ones(n, bool))
        assert global_balance(res) == pytest.approx(1.25)


class TestShuffle:
    def test_shuffle_preserves_weights_and_positions(self):
        res = build_reservoir(small(beta=-1.0))
        sh = shuffle_dale(res, 11)
        before = np.sort((res.A_E - res.A_I)[res.A_E - res.A_I != 0])
        after = np.sort((sh.A_E - sh.A_I)[sh.A_E - sh.A_I != 0])
        np.testing.assert_array_equal(before, after)
        assert np.array_equal((res.A_E - res.A_I) != 0, (sh.A_E - sh.A_I) != 0)
        assert sh.global_balance() == pytest.approx(res.global_balance(), abs=1e-12)
        assert np.all(sh.A_E >= 0) and np.all(sh.A_I >= 0)

    def test_shuffle_breaks_dale(self):
        sh = shuffle_dale(build_reservoir(small()), 11)
        mixed = [(sh.A_E[:, j].any() and sh.A_I[:, j].any()) for j in range(sh.n_neurons)]
        assert any(mixed)

    def test_config_shuffled_same_multiset(self):
        a = build_reservoir(small())
        b = build_reservoir(small(dale=Dale.SHUFFLED))
        wa = np.sort((a.A_E - a.A_I).ravel())
        wb = np.sort((b.A_E - b.A_I).ravel())
        np.testing.assert_array_equal(wa, wb)
        assert not np.array_equal(a.A_E, b.A_E)


@settings(max_examples=20, deadline=None)
@given(
    beta=st.floats(-4, 2),
    theta=st.floats(-1, 1),
    seed=st.integers(0, 2**32),
    u=st.lists(st.floats(-5, 5), min_size=1, max_size=50),
)
def test_rates_stay_in_open_interval(beta, theta, seed, u):
    res = build_reservoir(NetworkConfig(n_neurons=50, mean_degree=10, beta=beta, theta=theta,
                                        input_spread=1.0, seed=seed))
    ref = res.copy()
    S = res.run(u)
    assert np.all((S >= 0) & (S <= 1))
    # float64 rounds expit to exactly 1 beyond an argument of ~37
    for t, x in enumerate(u):
        ref.step(x)
        arg = ref.c * (ref.V - ref.theta)
        inside = np.abs(arg) < 36
        assert np.all((S[t][inside] > 0) & (S[t][inside] < 1))


def test_determinism_end_to_end():
    u = np.random.default_rng(9).uniform(size=100)
    a = build_reservoir(small()).run(u)
    b = build_reservoir(small()).run(u)
    assert np.array_equal(a, b)


def test_serialization_round_trip(tmp_path):
    res = build_reservoir(small(beta=-0.5, dale="Shuffled"))
    res.run(np.random.default_rng(0).uniform(size=10))
    path = tmp_path / "res.npz"
    save_reservoir(res, path)
    back, readout = load_reservoir(path)
    assert readout is None
    for name in ("A_E", "A_I", "W_in", "theta", "leak", "is_excitatory", "inh_links", "V", "r"):
        assert np.array_equal(getattr(back, name), getattr(res, name)), name
    assert back.c == res.c
    assert back.config == res.config


def test_serialization_rejects_other_version(tmp_path):
    res = build_reservoir(small())
    arrays = res.to_arrays()
    arrays["meta"] = np.frombuffer(b'{"format_version": 99, "c": 10, "config": null}', dtype=np.uint8)
    np.savez(tmp_path / "x.npz", **arrays)
    with pytest.raises(ValueError):
        load_reservoir(tmp_path / "x.npz")
