"""Flow training, transport, divergence, densities, and surprisal."""

import math

import numpy as np
import pytest

from pald import flow as fl
from pald.errors import NumericalError
from pald.numerics import AdamW, Tensor
from pald.numerics.rng import stream


@pytest.fixture(scope="module")
def small_model():
    model = fl.FlowModel(fl.FlowConfig(latent_dim=4, context_hidden=8,
                                       velocity_hidden=12), init_seed=3)
    for k, p in model.params.items():
        p.data = p.data + 0.1 * stream(17, k).standard_normal(p.data.shape)
    return model


class TestOde:
    def test_exponential_growth(self):
        field = fl.LinearField(np.eye(1))
        x1 = fl.ode_integrate(field, np.ones((1, 1)), 0.0, 1.0, 100)
        assert abs(x1[0, 0] - math.e) < 1e-6

    def test_zero_field_identity(self):
        field = fl.ConstantField(np.zeros(3))
        x = stream(0, "x").standard_normal((5, 3))
        assert np.array_equal(fl.ode_integrate(field, x, 0.0, 1.0, 10), x)

    def test_fourth_order_convergence(self):
        field = fl.LinearField(np.eye(1))
        errs = []
        for steps in (10, 20):
            x1 = fl.ode_integrate(field, np.ones((1, 1)), 0.0, 1.0, steps)
            errs.append(abs(x1[0, 0] - math.e))
        assert errs[0] / errs[1] >= 8.0

    def test_backward_integration(self):
        field = fl.LinearField(np.eye(2))
        x0 = stream(1, "x").standard_normal((3, 2))
        x1 = fl.ode_integrate(field, x0, 0.0, 1.0, 50)
        back = fl.ode_integrate(field, x1, 1.0, 0.0, 50)
        assert np.allclose(back, x0, atol=1e-9)

    def test_nonfinite_state_raises(self):
        field = fl.LinearField(np.eye(1) * 500.0)
        with pytest.raises(NumericalError):
            fl.ode_integrate(field, np.ones((1, 1)), 0.0, 1.0, 5)

    def test_bad_steps_rejected(self):
        with pytest.raises(ValueError):
            fl.ode_integrate(fl.ConstantField(np.zeros(1)), np.ones((1, 1)), 0, 1, 0)


class TestDivergence:
    def test_linear_field_exact(self):
        field = fl.LinearField(np.array([[1.0, 2.0], [3.0, 4.0]]))
        div = fl.divergence(field, np.zeros((1, 2)), 0.5)
        assert div[0] == pytest.approx(5.0, abs=1e-12)

    def test_constant_field_zero(self):
        field = fl.ConstantField(np.array([1.0, -2.0]))
        assert fl.divergence(field, np.ones((3, 2)), 0.1) == pytest.approx(0.0)

    def test_hutchinson_within_two_se(self):
        rng = stream(2, "hutch")
        a = rng.standard_normal((8, 8))
        field = fl.LinearField(a)
        x = rng.standard_normal((1, 8))
        probes = []
        prng = stream(3, "probes")
        for _ in range(1000):
            probes.append(fl.divergence(field, x, 0.0, mode="hutchinson",
                                        n_probes=1, rng=prng)[0])
        probes = np.array(probes)
        se = probes.std(ddof=1) / math.sqrt(probes.size)
        assert abs(probes.mean() - np.trace(a)) < 2 * se

    def test_hutchinson_se_scaling(self):
        """Standard error of the probe mean shrinks like 1/sqrt(n)."""
        rng = stream(4, "se")
        a = rng.standard_normal((6, 6))
        field = fl.LinearField(a)
        x = rng.standard_normal((1, 6))
        sds = []
        for n_probes in (10, 160):
            vals = [fl.divergence(field, x, 0.0, mode="hutchinson",
                                  n_probes=n_probes, rng=stream(5, "p", n_probes, r))[0]
                    for r in range(60)]
            sds.append(np.std(vals, ddof=1))
        assert sds[0] / sds[1] == pytest.approx(4.0, rel=0.5)

    def test_exact_dim_limit(self):
        field = fl.LinearField(np.eye(65))
        with pytest.raises(ValueError):
            fl.divergence(field, np.zeros((1, 65)), 0.0)

    def test_model_field_jacobian_matches_fd(self, small_model):
        """Analytic velocity-net Jacobian against central differences."""
        ctx = stream(6, "c").standard_normal((2, 8))
        field = small_model.velocity_field(ctx)
        x = stream(7, "x").standard_normal((2, 4))
        jac = field.jacobian(x, 0.3)
        h = 1e-6
        for i in range(4):
            dx = np.zeros((2, 4))
            dx[:, i] = h
            fd = (field(x + dx, 0.3) - field(x - dx, 0.3)) / (2 * h)
            assert np.allclose(jac[:, :, i], fd, atol=1e-7)

    def test_model_field_jvp_matches_jacobian(self, small_model):
        ctx = stream(8, "c").standard_normal((3, 8))
        field = small_model.velocity_field(ctx)
        x = stream(9, "x").standard_normal((3, 4))
        v = stream(10, "v").standard_normal((3, 4))
        jac = field.jacobian(x, 0.7)
        expected = np.einsum("nij,nj->ni", jac, v)
        assert np.allclose(field.jvp(x, 0.7, v), expected, atol=1e-12)


class TestLogDensity:
    def test_standard_normal_at_origin(self):
        field = fl.GaussianMarginalField(2)
        lp = fl.log_density(field, np.zeros((1, 2)), 0.0, ode_steps=100)
        assert lp[0] == pytest.approx(-math.log(2 * math.pi), abs=1e-3)

    @pytest.mark.parametrize("dim", [1, 2, 8])
    def test_master_oracle(self, dim):
        """100 random points per dim within 1e-3 nats at 100 RK4 steps."""
        field = fl.GaussianMarginalField(dim)
        x = stream(20 + dim, "pts").standard_normal((100, dim))
        lp = fl.log_density(field, x, 0.0, ode_steps=100)
        assert np.abs(lp - field.exact_log_density(x, 0.0)).max() < 1e-3

    def test_oracle_from_interior_time(self):
        field = fl.GaussianMarginalField(4)
        x = stream(30, "pts").standard_normal((50, 4))
        lp = fl.log_density(field, x, 0.35, ode_steps=100)
        assert np.abs(lp - field.exact_log_density(x, 0.35)).max() < 1e-3

    def test_zero_field_gives_base_density(self):
        field = fl.ConstantField(np.zeros(3))
        x = stream(31, "pts").standard_normal((10, 3))
        lp = fl.log_density(field, x, 0.0, ode_steps=10)
        expected = -0.5 * (3 * math.log(2 * math.pi) + np.sum(x * x, axis=1))
        assert np.allclose(lp, expected, atol=1e-12)

    def test_hutchinson_mode_close_to_exact(self):
        field = fl.GaussianMarginalField(3)
        x = stream(32, "pts").standard_normal((5, 3))
        exact = fl.log_density(field, x, 0.0, ode_steps=40)
        est = fl.log_density(field, x, 0.0, ode_steps=40, div_mode="hutchinson",
                             n_probes=400, rng=stream(33, "p"))
        # the isotropic linear field has zero-variance Rademacher probes
        assert np.allclose(est, exact, atol=1e-9)

    def test_bad_t_rejected(self):
        field = fl.ConstantField(np.zeros(2))
        with pytest.raises(ValueError):
            fl.log_density(field, np.zeros((1, 2)), 1.0)


class TestKernelBackends:
    def test_backends_agree_and_match_generic(self, small_model):
        frames = stream(40, "fr").standard_normal((6, 4))
        ctx = small_model.contexts_np(frames)
        generic = fl.log_density(small_model.velocity_field(ctx), frames, 0.2,
                                 ode_steps=50)
        out = {}
        for backend in ("numpy", "numba"):
            fl.set_backend(backend)
            out[backend] = fl.flow_log_density(small_model, frames, ctx, 0.2,
                                               ode_steps=50)
        fl.set_backend(None)
        assert np.allclose(out["numpy"], generic, atol=1e-12)
        assert np.allclose(out["numba"], generic, atol=1e-10)

    def test_env_flag_forces_numpy(self, monkeypatch):
        monkeypatch.setenv("PALD_BACKEND", "numpy")
        assert fl.active_backend() == "numpy"
        monkeypatch.setenv("PALD_BACKEND", "auto")
        assert fl.active_backend() in ("numba", "numpy")


class TestTraining:
    def test_init_loss_is_twice_dim(self):
        """Zero-initialized head: loss ~ E||x1 - x0||^2 = 2d on unit-normal data."""
        d = 6
        model = fl.FlowModel(fl.FlowConfig(latent_dim=d, context_hidden=8,
                                           velocity_hidden=16), init_seed=0)
        data = stream(50, "d").standard_normal((64, 10, d))
        opt = AdamW(model.params, lr=0.0)
        losses = [fl.flow_train_step(model, opt, data[i * 8 : (i + 1) * 8],
                                     stream(51, "n", i))
                  for i in range(8)]
        assert np.mean(losses) == pytest.approx(2 * d, rel=0.1)

    def test_train_step_deterministic(self):
        model = fl.FlowModel(fl.FlowConfig(latent_dim=3, context_hidden=6,
                                           velocity_hidden=8), init_seed=1)
        batch = stream(52, "b").standard_normal((6, 5, 3))
        base = {k: p.data.copy() for k, p in model.params.items()}
        opt = AdamW(model.params, lr=0.0)
        l1 = fl.flow_train_step(model, opt, batch, stream(54, "n"))
        for k, p in model.params.items():
            p.data = base[k].copy()
        l2 = fl.flow_train_step(model, opt, batch, stream(54, "n"))
        assert l1 == l2

    def test_batch_permutation_invariance(self):
        """Sum-reduced gradients are invariant to row order (fixed draws)."""
        from pald.numerics import Tensor, autodiff_gradient
        from pald.numerics import tensor as T
        model = fl.FlowModel(fl.FlowConfig(latent_dim=3, context_hidden=6,
                                           velocity_hidden=8), init_seed=1)
        for k, p in model.params.items():
            p.data = p.data + 0.1 * stream(55, k).standard_normal(p.data.shape)
        rng = stream(53, "fixed")
        u_rows = rng.standard_normal((10, 3 + 8 + 6))
        target = rng.standard_normal((10, 3))

        def grads(order):
            u = Tensor(u_rows[order])
            resid = model.velocity(u) - Tensor(target[order])
            loss = T.scale(T.tsum(T.mul(resid, resid)), 0.1)
            return autodiff_gradient(loss, model.velocity.params)

        g1 = grads(np.arange(10))
        g2 = grads(np.array([3, 1, 4, 0, 9, 2, 8, 7, 5, 6]))
        for k in g1:
            assert np.allclose(g1[k], g2[k], atol=1e-12)

    def test_degenerate_data_collapses_samples(self):
        """Trained on a point mass at 0, generated samples cluster near 0."""
        d = 2
        model = fl.FlowModel(fl.FlowConfig(latent_dim=d, context_hidden=4,
                                           velocity_hidden=16), init_seed=2)
        data = np.zeros((16, 6, d))
        fl.train_flow(model, data, steps=400, batch_size=8, lr=3e-3,
                      warmup_steps=20, seed=7)
        samples = model.sample(np.zeros(4), 64, stream(55, "s"), ode_steps=60)
        assert np.mean(np.abs(samples)) < 0.1

    def test_nonfinite_loss_raises(self):
        model = fl.FlowModel(fl.FlowConfig(latent_dim=2, context_hidden=4,
                                           velocity_hidden=8), init_seed=3)
        model.params["vel.w2"].data += 1e300
        opt = AdamW(model.params)
        with pytest.raises(NumericalError):
            fl.flow_train_step(model, opt, np.ones((2, 4, 2)), stream(56, "n"))


class TestSequenceIc:
    def test_t_zero_reduces_to_log_density(self, small_model):
        seq = stream(60, "s").standard_normal((5, 4))
        series = fl.sequence_ic(small_model, seq, 0.0, 4, stream(61, "r"))
        ctx = small_model.contexts_np(seq)
        direct = -fl.flow_log_density(small_model, seq, ctx, 0.0, 100)
        assert np.allclose(series.ic_nats, direct, atol=1e-12)

    def test_ic_at_noise_level_t_zero_matches(self, small_model):
        seq = stream(62, "s").standard_normal((3, 4))
        ctx = small_model.contexts_np(seq)
        one = fl.ic_at_noise_level(small_model, seq[1], ctx[1], 0.0, 4,
                                   stream(63, "r"))
        series = fl.sequence_ic(small_model, seq, 0.0, 4, stream(63, "r"))
        assert one == pytest.approx(series.ic_nats[1], abs=1e-12)

    def test_causality_future_shuffle(self, small_model):
        rng = stream(64, "s")
        seq = rng.standard_normal((8, 4))
        shuffled = seq.copy()
        shuffled[5:] = shuffled[5:][::-1]  # permute only future frames
        a = fl.sequence_ic(small_model, seq, 0.4, 3, stream(65, "r"))
        b = fl.sequence_ic(small_model, shuffled, 0.4, 3, stream(65, "r"))
        assert np.array_equal(a.ic_nats[:5], b.ic_nats[:5])

    def test_determinism(self, small_model):
        seq = stream(66, "s").standard_normal((6, 4))
        a = fl.sequence_ic(small_model, seq, 0.3, 4, stream(67, "r"))
        b = fl.sequence_ic(small_model, seq, 0.3, 4, stream(67, "r"))
        assert np.array_equal(a.ic_nats, b.ic_nats)

    def test_batch_equals_per_sequence(self, small_model):
        seqs = stream(68, "s").standard_normal((3, 6, 4))
        rngs = [stream(69, "r", i) for i in range(3)]
        batch = fl.sequence_ic_batch(small_model, seqs, 0.5, 3, rngs, ode_steps=40)
        for i in range(3):
            single = fl.sequence_ic(small_model, seqs[i], 0.5, 3,
                                    stream(69, "r", i), ode_steps=40)
            assert np.allclose(batch[i].ic_nats, single.ic_nats, atol=1e-10)

    def test_noised_ic_closed_form_on_oracle_field(self):
        """On the exact Gaussian field, IC at level t matches the marginal."""
        field = fl.GaussianMarginalField(3)
        x = stream(70, "x").standard_normal(3)
        t = 0.9
        rng = stream(71, "r")
        draws = 64
        # reproduce the draw stream: mean over draws of -log N(x_t; 0, s_t^2)
        est = fl.ic_at_noise_level(field, x, None, t, draws, stream(71, "r"),
                                   ode_steps=100)
        eps = rng.standard_normal((draws, 3))
        xt = (1 - t) * x + t * eps
        exact = -field.exact_log_density(xt, t).mean()
        assert est == pytest.approx(exact, abs=2e-3)

    def test_draw_averaging_shrinks_variance(self, small_model):
        seq = stream(72, "s").standard_normal((4, 4))
        sds = []
        for n_draws in (1, 4, 16):
            vals = [fl.sequence_ic(small_model, seq, 0.5, n_draws,
                                   stream(73, "r", n_draws, rep)).ic_nats[2]
                    for rep in range(40)]
            sds.append(np.std(vals, ddof=1))
        assert sds[0] / sds[1] == pytest.approx(2.0, rel=0.5)
        assert sds[1] / sds[2] == pytest.approx(2.0, rel=0.5)

    def test_gru_context_causality_exact(self, small_model):
        frames = stream(74, "f").standard_normal((6, 4))
        ctx = small_model.contexts_np(frames)
        bumped = frames.copy()
        bumped[3] += 10.0
        ctx2 = small_model.contexts_np(bumped)
        assert np.array_equal(ctx[: 4], ctx2[: 4])  # c_i blind to frames >= i
        assert not np.allclose(ctx[4], ctx2[4])

    def test_ic_csv_roundtrip(self, small_model, tmp_path):
        seq = stream(75, "s").standard_normal((4, 4))
        series = fl.sequence_ic(small_model, seq, 0.2, 2, stream(76, "r"),
                                run_id="abc", seq_id=7)
        path = tmp_path / "ic.csv"
        fl.write_surprisal_csv(path, [series])
        import csv
        rows = list(csv.DictReader(open(path)))
        assert len(rows) == 4
        assert rows[0]["run_id"] == "abc"
        assert float(rows[2]["ic_nats"]) == series.ic_nats[2]
        assert float(rows[2]["ic_nats_per_dim"]) == series.ic_nats[2] / 4
