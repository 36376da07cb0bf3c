import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tubervol import nn
from tubervol.errors import ShapeMismatchError


def t(values):
    return nn.DiffTensor(np.asarray(values, dtype=np.float64), requires_grad=True)


class TestLosses:
    def test_mse_l1_hand_values(self):
        pred = t([0.0, 0.0])
        target = np.array([3.0, -1.0])
        assert nn.mse_loss(pred, target).item() == pytest.approx(5.0, abs=1e-12)
        assert nn.l1_loss(pred, target).item() == pytest.approx(2.0, abs=1e-12)

    def test_zero_at_equality(self):
        pred = t([1.0, -2.0, 3.0])
        assert nn.mse_loss(pred, pred.values.copy()).item() == 0.0
        assert nn.l1_loss(pred, pred.values.copy()).item() == 0.0

    def test_mse_gradient_single_element(self):
        pred = t([1.0])
        loss = nn.mse_loss(pred, np.array([0.0]))
        loss.backward()
        assert pred.grad[0] == pytest.approx(2.0, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            nn.mse_loss(t([1.0, 2.0]), np.array([1.0]))

    def test_contrastive_hand_cases(self):
        same = nn.contrastive_loss(t([[1.0, 2.0], [1.0, 2.0]]), ["a", "a"])
        assert same.item() == 0.0
        far = nn.contrastive_loss(t([[0.0, 0.0], [0.7, 0.0]]), ["a", "b"])
        assert far.item() == 0.0
        near = nn.contrastive_loss(t([[0.0, 0.0], [0.3, 0.0]]), ["a", "b"])
        # 0.2 for each of the two ordered pairs
        assert near.item() == pytest.approx(0.4, abs=1e-12)
        assert near.item() / 2.0 == pytest.approx(0.2, abs=1e-12)

    def test_contrastive_gradcheck_away_from_margin(self):
        rng = np.random.default_rng(0)
        z = rng.normal(size=(4, 6))
        # push every pairwise distance at least 1e-3 from the 0.5 margin
        lat = t(z)
        d = np.linalg.norm(z[:, None] - z[None, :], axis=-1)
        off = np.abs(d[~np.eye(4, dtype=bool)] - 0.5)
        assert off.min() > 1e-3
        ids = np.array([0, 0, 1, 2])
        err = nn.grad_check(lambda v: nn.contrastive_loss(v, ids), (lat,))
        assert err < 1e-6

    def test_contrastive_needs_batch(self):
        with pytest.raises(ShapeMismatchError):
            nn.contrastive_loss(t([[1.0, 2.0]]), ["a"])

    def test_combined_loss(self):
        assert nn.combined_loss(0.1, 2.0) == pytest.approx(0.2, abs=1e-12)
        assert nn.combined_loss(0.0, 0.0) == 0.0
        # linear in each component
        assert nn.combined_loss(0.2, 2.0) - nn.combined_loss(0.1, 2.0) == pytest.approx(0.1)
        # disabling contrastive weight reproduces pure MSE
        assert nn.combined_loss(0.37, 123.0, w_c=0.0) == pytest.approx(0.37)

    def test_combined_loss_tensor_path(self):
        a = t([3.0])
        b = t([5.0])
        out = nn.combined_loss(nn.mse_loss(a, np.array([0.0])), nn.mse_loss(b, np.array([0.0])))
        assert out.item() == pytest.approx(9.0 + 0.05 * 25.0, abs=1e-12)
        out.backward()
        assert a.grad[0] == pytest.approx(6.0, abs=1e-12)
        assert b.grad[0] == pytest.approx(0.05 * 10.0, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(m=st.floats(0, 10), c=st.floats(0, 10), wm=st.floats(0, 5), wc=st.floats(0, 5))
    def test_combined_linearity(self, m, c, wm, wc):
        assert nn.combined_loss(m, c, wm, wc) == pytest.approx(wm * m + wc * c, rel=1e-12)


class TestAdam:
    def test_zero_gradient_keeps_parameters(self):
        ps = nn.ParameterSet()
        w = ps.add("w", np.ones(4))
        w.accumulate_grad(np.zeros(4))
        nn.adam_step(ps, 0.5)
        np.testing.assert_array_equal(ps["w"].values, np.ones(4))

    def test_first_step_magnitude_is_lr(self):
        ps = nn.ParameterSet()
        w = ps.add("w", np.zeros(3))
        w.accumulate_grad(np.array([0.5, -2.0, 0.01]))
        nn.adam_step(ps, 0.1)
        np.testing.assert_allclose(np.abs(ps["w"].values), 0.1, rtol=1e-4)
        assert np.sign(ps["w"].values).tolist() == [-1.0, 1.0, -1.0]

    def test_descent_on_quadratic(self):
        ps = nn.ParameterSet()
        ps.add("w", np.array([3.0]))
        losses = []
        for _ in range(3):
            ps.zero_grads()
            loss = nn.mse_loss(ps["w"], np.array([0.0]))
            losses.append(loss.item())
            loss.backward()
            nn.adam_step(ps, 0.1)
        assert losses[0] > losses[1] > losses[2]

    def test_missing_gradient_raises(self):
        ps = nn.ParameterSet()
        ps.add("w", np.ones(2))
        with pytest.raises(nn.MissingGradientError, match="'w'"):
            nn.adam_step(ps, 0.1)

    def test_duplicate_name_rejected(self):
        ps = nn.ParameterSet()
        ps.add("w", np.ones(2))
        with pytest.raises(ValueError):
            ps.add("w", np.ones(2))


class TestSchedules:
    def test_decoder_halving_sequence(self):
        sched = nn.Schedule("step-halving", 5e-4, step_interval=300)
        got = [nn.schedule_lr(sched, e) for e in (0, 300, 600, 900)]
        assert got == [5e-4, 2.5e-4, 1.25e-4, 6.25e-5]

    def test_encoder_exponential(self):
        sched = nn.Schedule("exponential", 1e-4, decay_factor=0.97)
        assert nn.schedule_lr(sched, 0) == pytest.approx(1e-4, abs=1e-16)
        assert nn.schedule_lr(sched, 1) == pytest.approx(9.7e-5, abs=1e-16)

    def test_validation(self):
        with pytest.raises(ValueError):
            nn.Schedule("exponential", 1e-4, decay_factor=1.5)
        with pytest.raises(ValueError):
            nn.Schedule("step-halving", 1e-4)
        with pytest.raises(ValueError):
            nn.Schedule("warmup", 1e-4)
        with pytest.raises(ValueError):
            nn.schedule_lr(nn.Schedule("exponential", 1e-4, decay_factor=0.9), -1)


class TestCheckpoint:
    def test_round_trip_with_optimizer_state(self, tmp_path):
        rng = np.random.default_rng(0)
        ps = nn.ParameterSet()
        ps.add("a.w", rng.normal(size=(4, 3)).astype(np.float32))
        ps.add("a.b", np.zeros(3, dtype=np.float32))
        for _name, state in ps:
            state.tensor.accumulate_grad(np.ones_like(state.tensor.values))
        nn.adam_step(ps, 1e-3)
        path = tmp_path / "model.ckpt"
        nn.save_checkpoint(path, ps, {"seed": 11, "epoch": 3})
        back, meta = nn.load_checkpoint(path)
        assert meta == {"seed": 11, "epoch": 3}
        assert back.names() == ps.names()
        for name, state in ps:
            np.testing.assert_array_equal(back[name].values, state.tensor.values)
            np.testing.assert_array_equal(back.state(name).m, state.m)
            np.testing.assert_array_equal(back.state(name).v, state.v)
            assert back.state(name).step == state.step

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(nn.CheckpointError):
            nn.load_checkpoint(path)
