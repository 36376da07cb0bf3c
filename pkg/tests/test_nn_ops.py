import numpy as np
import pytest

from tubervol import nn
from tubervol.errors import NonFiniteError, ShapeMismatchError


def t(values, grad=True):
    return nn.DiffTensor(np.asarray(values, dtype=np.float64), requires_grad=grad)


class TestForward:
    def test_dense(self):
        x = t([[1.0, 2.0]])
        w = t([[1.0, 0.0], [0.0, 1.0]])
        b = t([10.0, 20.0])
        np.testing.assert_allclose(nn.dense(x, w, b).values, [[11.0, 22.0]])

    def test_dense_shape_error_names_both_shapes(self):
        with pytest.raises(ShapeMismatchError, match=r"\(1, 3\).*\(2, 2\)"):
            nn.dense(t(np.zeros((1, 3))), t(np.zeros((2, 2))), t(np.zeros(2)))

    def test_conv2d_identity_kernel(self):
        rng = np.random.default_rng(0)
        x = t(rng.normal(size=(1, 5, 5, 1)))
        k = np.zeros((1, 1, 3, 3))
        k[0, 0, 1, 1] = 1.0
        out = nn.conv2d(x, t(k), t(np.zeros(1)))
        np.testing.assert_allclose(out.values, x.values)

    def test_conv2d_channel_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            nn.conv2d(t(np.zeros((1, 4, 4, 2))), t(np.zeros((3, 4, 3, 3))), t(np.zeros(3)))

    def test_maxpool_spatial_trace(self):
        x = nn.DiffTensor(np.zeros((1, 304, 304, 1)))
        sizes = []
        for _ in range(7):
            x = nn.maxpool2d(x)
            sizes.append(x.shape[1])
        assert sizes == [152, 76, 38, 19, 9, 4, 2]

    def test_maxpool_padding_never_wins(self):
        # all-negative input: -inf padding must not leak into the output
        x = nn.DiffTensor(np.full((1, 6, 6, 1), -5.0))
        out = nn.maxpool2d(x)
        assert (out.values == -5.0).all()

    def test_leaky_relu_values(self):
        out = nn.leaky_relu(t([-1.0, 3.0]))
        np.testing.assert_allclose(out.values, [-0.2, 3.0])

    def test_relu_tanh_flatten(self):
        assert nn.relu(t([-2.0, 2.0])).values.tolist() == [0.0, 2.0]
        np.testing.assert_allclose(nn.tanh(t([0.0])).values, [0.0])
        assert nn.flatten(t(np.zeros((2, 3, 4, 5)))).shape == (2, 60)

    def test_deterministic_forward(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(2, 8, 8, 3))
        k = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        a = nn.conv2d(t(x), t(k), t(b)).values
        bb = nn.conv2d(t(x), t(k), t(b)).values
        np.testing.assert_array_equal(a, bb)

    def test_conv_parameter_count_first_block(self):
        # 4 -> 16 channels, 3x3: 4*9*16 + 16 = 592
        k = np.zeros((16, 4, 3, 3))
        b = np.zeros(16)
        assert k.size + b.size == 592

    def test_finite_check_mode(self):
        nn.debug_checks(True)
        try:
            with pytest.raises(NonFiniteError):
                nn.DiffTensor(np.array([np.nan]))
        finally:
            nn.debug_checks(False)


class TestGradients:
    def test_dense_gradcheck(self):
        rng = np.random.default_rng(0)
        x = t(rng.normal(size=(8, 8)))
        w = t(rng.normal(size=(8, 8)))
        b = t(rng.normal(size=8))
        assert nn.grad_check(nn.dense, (x, w, b)) < 1e-6

    def test_conv2d_gradcheck(self):
        rng = np.random.default_rng(1)
        x = t(rng.normal(size=(2, 6, 6, 2)))
        k = t(rng.normal(size=(3, 2, 3, 3)))
        b = t(rng.normal(size=3))
        assert nn.grad_check(nn.conv2d, (x, k, b)) < 1e-5

    def test_maxpool_gradcheck_away_from_ties(self):
        rng = np.random.default_rng(2)
        vals = rng.permutation(np.arange(72, dtype=np.float64)).reshape(2, 6, 6, 1) * 0.01
        assert nn.grad_check(nn.maxpool2d, (t(vals),)) < 1e-6

    def test_activation_gradchecks_away_from_kinks(self):
        rng = np.random.default_rng(3)
        raw = rng.normal(size=(4, 4))
        vals = np.sign(raw) * (np.abs(raw) + 1e-2)
        assert nn.grad_check(nn.leaky_relu, (t(vals),)) < 1e-6
        assert nn.grad_check(nn.relu, (t(vals),)) < 1e-6
        assert nn.grad_check(nn.tanh, (t(vals),)) < 1e-6

    def test_gradient_accumulation_shared_input(self):
        x = t([[1.0, 2.0]])
        w = t(np.eye(2))
        b = t(np.zeros(2))
        y1 = nn.dense(x, w, b)
        y2 = nn.dense(x, w, b)
        out = nn.add(y1, y2)
        loss = nn.mse_loss(out, np.zeros((1, 2)))
        loss.backward()
        # loss = mean((2x)^2) over 2 elements -> dloss/dx = 4x
        np.testing.assert_allclose(x.grad, 4.0 * x.values)

    def test_gather_rows_gradcheck(self):
        rng = np.random.default_rng(4)
        table = t(rng.normal(size=(5, 3)))
        idx = np.array([0, 2, 2, 4])
        assert nn.grad_check(lambda z: nn.gather_rows(z, idx), (table,)) < 1e-6

    def test_concat_columns_gradcheck(self):
        rng = np.random.default_rng(5)
        a = t(rng.normal(size=(3, 2)))
        b = t(rng.normal(size=(3, 4)))
        assert nn.grad_check(nn.concat_columns, (a, b)) < 1e-6
