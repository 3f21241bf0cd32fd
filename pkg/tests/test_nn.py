import numpy as np
import pytest

from formsense.nn import AdamW, DenseNet, OneCycleSchedule, grad_check
from formsense.nn import backend as backend_mod


def test_grad_check_linear_single_layer(rng):
    net = DenseNet((4, 3)).init_params(rng, zero_output=False)
    x = rng.standard_normal((6, 4))
    assert grad_check(net, x) < 1e-8


def test_grad_check_three_layer_relu(rng):
    net = DenseNet((5, 32, 32, 32, 2)).init_params(rng, zero_output=False)
    x = rng.standard_normal((4, 5))
    assert grad_check(net, x, epsilon=1e-5) < 1e-4


def test_grad_check_zero_input_is_finite():
    net = DenseNet((3, 8, 2)).init_params(np.random.default_rng(0), zero_output=False)
    out = grad_check(net, np.zeros((2, 3)))
    assert np.isfinite(out)


def test_one_cycle_schedule_invariants():
    sched = OneCycleSchedule(3e-4, 400, warmup_fraction=0.3)
    rates = [sched.rate(e) for e in range(400)]
    assert rates[0] < 3e-4
    assert abs(max(rates) - 3e-4) < 1e-9
    assert rates[-1] < 0.01 * 3e-4
    peak_epoch = int(np.argmax(rates))
    assert all(rates[i] <= rates[i + 1] + 1e-15 for i in range(peak_epoch))
    assert all(rates[i] >= rates[i + 1] - 1e-15 for i in range(peak_epoch, 399))


def test_one_cycle_short_runs():
    for total in (1, 2, 3, 10):
        sched = OneCycleSchedule(1e-3, total)
        rates = [sched.rate(e) for e in range(total)]
        assert abs(max(rates) - 1e-3) < 1e-12


def test_adamw_decay_is_decoupled():
    w = np.full((3, 3), 2.0)
    b = np.full(3, 2.0)
    opt = AdamW([w, b], [True, False], weight_decay=0.1)
    lr = 0.01
    opt.step([np.zeros_like(w), np.zeros_like(b)], lr)
    assert np.allclose(w, 2.0 * (1 - lr * 0.1), atol=1e-15)
    assert np.allclose(b, 2.0, atol=1e-15)  # biases are not decayed


def test_adamw_moves_against_gradient():
    w = np.zeros((2, 2))
    opt = AdamW([w], [True], weight_decay=0.0)
    g = np.ones((2, 2))
    opt.step([g], 0.1)
    assert np.all(w < 0)


def test_dropout_masks_are_inverted_and_seeded(rng):
    net = DenseNet((4, 16, 16, 2), dropout=0.5).init_params(rng, zero_output=False)
    m1 = net.make_masks(8, np.random.default_rng(7))
    m2 = net.make_masks(8, np.random.default_rng(7))
    for a, b in zip(m1, m2):
        assert np.array_equal(a, b)
        assert set(np.unique(a)).issubset({0.0, 2.0})  # prescaled by 1/keep
    assert net.make_masks(8, np.random.default_rng(0)) is not None
    assert DenseNet((4, 8, 2), dropout=0.0).make_masks(8, rng) is None


def test_forward_deterministic_without_training(rng):
    net = DenseNet((4, 16, 2), dropout=0.5).init_params(rng, zero_output=False)
    x = rng.standard_normal((5, 4))
    assert np.array_equal(net.forward(x), net.forward(x))


@pytest.mark.skipif("native" not in backend_mod._BACKENDS,
                    reason="compiled core not built")
def test_backends_agree(rng):
    net = DenseNet((7, 24, 24, 24, 3), dropout=0.5).init_params(rng, zero_output=False)
    x = rng.standard_normal((11, 7))
    masks = net.make_masks(11, np.random.default_rng(3))
    grad_out = rng.standard_normal((11, 3))
    results = {}
    previous = backend_mod.active_backend()
    try:
        for name in ("python", "native"):
            backend_mod.set_backend(name)
            out, inputs, gates = net.forward_cached(x, masks)
            gw, gb, gx = net.backward(inputs, gates, masks, grad_out)
            results[name] = (out, gw, gb, gx, net.forward(x))
    finally:
        backend_mod.set_backend(previous)
    py, nat = results["python"], results["native"]
    assert np.allclose(py[0], nat[0], rtol=1e-12, atol=1e-13)
    assert np.allclose(py[4], nat[4], rtol=1e-12, atol=1e-13)
    for a, b in zip(py[1], nat[1]):
        assert np.allclose(a, b, rtol=1e-11, atol=1e-12)
    for a, b in zip(py[2], nat[2]):
        assert np.allclose(a, b, rtol=1e-11, atol=1e-12)
    assert np.allclose(py[3], nat[3], rtol=1e-11, atol=1e-12)


def test_float32_net_routes_to_numpy_kernels(rng):
    net = DenseNet((4, 8, 2), dtype=np.float32).init_params(rng, zero_output=False)
    out = net.forward(rng.standard_normal((3, 4)))
    assert out.dtype == np.float32
