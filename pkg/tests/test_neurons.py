import numpy as np
import pytest

from spikescan import numerics as nm
from spikescan.errors import LengthMismatch, ShapeMismatch
from spikescan.neurons import (DsnNeuron, DsnParams, DsnState, LifNeuron,
                               NeuronConfig, NeuronState, PsnNeuron,
                               PsnParams, dsn_dynamic_decay,
                               dsn_forward_parallel, dsn_serial_trace,
                               dsn_step, lif_sequence, lif_step, lif_trace,
                               make_neuron, psn_forward)
from spikescan.numerics import Rectangular, Tensor
from spikescan.scan import ScanProblem, matrix_form


def test_lif_step_hand_evaluated():
    cfg = NeuronConfig(beta=0.5, v_th=1.0, reset_mode="hard")
    state = NeuronState.zeros(1, 2)
    s, new = lif_step(cfg, state, Tensor([[2.0, 0.6]]))
    np.testing.assert_array_equal(s.data, [[1.0, 0.0]])
    # hard reset clears the firing lane, keeps the other at H
    np.testing.assert_allclose(new.v.data, [[0.0, 0.3]])
    assert new.t == 1


def test_if_soft_burst_spikes_four_steps():
    cfg = NeuronConfig.integrate_fire("soft")
    x = np.zeros((1, 1, 6))
    x[0, 0, 0] = 4.0
    s, h, _ = lif_trace(cfg, x)
    np.testing.assert_array_equal(s[0, 0], [1, 1, 1, 1, 0, 0])
    np.testing.assert_array_equal(h[0, 0], [4, 3, 2, 1, 0, 0])


def test_zero_input_stays_silent():
    cfg = NeuronConfig(beta=0.5, reset_mode="soft")
    s, h, v = lif_trace(cfg, np.zeros((2, 3, 10)))
    assert not s.any() and not h.any() and not v.any()


def test_no_reset_if_accumulates_linearly():
    cfg = NeuronConfig.integrate_fire("none")
    x = np.full((1, 1, 8), 0.5)
    _, h, _ = lif_trace(cfg, x)
    np.testing.assert_allclose(h[0, 0], 0.5 * np.arange(1, 9))


def test_beta_zero_is_memoryless():
    cfg = NeuronConfig(beta=0.0, reset_mode="hard")
    rng = np.random.default_rng(0)
    x = rng.normal(size=(1, 2, 12))
    _, h, _ = lif_trace(cfg, x)
    np.testing.assert_array_equal(h, x)


def test_sequence_matches_step_fold_bit_exactly():
    cfg = NeuronConfig(beta=0.25, v_th=1.0, reset_mode="soft")
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2, 3, 40)) * 2.0
    s_seq, h_seq, v_seq = lif_sequence(cfg, Tensor(x))
    state = NeuronState.zeros(2, 3)
    for t in range(40):
        s, state = lif_step(cfg, state, Tensor(x[..., t]))
        np.testing.assert_array_equal(s.data, s_seq.data[..., t])
        np.testing.assert_array_equal(state.v.data, v_seq.data[..., t])


def test_config_validation():
    with pytest.raises(ValueError):
        NeuronConfig(beta=1.0)
    with pytest.raises(ValueError):
        NeuronConfig(beta=0.5, v_th=0.0)
    with pytest.raises(ValueError):
        NeuronConfig(beta=0.5, reset_mode="bounce")


# ---------------------------------------------------------------------------
# dynamic decay


def test_decay_of_zero_preactivation():
    params = DsnParams(conv_kernel=nm.zeros((3, 4)), conv_bias=nm.zeros((3,)),
                       tau=1.0)
    alpha = dsn_dynamic_decay(params, nm.zeros((2, 3, 4)))
    np.testing.assert_allclose(alpha.data, 0.5)


def test_decay_sharpening_power():
    params = DsnParams(conv_kernel=nm.zeros((1, 4)), conv_bias=nm.zeros((1,)),
                       tau=0.25)
    alpha = dsn_dynamic_decay(params, nm.zeros((1, 1, 4)))
    np.testing.assert_allclose(alpha.data, 0.5 ** 4)


def test_decay_strictly_inside_unit_interval():
    rng = np.random.default_rng(2)
    params = DsnParams.init(channels=5, seed=0)
    window = Tensor(rng.normal(size=(4, 5, 4)) * 50.0)
    alpha = dsn_dynamic_decay(params, window).data
    assert np.all(alpha > 0.0) and np.all(alpha < 1.0)


def test_dsn_step_degenerate_decay_tracks_input():
    # a hugely negative bias drives the decay to zero: H_t = x_t
    params = DsnParams(conv_kernel=nm.zeros((2, 4)),
                       conv_bias=Tensor([-2000.0, -2000.0]))
    state = DsnState.zeros(1, 2, 4)
    rng = np.random.default_rng(3)
    for _ in range(5):
        x_t = rng.normal(size=(1, 2)) * 3.0
        s, state = dsn_step(params, state, x_t)
        np.testing.assert_array_equal(state.h, x_t)
        np.testing.assert_array_equal(
            s, np.clip(nm.round_half_away(x_t), 0, 4))


def test_dsn_long_control_bound():
    rng = np.random.default_rng(4)
    params = DsnParams.init(channels=3, seed=1)
    c_max = 2.5
    x = rng.uniform(0.0, c_max, size=(2, 3, 200))
    _, h, _ = dsn_serial_trace(params, x)
    assert h.max() <= c_max


def test_dsn_serial_equals_parallel():
    rng = np.random.default_rng(5)
    params = DsnParams.init(channels=4, k=4, seed=2)
    x = rng.normal(size=(2, 4, 1024)) * 2.0
    s_ser, h_ser, a_ser = dsn_serial_trace(params, x)
    s_par, h_par, a_par = dsn_forward_parallel(params, Tensor(x))
    np.testing.assert_array_equal(a_ser, a_par.data)
    assert np.max(np.abs(h_ser - h_par.data)) <= 1e-10
    np.testing.assert_array_equal(s_ser, s_par.data)


def test_dsn_t1_reduces_to_step():
    rng = np.random.default_rng(6)
    params = DsnParams.init(channels=2, seed=3)
    x = rng.normal(size=(1, 2, 1))
    s_par, h_par, _ = dsn_forward_parallel(params, Tensor(x))
    s_step, state = dsn_step(params, DsnState.zeros(1, 2, 4), x[..., 0])
    np.testing.assert_array_equal(s_par.data[..., 0], s_step)
    np.testing.assert_allclose(h_par.data[..., 0], state.h, atol=1e-14)


def test_dsn_matches_matrix_form_oracle():
    # tau = 1 keeps the decays inside the matrix-form guard band
    rng = np.random.default_rng(7)
    params = DsnParams.init(channels=3, k=4, tau=1.0, seed=4)
    x = rng.normal(size=(2, 3, 32)) * 0.5
    _, h_par, alpha = dsn_forward_parallel(params, Tensor(x))
    h_mat = matrix_form(ScanProblem(alpha, Tensor(x)))
    assert np.max(np.abs(h_par.data - h_mat.data)) <= 1e-8


def test_dsn_streaming_state_is_bounded():
    params = DsnParams.init(channels=2, k=4, seed=5)
    neuron = DsnNeuron(params)
    state = neuron.init_state(1, 2)
    sizes = set()
    rng = np.random.default_rng(8)
    for _ in range(50):
        _, _, state = neuron.step(state, rng.normal(size=(1, 2)))
        sizes.add(neuron.state_size(state))
    assert len(sizes) == 1
    assert state.window.shape[-1] == params.kernel_size - 1


def test_dsn_params_validation():
    with pytest.raises(ValueError):
        DsnParams(conv_kernel=nm.zeros((2, 4)), tau=0.0)
    with pytest.raises(ValueError):
        DsnParams(conv_kernel=nm.zeros((2, 4)), n_max=0)
    with pytest.raises(ShapeMismatch):
        DsnParams(conv_kernel=nm.zeros((2, 4)), conv_bias=nm.zeros((3,)))


def test_enhanced_dsn_channel_mix_identity_is_noop():
    rng = np.random.default_rng(9)
    base = DsnParams.init(channels=3, seed=6)
    mixed = DsnParams(conv_kernel=base.conv_kernel, conv_bias=base.conv_bias,
                      channel_mix=Tensor(np.eye(3)), tau=base.tau,
                      n_max=base.n_max)
    x = rng.normal(size=(1, 3, 20))
    _, h_a, _ = dsn_forward_parallel(base, Tensor(x))
    _, h_b, _ = dsn_forward_parallel(mixed, Tensor(x))
    np.testing.assert_allclose(h_a.data, h_b.data, atol=1e-12)


# ---------------------------------------------------------------------------
# PSN family


def test_sliding_delta_kernel_is_instantaneous_threshold():
    params = PsnParams.sliding(Tensor([1.0, 0.0, 0.0]))
    rng = np.random.default_rng(10)
    x = rng.normal(size=(2, 3, 15)) * 2.0
    s = psn_forward(params, Tensor(x), v_th=1.0)
    np.testing.assert_array_equal(s.data, (x >= 1.0).astype(float))


def test_full_psn_rejects_other_lengths():
    params = PsnParams.init_decay("full", t_train=16)
    with pytest.raises(LengthMismatch):
        psn_forward(params, Tensor(np.zeros((1, 1, 17))))
    with pytest.raises(LengthMismatch):
        psn_forward(params, Tensor(np.zeros((1, 1, 8))))


def test_masked_equals_full_on_lower_triangular_weight():
    rng = np.random.default_rng(11)
    t = 12
    w = np.tril(rng.normal(size=(t, t)))
    full = PsnParams.full(Tensor(w))
    masked = PsnParams.masked(Tensor(w), k=t)
    x = Tensor(rng.normal(size=(2, 2, t)))
    np.testing.assert_array_equal(psn_forward(full, x).data,
                                  psn_forward(masked, x).data)


def test_full_psn_depends_on_future_inputs():
    rng = np.random.default_rng(12)
    t = 10
    params = PsnParams.full(Tensor(rng.normal(size=(t, t))))
    x = rng.normal(size=(1, 1, t))
    x2 = x.copy()
    x2[0, 0, -1] += 3.0  # change only the last step
    s1 = psn_forward(params, Tensor(x)).data
    s2 = psn_forward(params, Tensor(x2)).data
    assert not np.array_equal(s1[..., :-1], s2[..., :-1])


def test_masked_psn_is_causal():
    rng = np.random.default_rng(13)
    t = 10
    params = PsnParams.init_decay("masked", t_train=t, k=4)
    x = rng.normal(size=(1, 1, t))
    x2 = x.copy()
    x2[0, 0, -1] += 3.0
    s1 = psn_forward(params, Tensor(x)).data
    s2 = psn_forward(params, Tensor(x2)).data
    np.testing.assert_array_equal(s1[..., :-1], s2[..., :-1])


def test_masked_band_enforced():
    rng = np.random.default_rng(14)
    w = rng.normal(size=(8, 8))
    params = PsnParams.masked(Tensor(w), k=3)
    dense = params.weight.data
    for i in range(8):
        for j in range(8):
            inside = (j <= i) and (j > i - 3)
            if not inside:
                assert dense[i, j] == 0.0


def test_full_psn_flag_and_sliding_step_matches_sequence():
    full = PsnParams.init_decay("full", t_train=8)
    assert full.non_causal
    sliding = PsnNeuron(PsnParams.init_decay("sliding", k=5))
    rng = np.random.default_rng(15)
    x = rng.normal(size=(2, 3, 30))
    np.testing.assert_array_equal(sliding.serial_fold(x),
                                  sliding.sequence(Tensor(x)).data)


# ---------------------------------------------------------------------------
# nonlinearity witnesses


def test_reset_introduces_nonlinearity():
    cfg = NeuronConfig(beta=0.5, v_th=1.0, reset_mode="hard")
    x = np.array([[[1.2, 0.4]]])
    y = np.array([[[1.2, 0.4]]])
    _, h_x, _ = lif_trace(cfg, x)
    _, h_y, _ = lif_trace(cfg, y)
    _, h_xy, _ = lif_trace(cfg, x + y)
    assert np.max(np.abs(h_xy - (h_x + h_y))) > 0.1


def test_no_reset_is_linear():
    cfg = NeuronConfig(beta=0.5, v_th=1.0, reset_mode="none")
    rng = np.random.default_rng(16)
    x = rng.normal(size=(1, 2, 30))
    y = rng.normal(size=(1, 2, 30))
    _, h_x, _ = lif_trace(cfg, x)
    _, h_y, _ = lif_trace(cfg, y)
    _, h_xy, _ = lif_trace(cfg, x + y)
    assert np.max(np.abs(h_xy - (h_x + h_y))) <= 1e-12


def test_dynamic_decay_is_nonlinear():
    params = DsnParams.init(channels=2, seed=7)
    rng = np.random.default_rng(17)
    x = rng.normal(size=(1, 2, 20))
    y = rng.normal(size=(1, 2, 20))
    _, h_x, _ = dsn_serial_trace(params, x)
    _, h_y, _ = dsn_serial_trace(params, y)
    _, h_xy, _ = dsn_serial_trace(params, x + y)
    assert np.max(np.abs(h_xy - (h_x + h_y))) > 1e-3


def test_make_neuron_registry():
    for kind in ("lif-hard", "if-soft", "dsn", "sliding-psn"):
        neuron = make_neuron(kind, channels=2, t_train=16)
        assert neuron.name == kind if kind != "dsn" else True
    with pytest.raises(ValueError):
        make_neuron("unknown-kind")
    with pytest.raises(ValueError):
        make_neuron("psn")  # needs t_train


def test_lif_none_gains_parallel_path():
    neuron = make_neuron("lif-none")
    rng = np.random.default_rng(18)
    x = rng.normal(size=(1, 2, 50))
    s_par = neuron.sequence(Tensor(x)).data
    np.testing.assert_array_equal(s_par, neuron.serial_fold(x))
