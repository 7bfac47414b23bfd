import numpy as np
import pytest

from spikescan.energy import (Conv1D, FullyConnected, LayerSpec, NeuronLayer,
                              REFERENCE_ENERGY_TOTALS, count_flops,
                              estimate_energy, measure_firing_rate,
                              neuron_flops_breakdown, reference_energy_report,
                              scifar_layer_stack)
from spikescan.errors import MissingFiringRate


def test_fc_flops():
    assert count_flops(FullyConnected(1024, 256)) == 262144


def test_conv_flops():
    assert count_flops(Conv1D(3, 32, 3, 128)) == 3 * 32 * 3 * 128


def test_neuron_internal_flops_formulas():
    assert count_flops(NeuronLayer("lif", 128, 32)) == 128 * 32
    assert count_flops(NeuronLayer("psn", 128, 32)) == 128 * 32 * 32
    assert count_flops(NeuronLayer("sliding-psn", 128, 32)) == 0.5 * 128 * 32 * 32
    assert count_flops(NeuronLayer("dsn", 128, 32, k=4)) == (4 + 1 + 1) * 128 * 32


def test_dsn_flops_breakdown():
    parts = neuron_flops_breakdown(NeuronLayer("dsn", 128, 32, k=4))
    assert parts == {"conv": 4 * 128 * 32, "sigmoid": 128 * 32,
                     "update": 128 * 32}


def test_unknown_neuron_kind():
    with pytest.raises(ValueError):
        count_flops(NeuronLayer("izhikevich", 1, 1))


def test_positive_extent_validation():
    with pytest.raises(ValueError):
        LayerSpec("bad", FullyConnected(0, 10))


def test_single_sigmoid_costs_2_34_pj():
    layer = LayerSpec("n", NeuronLayer("dsn", 1, 1, k=4))
    rep = estimate_energy([layer], {}, timesteps=1)
    assert rep.layers[0].sigmoid_energy_pj == pytest.approx(2.34)


def test_zero_firing_rate_zero_spike_energy():
    layers = [LayerSpec("fc", FullyConnected(64, 32), input_is_spike=True)]
    rep = estimate_energy(layers, {"fc": 0.0}, timesteps=8)
    assert rep.layers[0].ac_energy_pj == 0.0
    assert rep.total_pj == 0.0


def test_missing_firing_rate_raises():
    layers = [LayerSpec("fc", FullyConnected(64, 32), input_is_spike=True)]
    with pytest.raises(MissingFiringRate):
        estimate_energy(layers, {}, timesteps=8)


def test_energy_monotone_in_firing_rate():
    layers = scifar_layer_stack("dsn")
    base_rates = {"conv2": 0.1, "conv3": 0.1, "conv4": 0.1, "conv5": 0.1,
                  "conv6": 0.1, "fc1": 0.1, "fc2": 0.1}
    base = estimate_energy(layers, base_rates, timesteps=32).total_pj
    for name in base_rates:
        bumped = dict(base_rates)
        bumped[name] = 0.2
        assert estimate_energy(layers, bumped, timesteps=32).total_pj >= base


def test_reference_reconciliation_within_10_percent():
    for kind, ref in REFERENCE_ENERGY_TOTALS["s-cifar10"].items():
        est = reference_energy_report(kind, "s-cifar10").total_mj
        assert abs(est - ref) / ref <= 0.10, (kind, est, ref)


def test_reference_reconciliation_cifar100_within_10_percent():
    for kind, ref in REFERENCE_ENERGY_TOTALS["s-cifar100"].items():
        est = reference_energy_report(kind, "s-cifar100").total_mj
        assert abs(est - ref) / ref <= 0.10, (kind, est, ref)


def test_report_totals_are_sums():
    rep = reference_energy_report("dsn")
    assert rep.total_pj == pytest.approx(sum(l.total_pj for l in rep.layers))
    assert rep.total_mj == pytest.approx(rep.total_pj / 1e6)
    assert all(l.total_pj >= 0 for l in rep.layers)


def test_stack_shape():
    layers = scifar_layer_stack("dsn", classes=10)
    names = [l.name for l in layers]
    assert names[0] == "conv1" and not layers[0].input_is_spike
    assert "fc2" in names
    assert sum("neuron" in n for n in names) == 7


class _StubModel:
    def __init__(self, traces):
        self._traces = traces

    def spike_traces(self, x):
        return self._traces


def test_measure_firing_rate_conventions():
    traces = {"a": np.zeros((2, 3, 4)), "b": np.full((2, 3, 4), 4.0)}
    rates = measure_firing_rate(_StubModel(traces), np.zeros(1), n_max=4)
    assert rates["mean"]["a"] == 0.0
    assert rates["mean"]["b"] == 4.0
    assert rates["normalized"]["b"] == 1.0


def test_measure_firing_rate_binary_saturated():
    traces = {"layer": np.ones((1, 2, 8))}
    rates = measure_firing_rate(_StubModel(traces), np.zeros(1))
    assert rates["mean"]["layer"] == 1.0
    assert rates["normalized"]["layer"] == 1.0
