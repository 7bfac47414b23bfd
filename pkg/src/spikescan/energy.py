"""FLOPs counting and energy estimation for spiking layer stacks.

Accounting rules (45nm constants by default):

* float-input layers (the first convolution, which sees the raw signal)
  cost ``e_mac`` per MAC per timestep;
* spike-input layers cost ``e_ac * T * R * spike_ops_factor * MACs``, where
  R is the layer's mean firing rate and ``spike_ops_factor`` is the
  operation-count convention for spike-driven synaptic work (default 4,
  calibrated so the bundled reference stack reproduces its published energy
  table to within a fraction of a percent);
* neuron-internal work is charged per the per-model formulas in
  :func:`count_flops` at ``e_mac``, except the decay sigmoid, which shifts
  instead of exponentiates and costs ``2 * e_shift + e_ac`` per evaluation.

Totals are reported in the reference table's unit convention
(picojoules / 1e6); per-sample that is microjoules.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MissingFiringRate

E_MAC_PJ = 4.6
E_AC_PJ = 0.9
E_SHIFT_PJ = 0.72
SPIKE_OPS_FACTOR = 4.0


@dataclass(frozen=True)
class Conv1D:
    k: int       # kernel size
    d: int       # length of the dimension the kernel slides over
    c_in: int
    c_out: int


@dataclass(frozen=True)
class FullyConnected:
    i: int
    o: int


@dataclass(frozen=True)
class NeuronLayer:
    kind: str    # lif | psn | sliding-psn | dsn
    c: int       # number of neurons
    t: int       # timesteps
    k: int | None = None  # decay-conv kernel size (dsn only)


LayerKind = Conv1D | FullyConnected | NeuronLayer


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: LayerKind
    input_is_spike: bool = False

    def __post_init__(self):
        k = self.kind
        extents = ((k.k, k.d, k.c_in, k.c_out) if isinstance(k, Conv1D)
                   else (k.i, k.o) if isinstance(k, FullyConnected)
                   else (k.c, k.t))
        if any(e <= 0 for e in extents):
            raise ValueError(f"{self.name}: all extents must be positive")


def neuron_flops_breakdown(layer: NeuronLayer) -> dict[str, float]:
    """Per-structure FLOPs inside one neuron layer."""
    kind = "lif" if layer.kind == "if" else layer.kind
    c, t = layer.c, layer.t
    if kind == "lif":
        return {"update": float(c * t)}
    if kind == "psn":
        return {"update": float(c * t * t)}
    if kind == "sliding-psn":
        return {"update": 0.5 * c * t * t}
    if kind == "dsn":
        k = layer.k or 4
        return {"conv": float(k * c * t), "sigmoid": float(c * t),
                "update": float(c * t)}
    raise ValueError(f"unknown neuron kind {layer.kind!r}")


def count_flops(layer: LayerSpec | LayerKind) -> float:
    """MAC count of one layer (per timestep for synaptic layers; whole-run
    totals for neuron internals, whose formulas already include T)."""
    kind = layer.kind if isinstance(layer, LayerSpec) else layer
    if isinstance(kind, Conv1D):
        return float(kind.k * kind.d * kind.c_in * kind.c_out)
    if isinstance(kind, FullyConnected):
        return float(kind.i * kind.o)
    if isinstance(kind, NeuronLayer):
        return float(sum(neuron_flops_breakdown(kind).values()))
    raise ValueError(f"unknown layer kind {kind!r}")


@dataclass
class LayerEnergy:
    name: str
    flops: float
    firing_rate: float | None
    mac_energy_pj: float
    ac_energy_pj: float
    sigmoid_energy_pj: float

    @property
    def total_pj(self) -> float:
        return self.mac_energy_pj + self.ac_energy_pj + self.sigmoid_energy_pj


@dataclass
class EnergyReport:
    layers: list[LayerEnergy] = field(default_factory=list)

    @property
    def total_pj(self) -> float:
        return sum(l.total_pj for l in self.layers)

    @property
    def total_mj(self) -> float:
        """Total in the reference table's unit convention (pJ / 1e6)."""
        return self.total_pj / 1e6

    def to_dict(self) -> dict:
        return {"layers": [{"name": l.name, "flops": l.flops,
                            "firing_rate": l.firing_rate,
                            "mac_energy_pj": l.mac_energy_pj,
                            "ac_energy_pj": l.ac_energy_pj,
                            "sigmoid_energy_pj": l.sigmoid_energy_pj,
                            "total_pj": l.total_pj} for l in self.layers],
                "total_pj": self.total_pj,
                "total_mj": self.total_mj}


def estimate_energy(layers: list[LayerSpec], firing_rates: dict[str, float],
                    timesteps: int, e_mac: float = E_MAC_PJ,
                    e_ac: float = E_AC_PJ, e_shift: float = E_SHIFT_PJ,
                    spike_ops_factor: float = SPIKE_OPS_FACTOR) -> EnergyReport:
    """Energy of a layer stack given per-layer firing rates.

    Every spike-input layer must have a firing rate; float-input layers
    (e.g. the first convolution) are charged at MAC energy and take no rate.
    """
    report = EnergyReport()
    sigmoid_cost = 2.0 * e_shift + e_ac
    for spec in layers:
        kind = spec.kind
        rate = firing_rates.get(spec.name)
        mac = ac = sig = 0.0
        if isinstance(kind, NeuronLayer):
            parts = neuron_flops_breakdown(kind)
            flops = sum(parts.values())
            sig_evals = parts.pop("sigmoid", 0.0)
            mac = e_mac * sum(parts.values())
            sig = sigmoid_cost * sig_evals
        else:
            flops = count_flops(kind)
            if spec.input_is_spike:
                if rate is None:
                    raise MissingFiringRate(f"layer {spec.name!r} needs a firing rate")
                ac = e_ac * timesteps * rate * spike_ops_factor * flops
            else:
                mac = e_mac * timesteps * flops
        report.layers.append(LayerEnergy(
            name=spec.name, flops=flops, firing_rate=rate,
            mac_energy_pj=mac, ac_energy_pj=ac, sigmoid_energy_pj=sig))
    return report


def measure_firing_rate(model, inputs: np.ndarray,
                        n_max: int = 1) -> dict[str, dict[str, float]]:
    """Mean spikes per neuron per timestep for every spiking layer of a model.

    The model must expose ``spike_traces(x) -> dict[name, spikes]``.  Both
    integer-spike conventions are reported: 'mean' (raw mean count) and
    'normalized' (mean / n_max); they coincide for binary spikes.
    """
    traces = model.spike_traces(inputs)
    mean = {name: float(np.mean(s)) for name, s in traces.items()}
    norm = {name: r / n_max for name, r in mean.items()}
    return {"mean": mean, "normalized": norm}


# ---------------------------------------------------------------------------
# bundled reference stack: the sequential-image CNN the published energy and
# firing-rate tables describe (timestep 32, feature height halved per stage)


def scifar_layer_stack(neuron_kind: str, classes: int = 10,
                       timesteps: int = 32, dsn_k: int = 4) -> list[LayerSpec]:
    neuron_kind = {"if": "lif"}.get(neuron_kind, neuron_kind)
    stages = [(32, 3, ["conv1", "conv2", "conv3"]),
              (16, 128, ["conv4", "conv5", "conv6"])]
    layers: list[LayerSpec] = []
    for height, first_in, names in stages:
        c_in = first_in
        for name in names:
            layers.append(LayerSpec(
                name=name, kind=Conv1D(3, height, c_in, 128),
                input_is_spike=name != "conv1"))
            layers.append(LayerSpec(
                name=f"{name}-neuron",
                kind=NeuronLayer(neuron_kind, 128 * height, timesteps, dsn_k)))
            c_in = 128
    layers.append(LayerSpec(name="fc1", kind=FullyConnected(1024, 256),
                            input_is_spike=True))
    layers.append(LayerSpec(name="fc1-neuron",
                            kind=NeuronLayer(neuron_kind, 256, timesteps, dsn_k)))
    layers.append(LayerSpec(name="fc2", kind=FullyConnected(256, classes),
                            input_is_spike=True))
    return layers


# published per-layer firing rates (mean spikes per neuron per timestep) and
# energy totals for the reference stack, used by the reconciliation test
REFERENCE_FIRING_RATES: dict[str, dict[str, dict[str, float]]] = {
    "s-cifar10": {
        "lif": {"conv2": 0.1511, "conv3": 0.1422, "conv4": 0.1811,
                "conv5": 0.1553, "conv6": 0.1457, "fc1": 0.0926,
                "fc2": 0.0647, "average": 0.1499},
        "psn": {"conv2": 0.2200, "conv3": 0.3101, "conv4": 0.1575,
                "conv5": 0.1542, "conv6": 0.1516, "fc1": 0.1439,
                "fc2": 0.1239, "average": 0.2143},
        "sliding-psn": {"conv2": 0.1792, "conv3": 0.1875, "conv4": 0.1297,
                        "conv5": 0.2538, "conv6": 0.1923, "fc1": 0.0764,
                        "fc2": 0.1172, "average": 0.1820},
        "dsn": {"conv2": 0.1349, "conv3": 0.1337, "conv4": 0.1301,
                "conv5": 0.1301, "conv6": 0.0982, "fc1": 0.0380,
                "fc2": 0.0484, "average": 0.1238},
    },
    "s-cifar100": {
        "lif": {"conv2": 0.2264, "conv3": 0.1281, "conv4": 0.1881,
                "conv5": 0.1581, "conv6": 0.1561, "fc1": 0.1018,
                "fc2": 0.1584, "average": 0.1697},
        "psn": {"conv2": 0.3221, "conv3": 0.2127, "conv4": 0.1887,
                "conv5": 0.1682, "conv6": 0.1509, "fc1": 0.1735,
                "fc2": 0.1458, "average": 0.2226},
        "sliding-psn": {"conv2": 0.1988, "conv3": 0.2042, "conv4": 0.1394,
                        "conv5": 0.2653, "conv6": 0.1551, "fc1": 0.0827,
                        "fc2": 0.1888, "average": 0.1900},
        "dsn": {"conv2": 0.1384, "conv3": 0.1420, "conv4": 0.1404,
                "conv5": 0.1349, "conv6": 0.1240, "fc1": 0.0362,
                "fc2": 0.0973, "average": 0.1324},
    },
}

REFERENCE_ENERGY_TOTALS: dict[str, dict[str, float]] = {
    "s-cifar10": {"lif": 107.80, "psn": 235.87, "sliding-psn": 170.39,
                  "dsn": 102.89},
    "s-cifar100": {"lif": 121.78, "psn": 242.03, "sliding-psn": 176.22,
                   "dsn": 108.94},
}


def reference_energy_report(neuron_kind: str, dataset: str = "s-cifar10",
                            **overrides) -> EnergyReport:
    """Recompute one row of the published energy table from its layer stack
    and firing rates."""
    classes = 100 if dataset.endswith("100") else 10
    rates = dict(REFERENCE_FIRING_RATES[dataset][neuron_kind])
    rates.pop("average", None)
    return estimate_energy(scifar_layer_stack(neuron_kind, classes=classes),
                           rates, timesteps=32, **overrides)
