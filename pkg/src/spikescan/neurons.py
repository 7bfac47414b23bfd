"""Spiking neuron models with dual serial/parallel execution.

Every neuron realizes the same four-map interface: a prefix map phi that
summarizes past inputs into a membrane potential, a firing map g from
potential to spikes, an online update u for stepwise inference, and -- where
the structure allows it -- a parallel map p evaluating a whole sequence at
once.  Serial-capable neurons guarantee that folding ``step`` over time and
calling ``sequence`` produce the same spikes.

Models:

* ``LifNeuron`` -- leaky (or non-leaky) integrate-and-fire with hard, soft
  or no reset.  Stepwise only, except that the no-reset variant degenerates
  to a linear recurrence and gains a parallel path through the scan.
* ``DsnNeuron`` -- reset-free neuron whose decay is produced per step from
  the last k inputs by a depthwise causal convolution and a sharpened
  sigmoid; fires integer spikes clip(round(H), 0, N).  Parallel via the
  scan, serial via an O(C*k) ring buffer.
* ``PsnNeuron`` -- the learnable time-by-time weight family: full (dense,
  non-causal), masked (banded lower-triangular) and sliding (k shared
  weights).  Full/masked are locked to their training length and raise
  LengthMismatch elsewhere; sliding accepts any length and can step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .errors import LengthMismatch, ShapeMismatch
from .numerics import SurrogateKind, Rectangular, Tensor, heaviside, round_half_away
from .scan import linear_scan, scan

HARD, SOFT, NONE = "hard", "soft", "none"
_RESETS = (HARD, SOFT, NONE)


# ---------------------------------------------------------------------------
# classical integrate-and-fire


@dataclass(frozen=True)
class NeuronConfig:
    """Parameters of a classical neuron.

    beta is the decay factor 1 - 1/tau_m and is ignored for the pure
    accumulator (leak='if').
    """

    beta: float = 0.5
    v_th: float = 1.0
    v_reset: float = 0.0
    reset_mode: str = HARD
    leak: str = "lif"

    def __post_init__(self):
        if self.leak not in ("lif", "if"):
            raise ValueError(f"leak must be 'lif' or 'if', got {self.leak!r}")
        if self.leak == "lif" and not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1) for a leaky neuron")
        if self.v_th <= 0:
            raise ValueError("v_th must be positive")
        if self.reset_mode not in _RESETS:
            raise ValueError(f"reset_mode must be one of {_RESETS}")

    @classmethod
    def lif(cls, tau_m: float, reset_mode: str = HARD, v_th: float = 1.0,
            v_reset: float = 0.0) -> "NeuronConfig":
        return cls(beta=1.0 - 1.0 / tau_m, v_th=v_th, v_reset=v_reset,
                   reset_mode=reset_mode, leak="lif")

    @classmethod
    def integrate_fire(cls, reset_mode: str = HARD, v_th: float = 1.0,
                       v_reset: float = 0.0) -> "NeuronConfig":
        return cls(beta=0.0, v_th=v_th, v_reset=v_reset,
                   reset_mode=reset_mode, leak="if")


@dataclass
class NeuronState:
    """Post-reset membrane potential and the current timestep."""

    v: Tensor
    t: int = 0

    @classmethod
    def zeros(cls, batch: int, channels: int) -> "NeuronState":
        return cls(v=nm.zeros((batch, channels)), t=0)


def _charge(cfg: NeuronConfig, v: np.ndarray, x: np.ndarray) -> np.ndarray:
    if cfg.leak == "if":
        return v + x
    return cfg.beta * v + (1.0 - cfg.beta) * x


def _reset(cfg: NeuronConfig, h: np.ndarray, s: np.ndarray) -> np.ndarray:
    if cfg.reset_mode == HARD:
        return h * (1.0 - s) + cfg.v_reset * s
    if cfg.reset_mode == SOFT:
        return h - cfg.v_th * s
    return h


def lif_step(cfg: NeuronConfig, state: NeuronState, x_t,
             sg: SurrogateKind = Rectangular()) -> tuple[Tensor, NeuronState]:
    """One charge-fire-reset step; taped when the inputs are taped."""
    x_t = nm._as_tensor(x_t)
    if x_t.shape != state.v.shape:
        raise ShapeMismatch(f"x_t {x_t.shape} vs state {state.v.shape}")
    if cfg.leak == "if":
        h = state.v + x_t
    else:
        h = nm.mul(state.v, cfg.beta) + nm.mul(x_t, 1.0 - cfg.beta)
    s = nm.spike_threshold(h, cfg.v_th, sg)
    if cfg.reset_mode == HARD:
        v = nm.mul(h, nm.sub(1.0, s)) + nm.mul(s, cfg.v_reset)
    elif cfg.reset_mode == SOFT:
        v = h - nm.mul(s, cfg.v_th)
    else:
        v = h
    return s, NeuronState(v=v, t=state.t + 1)


def lif_trace(cfg: NeuronConfig, x: np.ndarray):
    """Raw-array fold over time returning (S, H, V) arrays of shape (B, C, T).

    Arithmetic is expression-for-expression identical to ``lif_step``, so the
    two agree bit-exactly.
    """
    if x.ndim != 3:
        raise ShapeMismatch("expected (B, C, T) input")
    s_out = np.empty_like(x)
    h_out = np.empty_like(x)
    v_out = np.empty_like(x)
    v = np.zeros(x.shape[:2], dtype=x.dtype)
    for t in range(x.shape[-1]):
        h = _charge(cfg, v, x[..., t])
        s = heaviside(h - cfg.v_th)
        v = _reset(cfg, h, s)
        s_out[..., t], h_out[..., t], v_out[..., t] = s, h, v
    return s_out, h_out, v_out


def lif_sequence(cfg: NeuronConfig, x,
                 sg: SurrogateKind = Rectangular()) -> tuple[Tensor, Tensor, Tensor]:
    """Fold :func:`lif_step` over the time axis of (B, C, T) input.

    Returns (spikes, pre-reset trace, post-reset trace); the traces feed the
    control-property checkers.  Evaluation only -- use ``lif_step`` on a tape
    when gradients are needed.
    """
    x = nm._as_tensor(x)
    s, h, v = lif_trace(cfg, x.data)
    return Tensor(s), Tensor(h), Tensor(v)


# ---------------------------------------------------------------------------
# dynamic-decay neuron


@dataclass(frozen=True)
class DsnParams:
    """Weights of the decay generator plus firing hyperparameters.

    conv_kernel is (C, k) with column k-1 applied to the current input;
    channel_mix, when present, mixes decay pre-activations across channels
    before the sigmoid.  tau sharpens the sigmoid (alpha = sigmoid(.)^(1/tau))
    and n_max caps the integer spike count.
    """

    conv_kernel: Tensor
    conv_bias: Tensor | None = None
    channel_mix: Tensor | None = None
    tau: float = 0.25
    n_max: int = 4

    def __post_init__(self):
        if self.conv_kernel.ndim != 2:
            raise ShapeMismatch("conv_kernel must be (C, k)")
        c = self.conv_kernel.shape[0]
        if self.conv_bias is not None and self.conv_bias.shape != (c,):
            raise ShapeMismatch("conv_bias must be (C,)")
        if self.channel_mix is not None and self.channel_mix.shape != (c, c):
            raise ShapeMismatch("channel_mix must be (C, C)")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")

    @property
    def channels(self) -> int:
        return self.conv_kernel.shape[0]

    @property
    def kernel_size(self) -> int:
        return self.conv_kernel.shape[1]

    @classmethod
    def init(cls, channels: int, k: int = 4, tau: float = 0.25, n_max: int = 4,
             bias: bool = True, mix: bool = False, seed: int = 0) -> "DsnParams":
        # fan-in uniform init; bias starts at zero, mix at identity
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(k)
        kernel = Tensor(rng.uniform(-bound, bound, size=(channels, k)))
        return cls(
            conv_kernel=kernel,
            conv_bias=nm.zeros((channels,)) if bias else None,
            channel_mix=Tensor(np.eye(channels)) if mix else None,
            tau=tau, n_max=n_max)

    def state_dict(self) -> dict[str, np.ndarray]:
        d = {"conv_kernel": self.conv_kernel.data,
             "tau": np.array([self.tau]), "n_max": np.array([float(self.n_max)])}
        if self.conv_bias is not None:
            d["conv_bias"] = self.conv_bias.data
        if self.channel_mix is not None:
            d["channel_mix"] = self.channel_mix.data
        return d

    @classmethod
    def from_state_dict(cls, d: dict[str, np.ndarray]) -> "DsnParams":
        return cls(conv_kernel=Tensor(d["conv_kernel"]),
                   conv_bias=Tensor(d["conv_bias"]) if "conv_bias" in d else None,
                   channel_mix=Tensor(d["channel_mix"]) if "channel_mix" in d else None,
                   tau=float(d["tau"][0]), n_max=int(d["n_max"][0]))


@dataclass
class DsnState:
    """Streaming state: membrane potential (B, C) and the last k-1 inputs."""

    h: np.ndarray
    window: np.ndarray  # (B, C, k-1) ring, oldest first

    @classmethod
    def zeros(cls, batch: int, channels: int, kernel_size: int,
              dtype=np.float64) -> "DsnState":
        return cls(h=np.zeros((batch, channels), dtype=dtype),
                   window=np.zeros((batch, channels, kernel_size - 1), dtype=dtype))


def _sharp_sigmoid(pre: np.ndarray, tau: float) -> np.ndarray:
    # same saturation clip and open-interval pinning as the taped path
    sig = 1.0 / (1.0 + np.exp(-np.clip(pre, -500.0, 500.0)))
    return np.clip(sig ** (1.0 / tau), nm.UNIT_OPEN_LO, nm.UNIT_OPEN_HI)


def dsn_dynamic_decay(params: DsnParams, x_window) -> Tensor:
    """Decay for one step from the last k inputs (oldest first, current last).

    Windows at the start of a sequence are zero-left-padded.  The result is
    strictly inside (0, 1).
    """
    x_window = nm._as_tensor(x_window)
    k = params.kernel_size
    if x_window.ndim != 3 or x_window.shape[1:] != (params.channels, k):
        raise ShapeMismatch(f"window must be (B, {params.channels}, {k})")
    kern = params.conv_kernel.data
    pre = np.zeros(x_window.shape[:2], dtype=x_window.data.dtype)
    for j in range(k):  # accumulation order matches the sequence convolution
        pre += kern[None, :, j] * x_window.data[..., j]
    if params.conv_bias is not None:
        pre += params.conv_bias.data[None, :]
    if params.channel_mix is not None:
        pre = np.einsum("dc,bc->bd", params.channel_mix.data, pre)
    return Tensor(_sharp_sigmoid(pre, params.tau))


def dsn_step(params: DsnParams, state: DsnState, x_t) -> tuple[np.ndarray, DsnState]:
    """Serial inference step: advance the ring buffer, decay, fire.

    Returns the integer spike array (B, C) and the new state.
    """
    x_arr = x_t.data if isinstance(x_t, Tensor) else np.asarray(x_t, dtype=state.h.dtype)
    if x_arr.shape != state.h.shape:
        raise ShapeMismatch(f"x_t {x_arr.shape} vs state {state.h.shape}")
    window = np.concatenate([state.window, x_arr[..., None]], axis=-1)
    alpha = dsn_dynamic_decay(params, Tensor(window)).data
    h = alpha * state.h + (1.0 - alpha) * x_arr
    s = np.clip(round_half_away(h), 0.0, float(params.n_max))
    return s, DsnState(h=h, window=window[..., 1:])


def dsn_alpha_sequence(params: DsnParams, x) -> Tensor:
    """All decays for a (B, C, T) sequence via the batched causal conv."""
    pre = nm.depthwise_causal_conv(x, params.conv_kernel, params.conv_bias)
    if params.channel_mix is not None:
        pre = nm.channel_mix(params.channel_mix, pre)
    return nm.unit_interval_clamp(nm.power(nm.sigmoid(pre), 1.0 / params.tau))


def dsn_forward_parallel(params: DsnParams, x) -> tuple[Tensor, Tensor, Tensor]:
    """Whole-sequence forward: conv -> sharpened sigmoid -> scan -> integer fire.

    Returns (S, H, alpha), gradient-tracked end to end when x or the
    parameters are taped.
    """
    x = nm._as_tensor(x)
    if x.ndim != 3:
        raise ShapeMismatch("expected (B, C, T) input")
    alpha = dsn_alpha_sequence(params, x)
    h = scan(alpha, x)
    s = nm.clip_round(h, params.n_max)
    return s, h, alpha


def dsn_serial_trace(params: DsnParams, x: np.ndarray):
    """Step-fold oracle returning (S, H, alpha) arrays for (B, C, T) input."""
    if x.ndim != 3:
        raise ShapeMismatch("expected (B, C, T) input")
    state = DsnState.zeros(x.shape[0], x.shape[1], params.kernel_size, x.dtype)
    s_out = np.empty_like(x)
    h_out = np.empty_like(x)
    a_out = np.empty_like(x)
    for t in range(x.shape[-1]):
        window = np.concatenate([state.window, x[..., t:t + 1]], axis=-1)
        alpha = dsn_dynamic_decay(params, Tensor(window)).data
        h = alpha * state.h + (1.0 - alpha) * x[..., t]
        s_out[..., t] = np.clip(round_half_away(h), 0.0, float(params.n_max))
        h_out[..., t] = h
        a_out[..., t] = alpha
        state = DsnState(h=h, window=window[..., 1:])
    return s_out, h_out, a_out


# ---------------------------------------------------------------------------
# PSN family


@dataclass(frozen=True)
class PsnParams:
    """Learnable time-by-time weights.

    variant 'full' keeps a dense (T, T) matrix and is non-causal; 'masked'
    bands it to the k sub-diagonals at or below the main diagonal; 'sliding'
    shares k weights across time (weight[0] multiplies the current input,
    weight[j] the input j steps back).
    """

    weight: Tensor
    variant: str = "full"
    k: int | None = None
    t_train: int | None = None

    def __post_init__(self):
        if self.variant not in ("full", "masked", "sliding"):
            raise ValueError(f"unknown PSN variant {self.variant!r}")
        if self.variant == "sliding":
            if self.weight.ndim != 1:
                raise ShapeMismatch("sliding PSN weight must be rank 1")
        else:
            w = self.weight
            if w.ndim != 2 or w.shape[0] != w.shape[1]:
                raise ShapeMismatch("full/masked PSN weight must be square")
            if self.t_train != w.shape[0]:
                raise ValueError("t_train must equal the weight size")
            if self.variant == "masked":
                if not self.k or not 1 <= self.k <= w.shape[0]:
                    raise ValueError("masked PSN needs 1 <= k <= T")
                bad = ~_band_mask(w.shape[0], self.k)
                if np.any(w.data[bad] != 0.0):
                    raise ValueError("masked PSN weight has entries outside its band")

    @property
    def non_causal(self) -> bool:
        return self.variant == "full"

    @classmethod
    def full(cls, weight) -> "PsnParams":
        weight = nm._as_tensor(weight)
        return cls(weight=weight, variant="full", t_train=weight.shape[0])

    @classmethod
    def masked(cls, weight, k: int) -> "PsnParams":
        weight = nm._as_tensor(weight)
        masked = weight.data * _band_mask(weight.shape[0], k)
        return cls(weight=Tensor(masked), variant="masked", k=k,
                   t_train=weight.shape[0])

    @classmethod
    def sliding(cls, weights) -> "PsnParams":
        weights = nm._as_tensor(weights)
        return cls(weight=weights, variant="sliding", k=weights.shape[0])

    @classmethod
    def init_decay(cls, variant: str, t_train: int | None = None,
                   k: int | None = None, beta: float = 0.5) -> "PsnParams":
        """Deterministic geometric-decay initialization (the linear-expansion
        pattern W_ij = beta^(i-j) (1-beta) on the causal part)."""
        if variant == "sliding":
            if not k:
                raise ValueError("sliding PSN needs k")
            w = beta ** np.arange(k) * (1.0 - beta)
            return cls.sliding(w)
        if not t_train:
            raise ValueError("full/masked PSN needs t_train")
        i = np.arange(t_train)[:, None]
        j = np.arange(t_train)[None, :]
        w = np.where(j <= i, beta ** (i - j) * (1.0 - beta), 0.0)
        if variant == "masked":
            return cls.masked(w, k or t_train)
        return cls.full(w)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {"weight": self.weight.data}


def _band_mask(t: int, k: int) -> np.ndarray:
    i = np.arange(t)[:, None]
    j = np.arange(t)[None, :]
    return (j <= i) & (j > i - k)


def psn_forward(params: PsnParams, x, v_th: float = 1.0,
                sg: SurrogateKind = Rectangular()) -> Tensor:
    """Spikes of a PSN-family neuron on (B, C, T) input.

    Full/masked variants demand T == t_train; the LengthMismatch they raise
    elsewhere is the executable form of their timestep-coupled parameters.
    """
    x = nm._as_tensor(x)
    if x.ndim != 3:
        raise ShapeMismatch("expected (B, C, T) input")
    b, c, t = x.shape
    if params.variant == "sliding":
        kernel = nm.tile_channels(_sliding_as_kernel(params.weight), c)
        h = nm.depthwise_causal_conv(x, kernel)
    else:
        if t != params.t_train:
            raise LengthMismatch(
                f"{params.variant} PSN built for T={params.t_train}, got T={t}")
        flat = nm.reshape(x, (b * c, t))
        h2 = nm.matmul(flat, nm.transpose(params.weight, (1, 0)))
        h = nm.reshape(h2, (b, c, t))
    return nm.spike_threshold(h, v_th, sg)


def _sliding_as_kernel(w: Tensor) -> Tensor:
    # sliding weights are indexed by lag (0 = current); conv kernels put the
    # current step last, so reverse
    rev = nm.reverse_last(w)
    return rev


# ---------------------------------------------------------------------------
# the shared four-map interface


class ParallelUnavailable(Exception):
    """The neuron has no offline parallel evaluation path."""


class StepUnavailable(Exception):
    """The neuron cannot run stepwise with bounded state."""


class Neuron:
    """Base class tying the four maps to concrete models.

    ``step``/``init_state`` realize online updating and firing; ``sequence``
    is the offline parallel map; ``trace`` exposes membrane trajectories for
    the property checkers.
    """

    name = "neuron"
    supports_step = True
    supports_parallel = True

    def init_state(self, batch: int, channels: int):
        raise NotImplementedError

    def step(self, state, x_t: np.ndarray):
        """(spike, membrane, new_state) for one input frame (B, C)."""
        raise NotImplementedError

    def sequence(self, x) -> Tensor:
        """Offline-parallel spikes for (B, C, T) input."""
        raise ParallelUnavailable(self.name)

    def trace(self, x: np.ndarray):
        """(S, H) arrays over a (B, C, T) input, serial semantics."""
        raise NotImplementedError

    def state_size(self, state) -> int:
        """Bytes of per-lane state; must not grow with t for online updatability."""
        raise NotImplementedError

    def serial_fold(self, x: np.ndarray) -> np.ndarray:
        """Spikes from folding ``step`` over time."""
        state = self.init_state(x.shape[0], x.shape[1])
        out = np.empty_like(x)
        for t in range(x.shape[-1]):
            s, _, state = self.step(state, x[..., t])
            out[..., t] = s
        return out


class LifNeuron(Neuron):
    """Classical stepper; parallel only in the reset-free linear case."""

    def __init__(self, cfg: NeuronConfig, sg: SurrogateKind = Rectangular()):
        self.cfg = cfg
        self.sg = sg
        leak = cfg.leak
        self.name = f"{leak}-{cfg.reset_mode}"
        self.supports_parallel = cfg.reset_mode == NONE
        self.v_th = cfg.v_th

    def init_state(self, batch: int, channels: int) -> np.ndarray:
        return np.zeros((batch, channels), dtype=nm.default_dtype())

    def step(self, state, x_t):
        h = _charge(self.cfg, state, np.asarray(x_t))
        s = heaviside(h - self.cfg.v_th)
        return s, h, _reset(self.cfg, h, s)

    def sequence(self, x) -> Tensor:
        if not self.supports_parallel:
            raise ParallelUnavailable(
                f"{self.name}: reset couples steps; no parallel path registered")
        x = nm._as_tensor(x)
        cfg = self.cfg
        zeros = np.zeros(x.shape[:2], dtype=x.data.dtype)
        if cfg.leak == "if":
            a, b = np.ones_like(x.data), x.data
        else:
            a, b = np.full_like(x.data, cfg.beta), (1.0 - cfg.beta) * x.data
        h = linear_scan(a, b, zeros)
        return nm.spike_threshold(Tensor(h), cfg.v_th, self.sg)

    def trace(self, x: np.ndarray):
        s, h, _ = lif_trace(self.cfg, x)
        return s, h

    def state_size(self, state) -> int:
        return state.nbytes


class DsnNeuron(Neuron):
    """Dynamic-decay neuron: scan-parallel training, ring-buffer inference."""

    def __init__(self, params: DsnParams):
        self.params = params
        self.name = "dsn"
        self.v_th = 1.0  # integer firing threshold between counts

    def init_state(self, batch: int, channels: int) -> DsnState:
        if channels != self.params.channels:
            raise ShapeMismatch(
                f"neuron built for {self.params.channels} channels, got {channels}")
        return DsnState.zeros(batch, channels, self.params.kernel_size,
                              dtype=nm.default_dtype())

    def step(self, state: DsnState, x_t):
        s, new_state = dsn_step(self.params, state, x_t)
        return s, new_state.h, new_state

    def sequence(self, x) -> Tensor:
        s, _, _ = dsn_forward_parallel(self.params, x)
        return s

    def trace(self, x: np.ndarray):
        s, h, _ = dsn_serial_trace(self.params, x)
        return s, h

    def state_size(self, state: DsnState) -> int:
        return state.h.nbytes + state.window.nbytes


class PsnNeuron(Neuron):
    """Full, masked or sliding PSN behind the shared interface."""

    def __init__(self, params: PsnParams, v_th: float = 1.0,
                 sg: SurrogateKind = Rectangular()):
        self.params = params
        self.v_th = v_th
        self.sg = sg
        self.name = {"full": "psn", "masked": "masked-psn",
                     "sliding": "sliding-psn"}[params.variant]
        self.supports_step = params.variant == "sliding"

    def init_state(self, batch: int, channels: int) -> np.ndarray:
        if not self.supports_step:
            raise StepUnavailable(
                f"{self.name}: weights are coupled to absolute timesteps")
        k = self.params.weight.shape[0]
        return np.zeros((batch, channels, k), dtype=nm.default_dtype())

    def step(self, state, x_t):
        # state holds the last k inputs, oldest first
        window = np.concatenate([state[..., 1:], np.asarray(x_t)[..., None]], axis=-1)
        w = self.params.weight.data[::-1]  # lag order -> window order
        h = np.zeros(window.shape[:2], dtype=window.dtype)
        for j in range(w.shape[0]):
            h += w[j] * window[..., j]
        s = heaviside(h - self.v_th)
        return s, h, window

    def sequence(self, x) -> Tensor:
        return psn_forward(self.params, x, self.v_th, self.sg)

    def trace(self, x: np.ndarray):
        s = psn_forward(self.params, Tensor(x), self.v_th, self.sg)
        h = _psn_membrane(self.params, x)
        return s.data, h

    def state_size(self, state) -> int:
        return state.nbytes


def _psn_membrane(params: PsnParams, x: np.ndarray) -> np.ndarray:
    if params.variant == "sliding":
        kernel = nm.tile_channels(_sliding_as_kernel(params.weight), x.shape[1])
        return nm.depthwise_causal_conv(Tensor(x), kernel).data
    if x.shape[-1] != params.t_train:
        raise LengthMismatch(
            f"{params.variant} PSN built for T={params.t_train}, got T={x.shape[-1]}")
    return np.einsum("tj,bcj->bct", params.weight.data, x)


# ---------------------------------------------------------------------------
# registry used by the CLI and property suite


def make_neuron(kind: str, channels: int = 1, t_train: int | None = None,
                k: int | None = None, seed: int = 0,
                sg: SurrogateKind = Rectangular()) -> Neuron:
    """Build a neuron by registry name with sensible defaults."""
    kind = kind.lower()
    classical = {
        "lif-hard": NeuronConfig.lif(2.0, HARD),
        "lif-soft": NeuronConfig.lif(2.0, SOFT),
        "lif-none": NeuronConfig.lif(2.0, NONE),
        "if-hard": NeuronConfig.integrate_fire(HARD),
        "if-soft": NeuronConfig.integrate_fire(SOFT),
        "if-none": NeuronConfig.integrate_fire(NONE),
    }
    if kind in classical:
        return LifNeuron(classical[kind], sg)
    if kind == "dsn":
        return DsnNeuron(DsnParams.init(channels, seed=seed))
    if kind in ("psn", "masked-psn", "sliding-psn"):
        variant = {"psn": "full", "masked-psn": "masked",
                   "sliding-psn": "sliding"}[kind]
        if variant == "sliding":
            return PsnNeuron(PsnParams.init_decay("sliding", k=k or 32))
        if not t_train:
            raise ValueError(f"{kind} needs t_train")
        return PsnNeuron(PsnParams.init_decay(variant, t_train=t_train,
                                              k=k or min(32, t_train)))
    raise ValueError(f"unknown neuron kind {kind!r}")


NEURON_KINDS = ("lif-hard", "lif-soft", "lif-none", "if-hard", "if-soft",
                "if-none", "psn", "masked-psn", "sliding-psn", "dsn")
