"""Parallel evaluation of the input-dependent recurrence H_t = a_t H_{t-1} + (1-a_t) x_t.

Three routes compute the same sequence of membrane potentials:

* ``scan_serial`` -- the exact left fold, the reference oracle;
* ``scan_parallel`` -- a two-stage chunked scan: time is cut into fixed
  256-step chunks, each chunk is folded with a zero start (vectorized across
  chunks), then chunk carries are combined with a Blelloch sweep over the
  associative operator (a1,b1)*(a2,b2) = (a1*a2, a2*b1 + b2);
* ``matrix_form`` -- the explicit T x T weight built from cumulative decay
  products.  This route divides by the running product so it is quarantined
  behind a stability guard and used only as a cross-check.

``scan_backward`` differentiates the recurrence: the adjoint
g_t = dH_t + a_{t+1} g_{t+1} is itself a (reversed) linear scan, so the
backward pass costs the same O(B*C*T) work as the forward.

The reduction order inside every stage is fixed, so repeated runs are
bit-identical regardless of sequence length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, StabilityGuard
from .numerics import Tensor, _as_tensor, _ensure_finite, _result

CHUNK = 256


@dataclass(frozen=True)
class ScanProblem:
    """Paired decay/input sequences (B, C, T) with optional start state (B, C)."""

    alpha: Tensor
    x: Tensor
    h0: Tensor | None = None

    def __post_init__(self):
        a, x = self.alpha, self.x
        if a.ndim != 3 or a.shape != x.shape:
            raise ShapeMismatch(f"alpha {a.shape} and x {x.shape} must both be (B, C, T)")
        if self.h0 is not None and self.h0.shape != a.shape[:2]:
            raise ShapeMismatch(f"h0 {self.h0.shape} != {a.shape[:2]}")

    def start(self) -> np.ndarray:
        if self.h0 is None:
            return np.zeros(self.alpha.shape[:2], dtype=self.alpha.data.dtype)
        return self.h0.data


def combine(s1: tuple, s2: tuple) -> tuple:
    """Compose two affine segments: apply s1 first, then s2."""
    a1, b1 = s1
    a2, b2 = s2
    return a1 * a2, a2 * b1 + b2


def _fold(a: np.ndarray, b: np.ndarray, h0: np.ndarray) -> np.ndarray:
    T = a.shape[-1]
    out = np.empty_like(b)
    h = h0
    for t in range(T):
        h = a[..., t] * h + b[..., t]
        out[..., t] = h
    return out


def _blelloch_exclusive(sa: np.ndarray, sb: np.ndarray):
    """Exclusive prefix combine of chunk summaries along the last axis.

    Returns (ea, eb) with (ea, eb)[i] = s_0 * ... * s_{i-1} and identity at 0.
    Up-sweep then down-sweep; the operator is non-commutative, so segment
    order is threaded left-to-right throughout.
    """
    n = sa.shape[-1]
    m = 1
    while m < n:
        m *= 2
    pad = m - n
    if pad:
        sa = np.concatenate([sa, np.ones(sa.shape[:-1] + (pad,), sa.dtype)], axis=-1)
        sb = np.concatenate([sb, np.zeros(sb.shape[:-1] + (pad,), sb.dtype)], axis=-1)
    a = sa.copy()
    b = sb.copy()
    d = 1
    while d < m:
        left = slice(d - 1, m, 2 * d)
        right = slice(2 * d - 1, m, 2 * d)
        # right segment becomes left-then-right
        a_l, b_l = a[..., left], b[..., left]
        a[..., right], b[..., right] = combine((a_l, b_l), (a[..., right], b[..., right]))
        d *= 2
    a[..., m - 1] = 1.0
    b[..., m - 1] = 0.0
    d = m // 2
    while d >= 1:
        left = slice(d - 1, m, 2 * d)
        right = slice(2 * d - 1, m, 2 * d)
        a_l, b_l = a[..., left].copy(), b[..., left].copy()
        a[..., left] = a[..., right]
        b[..., left] = b[..., right]
        # incoming prefix (sitting at right) precedes the left segment
        a[..., right], b[..., right] = combine((a[..., right], b[..., right]), (a_l, b_l))
        d //= 2
    return a[..., :n], b[..., :n]


def linear_scan(a: np.ndarray, b: np.ndarray, h0: np.ndarray) -> np.ndarray:
    """Chunked two-stage scan of h_t = a_t h_{t-1} + b_t (raw-array core)."""
    T = a.shape[-1]
    lanes = a.shape[:-1]
    chunk = min(CHUNK, max(T, 1))
    nc = -(-T // chunk)
    pad = nc * chunk - T
    if pad:
        a = np.concatenate([a, np.ones(lanes + (pad,), a.dtype)], axis=-1)
        b = np.concatenate([b, np.zeros(lanes + (pad,), b.dtype)], axis=-1)
    ac = a.reshape(lanes + (nc, chunk))
    bc = b.reshape(lanes + (nc, chunk))
    prods = np.cumprod(ac, axis=-1)
    # fold with the chunk-position axis leading so each step is contiguous
    ac_t = np.ascontiguousarray(np.moveaxis(ac, -1, 0))
    bc_t = np.ascontiguousarray(np.moveaxis(bc, -1, 0))
    local_t = np.empty_like(bc_t)
    acc = np.zeros(lanes + (nc,), dtype=b.dtype)
    for j in range(chunk):
        acc = ac_t[j] * acc + bc_t[j]
        local_t[j] = acc
    local = np.moveaxis(local_t, 0, -1)
    ea, eb = _blelloch_exclusive(prods[..., -1], local_t[-1])
    carries = ea * h0[..., None] + eb
    out = prods * carries[..., None] + local
    return np.ascontiguousarray(out.reshape(lanes + (nc * chunk,))[..., :T])


def _scan_arrays(p: ScanProblem):
    alpha = p.alpha.data
    x = p.x.data
    return alpha, (1.0 - alpha) * x, p.start()


def scan_serial(p: ScanProblem) -> Tensor:
    """Exact left fold; the reference oracle for every other route."""
    a, b, h0 = _scan_arrays(p)
    out = _fold(a, b, h0)
    _ensure_finite(out, "scan_serial")
    return Tensor(out)


def scan_parallel(p: ScanProblem) -> Tensor:
    """Two-stage chunked scan; matches scan_serial within 1e-10 in float64."""
    a, b, h0 = _scan_arrays(p)
    out = linear_scan(a, b, h0)
    _ensure_finite(out, "scan_parallel")
    return Tensor(out)


def _backward_arrays(alpha: np.ndarray, x: np.ndarray, h0: np.ndarray,
                     H: np.ndarray, dH: np.ndarray):
    # adjoint g_t = dH_t + alpha_{t+1} g_{t+1}, evaluated as a reversed scan
    a_rev = alpha[..., ::-1]
    shifted = np.concatenate(
        [np.ones(a_rev.shape[:-1] + (1,), a_rev.dtype), a_rev[..., :-1]], axis=-1)
    zeros = np.zeros(alpha.shape[:-1], dtype=alpha.dtype)
    g = linear_scan(shifted, np.ascontiguousarray(dH[..., ::-1]), zeros)[..., ::-1]
    h_prev = np.concatenate([h0[..., None], H[..., :-1]], axis=-1)
    d_alpha = g * (h_prev - x)
    d_x = g * (1.0 - alpha)
    d_h0 = g[..., 0] * alpha[..., 0]
    return np.ascontiguousarray(d_alpha), np.ascontiguousarray(d_x), d_h0


def scan_backward(p: ScanProblem, H: Tensor, dH: Tensor):
    """Gradients of the recurrence given upstream dH.

    Returns (dAlpha, dX, dH0).  H must come from a forward pass on p.
    """
    if H.shape != p.alpha.shape or dH.shape != p.alpha.shape:
        raise ShapeMismatch("H and dH must match the problem shape")
    d_alpha, d_x, d_h0 = _backward_arrays(p.alpha.data, p.x.data, p.start(),
                                          H.data, dH.data)
    return Tensor(d_alpha), Tensor(d_x), Tensor(d_h0)


def matrix_form(p: ScanProblem, alpha_min: float = 0.05) -> Tensor:
    """Cross-check route via the explicit T x T weight W_ij = (prod a)(1 - a_i).

    Builds W from the cumulative product P and mask M (upper-triangular in
    (i, j)) and returns X W + P h0.  Guarded: T <= 512 and decay inside
    [alpha_min, 1 - alpha_min]; outside the band the running product is no
    longer a safe denominator and StabilityGuard is raised.  A test oracle,
    not a training path.
    """
    if alpha_min < 0.05:
        raise ValueError("alpha_min below the 0.05 stability floor")
    alpha = p.alpha.data
    T = alpha.shape[-1]
    if T > 512:
        raise StabilityGuard(f"matrix form limited to T <= 512, got {T}")
    if np.any(alpha < alpha_min) or np.any(alpha > 1.0 - alpha_min):
        raise StabilityGuard(
            f"decay outside the [{alpha_min}, {1 - alpha_min}] guard band")
    prods = np.cumprod(alpha, axis=-1)
    rows = (1.0 - alpha) / prods
    mask = np.triu(np.ones((T, T), dtype=alpha.dtype))
    w = rows[..., :, None] * prods[..., None, :] * mask
    out = np.einsum("bci,bcij->bcj", p.x.data, w) + prods * p.start()[..., None]
    _ensure_finite(out, "matrix_form")
    return Tensor(out)


def scan(alpha, x, h0=None) -> Tensor:
    """Taped scan: parallel forward, adjoint-scan backward.

    This is the training-path building block; gradients flow to alpha, x and
    (when given) h0.
    """
    alpha = _as_tensor(alpha)
    x = _as_tensor(x)
    h0_t = _as_tensor(h0) if h0 is not None else None
    if alpha.ndim != 3 or alpha.shape != x.shape:
        raise ShapeMismatch(f"alpha {alpha.shape} and x {x.shape} must match")
    h0_arr = (h0_t.data if h0_t is not None
              else np.zeros(alpha.shape[:2], dtype=alpha.data.dtype))
    if h0_arr.shape != alpha.shape[:2]:
        raise ShapeMismatch(f"h0 {h0_arr.shape} != {alpha.shape[:2]}")
    out = linear_scan(alpha.data, (1.0 - alpha.data) * x.data, h0_arr)

    tape = alpha.tape or x.tape or (h0_t.tape if h0_t is not None else None)
    na = alpha._node if alpha.tape is tape and tape is not None else None
    nx = x._node if x.tape is tape and tape is not None else None
    nh = (h0_t._node if h0_t is not None and h0_t.tape is tape and tape is not None
          else None)
    nodes = tuple(n for n in (na, nx, nh) if n is not None)

    def backward(g):
        d_alpha, d_x, d_h0 = _backward_arrays(alpha.data, x.data, h0_arr, out, g)
        if na is not None:
            tape._accumulate(na, d_alpha, own=True)
        if nx is not None:
            tape._accumulate(nx, d_x, own=True)
        if nh is not None:
            tape._accumulate(nh, d_h0, own=True)

    return _result(out, "scan", tape, nodes, backward if tape else None)
