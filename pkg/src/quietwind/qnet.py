"""A small dense Q-network written directly in numpy.

Layers are stored as (W, b) with W of shape (fan_in, fan_out), so a batch of
row vectors goes through ``x @ W + b``. Hidden layers use ReLU, the output
head is linear. The architecture is a tuple of layer widths; the default is
3 -> 128 -> 64 -> 5, and a single-layer ``(n_states, n_actions)`` network
fed one-hot inputs is exactly a lookup table.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .environment import PITCH_BOUNDS, RPM_BOUNDS, WIND_BOUNDS, EnvState

ARCHITECTURE = (3, 128, 64, 5)
FORMAT_VERSION = 1
_MAGIC = b"QWMLP\x00"


class ShapeMismatch(ValueError):
    pass


@dataclass
class MlpWeights:
    layers: list  # [(W, b), ...]
    version: int = FORMAT_VERSION

    def __post_init__(self):
        prev = None
        for w, b in self.layers:
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeMismatch(f"bad layer shapes {w.shape}, {b.shape}")
            if prev is not None and w.shape[0] != prev:
                raise ShapeMismatch("consecutive layers do not chain")
            prev = w.shape[1]

    @property
    def sizes(self) -> tuple:
        return (self.layers[0][0].shape[0],) + tuple(w.shape[1] for w, _ in self.layers)

    def copy(self) -> MlpWeights:
        return MlpWeights([(w.copy(), b.copy()) for w, b in self.layers], self.version)

    def params(self) -> list:
        """Flat list of parameter arrays, W then b per layer (views, not copies)."""
        out = []
        for w, b in self.layers:
            out += [w, b]
        return out

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params())

    @classmethod
    def zeros(cls, sizes=ARCHITECTURE) -> MlpWeights:
        return cls([(np.zeros((i, o)), np.zeros(o)) for i, o in zip(sizes[:-1], sizes[1:])])


def init_weights(rng: np.random.Generator, sizes=ARCHITECTURE) -> MlpWeights:
    """He-uniform weights (limit sqrt(6/fan_in)), zero biases."""
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(6.0 / fan_in)
        layers.append((rng.uniform(-lim, lim, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return MlpWeights(layers)


def encode_state(state: EnvState) -> np.ndarray:
    """Affine map of (U, rpm, pitch) from the state box onto [-1, 1]^3."""
    out = np.empty(3)
    for i, (v, (lo, hi)) in enumerate(zip((state.wind_speed, state.rotor_speed, state.pitch),
                                          (WIND_BOUNDS, RPM_BOUNDS, PITCH_BOUNDS))):
        out[i] = 2.0 * (v - lo) / (hi - lo) - 1.0
    return out


def _forward_cache(weights: MlpWeights, x: np.ndarray):
    acts = [x]
    h = x
    last = len(weights.layers) - 1
    for i, (w, b) in enumerate(weights.layers):
        z = h @ w + b
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def forward(weights: MlpWeights, s_enc) -> np.ndarray:
    """Q-values for one encoded state (shape (5,)) or a batch (shape (n, 5))."""
    x = np.asarray(s_enc, dtype=float)
    single = x.ndim == 1
    q = _forward_cache(weights, np.atleast_2d(x))[-1]
    return q[0] if single else q


def backward(weights: MlpWeights, states, actions, targets):
    """Mean squared TD error and its gradient.

    Only the output unit of the taken action carries error. Returns
    (grads, loss) with grads laid out like ``weights.params()``.
    """
    x = np.atleast_2d(np.asarray(states, dtype=float))
    actions = np.asarray(actions, dtype=np.int64)
    targets = np.asarray(targets, dtype=float)
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    acts = _forward_cache(weights, x)
    q = acts[-1]
    rows = np.arange(n)
    resid = q[rows, actions] - targets
    loss = float(np.mean(resid**2))

    delta = np.zeros_like(q)
    delta[rows, actions] = 2.0 * resid / n
    grads = [None] * (2 * len(weights.layers))
    for i in range(len(weights.layers) - 1, -1, -1):
        w, _ = weights.layers[i]
        grads[2 * i] = acts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ w.T) * (acts[i] > 0.0)
    return grads, loss


@dataclass
class OptimizerState:
    m: list
    v: list
    step: int = 0
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_weights(cls, weights: MlpWeights, lr: float = 5e-4, **kw) -> OptimizerState:
        ps = weights.params()
        return cls([np.zeros_like(p) for p in ps], [np.zeros_like(p) for p in ps], lr=lr, **kw)


def adam_step(weights: MlpWeights, grads, opt: OptimizerState) -> None:
    """One bias-corrected Adam update, in place on ``weights`` and ``opt``."""
    params = weights.params()
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise ShapeMismatch("gradient layout does not match weights")
    if len(opt.m) != len(params) or any(m.shape != p.shape for m, p in zip(opt.m, params)):
        raise ShapeMismatch("optimizer state does not match weights")
    opt.step += 1
    b1, b2 = opt.beta1, opt.beta2
    c1 = 1.0 - b1**opt.step
    c2 = 1.0 - b2**opt.step
    for p, g, m, v in zip(params, grads, opt.m, opt.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)


def soft_update(primary: MlpWeights, target: MlpWeights, tau: float) -> None:
    """phi' <- tau*phi + (1 - tau)*phi', in place on ``target``."""
    if primary.sizes != target.sizes:
        raise ShapeMismatch("primary and target architectures differ")
    for p, t in zip(primary.params(), target.params()):
        t *= 1.0 - tau
        t += tau * p


# --- persistence ---------------------------------------------------------------
#
# layout: 6-byte magic, uint32 little-endian header length, UTF-8 JSON header
# {"version", "sizes", "dtype", "order"}, then every W and b in layer order as
# little-endian float64, row-major.

def save_weights(weights: MlpWeights, path) -> None:
    header = json.dumps({"version": weights.version, "sizes": list(weights.sizes),
                         "dtype": "<f8", "order": "C"}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for p in weights.params():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_weights(path) -> MlpWeights:
    raw = Path(path).read_bytes()
    if not raw.startswith(_MAGIC):
        raise ValueError(f"{path}: not a weight file")
    off = len(_MAGIC)
    (hlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    header = json.loads(raw[off:off + hlen])
    off += hlen
    if header["version"] != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported weight format version {header['version']}")
    sizes = header["sizes"]
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = np.frombuffer(raw, dtype="<f8", count=fan_in * fan_out, offset=off).reshape(fan_in, fan_out)
        off += w.nbytes
        b = np.frombuffer(raw, dtype="<f8", count=fan_out, offset=off)
        off += b.nbytes
        layers.append((w.astype(float), b.astype(float)))
    if off != len(raw):
        raise ValueError(f"{path}: trailing bytes in weight file")
    return MlpWeights(layers, header["version"])
