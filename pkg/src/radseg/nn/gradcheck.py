"""Central finite-difference checks for layer and loss gradients.

The error reported per tensor is ``max|analytic - numeric|`` divided by the
larger of the two gradients' max-magnitudes. That scale is floored at 1e-3 of
the largest gradient anywhere in the layer, so a tensor whose true gradient is
identically zero (a conv bias feeding batch norm) is judged against the
layer's scale instead of its own round-off. A sign-flipped backward scores 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from radseg.nn import layers as L
from radseg.nn.losses import LOSSES
from radseg.nn.module import Module

DEFAULT_H = 1e-5
DEFAULT_TOL = 1e-4


@dataclass
class GradCheckReport:
    name: str
    tolerance: float
    errors: dict[str, float] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-12) -> float:
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), floor)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def numeric_gradient(f: Callable[[], float], x: np.ndarray, h: float = DEFAULT_H) -> np.ndarray:
    """d f / d x by central differences, perturbing ``x`` in place."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * h)
    return grad


def grad_check(layer: Module, x: np.ndarray, *, tolerance: float = DEFAULT_TOL, h: float = DEFAULT_H,
               seed: int = 0, train: bool = True, name: str | None = None) -> GradCheckReport:
    """Check input and parameter gradients of ``layer`` at ``x`` (float64)."""
    x = np.array(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    y = layer.forward(x, train)
    probe = rng.standard_normal(y.shape)

    def f():
        return float(np.sum(layer.forward(x, train) * probe))

    layer.zero_grad()
    layer.forward(x, train)
    dx = layer.backward(probe.copy())
    report = GradCheckReport(name or type(layer).__name__, tolerance)
    analytic = {"input": dx}
    analytic.update({name_: g.copy() for name_, _, g in layer.named_parameters()})
    numeric = {"input": numeric_gradient(f, x, h)}
    for pname, p, _ in layer.named_parameters():
        numeric[pname] = numeric_gradient(f, p, h)
    floor = 1e-3 * max(max(np.abs(v).max(initial=0.0) for v in numeric.values()), 1e-12)
    for key in analytic:
        report.errors[key] = relative_error(analytic[key], numeric[key], floor)
    return report


def grad_check_loss(kind: str, logits: np.ndarray, targets: np.ndarray, *, tolerance: float = DEFAULT_TOL,
                    h: float = DEFAULT_H) -> GradCheckReport:
    fn = LOSSES[kind]
    z = np.array(logits, dtype=np.float64)
    _, g = fn(z, targets)
    num = numeric_gradient(lambda: fn(z, targets)[0], z, h)
    return GradCheckReport(f"loss:{kind}", tolerance, {"logits": relative_error(g, num)})


class ConcatProbe(Module):
    """concat_channels(x, other) with ``other`` exposed as a parameter."""

    def __init__(self, other: np.ndarray):
        super().__init__()
        self.add_param("other", other)
        self._ca = None

    def forward(self, x, train: bool = True):
        self._ca = x.shape[1]
        return L.concat_channels(x, self.params["other"])

    def backward(self, g):
        ga, gb = L.split_channels(g, self._ca)
        self.grads["other"] += gb
        return ga


class SignFlipped(Module):
    """Negative control: wraps a layer and negates its input gradient."""

    def __init__(self, inner: Module):
        super().__init__()
        self.inner = inner

    def children(self):
        return [("inner", self.inner)]

    def forward(self, x, train: bool = True):
        return self.inner.forward(x, train)

    def backward(self, g):
        return -self.inner.backward(g)


def _away_from_zero(rng, shape, margin=0.05):
    x = rng.standard_normal(shape)
    return np.where(np.abs(x) < margin, np.sign(x + 1e-300) * margin + x, x)


def _untied(rng, shape):
    # distinct values spaced far beyond h so no pair flips under perturbation
    n = int(np.prod(shape))
    return (rng.permutation(n).astype(np.float64) * 0.1 + rng.uniform(0, 0.01, n)).reshape(shape)


def layer_cases(seed: int) -> list[tuple[str, Module, np.ndarray]]:
    """Randomised small layers and inputs for one seed."""
    rng = np.random.default_rng(seed)
    f64 = np.float64
    b = int(rng.integers(1, 4))
    cin = int(rng.integers(1, 5))
    cout = int(rng.integers(1, 5))
    n = int(rng.integers(3, 10))
    n_even = 2 * int(rng.integers(2, 6))
    cases = []
    for d in (1, 2, 4):
        layer = L.Conv1d(cin, cout, 3, dilation=d, rng=rng, dtype=f64)
        layer.params["bias"][:] = rng.standard_normal(cout)
        cases.append((f"conv1d_k3_d{d}", layer, rng.standard_normal((b, cin, n))))
    cases.append(("conv1d_k1", L.Conv1d(cin, cout, 1, rng=rng, dtype=f64), rng.standard_normal((b, cin, n))))
    cases.append(("tconv1d", L.ConvTranspose1d(cin, cout, rng=rng, dtype=f64), rng.standard_normal((b, cin, n))))
    cases.append(("maxpool1d", L.MaxPool1d(), _untied(rng, (b, cin, n_even))))
    bn = L.BatchNorm1d(cin, dtype=f64)
    bn.params["gamma"][:] = rng.uniform(0.5, 1.5, cin)
    bn.params["beta"][:] = rng.standard_normal(cin)
    cases.append(("batchnorm_train", bn, rng.standard_normal((max(b, 2), cin, n)) * 2 + 1))
    cases.append(("relu", L.ReLU(), _away_from_zero(rng, (b, cin, n))))
    cases.append(("sigmoid", L.Sigmoid(), rng.standard_normal((b, cin, n)) * 3))
    cases.append(("concat", ConcatProbe(rng.standard_normal((b, cout, n))), rng.standard_normal((b, cin, n))))
    return cases


def loss_cases(seed: int) -> list[tuple[str, np.ndarray, np.ndarray]]:
    rng = np.random.default_rng(10_000 + seed)
    shape = (int(rng.integers(1, 3)), int(rng.integers(1, 6)), int(rng.integers(2, 12)))
    logits = rng.standard_normal(shape) * 2
    binary = (rng.random(shape) < 0.4).astype(np.float64)
    return [(kind, logits, binary) for kind in ("bce_logits", "dice", "huber")]


def run_suite(n_seeds: int = 20, tolerance: float = DEFAULT_TOL) -> dict[str, list[GradCheckReport]]:
    """Every layer kind and loss over ``n_seeds`` random shapes; reports grouped by kind."""
    out: dict[str, list[GradCheckReport]] = {}
    for seed in range(n_seeds):
        for name, layer, x in layer_cases(seed):
            out.setdefault(name, []).append(grad_check(layer, x, tolerance=tolerance, seed=seed, name=name))
        for kind, logits, targets in loss_cases(seed):
            out.setdefault(f"loss_{kind}", []).append(grad_check_loss(kind, logits, targets, tolerance=tolerance))
    return out
