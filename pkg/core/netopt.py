"""
File: core/netopt.py
Location: aerobatic_rl/core/netopt.py
Purpose: Small float64 MLP with hand-written reverse-mode gradients, Adam, gradient checks

Layers are affine maps x @ W + b with ReLU between them and an identity
output. The forward pass remembers each layer's input and pre-activation;
backward walks the layers in reverse with that memory.
"""

import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from core.errors import OptimizerFault, ShapeError

logger = logging.getLogger(__name__)

FD_STEP = 1e-5


class Mlp:
    """
    Feed-forward network

    weights[i] has shape (layer_dims[i], layer_dims[i + 1]); biases[i] has
    shape (layer_dims[i + 1],).
    """

    def __init__(self, layer_dims, weights, biases):
        layer_dims = tuple(int(d) for d in layer_dims)
        if len(layer_dims) < 2:
            raise ShapeError(f"an MLP needs at least 2 layer dims, got {layer_dims}")
        if any(d <= 0 for d in layer_dims):
            raise ShapeError(f"layer dims must be positive, got {layer_dims}")
        if len(weights) != len(layer_dims) - 1 or len(biases) != len(layer_dims) - 1:
            raise ShapeError("one weight matrix and one bias vector per layer")

        self.layer_dims = layer_dims
        self.weights = []
        self.biases = []
        for i, (w, b) in enumerate(zip(weights, biases)):
            w = np.array(w, dtype=np.float64)
            b = np.array(b, dtype=np.float64)
            if w.shape != (layer_dims[i], layer_dims[i + 1]) or b.shape != (layer_dims[i + 1],):
                raise ShapeError(f"layer {i}: expected W {(layer_dims[i], layer_dims[i + 1])} and "
                                 f"b {(layer_dims[i + 1],)}, got {w.shape} and {b.shape}")
            self.weights.append(w)
            self.biases.append(b)

    @classmethod
    def init(cls, layer_dims, seed):
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases"""
        layer_dims = tuple(layer_dims)
        if len(layer_dims) < 2:
            raise ShapeError(f"an MLP needs at least 2 layer dims, got {layer_dims}")
        rng = np.random.default_rng(seed)
        weights = []
        biases = []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            if fan_in <= 0 or fan_out <= 0:
                raise ShapeError(f"layer dims must be positive, got {layer_dims}")
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(layer_dims, weights, biases)

    @property
    def n_layers(self):
        return len(self.weights)

    @property
    def parameter_count(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self):
        """[W0, b0, W1, b1, ...] (live references)"""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        return params

    def set_parameters(self, params):
        if len(params) != 2 * self.n_layers:
            raise ShapeError(f"expected {2 * self.n_layers} parameter arrays, got {len(params)}")
        for i in range(self.n_layers):
            w, b = params[2 * i], params[2 * i + 1]
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise ShapeError(f"layer {i}: parameter shape mismatch")
            self.weights[i] = np.array(w, dtype=np.float64)
            self.biases[i] = np.array(b, dtype=np.float64)

    def copy(self):
        return Mlp(self.layer_dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flat_parameters(self):
        return np.concatenate([p.ravel() for p in self.parameters()])

    # -------------------------------------------------------------------------
    # forward / backward
    # -------------------------------------------------------------------------

    def _check_input(self, inputs):
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim == 1:
            inputs = inputs[None, :]
        if inputs.ndim != 2 or inputs.shape[1] != self.layer_dims[0]:
            raise ShapeError(f"input width {inputs.shape[-1]} does not match first layer dim {self.layer_dims[0]}")
        return inputs

    def forward(self, inputs):
        return self.forward_with_cache(inputs)[0]

    def forward_with_cache(self, inputs):
        """
        Returns:
            tuple: (outputs, cache) - cache holds (layer inputs, pre-activations)
        """
        x = self._check_input(inputs)
        layer_inputs = []
        pre_activations = []
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            layer_inputs.append(x)
            z = x @ w + b
            pre_activations.append(z)
            x = z if i == last else np.maximum(z, 0.0)
        return x, (layer_inputs, pre_activations)

    def backward(self, cache, upstream):
        """
        Reverse pass

        Args:
            cache: from forward_with_cache
            upstream: dLoss/dOutput, same shape as the outputs

        Returns:
            tuple: (parameter gradients [dW0, db0, ...], dLoss/dInput)
        """
        layer_inputs, pre_activations = cache
        g = np.asarray(upstream, dtype=np.float64)
        if g.ndim == 1:
            g = g[None, :]
        expected = (layer_inputs[0].shape[0], self.layer_dims[-1])
        if g.shape != expected:
            raise ShapeError(f"upstream gradient shape {g.shape} does not match outputs {expected}")

        grads = [None] * (2 * self.n_layers)
        last = self.n_layers - 1
        for i in reversed(range(self.n_layers)):
            if i < last:
                g = g * (pre_activations[i] > 0.0)
            grads[2 * i] = layer_inputs[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grads, g

    def grad(self, inputs, upstream):
        _, cache = self.forward_with_cache(inputs)
        return self.backward(cache, upstream)

    # -------------------------------------------------------------------------
    # serialization
    # -------------------------------------------------------------------------

    def to_bytes(self):
        """uint32 dim count, uint32 dims, then little-endian float64 parameters"""
        header = struct.pack('<I', len(self.layer_dims)) + np.array(self.layer_dims, dtype='<u4').tobytes()
        return header + self.flat_parameters().astype('<f8').tobytes()

    @classmethod
    def from_bytes(cls, payload, offset=0):
        """
        Returns:
            tuple: (Mlp, offset just past the network)

        Raises:
            ShapeError: payload too short
        """
        view = memoryview(payload)
        if len(view) < offset + 4:
            raise ShapeError("truncated network header")
        (count,) = struct.unpack_from('<I', view, offset)
        offset += 4
        if count < 2 or len(view) < offset + 4 * count:
            raise ShapeError("truncated network dims")
        dims = tuple(int(d) for d in np.frombuffer(view, dtype='<u4', count=count, offset=offset))
        offset += 4 * count

        weights = []
        biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            for shape in ((fan_in, fan_out), (fan_out,)):
                size = int(np.prod(shape))
                if len(view) < offset + 8 * size:
                    raise ShapeError("truncated network parameters")
                values = np.frombuffer(view, dtype='<f8', count=size, offset=offset).astype(np.float64)
                offset += 8 * size
                (weights if len(shape) == 2 else biases).append(values.reshape(shape))
        return cls(dims, weights, biases), offset


def init(layer_dims, seed):
    """Seeded network of the given dims"""
    return Mlp.init(layer_dims, seed)


# =============================================================================
# ADAM
# =============================================================================

@dataclass
class AdamState:
    first_moments: list
    second_moments: list
    step: int = 0
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params, learning_rate=3e-4, beta1=0.9, beta2=0.999, epsilon=1e-8):
        return cls(
            first_moments=[np.zeros_like(p) for p in params],
            second_moments=[np.zeros_like(p) for p in params],
            learning_rate=learning_rate,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )

    def copy(self):
        return AdamState(
            [m.copy() for m in self.first_moments],
            [v.copy() for v in self.second_moments],
            self.step, self.learning_rate, self.beta1, self.beta2, self.epsilon,
        )


def adam_step(state, params, grads):
    """
    One bias-corrected Adam update

    The state is advanced in place; the updated parameters are returned as
    new arrays.

    Raises:
        OptimizerFault: NaN/Inf in any gradient (state left untouched)
    """
    if len(params) != len(grads) or len(params) != len(state.first_moments):
        raise ShapeError("params, grads and optimizer state differ in length")
    for index, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            raise OptimizerFault(f"non-finite gradient in parameter array {index}")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step

    updated = []
    for index, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeError(f"gradient {index} shape {g.shape} does not match parameter {p.shape}")
        m = b1 * state.first_moments[index] + (1.0 - b1) * g
        v = b2 * state.second_moments[index] + (1.0 - b2) * g * g
        state.first_moments[index] = m
        state.second_moments[index] = v
        updated.append(p - state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon))
    return updated


# =============================================================================
# GRADIENT CHECKS
# =============================================================================

@dataclass
class GradientCheckReport:
    max_relative_error: float
    tolerance: float
    per_tensor: list = field(default_factory=list)

    @property
    def passed(self):
        return self.max_relative_error <= self.tolerance


def _relative_error(analytic, numeric):
    diff = np.linalg.norm(analytic - numeric)
    scale = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if scale < 1e-12:
        return float(diff)
    return float(diff / scale)


def check_gradients(loss_fn, params, analytic_grads, tolerance=1e-4, step=FD_STEP):
    """
    Central finite differences against analytic gradients

    Args:
        loss_fn: zero-argument callable; reads the params arrays in place
        params: arrays perturbed in place (restored afterwards)
        analytic_grads: gradients congruent with params

    Returns:
        GradientCheckReport - relative error per tensor, ||a - n|| / (||a|| + ||n||)
    """
    per_tensor = []
    for p, analytic in zip(params, analytic_grads):
        numeric = np.zeros_like(p)
        flat = p.reshape(-1)
        numeric_flat = numeric.reshape(-1)
        for j in range(flat.size):
            original = flat[j]
            flat[j] = original + step
            plus = loss_fn()
            flat[j] = original - step
            minus = loss_fn()
            flat[j] = original
            numeric_flat[j] = (plus - minus) / (2.0 * step)
        per_tensor.append(_relative_error(np.asarray(analytic), numeric))

    worst = max(per_tensor) if per_tensor else 0.0
    return GradientCheckReport(worst, tolerance, per_tensor)


def finite_diff_check(net, batch, tolerance=1e-4, grad_fn=None, seed=0):
    """
    Gradient check of a network on a random projection loss

    loss = sum(forward(batch) * P) with P drawn from `seed`.

    Args:
        grad_fn: optional replacement for the analytic path,
                 grad_fn(net, batch, upstream) -> parameter gradients

    Returns:
        GradientCheckReport
    """
    batch = np.asarray(batch, dtype=np.float64)
    rng = np.random.default_rng(seed)
    projection = rng.standard_normal((batch.shape[0], net.layer_dims[-1]))

    if grad_fn is None:
        analytic, _ = net.grad(batch, projection)
    else:
        analytic = grad_fn(net, batch, projection)

    def loss():
        return float(np.sum(net.forward(batch) * projection))

    report = check_gradients(loss, net.parameters(), analytic, tolerance)
    if not report.passed:
        logger.warning(f"⚠️ Gradient check failed: max relative error {report.max_relative_error:.3e}")
    return report
