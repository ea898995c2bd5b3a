##############################################################################
# Copyright (c) 2026 sdgsc developers
# All rights reserved.
# Licensed under the New BSD License
# (http://www.freebsd.org/copyright/freebsd-license.html)
#
# Goal-oriented semantic video communication laboratory.
##############################################################################
"""Dense networks with reverse-mode gradients and plain SGD.

Every learned map in the package (encoder, decoder, noise estimators and
the interpolation layers) is an MlpModel.  Arrays are float64; a model
accepts a single vector of the input width or a batch of them.
"""
from collections import namedtuple

import numpy as np
from scipy.special import expit

from sdgsc import ParameterError, ShapeError, DivergenceError
from sdgsc.consts import ACTIVATIONS, DIVERGENCE_LOSS
from sdgsc.utils import DEBUG_OUTPUT, as_array


def _act(name, a):
    if name == 'identity':
        return a
    if name == 'relu':
        return np.maximum(a, 0.0)
    if name == 'tanh':
        return np.tanh(a)
    return expit(a)


def _act_deriv(name, a, y):
    "derivative wrt the pre-activation a, given y = act(a)"
    if name == 'identity':
        return np.ones_like(a)
    if name == 'relu':
        return (a > 0.0).astype(np.float64)
    if name == 'tanh':
        return 1.0 - y * y
    return y * (1.0 - y)


class SgdConfig(namedtuple('SgdConfig', 'lr max_steps batch_size')):
    __slots__ = ()

    def __new__(cls, lr=0.001, max_steps=1000, batch_size=16):
        lr = float(lr)
        if not np.isfinite(lr) or lr < 0.0:
            raise ParameterError('learning rate must be >= 0: %r' % (lr, ))
        if int(max_steps) < 0:
            raise ParameterError('max_steps must be >= 0: %r' % (max_steps, ))
        if int(batch_size) < 1:
            raise ParameterError('batch_size must be positive: %r' % (batch_size, ))
        return super(SgdConfig, cls).__new__(
            cls, lr, int(max_steps), int(batch_size))


class MlpModel(object):
    def __init__(self, widths, activation='tanh', output_activation='identity',
                 seed=0, params=None):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or min(widths) < 1:
            raise ParameterError('bad layer widths %r' % (widths, ))
        for name in (activation, output_activation):
            if name not in ACTIVATIONS:
                raise ParameterError('unknown activation %r' % (name, ))
        if int(seed) < 0 or int(seed) >= 2**64:
            raise ParameterError('seed out of 64-bit range: %r' % (seed, ))
        self.widths = widths
        self.activation = activation
        self.output_activation = output_activation
        self.seed = int(seed)
        self.frozen = False
        if params is None:
            params = self._glorot(np.random.default_rng(self.seed))
        self.set_parameters(params)

    def _glorot(self, rng):
        params = []
        for fan_in, fan_out in zip(self.widths[:-1], self.widths[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            params.append(np.zeros(fan_out))
        return params

    def __repr__(self):
        return 'MlpModel(%r, %s/%s, seed=%d)' % (
            self.widths, self.activation, self.output_activation, self.seed)

    @property
    def n_layers(self):
        return len(self.widths) - 1

    @property
    def input_width(self):
        return self.widths[0]

    @property
    def output_width(self):
        return self.widths[-1]

    def layer_activation(self, i):
        if i == self.n_layers - 1:
            return self.output_activation
        return self.activation

    def parameters(self):
        "[W0, b0, W1, b1, ...]; weights are (fan_in, fan_out)"
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            params.append(b)
        return params

    def set_parameters(self, params):
        params = [as_array(p) for p in params]
        if len(params) != 2 * self.n_layers:
            raise ParameterError('expected %d parameter arrays, got %d' % (
                2 * self.n_layers, len(params)))
        weights, biases = [], []
        for i, (fan_in, fan_out) in enumerate(zip(self.widths[:-1],
                                                  self.widths[1:])):
            w, b = params[2 * i], params[2 * i + 1]
            if w.shape != (fan_in, fan_out):
                raise ShapeError('weight %d' % (i, ), w.shape, (fan_in, fan_out))
            if b.shape != (fan_out, ):
                raise ShapeError('bias %d' % (i, ), b.shape, (fan_out, ))
            weights.append(w.copy())
            biases.append(b.copy())
        self.weights = weights
        self.biases = biases

    def n_params(self):
        return sum(p.size for p in self.parameters())

    def copy(self):
        m = MlpModel(self.widths, self.activation, self.output_activation,
                     self.seed, params=self.parameters())
        m.frozen = self.frozen
        return m

    def freeze(self):
        self.frozen = True
        return self

    def zeros_like_params(self):
        return [np.zeros_like(p) for p in self.parameters()]

    def same_parameters(self, other):
        "bit identity of every parameter"
        mine, theirs = self.parameters(), other.parameters()
        return len(mine) == len(theirs) and all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in zip(mine, theirs))


def _as_batch(model, x):
    x = as_array(x)
    if x.ndim == 0 or x.shape[-1] != model.input_width:
        raise ShapeError('input width mismatch', x.shape,
                         (model.input_width, ))
    return x.reshape(-1, model.input_width), x.shape[:-1]


def _trace(model, x):
    pre, post = [], [x]
    y = x
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = y @ w + b
        y = _act(model.layer_activation(i), a)
        pre.append(a)
        post.append(y)
    return pre, post


def forward(model, x):
    x2, lead = _as_batch(model, x)
    _, post = _trace(model, x2)
    return post[-1].reshape(lead + (model.output_width, ))


def backward(model, x, upstream):
    """Gradients of sum(upstream * forward(model, x)).

    Returns (parameter gradients in parameters() order, input gradient).
    """
    x2, lead = _as_batch(model, x)
    upstream = as_array(upstream)
    out_shape = lead + (model.output_width, )
    if upstream.shape != out_shape:
        raise ShapeError('upstream shape mismatch', upstream.shape, out_shape)
    pre, post = _trace(model, x2)
    delta = upstream.reshape(-1, model.output_width)
    grads = [None] * (2 * model.n_layers)
    for i in reversed(range(model.n_layers)):
        delta = delta * _act_deriv(model.layer_activation(i), pre[i], post[i + 1])
        grads[2 * i] = post[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        delta = delta @ model.weights[i].T
    return grads, delta.reshape(lead + (model.input_width, ))


def grad(model, x, upstream):
    return backward(model, x, upstream)[0]


def sgd_step(model, grads, cfg, inplace=False):
    if model.frozen:
        raise ParameterError('sgd_step on a frozen model %r' % (model, ))
    params = model.parameters()
    if len(grads) != len(params):
        raise ParameterError('expected %d gradients, got %d' % (
            len(params), len(grads)))
    for i, (p, g) in enumerate(zip(params, grads)):
        if np.shape(g) != p.shape:
            raise ShapeError('gradient %d' % (i, ), np.shape(g), p.shape)
        if not np.all(np.isfinite(g)):
            raise DivergenceError('non-finite gradient', param_index=i)
    target = model if inplace else model.copy()
    new = [p - cfg.lr * as_array(g) for p, g in zip(params, grads)]
    target.set_parameters(new)
    return target


def loss_mse(pred, target):
    "mean squared error and its gradient wrt pred"
    pred, target = as_array(pred), as_array(target)
    if pred.shape != target.shape:
        raise ShapeError('prediction/target mismatch', pred.shape, target.shape)
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def add_grads(a, b):
    return [x + y for x, y in zip(a, b)]


def scale_grads(grads, c):
    return [c * g for g in grads]


def train_loop(models, step_fn, cfg, stage, log_every=None):
    """Run cfg.max_steps of step_fn(step) -> (loss, [grads per model]).

    The models are updated in place.  Aborts on a non-finite loss or one
    above the divergence threshold.
    """
    if log_every is None:
        log_every = max(1, cfg.max_steps // 10)
    losses = []
    for step in range(cfg.max_steps):
        loss, all_grads = step_fn(step)
        if not np.isfinite(loss) or loss > DIVERGENCE_LOSS:
            raise DivergenceError('loss %r' % (loss, ), stage=stage, step=step)
        for model, grads in zip(models, all_grads):
            for i, g in enumerate(grads):
                if not np.all(np.isfinite(g)):
                    raise DivergenceError('non-finite gradient', stage=stage,
                                          step=step, param_index=i)
        for model, grads in zip(models, all_grads):
            sgd_step(model, grads, cfg, inplace=True)
        losses.append(loss)
        if step % log_every == 0:
            DEBUG_OUTPUT('train', stage, 'step', step, 'loss', loss)
    return losses
