"""Bias-free fully connected networks trained by minibatch SGD.

``weights[i]`` has shape ``(N[i+1], N[i])``: row ``j`` is the incoming weight
vector of neuron ``j`` in layer ``i + 1``. The trainer records these rows at a
fixed minibatch cadence, giving one :class:`TrajectoryCloud` per weight matrix.

Randomness comes from numpy's Philox counter-based generator. For a run seed
``s`` the initializer draws from ``Philox(SeedSequence([s, 0]))`` and the
shuffler from ``Philox(SeedSequence([s, 1]))``.
"""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .kernels import matmul

PROB_FLOOR = 1e-300
_EVAL_CHUNK = 2000


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite.

    Carries the network, log and trajectories as they were at the failing
    minibatch so the run can be inspected.
    """

    def __init__(self, message, net, log, clouds):
        super().__init__(message)
        self.net = net
        self.log = log
        self.clouds = clouds


@dataclass(frozen=True)
class NetworkSpec:
    layer_sizes: tuple
    hidden_activation: str = "sigmoid"
    output_activation: str = "softmax"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"invalid layer sizes {self.layer_sizes}")
        if self.hidden_activation != "sigmoid" or self.output_activation != "softmax":
            raise ValueError("only sigmoid hidden layers with a softmax output are supported")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_layers(self):
        return len(self.layer_sizes) - 1


@dataclass(frozen=True)
class InitScheme:
    kind: str = "zero"
    mu: float = 0.0
    sigma: float = 0.0
    jitter_sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "normal"):
            raise ValueError(f"unknown init kind {self.kind!r}")
        if self.kind == "zero" and (self.mu != 0.0 or self.sigma != 0.0):
            raise ValueError("zero init takes no mu/sigma")
        if self.sigma < 0 or self.jitter_sigma < 0:
            raise ValueError("standard deviations must be nonnegative")


@dataclass
class Network:
    spec: NetworkSpec
    weights: list

    def copy(self):
        return Network(self.spec, [w.copy() for w in self.weights])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    batch_size: int = 64
    epochs: int = 50
    snapshot_every: int = 10
    seed: int = 0
    subset_size: int | None = None
    record_initial: bool = True
    shuffle: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.snapshot_every < 1 or self.epochs < 0:
            raise ValueError("batch_size and snapshot_every must be >= 1, epochs >= 0")


@dataclass
class TrajectoryCloud:
    """Recorded incoming weight vectors of one layer, step-major."""

    layer_index: int
    points: np.ndarray  # (steps * neurons, dim)
    steps: int
    neurons: int

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def step_labels(self):
        return np.repeat(np.arange(self.steps), self.neurons)

    @property
    def neuron_labels(self):
        return np.tile(np.arange(self.neurons), self.steps)

    def at_step(self, step):
        return self.points[step * self.neurons:(step + 1) * self.neurons]

    def as_array(self):
        """View as ``(steps, neurons, dim)``."""
        return self.points.reshape(self.steps, self.neurons, self.dim)


@dataclass
class TrainingLog:
    step: list = field(default_factory=list)
    minibatch: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    accuracy: list = field(default_factory=list)
    confusion: list = field(default_factory=list)  # (C, C) arrays, [true, predicted]

    def __len__(self):
        return len(self.step)

    def append(self, step, minibatch, loss, accuracy, confusion):
        self.step.append(step)
        self.minibatch.append(minibatch)
        self.loss.append(loss)
        self.accuracy.append(accuracy)
        self.confusion.append(confusion)


class LossGrad(NamedTuple):
    loss: float
    grads: list
    clamped: bool


def init_rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0])))


def shuffle_rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 1])))


def init_network(spec, scheme, seed=0):
    rng = init_rng(seed)
    weights = []
    sizes = spec.layer_sizes
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        if scheme.kind == "zero":
            w = np.zeros((n_out, n_in))
        else:
            w = rng.normal(scheme.mu, scheme.sigma, size=(n_out, n_in))
        if scheme.jitter_sigma > 0:
            w = w + rng.normal(0.0, scheme.jitter_sigma, size=(n_out, n_in))
        weights.append(w)
    return Network(spec, weights)


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def softmax(z):
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(net, batch):
    """Activations of every layer, input first and class probabilities last."""
    x = np.ascontiguousarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.spec.layer_sizes[0]:
        raise ValueError(f"batch shape {x.shape} does not match input width {net.spec.layer_sizes[0]}")
    acts = [x]
    last = len(net.weights) - 1
    for i, w in enumerate(net.weights):
        z = matmul(acts[-1], np.ascontiguousarray(w.T))
        acts.append(softmax(z) if i == last else sigmoid(z))
    return acts


def loss_and_grad(net, batch, labels):
    """Mean cross-entropy over the batch and its exact gradient per weight matrix."""
    labels = np.asarray(labels)
    acts = forward(net, batch)
    probs = acts[-1]
    b = probs.shape[0]
    if labels.shape != (b,):
        raise ValueError("labels must be a 1-D array aligned with the batch")
    p_true = probs[np.arange(b), labels]
    clamped = bool((p_true < PROB_FLOOR).any())
    loss = float(np.mean(-np.log(np.maximum(p_true, PROB_FLOOR))))

    delta = probs.copy()
    delta[np.arange(b), labels] -= 1.0
    delta /= b
    grads = [None] * len(net.weights)
    for i in range(len(net.weights) - 1, -1, -1):
        grads[i] = matmul(np.ascontiguousarray(delta.T), acts[i])
        if i > 0:
            a = acts[i]
            delta = matmul(delta, net.weights[i]) * (a * (1.0 - a))
    return LossGrad(loss, grads, clamped)


def sgd_step(net, grads, learning_rate):
    if len(grads) != len(net.weights):
        raise ValueError("one gradient per weight matrix expected")
    new = []
    for w, g in zip(net.weights, grads):
        if w.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match weights {w.shape}")
        new.append(w - learning_rate * g)
    return Network(net.spec, new)


def evaluate(net, test):
    """Accuracy and ``[true, predicted]`` confusion counts on ``(images, labels)``."""
    images, labels = test
    n_classes = net.spec.layer_sizes[-1]
    predicted = np.empty(images.count, dtype=np.int64)
    for start in range(0, images.count, _EVAL_CHUNK):
        probs = forward(net, images.pixels[start:start + _EVAL_CHUNK])[-1]
        predicted[start:start + len(probs)] = np.argmax(probs, axis=1)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (labels.labels, predicted), 1)
    accuracy = float(np.trace(confusion)) / images.count
    return accuracy, confusion


def minibatches_per_epoch(n, batch_size):
    return -(-n // batch_size)


def n_snapshots(n_train, cfg):
    total = cfg.epochs * minibatches_per_epoch(n_train, cfg.batch_size)
    return total // cfg.snapshot_every + int(cfg.record_initial)


def train(net, train_data, test_data, cfg, progress=None):
    """Run minibatch SGD, recording weights every ``cfg.snapshot_every`` minibatches.

    Returns ``(network, log, clouds)``. The log has one row per snapshot taken
    during training; the initial state (``cfg.record_initial``) appears only in
    the trajectory clouds, as step 0.
    """
    images, labels = train_data
    if cfg.subset_size is not None:
        images, labels = images.subset(cfg.subset_size), labels.subset(cfg.subset_size)
    if images.dim != net.spec.layer_sizes[0]:
        raise ValueError(f"images have {images.dim} features, network expects {net.spec.layer_sizes[0]}")
    n = images.count
    total_snaps = n_snapshots(n, cfg)
    store = [np.empty((total_snaps,) + w.shape) for w in net.weights]
    recorded = 0
    log = TrainingLog()

    def clouds(k):
        return [
            TrajectoryCloud(i, s[:k].reshape(k * s.shape[1], s.shape[2]), k, s.shape[1])
            for i, s in enumerate(store)
        ]

    def record(current):
        nonlocal recorded
        for s, w in zip(store, current.weights):
            s[recorded] = w
        recorded += 1

    net = net.copy()
    if cfg.record_initial:
        record(net)
    rng = shuffle_rng(cfg.seed)
    minibatch = 0
    window = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads, _ = loss_and_grad(net, images.pixels[idx], labels.labels[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, minibatch {minibatch}",
                    net, log, clouds(recorded),
                )
            net = sgd_step(net, grads, cfg.learning_rate)
            minibatch += 1
            window.append(loss)
            if minibatch % cfg.snapshot_every == 0:
                record(net)
                accuracy, confusion = evaluate(net, test_data)
                log.append(recorded - 1, minibatch, float(np.mean(window)), accuracy, confusion)
                window = []
                if progress is not None:
                    progress(log)
    return net, log, clouds(recorded)
