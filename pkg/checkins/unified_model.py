"""Multi-channel convolutional classifier over a user's feature matrices.

One channel per (context, view) pair: 3x3 same convolution, ReLU, 2x2 max
pool, flatten. Channel features are concatenated with the applicability
indicator, the one-hot query context and (optionally) each channel's
read-out row at the query context, then pass a ReLU hidden layer and a
softmax output over the target view's labels.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__, layers
from .dimensions import CONTEXT_ORDER, ContextKind, FeaturePair, ViewKind
from .exceptions import BadK, Divergence, EmptyBatch, InvalidConfig, ShapeMismatch
from .features import UserFeatureSet, normalize_matrix

logger = logging.getLogger(__name__)

INDICATOR = 'indicator'
MASK = 'mask'
APPLICABILITY_MODES = (INDICATOR, MASK)

CHECKPOINT_MAGIC = b'LBSNCKPT'
CHECKPOINT_VERSION = 1
EVAL_BATCH = 512


@dataclass(frozen=True)
class ChannelSpec:
    pair: FeaturePair
    height: int
    width: int


@dataclass(frozen=True)
class ModelConfig:
    channels: tuple[ChannelSpec, ...]
    contexts: tuple[tuple[ContextKind, int], ...]
    n_classes: int
    target_view: ViewKind = ViewKind.ROOT
    conv_filters: int = 8
    kernel_size: int = 3
    hidden_width: int = 128
    learning_rate: float = 0.01
    batch_size: int = 32
    epochs: int = 4
    applicability_mode: str = INDICATOR
    context_readout: bool = False

    @classmethod
    def for_shapes(cls, shapes: Mapping[FeaturePair, tuple[int, int]], n_classes: int, **options) -> 'ModelConfig':
        """Config with one channel per pair and a one-hot block per context kind."""
        channels = tuple(ChannelSpec(pair, *shape) for pair, shape in shapes.items())
        sizes = {}
        for channel in channels:
            sizes.setdefault(channel.pair.context, channel.height)
        for kind, size in options.pop('context_sizes', {}).items():
            sizes.setdefault(kind, size)
        contexts = tuple((kind, sizes[kind]) for kind in CONTEXT_ORDER if kind in sizes)
        return cls(channels=channels, contexts=contexts, n_classes=n_classes, **options)

    @property
    def context_kinds(self) -> tuple[ContextKind, ...]:
        return tuple(kind for kind, _ in self.contexts)

    def context_position(self, kind: ContextKind) -> int:
        return self.context_kinds.index(kind)

    def channel_feature_length(self) -> int:
        return sum(
            self.conv_filters * (channel.height // 2) * (channel.width // 2)
            for channel in self.channels
        )

    def dense_input_length(self) -> int:
        length = self.channel_feature_length() + sum(size for _, size in self.contexts)
        if self.applicability_mode == INDICATOR:
            length += len(self.channels)
        if self.context_readout:
            length += sum(channel.width for channel in self.channels)
        return length

    def validate(self):
        if not self.channels:
            raise InvalidConfig('the model needs at least one channel')
        if min(self.conv_filters, self.hidden_width, self.n_classes, self.batch_size) <= 0:
            raise InvalidConfig('layer sizes, classes and batch size must be positive')
        if self.kernel_size % 2 == 0:
            raise InvalidConfig('kernel size must be odd for same padding')
        if self.epochs < 0 or self.learning_rate <= 0:
            raise InvalidConfig('epochs must be >= 0 and learning rate > 0')
        if self.applicability_mode not in APPLICABILITY_MODES:
            raise InvalidConfig(f'unknown applicability mode {self.applicability_mode!r}')
        sizes = dict(self.contexts)
        for channel in self.channels:
            if channel.height < 2 or channel.width < 2:
                raise InvalidConfig(f'channel {channel.pair} is too small to pool')
            if sizes.get(channel.pair.context) != channel.height:
                raise InvalidConfig(f'channel {channel.pair} height does not match its context size')
        return self

    def to_dict(self) -> dict:
        data = asdict(self)
        data['channels'] = [
            {'pair': channel.pair.key, 'height': channel.height, 'width': channel.width}
            for channel in self.channels
        ]
        data['contexts'] = [[kind.value, size] for kind, size in self.contexts]
        data['target_view'] = self.target_view.value
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> 'ModelConfig':
        data = dict(data)
        data['channels'] = tuple(
            ChannelSpec(FeaturePair.from_key(item['pair']), item['height'], item['width'])
            for item in data['channels']
        )
        data['contexts'] = tuple((ContextKind(kind), size) for kind, size in data['contexts'])
        data['target_view'] = ViewKind(data['target_view'])
        return cls(**data)


@dataclass(frozen=True)
class TrainingExample:
    user_id: str
    channels: tuple[np.ndarray, ...]
    indicator: np.ndarray
    # one bucket index per config.contexts entry
    context: tuple[int, ...]
    target: int


@dataclass
class UnifiedModelParams:
    tensors: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def copy(self) -> 'UnifiedModelParams':
        return UnifiedModelParams({name: value.copy() for name, value in self.tensors.items()})

    def all_finite(self) -> bool:
        return all(np.isfinite(value).all() for value in self.tensors.values())

    def equals(self, other: 'UnifiedModelParams') -> bool:
        return self.names() == other.names() and all(
            np.array_equal(self.tensors[name], other.tensors[name]) for name in self.names()
        )


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_loss: float
    val_top1: float


@dataclass
class TrainingResult:
    params: UnifiedModelParams
    history: list[EpochLog] = field(default_factory=list)
    best_epoch: int = 0


def parameter_names(config: ModelConfig) -> list[str]:
    names = []
    for index in range(len(config.channels)):
        names += [f'conv{index}_w', f'conv{index}_b']
    return names + ['hidden_w', 'hidden_b', 'output_w', 'output_b']


def glorot_limit(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_params(config: ModelConfig, seed: int) -> UnifiedModelParams:
    config.validate()
    rng = np.random.default_rng(seed)
    k = config.kernel_size
    tensors = {}

    def uniform(shape, fan_in, fan_out):
        limit = glorot_limit(fan_in, fan_out)
        return rng.uniform(-limit, limit, size=shape)

    for index in range(len(config.channels)):
        tensors[f'conv{index}_w'] = uniform((config.conv_filters, k, k), k * k, config.conv_filters * k * k)
        tensors[f'conv{index}_b'] = np.zeros(config.conv_filters)
    dense_in = config.dense_input_length()
    tensors['hidden_w'] = uniform((dense_in, config.hidden_width), dense_in, config.hidden_width)
    tensors['hidden_b'] = np.zeros(config.hidden_width)
    tensors['output_w'] = uniform((config.hidden_width, config.n_classes), config.hidden_width, config.n_classes)
    tensors['output_b'] = np.zeros(config.n_classes)
    return UnifiedModelParams(tensors)


def _check_example(config: ModelConfig, example: TrainingExample):
    if len(example.channels) != len(config.channels):
        raise ShapeMismatch(f'expected {len(config.channels)} channel inputs, got {len(example.channels)}')
    for spec, matrix in zip(config.channels, example.channels):
        if matrix.shape != (spec.height, spec.width):
            raise ShapeMismatch(f'channel {spec.pair} expects {(spec.height, spec.width)}, got {matrix.shape}')
    if example.indicator.shape != (len(config.channels),):
        raise ShapeMismatch(f'indicator must have {len(config.channels)} entries')
    if len(example.context) != len(config.contexts):
        raise ShapeMismatch(f'expected {len(config.contexts)} context buckets, got {len(example.context)}')
    for (kind, size), bucket in zip(config.contexts, example.context):
        if not 0 <= bucket < size:
            raise ShapeMismatch(f'{kind.value} bucket {bucket} outside [0, {size})')


@dataclass(frozen=True)
class ExampleBatch:
    """Examples as arrays; channel inputs are stored once per distinct user."""
    channels: tuple[np.ndarray, ...]
    indicator: np.ndarray
    # row of each example in the per-user arrays
    owner: np.ndarray
    context: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return len(self.owner)

    @property
    def users(self) -> int:
        return len(self.indicator)

    def take(self, rows) -> 'ExampleBatch':
        """Sub-batch of the given example rows, keeping only the users they need."""
        users, owner = np.unique(self.owner[rows], return_inverse=True)
        return ExampleBatch(
            channels=tuple(x[users] for x in self.channels),
            indicator=self.indicator[users],
            owner=owner.reshape(-1),
            context=self.context[rows],
            targets=self.targets[rows],
        )


def stack_examples(examples: Sequence[TrainingExample], config: ModelConfig) -> ExampleBatch:
    """Stack examples, sharing one input row among examples with the same matrices.

    Examples from build_examples share their user's channel and indicator
    objects, so each user is convolved once per batch.
    """
    if not examples:
        raise EmptyBatch('cannot stack an empty batch')
    rows = {}
    distinct = []
    owner = np.empty(len(examples), dtype=np.int64)
    for position, example in enumerate(examples):
        key = (id(example.channels), id(example.indicator))
        if key not in rows:
            rows[key] = len(distinct)
            distinct.append(example)
        owner[position] = rows[key]
    channels = tuple(
        np.stack([example.channels[index] for example in distinct]).astype(np.float64)
        for index in range(len(config.channels))
    )
    return ExampleBatch(
        channels=channels,
        indicator=np.stack([example.indicator for example in distinct]).astype(np.float64),
        owner=owner,
        context=np.array([example.context for example in examples], dtype=np.int64).reshape(
            len(examples), len(config.contexts)),
        targets=np.array([example.target for example in examples], dtype=np.int64),
    )


def _assemble(config: ModelConfig, batch: ExampleBatch):
    """Per-user channel inputs and the per-example dense extras."""
    n = len(batch)
    owner = batch.owner
    inputs = []
    for index, x in enumerate(batch.channels):
        if config.applicability_mode == MASK:
            x = x * batch.indicator[:, index, None, None]
        inputs.append(x)

    extras = []
    if config.applicability_mode == INDICATOR:
        extras.append(batch.indicator[owner])
    for position, (_, size) in enumerate(config.contexts):
        one_hot = np.zeros((n, size))
        one_hot[np.arange(n), batch.context[:, position]] = 1.0
        extras.append(one_hot)
    if config.context_readout:
        for spec, x in zip(config.channels, inputs):
            rows = x[owner, batch.context[:, config.context_position(spec.pair.context)], :]
            totals = rows.sum(axis=1, keepdims=True)
            extras.append(np.divide(rows, totals, out=np.zeros_like(rows), where=totals > 0))
    return inputs, np.concatenate(extras, axis=1), owner


def _forward(params: UnifiedModelParams, config: ModelConfig, inputs, extras, owner):
    caches = []
    features = []
    for index, x in enumerate(inputs):
        conv, conv_cache = layers.conv_forward(x, params[f'conv{index}_w'], params[f'conv{index}_b'])
        activated, relu_cache = layers.relu_forward(conv)
        pooled, pool_cache = layers.max_pool_forward(activated)
        caches.append((conv_cache, relu_cache, pool_cache, pooled.shape))
        features.append(pooled.reshape(pooled.shape[0], -1)[owner])

    dense_in = np.concatenate(features + [extras], axis=1)
    hidden_pre, hidden_cache = layers.affine_forward(dense_in, params['hidden_w'], params['hidden_b'])
    hidden, hidden_relu_cache = layers.relu_forward(hidden_pre)
    logits, output_cache = layers.affine_forward(hidden, params['output_w'], params['output_b'])
    return logits, (caches, owner, hidden_cache, hidden_relu_cache, output_cache)


def _backward(params: UnifiedModelParams, config: ModelConfig, dlogits, cache) -> UnifiedModelParams:
    caches, owner, hidden_cache, hidden_relu_cache, output_cache = cache
    grads = {}
    dhidden, grads['output_w'], grads['output_b'] = layers.affine_backward(dlogits, output_cache)
    dhidden_pre = layers.relu_backward(dhidden, hidden_relu_cache)
    ddense, grads['hidden_w'], grads['hidden_b'] = layers.affine_backward(dhidden_pre, hidden_cache)

    # sums the gradient of every example back onto its user's row
    scatter = np.zeros((caches[0][3][0], len(owner)))
    scatter[owner, np.arange(len(owner))] = 1.0
    offset = 0
    for index, (conv_cache, relu_cache, pool_cache, pooled_shape) in enumerate(caches):
        size = int(np.prod(pooled_shape[1:]))
        dpooled = (scatter @ ddense[:, offset:offset + size]).reshape(pooled_shape)
        offset += size
        dactivated = layers.max_pool_backward(dpooled, pool_cache)
        dconv = layers.relu_backward(dactivated, relu_cache)
        grads[f'conv{index}_w'], grads[f'conv{index}_b'] = layers.conv_backward(dconv, conv_cache)
    return UnifiedModelParams({name: grads[name] for name in params.names()})


def _predict_stacked(params: UnifiedModelParams, config: ModelConfig, stacked: ExampleBatch) -> np.ndarray:
    probabilities = []
    for start in range(0, len(stacked), EVAL_BATCH):
        chunk = stacked.take(np.arange(start, min(start + EVAL_BATCH, len(stacked))))
        logits, _ = _forward(params, config, *_assemble(config, chunk))
        probabilities.append(layers.softmax(logits))
    return np.concatenate(probabilities)


def predict_proba(params: UnifiedModelParams, batch: Sequence[TrainingExample], config: ModelConfig) -> np.ndarray:
    if not batch:
        return np.zeros((0, config.n_classes))
    return _predict_stacked(params, config, stack_examples(batch, config))


def forward(params: UnifiedModelParams, example: TrainingExample, config: ModelConfig) -> np.ndarray:
    """Probability vector over the target labels for one example."""
    _check_example(config, example)
    return predict_proba(params, [example], config)[0]


def loss_and_gradients(params: UnifiedModelParams, batch: Sequence[TrainingExample] | ExampleBatch,
                       config: ModelConfig) -> tuple[float, UnifiedModelParams]:
    if not isinstance(batch, ExampleBatch):
        batch = stack_examples(batch, config)
    if not len(batch):
        raise EmptyBatch('cannot compute a loss over an empty batch')
    logits, cache = _forward(params, config, *_assemble(config, batch))
    loss, dlogits = layers.softmax_cross_entropy(logits, batch.targets)
    return loss, _backward(params, config, dlogits, cache)


def _top_k_rows(probabilities: np.ndarray, k: int) -> np.ndarray:
    # stable sort keeps ties in ascending label order
    order = np.argsort(-probabilities, axis=1, kind='stable')
    return order[:, :k]


def predict_topk(params: UnifiedModelParams, example: TrainingExample, k: int, config: ModelConfig) -> list[int]:
    if not 1 <= k <= config.n_classes:
        raise BadK(f'K must be in [1, {config.n_classes}], got {k}')
    probabilities = forward(params, example, config)
    return [int(label) for label in _top_k_rows(probabilities[None, :], k)[0]]


def predict_topk_batch(params: UnifiedModelParams, batch: Sequence[TrainingExample], k: int,
                       config: ModelConfig) -> list[list[int]]:
    if not 1 <= k <= config.n_classes:
        raise BadK(f'K must be in [1, {config.n_classes}], got {k}')
    if not batch:
        return []
    return _top_k_rows(predict_proba(params, batch, config), k).tolist()


def _evaluate(params, config, stacked: ExampleBatch | None) -> tuple[float, float]:
    if stacked is None:
        return math.nan, math.nan
    probabilities = _predict_stacked(params, config, stacked)
    targets = stacked.targets
    picked = probabilities[np.arange(len(targets)), targets]
    loss = float(-np.log(np.maximum(picked, np.finfo(np.float64).tiny)).mean())
    top1 = float((_top_k_rows(probabilities, 1)[:, 0] == targets).mean())
    return loss, top1


def train(config: ModelConfig, examples: Sequence[TrainingExample], seed: int,
          validation: Sequence[TrainingExample] = ()) -> TrainingResult:
    """Plain mini-batch gradient descent with a seeded shuffle.

    Returns the parameters of the epoch with the lowest validation loss (the
    training loss stands in when no validation examples are given).
    """
    config.validate()
    if not examples:
        raise EmptyBatch('no training examples')
    for example in examples[:1]:
        _check_example(config, example)

    params = init_params(config, seed)
    result = TrainingResult(params.copy())
    if config.epochs == 0:
        return result

    stacked = stack_examples(examples, config)
    held_out = stack_examples(validation, config) if validation else None
    rng = np.random.default_rng(seed)
    best_loss = math.inf
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(examples))
        weighted_loss = 0.0
        for step, start in enumerate(range(0, len(examples), config.batch_size)):
            batch = stacked.take(order[start:start + config.batch_size])
            loss, grads = loss_and_gradients(params, batch, config)
            if not math.isfinite(loss):
                raise Divergence(epoch, step, loss)
            for name in params.names():
                params.tensors[name] -= config.learning_rate * grads[name]
            if not params.all_finite():
                raise Divergence(epoch, step, loss)
            weighted_loss += loss * len(batch)

        train_loss = weighted_loss / len(examples)
        val_loss, val_top1 = _evaluate(params, config, held_out)
        result.history.append(EpochLog(epoch, train_loss, val_loss, val_top1))
        logger.info('epoch %d: train_loss=%.6f val_loss=%.6f val_top1=%.4f', epoch, train_loss, val_loss, val_top1)

        score = val_loss if held_out is not None else train_loss
        if score < best_loss:
            best_loss = score
            result.params = params.copy()
            result.best_epoch = epoch
    return result


def save_checkpoint(path, params: UnifiedModelParams, config: ModelConfig, seed: int, epoch: int):
    """Magic line, JSON header line, then every tensor as .npy in declared order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        'format_version': CHECKPOINT_VERSION,
        'software': f'checkins-{__version__}',
        'config': config.to_dict(),
        'seed': seed,
        'epoch': epoch,
        'tensors': params.names(),
    }
    with open(path, 'wb') as handle:
        handle.write(CHECKPOINT_MAGIC + b' %d\n' % CHECKPOINT_VERSION)
        handle.write(json.dumps(header, sort_keys=True).encode('utf-8') + b'\n')
        for name in params.names():
            np.save(handle, np.ascontiguousarray(params[name], dtype=np.float64), allow_pickle=False)


@dataclass
class Checkpoint:
    params: UnifiedModelParams
    config: ModelConfig
    seed: int
    epoch: int


def load_checkpoint(path) -> Checkpoint:
    with open(path, 'rb') as handle:
        magic = handle.readline().split()
        if not magic or magic[0] != CHECKPOINT_MAGIC or int(magic[1]) != CHECKPOINT_VERSION:
            raise ValueError(f'{path} is not a version {CHECKPOINT_VERSION} checkpoint')
        header = json.loads(handle.readline())
        config = ModelConfig.from_dict(header['config'])
        if header['tensors'] != parameter_names(config):
            raise ValueError(f'{path} does not hold the tensors its configuration declares')
        tensors = {name: np.load(handle, allow_pickle=False) for name in header['tensors']}
    return Checkpoint(UnifiedModelParams(tensors), config, header['seed'], header['epoch'])


def build_examples(queries: Sequence, feature_sets: Mapping[str, UserFeatureSet],
                   assignments: Mapping[str, FeaturePair], config: ModelConfig) -> list[TrainingExample]:
    """Pair every query with its user's normalized matrices and assignment.

    Users without a feature set get zero matrices; users without an assigned
    pair among the channels get the first channel's indicator bit.
    """
    pairs = [channel.pair for channel in config.channels]
    per_user = {}
    examples = []
    for query in queries:
        user = query.user_id
        if user not in per_user:
            ufs = feature_sets.get(user)
            channels = tuple(
                normalize_matrix(ufs[spec.pair]) if ufs is not None and spec.pair in ufs.matrices
                else np.zeros((spec.height, spec.width))
                for spec in config.channels
            )
            indicator = np.zeros(len(pairs))
            assigned = assignments.get(user)
            indicator[pairs.index(assigned) if assigned in pairs else 0] = 1.0
            per_user[user] = (channels, indicator)
        channels, indicator = per_user[user]
        context = tuple(query.context_bucket(kind) for kind in config.context_kinds)
        examples.append(TrainingExample(user, channels, indicator, context, query.label))
    return examples
