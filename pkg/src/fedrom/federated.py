"""Synchronous federated averaging and the pooled-data baseline trainer.

Every round the server broadcasts the global parameter vector, each client
runs ``E`` epochs of minibatch SGD on its own shard, and the server replaces
the global vector with the average of client vectors weighted by shard size.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .nn import (
    ConfigurationError,
    LayerSpec,
    Network,
    build_network,
    check_chain,
    dataset_loss,
    loss_and_grad,
    n_params,
)

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e6


class TrainingDivergedError(RuntimeError):
    pass


class ClientFailure(RuntimeError):
    """A client update raised; the round is abandoned without aggregation."""


@dataclass
class ClientShard:
    client_id: int
    inputs: np.ndarray
    targets: np.ndarray
    # positions of the rows in the pooled dataset, when known
    indices: np.ndarray | None = None

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=np.float64))
        if len(self.inputs) < 1:
            raise ValueError(f"client {self.client_id} has an empty shard")
        if len(self.inputs) != len(self.targets):
            raise ValueError(
                f"client {self.client_id}: {len(self.inputs)} inputs vs {len(self.targets)} targets"
            )

    @property
    def n_k(self) -> int:
        return len(self.inputs)


@dataclass
class FedConfig:
    K: int = 10
    E: int = 1
    B: int = 32
    lr: float = 1e-3
    rounds: int = 100
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        for name in ("K", "E", "B", "rounds", "threads"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.lr >= 0:
            raise ConfigurationError(f"lr must be >= 0, got {self.lr}")


@dataclass
class RoundLog:
    round: int
    train_loss: float
    val_loss: float
    wall_ms: float


def client_rng(seed: int, client_id: int, round_index: int) -> np.random.Generator:
    """Independent stream per (run seed, client, round)."""
    return np.random.default_rng(np.random.SeedSequence([seed, client_id, round_index]))


def partition_iid(inputs, targets, K: int, seed: int) -> list[ClientShard]:
    """Shuffle, then deal contiguous blocks whose sizes differ by at most one."""
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n = len(inputs)
    if len(targets) != n:
        raise ValueError(f"{n} inputs but {len(targets)} targets")
    if K < 1 or K > n:
        raise ValueError(f"cannot split {n} samples across {K} clients")
    order = np.random.default_rng(seed).permutation(n)
    shards = []
    for k, idx in enumerate(np.array_split(order, K)):
        shards.append(ClientShard(k, inputs[idx], targets[idx], idx))
    return shards


def _sgd_epochs(params, specs, x, y, epochs, batch_size, lr, rng):
    net = Network(specs, params.copy())
    n = len(x)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            _, g = loss_and_grad(net, x[idx], y[idx])
            net.params -= lr * g
    return net.params


def client_update(w, shard: ClientShard, specs: Sequence[LayerSpec], E: int, B: int,
                  lr: float, rng: np.random.Generator) -> np.ndarray:
    """Run ``E`` local epochs of minibatch SGD from ``w``; return the new vector."""
    specs = check_chain(specs)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n_params(specs),):
        raise ConfigurationError(f"parameter vector length {w.size} != {n_params(specs)}")
    if lr == 0:
        return w.copy()
    return _sgd_epochs(w, specs, shard.inputs, shard.targets, E, min(B, shard.n_k), lr, rng)


def aggregate(updates: Sequence[tuple[int, np.ndarray]]) -> np.ndarray:
    """Data-size weighted average, summed in the order given."""
    if not updates:
        raise ValueError("nothing to aggregate")
    shape = np.shape(updates[0][1])
    n = sum(int(n_k) for n_k, _ in updates)
    if any(n_k < 1 for n_k, _ in updates):
        raise ValueError("every client must hold at least one sample")
    weights = [n_k / n for n_k, _ in updates]
    assert abs(math.fsum(weights) - 1.0) < 1e-15
    acc = np.zeros(shape)
    for wk, (_, vec) in zip(weights, updates):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != shape:
            raise ConfigurationError(f"update shape {vec.shape} does not match {shape}")
        acc += wk * vec
    return acc


def _check_loss(value, where):
    if not np.isfinite(value) or value > DIVERGENCE_LIMIT:
        raise TrainingDivergedError(f"loss {value!r} at {where}")
    return value


def _pooled(shards):
    x = np.concatenate([s.inputs for s in shards])
    y = np.concatenate([s.targets for s in shards])
    if all(s.indices is not None for s in shards):
        order = np.argsort(np.concatenate([s.indices for s in shards]), kind="stable")
        x, y = x[order], y[order]
    return x, y


def run_federated(specs: Sequence[LayerSpec], shards: Sequence[ClientShard], config: FedConfig,
                  validation: tuple, init: Network | None = None,
                  record_time: bool = True,
                  on_round: Callable[[int, Network], None] | None = None,
                  ) -> tuple[Network, list[RoundLog]]:
    """Federated averaging over ``config.rounds`` synchronous rounds.

    Round 0 in the log holds the losses of the initial network. The training
    loss is evaluated by the server on the union of the shards, which equals
    the size-weighted average of client losses.
    """
    specs = check_chain(specs)
    if not shards:
        raise ValueError("no clients")
    shards = sorted(shards, key=lambda s: s.client_id)
    x_val, y_val = (np.asarray(v, dtype=np.float64) for v in validation)
    if len(x_val) == 0:
        raise ValueError("empty validation set")
    net = init.copy() if init is not None else build_network(specs, config.seed)
    if net.layers != specs:
        raise ConfigurationError("initial network does not match the layer specs")
    for s in shards:
        if s.inputs.shape[1] != specs[0].input_width or s.targets.shape[1] != specs[-1].output_width:
            raise ConfigurationError(f"client {s.client_id}: shard widths do not match the network")
    x_all, y_all = _pooled(shards)

    def losses(net):
        return dataset_loss(net, x_all, y_all), dataset_loss(net, x_val, y_val)

    tr, va = losses(net)
    logs = [RoundLog(0, tr, va, 0.0)]
    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    try:
        for r in range(1, config.rounds + 1):
            t0 = time.perf_counter()
            w = net.params

            def work(shard, w=w, r=r):
                rng = client_rng(config.seed, shard.client_id, r)
                return client_update(w, shard, specs, config.E, config.B, config.lr, rng)

            try:
                if pool is None:
                    results = [work(s) for s in shards]
                else:
                    results = list(pool.map(work, shards))
            except Exception as exc:
                raise ClientFailure(f"round {r}: {exc}") from exc
            if all(np.array_equal(wk, w) for wk in results):
                # n_k/n weights need not sum to exactly 1 in floating point
                net = Network(specs, w.copy())
            else:
                net = Network(specs, aggregate([(s.n_k, wk) for s, wk in zip(shards, results)]))
            tr, va = losses(net)
            _check_loss(tr, f"round {r}")
            wall = (time.perf_counter() - t0) * 1e3 if record_time else 0.0
            logs.append(RoundLog(r, tr, va, wall))
            if on_round is not None:
                on_round(r, net)
            if r % max(1, config.rounds // 10) == 0:
                log.info("federated round %d: train %.4e val %.4e", r, tr, va)
    finally:
        if pool is not None:
            pool.shutdown()
    return net, logs


def run_centralized(specs: Sequence[LayerSpec], dataset: tuple, epochs: int, batch_size: int,
                    lr: float, seed: int, validation: tuple, init: Network | None = None,
                    record_time: bool = True,
                    on_round: Callable[[int, Network], None] | None = None,
                    ) -> tuple[Network, list[RoundLog]]:
    """Minibatch SGD on pooled data, one log entry per epoch (plus epoch 0).

    Epoch ``e`` shuffles with the same stream client 0 would use in round
    ``e``, so a single-client federated run reproduces this trainer exactly.
    """
    specs = check_chain(specs)
    x, y = (np.asarray(v, dtype=np.float64) for v in dataset)
    x_val, y_val = (np.asarray(v, dtype=np.float64) for v in validation)
    if len(x) == 0:
        raise ValueError("empty dataset")
    if epochs < 1:
        raise ConfigurationError("epochs must be >= 1")
    if batch_size > len(x):
        warnings.warn(f"batch size {batch_size} clamped to dataset size {len(x)}")
        batch_size = len(x)
    net = init.copy() if init is not None else build_network(specs, seed)
    logs = [RoundLog(0, dataset_loss(net, x, y), dataset_loss(net, x_val, y_val), 0.0)]
    for e in range(1, epochs + 1):
        t0 = time.perf_counter()
        if lr != 0:
            net = Network(specs, _sgd_epochs(net.params, specs, x, y, 1, batch_size, lr,
                                             client_rng(seed, 0, e)))
        tr = _check_loss(dataset_loss(net, x, y), f"epoch {e}")
        va = dataset_loss(net, x_val, y_val)
        wall = (time.perf_counter() - t0) * 1e3 if record_time else 0.0
        logs.append(RoundLog(e, tr, va, wall))
        if on_round is not None:
            on_round(e, net)
        if e % max(1, epochs // 10) == 0:
            log.info("centralized epoch %d: train %.4e val %.4e", e, tr, va)
    return net, logs


def write_round_log(path, logs: Sequence[RoundLog]) -> None:
    with open(path, "w") as fh:
        fh.write("round,train_loss,val_loss,wall_ms\n")
        for entry in logs:
            fh.write(f"{entry.round},{entry.train_loss!r},{entry.val_loss!r},{entry.wall_ms:.3f}\n")
