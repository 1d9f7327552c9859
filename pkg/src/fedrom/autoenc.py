"""Dense autoencoders built from two networks that are trained as one."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .federated import FedConfig, RoundLog, partition_iid, run_centralized, run_federated
from .nn import (
    ConfigurationError,
    Network,
    build_network,
    forward,
    mlp_specs,
    read_network,
    write_network,
)

ARCHITECTURES = {
    # hidden widths of the encoder; the decoder mirrors them
    "ks": ((100, 100, 100), "elu"),
    "sst": ((800, 400, 200), "elu"),
}


@dataclass
class Autoencoder:
    encoder: Network
    decoder: Network

    def __post_init__(self):
        if self.encoder.output_width != self.decoder.input_width:
            raise ConfigurationError("encoder output and decoder input widths differ")
        if self.encoder.input_width != self.decoder.output_width:
            raise ConfigurationError("encoder input and decoder output widths differ")

    @property
    def latent_dim(self) -> int:
        return self.encoder.output_width

    @property
    def input_dim(self) -> int:
        return self.encoder.input_width

    def joined(self) -> Network:
        """Encoder followed by decoder as a single network."""
        return Network(self.encoder.layers + self.decoder.layers,
                       np.concatenate([self.encoder.params, self.decoder.params]))

    @classmethod
    def split(cls, net: Network, n_encoder_layers: int) -> "Autoencoder":
        enc_layers = net.layers[:n_encoder_layers]
        n_enc = sum(s.n_params for s in enc_layers)
        return cls(Network(enc_layers, net.params[:n_enc].copy()),
                   Network(net.layers[n_encoder_layers:], net.params[n_enc:].copy()))


def autoencoder_specs(N: int, R: int, arch: str):
    if arch not in ARCHITECTURES:
        raise ConfigurationError(f"unknown autoencoder architecture {arch!r}")
    if not 1 <= R < N:
        raise ConfigurationError(f"latent dimension must satisfy 1 <= R < N, got R={R}, N={N}")
    hidden, act = ARCHITECTURES[arch]
    enc = mlp_specs([N, *hidden, R], hidden=act)
    dec = mlp_specs([R, *reversed(hidden), N], hidden=act)
    return enc, dec


def build_autoencoder(N: int, R: int, arch: str = "ks", seed: int = 0) -> Autoencoder:
    enc, dec = autoencoder_specs(N, R, arch)
    return Autoencoder.split(build_network(enc + dec, seed), len(enc))


def encode(ae: Autoencoder, u) -> np.ndarray:
    return forward(ae.encoder, u)


def decode(ae: Autoencoder, z) -> np.ndarray:
    return forward(ae.decoder, z)


def reconstruct(ae: Autoencoder, u) -> np.ndarray:
    return decode(ae, encode(ae, u))


@dataclass
class AutoencoderTraining:
    model: Autoencoder
    logs: list[RoundLog]


def train_autoencoder(train, validation, R: int, arch: str, mode: str, config: FedConfig,
                      batch_size: int | None = None, epochs: int | None = None,
                      record_time: bool = True, on_round=None) -> AutoencoderTraining:
    """Minimize mean reconstruction error of snapshot columns.

    ``train`` and ``validation`` are snapshot matrices (features x samples).
    In federated mode the training columns are dealt IID to ``config.K`` clients.
    Centralized defaults: ``batch_size = K * B`` and ``epochs = rounds``.
    """
    x = np.asarray(train, dtype=np.float64).T
    x_val = np.asarray(validation, dtype=np.float64).T
    if len(x) < config.K:
        raise ValueError(f"{len(x)} snapshots cannot be split over {config.K} clients")
    init = build_autoencoder(x.shape[1], R, arch, config.seed)
    specs = init.encoder.layers + init.decoder.layers
    joined = init.joined()
    if mode == "federated":
        shards = partition_iid(x, x, config.K, config.seed)
        net, logs = run_federated(specs, shards, config, (x_val, x_val), init=joined,
                                  record_time=record_time, on_round=on_round)
    elif mode == "centralized":
        net, logs = run_centralized(specs, (x, x), epochs or config.rounds,
                                    batch_size or config.K * config.B, config.lr, config.seed,
                                    (x_val, x_val), init=joined, record_time=record_time,
                                    on_round=on_round)
    else:
        raise ValueError(f"unknown training mode {mode!r}")
    return AutoencoderTraining(Autoencoder.split(net, len(init.encoder.layers)), logs)


def reconstruction_mse(ae: Autoencoder, data) -> float:
    """Mean squared reconstruction error over a snapshot matrix (features x samples)."""
    x = np.asarray(data, dtype=np.float64).T
    d = reconstruct(ae, x) - x
    return float(np.mean(d * d))


def save_autoencoder(path, ae: Autoencoder) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", 2))
        write_network(fh, ae.encoder)
        write_network(fh, ae.decoder)


def load_autoencoder(path) -> Autoencoder:
    with open(path, "rb") as fh:
        (count,) = struct.unpack("<I", fh.read(4))
        if count != 2:
            raise ValueError(f"expected 2 networks, header says {count}")
        return Autoencoder(read_network(fh), read_network(fh))
