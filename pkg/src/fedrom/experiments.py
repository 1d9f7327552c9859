"""End-to-end experiments writing a self-describing run directory."""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from . import autoenc, dynsys, metrics, pod, sst
from .config import ExperimentConfig
from .federated import FedConfig, write_round_log
from .nn import save_checkpoint

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


def _fed_config(cfg: ExperimentConfig) -> FedConfig:
    f = cfg.fed
    return FedConfig(K=f.K, E=f.E, B=f.B, lr=f.lr, rounds=f.rounds, seed=cfg.seed,
                     threads=cfg.run.threads)


def _checkpointer(cfg, directory: Path, save):
    every = cfg.run.checkpoint_every
    if not every:
        return None

    def on_round(r, net):
        if r % every == 0:
            save(directory / f"checkpoint_{r:06d}.bin", net)

    return on_round


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_matrix_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _loss_summary(logs):
    return {
        "initial_val_loss": logs[0].val_loss,
        "final_train_loss": logs[-1].train_loss,
        "final_val_loss": logs[-1].val_loss,
    }


def write_manifest(out: Path, experiment: str) -> dict:
    files = []
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != MANIFEST:
            data = p.read_bytes()
            files.append({"path": p.relative_to(out).as_posix(),
                          "sha256": hashlib.sha256(data).hexdigest(),
                          "bytes": len(data)})
    manifest = {"experiment": experiment, "files": files}
    _write_json(out / MANIFEST, manifest)
    return manifest


# burgers ------------------------------------------------------------------

def _run_burgers(cfg: ExperimentConfig, out: Path) -> dict:
    b = cfg.burgers
    x = dynsys.burgers_grid(b.n_x)
    params = dynsys.burgers_parameter_grid(b.n_t, b.n_nu)
    A = dynsys.burgers_snapshots(x, params)
    target = dynsys.ParamPoint(b.eval_t, b.eval_nu)
    truth = dynsys.burgers_exact(x, target.t, target.nu)
    fed = _fed_config(cfg)
    summary = {"eval_point": {"t": target.t, "nu": target.nu,
                              "extrapolated": target.extrapolated}}
    basis_written = False
    for mode in cfg.modes:
        d = out / mode
        d.mkdir(parents=True, exist_ok=True)
        res = pod.train_rom(
            A, params, cfg.model.R or None, mode, fed, val_fraction=b.val_fraction,
            batch_size=cfg.central_batch(), epochs=cfg.central_epochs(),
            energy=cfg.model.energy, record_time=not cfg.run.deterministic,
            on_round=_checkpointer(cfg, d, save_checkpoint))
        rom = res.rom
        if not basis_written:
            pod.save_basis(out / "basis.podb", rom.basis)
            basis_written = True
            summary["rank"] = rom.basis.rank
        write_round_log(d / "rounds.csv", res.logs)
        save_checkpoint(d / "checkpoint_final.bin", rom.net)
        pred = pod.rom_predict(rom, target)
        best = pod.reconstruct(rom.basis, pod.project(rom.basis, truth))
        _write_matrix_csv(out / f"reconstruction_{mode}.csv",
                          ["x", "truth", "pod_projection", "prediction"],
                          zip(x, truth, best, pred.field))
        summary[mode] = {
            **_loss_summary(res.logs),
            "relative_l2_eval": metrics.relative_l2(truth, pred.field),
            "pod_truncation_relative_l2": metrics.relative_l2(truth, best),
        }
    return summary


# kuramoto-sivashinsky -------------------------------------------------------

def ks_dataset(cfg: ExperimentConfig, regen: bool = False) -> np.ndarray:
    k = cfg.ks
    ks_cfg = dynsys.KSConfig(k.L, k.N, k.dt, k.sample_dt, k.spinup_from, k.t_end)
    name = (f"ks_L{k.L:g}_N{k.N}_dt{k.dt:g}_s{k.sample_dt:g}_from{k.spinup_from:g}"
            f"_to{k.t_end:g}_seed{cfg.seed}.snap")
    cache = Path(cfg.run.cache_dir) / name
    if cache.exists() and not regen:
        log.info("reusing %s", cache)
        return dynsys.load_snapshots(cache)
    log.info("integrating KS to t=%g", k.t_end)
    data = dynsys.ks_generate(ks_cfg, cfg.seed)
    cache.parent.mkdir(parents=True, exist_ok=True)
    dynsys.save_snapshots(cache, data)
    return data


def _run_ks(cfg: ExperimentConfig, out: Path, regen: bool) -> dict:
    k = cfg.ks
    data = ks_dataset(cfg, regen)
    n_train = int(round(k.train_end / k.sample_dt))
    pool, test = data[:, :n_train], data[:, n_train:]
    tr, va = pod.split_indices(n_train, k.val_fraction, cfg.seed)
    scale = float(np.abs(pool[:, tr]).max())
    dx = k.L / k.N
    ux, uxx = metrics.derivative_fields(test, dx)
    ranges = ((ux.min(), ux.max()), (uxx.min(), uxx.max()))
    h_true = metrics.joint_pdf(ux, uxx, k.bins, ranges)
    metrics.write_histogram_csv(out / "jointpdf_truth.csv", h_true)
    metrics.write_histogram_json(out / "jointpdf_truth.json", h_true)
    n_rec = min(k.reconstruction_snapshots, test.shape[1])
    times = k.train_end + k.sample_dt * np.arange(1, n_rec + 1)
    header = ["t"] + [f"u_{i}" for i in range(k.N)]
    _write_matrix_csv(out / "reconstruction_truth.csv", header,
                      np.column_stack([times, test[:, :n_rec].T]))
    summary = {"normalization_scale": scale, "n_train": len(tr), "n_val": len(va),
               "n_test": test.shape[1]}
    fed = _fed_config(cfg)
    for mode in cfg.modes:
        d = out / mode
        d.mkdir(parents=True, exist_ok=True)
        res = autoenc.train_autoencoder(
            pool[:, tr] / scale, pool[:, va] / scale, cfg.model.R, cfg.arch, mode, fed,
            batch_size=cfg.central_batch(), epochs=cfg.central_epochs(),
            record_time=not cfg.run.deterministic,
            on_round=_checkpointer(cfg, d, _save_joined(cfg.model.R, cfg.arch, k.N)))
        write_round_log(d / "rounds.csv", res.logs)
        autoenc.save_autoencoder(d / "autoencoder.bin", res.model)
        rec = autoenc.reconstruct(res.model, (test / scale).T).T * scale
        _write_matrix_csv(out / f"reconstruction_{mode}.csv", header,
                          np.column_stack([times, rec[:, :n_rec].T]))
        a, b = metrics.derivative_fields(rec, dx)
        h = metrics.joint_pdf(a, b, k.bins, ranges)
        metrics.write_histogram_csv(out / f"jointpdf_{mode}.csv", h)
        metrics.write_histogram_json(out / f"jointpdf_{mode}.json", h)
        summary[mode] = {
            **_loss_summary(res.logs),
            "test_mse_normalized": metrics.mse(test / scale, rec / scale),
            "test_relative_l2": metrics.relative_l2(test, rec),
            "js_divergence": metrics.js_divergence(h_true, h),
            "clip_fraction": h.clip_fraction,
        }
    return summary


def _save_joined(R, arch, N):
    n_enc = len(autoenc.autoencoder_specs(N, R, arch)[0])

    def save(path, net):
        autoenc.save_autoencoder(path, autoenc.Autoencoder.split(net, n_enc))

    return save


# sea-surface temperature -----------------------------------------------------

def _run_sst(cfg: ExperimentConfig, out: Path) -> dict:
    s = cfg.sst
    if s.path:
        archive = sst.load_sst(s.path)
        n_train = min(s.train_weeks, len(archive) - 1)
    else:
        archive = sst.synth_sst(s.weeks, cfg.seed, tuple(s.grid))
        n_train = s.train_weeks
    matrix, index = sst.flatten_masked(archive)
    train, mean, scale = sst.normalize_anomaly(matrix[:, :n_train])
    test = sst.apply_anomaly(matrix[:, n_train:], mean, scale)
    week = n_train if s.eval_week < 0 else s.eval_week
    if not n_train <= week < len(archive):
        raise ValueError(f"sst.eval_week {week} is outside the test period")
    truth = matrix[:, week]
    lat, lon = sst.grid_coordinates(archive.shape)
    header = ["lat"] + [f"lon_{v:g}" for v in lon]
    _write_matrix_csv(out / "reconstruction_truth.csv", header,
                      np.column_stack([lat, sst.inflate(truth, index, archive.fill_value)]))
    summary = {"ocean_points": int(matrix.shape[0]), "n_train": n_train,
               "n_test": int(test.shape[1]), "eval_week": int(week), "anomaly_scale": scale}
    fed = _fed_config(cfg)
    n_ocean = matrix.shape[0]
    for mode in cfg.modes:
        d = out / mode
        d.mkdir(parents=True, exist_ok=True)
        res = autoenc.train_autoencoder(
            train, test, cfg.model.R, cfg.arch, mode, fed, batch_size=cfg.central_batch(),
            epochs=cfg.central_epochs(), record_time=not cfg.run.deterministic,
            on_round=_checkpointer(cfg, d, _save_joined(cfg.model.R, cfg.arch, n_ocean)))
        write_round_log(d / "rounds.csv", res.logs)
        autoenc.save_autoencoder(d / "autoencoder.bin", res.model)
        rec = sst.denormalize_anomaly(
            autoenc.reconstruct(res.model, test[:, week - n_train]), mean, scale)
        _write_matrix_csv(out / f"reconstruction_{mode}.csv", header,
                          np.column_stack([lat, sst.inflate(rec, index, archive.fill_value)]))
        summary[mode] = {
            **_loss_summary(res.logs),
            "val_loss_drop": res.logs[0].val_loss / res.logs[-1].val_loss,
            "eval_week_relative_l2": metrics.relative_l2(truth, rec),
        }
    return summary


def run_experiment(cfg: ExperimentConfig, regen: bool = False) -> dict:
    """Run one configured experiment; returns the manifest of the run directory."""
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.experiment == "burgers_rom":
        summary = _run_burgers(cfg, out)
    elif cfg.experiment == "ks_autoencoder":
        summary = _run_ks(cfg, out, regen)
    elif cfg.experiment == "sst_autoencoder":
        summary = _run_sst(cfg, out)
    else:
        raise ValueError(f"unknown experiment {cfg.experiment!r}")
    if set(cfg.modes) == {"centralized", "federated"}:
        summary["federated_to_centralized_val_loss"] = (
            summary["federated"]["final_val_loss"] / summary["centralized"]["final_val_loss"])
    summary["experiment"] = cfg.experiment
    summary["seed"] = cfg.seed
    _write_json(out / "metrics.json", summary)
    return write_manifest(out, cfg.experiment)
