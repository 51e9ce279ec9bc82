"""Training and evaluation pipelines for the neural receivers.

Both models train with decoupled-weight-decay Adam and cosine-annealed
learning rates, early-stop on the validation split, and report test-split
BER rows in the simulator's CSV schema (pilot bits excluded).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from . import data as data_mod
from .densenet import bce_loss, build_densenet
from .hypernet import HyperWienerNet
from .unrolled import llr_bce_loss, llr_grid

# per-symbol CFO phase tick: (CP + FFT samples) / reference sample rate
CFO_TICK = 2192.0 / (15_000.0 * 2048.0)

CSV_COLUMNS = ("method", "channel", "doppler_hz", "snr_db", "perturbation",
               "num_bits", "bit_errors", "ber", "channel_mse", "wall_time_s")


@dataclass
class TrainConfig:
    model: str = "densenet"            # densenet | hyperwienernet
    batch_size: int = 0                # 0 -> model default (300 / 1024)
    learning_rate: float = 0.0         # 0 -> model default (1e-3 / 1e-4)
    epochs: int = 40
    weight_decay: float = 1e-2
    patience: int = 10
    seed: int = 0
    deterministic: bool = True
    n_pretrain: int = 0
    cfo_augment: bool = False
    # global phase rotation and antenna permutation leave the slot
    # distribution invariant (circular channel, i.i.d. antennas), so they
    # are free data amplification for the convolutional detector
    symmetry_augment: bool = True
    device: str = "cpu"

    def __post_init__(self):
        if self.model not in ("densenet", "hyperwienernet"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.batch_size == 0:
            self.batch_size = 300 if self.model == "densenet" else 1024
        if self.learning_rate == 0.0:
            self.learning_rate = 1e-3 if self.model == "densenet" else 1e-4


@dataclass
class TrainResult:
    rows: list
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    best_epoch: int = -1
    test_ber: float = float("nan")
    wall_time_s: float = 0.0


def cfo_retraining_schedule(epoch, n_pretrain):
    """Offset (Hz) injected at a given 1-based epoch: 10 ceil((N - N0) / 5)."""
    if epoch <= n_pretrain:
        return 0.0
    return 10.0 * math.ceil((epoch - n_pretrain) / 5.0)


def apply_cfo_torch(y, delta_f):
    """Per-symbol phase rotation of a batched received grid (B, F, S, Nr)."""
    s = torch.arange(y.shape[2], dtype=torch.float64, device=y.device)
    theta = 2.0 * math.pi * float(delta_f) * CFO_TICK * s
    rot = torch.exp(1j * theta).to(y.dtype)
    return y * rot[None, None, :, None]


def network_input_torch(y, x_pilot):
    """Torch mirror of the stacked input builder, for on-the-fly augmentation."""
    b, f, s, nr = y.shape
    x_grid = torch.zeros((b, f, s), dtype=y.dtype, device=y.device)
    x_grid[:, ::2, 0] = x_pilot
    h_embed = torch.zeros_like(y)
    h_embed[:, ::2, 0, :] = y[:, ::2, 0, :] * x_pilot.conj()[:, :, None]
    z_c = torch.cat([y, x_grid[:, :, :, None], h_embed], dim=3)
    z = torch.cat([z_c.real, z_c.imag], dim=3)       # (B, F, S, 4Nr+2)
    return z.permute(0, 3, 1, 2).float()             # (B, C, F, S)


def _seed_everything(cfg: TrainConfig):
    torch.manual_seed(cfg.seed)
    np.random.seed(cfg.seed % (2**32))
    if cfg.deterministic:
        torch.use_deterministic_algorithms(True)


def _symmetry_augment(y, xp, generator):
    """Distribution-exact augmentation: global phase per slot (absorbed by
    the circularly-symmetric channel) and a random antenna permutation."""
    b, _, _, nr = y.shape
    theta = torch.rand(b, generator=generator) * (2 * math.pi)
    rot = torch.exp(1j * theta).to(y.dtype)
    y = y * rot[:, None, None, None]
    perm = torch.randperm(nr, generator=generator)
    return y[:, :, :, perm], xp


def recalibrate_batchnorm(model, feed, z, batch_size=100):
    """Reset BN running statistics and re-estimate them from given inputs.

    Short training runs leave the exponential running averages far behind
    the batch statistics; one dedicated pass with ``feed(z_batch)`` fixes
    evaluation mode.
    """
    bns = [m for m in model.modules() if isinstance(m, nn.BatchNorm2d)]
    if not bns:
        return
    for m in bns:
        m.reset_running_stats()
        m.momentum = None          # cumulative average over this pass
    model.train()
    with torch.no_grad():
        for start in range(0, z.shape[0], batch_size):
            feed(z[start:start + batch_size])
    for m in bns:
        m.momentum = 0.1
    model.eval()


def _batches(n, batch_size, generator):
    perm = torch.randperm(n, generator=generator)
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def _bits_from_model(cfg, model, z, y, xp):
    if cfg.model == "densenet":
        prob = model(z)                               # (B, 2, F, S)
        return (prob > 0.5).permute(0, 2, 3, 1).to(torch.uint8), None
    x_soft, h_est, sigma_last = model(z, y, xp)
    llr = llr_grid(x_soft, h_est, sigma_last)
    return (llr > 0).to(torch.uint8), h_est


def _loss_for_batch(cfg, model, z, bits, y, xp):
    if cfg.model == "densenet":
        prob = model(z)
        target = bits.permute(0, 3, 1, 2)             # (B, 2, F, S)
        return bce_loss(prob, target)
    x_soft, h_est, sigma_last = model(z, y, xp)
    return llr_bce_loss(x_soft, h_est, sigma_last, bits)


def train_and_evaluate(dataset_path, cfg: TrainConfig) -> TrainResult:
    """Train on the 60% split, early-stop on validation, report test BER."""
    t_start = time.perf_counter()
    _seed_everything(cfg)
    device = torch.device(cfg.device)

    ds = data_mod.load_slots(dataset_path)
    tr_idx, va_idx, te_idx = data_mod.split_indices(ds.num_slots, ds.master_seed)
    tensors = {}
    for name, idx in (("train", tr_idx), ("val", va_idx), ("test", te_idx)):
        z, bits, y, xp = data_mod.build_tensors(ds, idx)
        tensors[name] = dict(
            z=torch.from_numpy(z).permute(0, 3, 1, 2).to(device),
            bits=torch.from_numpy(bits).to(device),
            y=torch.from_numpy(y).to(device),
            xp=torch.from_numpy(xp).to(device),
            idx=np.asarray(idx),
        )

    if cfg.model == "densenet":
        model = build_densenet(in_channels=tensors["train"]["z"].shape[1]).to(device)
    else:
        model = HyperWienerNet(in_channels=tensors["train"]["z"].shape[1]).to(device)

    optimizer = torch.optim.AdamW(model.parameters(), lr=cfg.learning_rate,
                                  weight_decay=cfg.weight_decay)
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=cfg.epochs)
    generator = torch.Generator().manual_seed(cfg.seed)

    result = TrainResult(rows=[])
    best_val = float("inf")
    best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
    stale = 0

    n_train = tensors["train"]["z"].shape[0]
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        epoch_loss = 0.0
        seen = 0
        delta_f = (cfo_retraining_schedule(epoch, cfg.n_pretrain)
                   if cfg.cfo_augment else 0.0)
        for sel in _batches(n_train, cfg.batch_size, generator):
            z = tensors["train"]["z"][sel]
            bits = tensors["train"]["bits"][sel]
            y = tensors["train"]["y"][sel]
            xp = tensors["train"]["xp"][sel]
            if cfg.symmetry_augment or delta_f:
                if cfg.symmetry_augment:
                    y, xp = _symmetry_augment(y, xp, generator)
                if delta_f:
                    y = apply_cfo_torch(y, delta_f)
                z = network_input_torch(y, xp)
            optimizer.zero_grad()
            loss = _loss_for_batch(cfg, model, z, bits, y, xp)
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach()) * len(sel)
            seen += len(sel)
        scheduler.step()
        result.train_losses.append(epoch_loss / max(seen, 1))

        # validation with batch statistics: the exponential running averages
        # lag badly in short runs and would mislead early stopping
        model.train()
        with torch.no_grad():
            val = tensors["val"]
            val_loss = float(_loss_for_batch(cfg, model, val["z"], val["bits"],
                                             val["y"], val["xp"]))
        result.val_losses.append(val_loss)
        if val_loss < best_val - 1e-6:
            best_val = val_loss
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            result.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break

    model.load_state_dict(best_state)
    if cfg.model == "densenet":
        feed = model
    else:
        feed = model.infer_parameters
    recalibrate_batchnorm(model, feed, tensors["train"]["z"])
    model.eval()

    test = tensors["test"]
    mask = torch.from_numpy(data_mod.data_mask(ds.F, ds.S)).to(device)
    with torch.no_grad():
        bits_hat, h_est = _bits_from_model(cfg, model, test["z"], test["y"], test["xp"])
    truth = test["bits"].to(torch.uint8)
    wrong = (bits_hat != truth) & mask[None, :, :, None]
    bit_errors = int(wrong.sum())
    num_bits = int(mask.sum()) * 2 * truth.shape[0]
    result.test_ber = bit_errors / num_bits

    if h_est is not None:
        h_true = torch.from_numpy(ds.h[test["idx"]].astype(np.complex64)).to(device)
        num = ((h_est - h_true).abs() ** 2).sum(dim=(1, 2, 3))
        den = (h_true.abs() ** 2).sum(dim=(1, 2, 3))
        mse = float((num / den).mean())
    else:
        mse = float("nan")

    result.wall_time_s = time.perf_counter() - t_start
    result.rows = [{
        "method": cfg.model,
        "channel": ds.channel_tag,
        "doppler_hz": ds.doppler_hz,
        "snr_db": ds.snr_db,
        "perturbation": "none",
        "num_bits": num_bits,
        "bit_errors": bit_errors,
        "ber": result.test_ber,
        "channel_mse": mse,
        "wall_time_s": 0.0,
    }]
    return result, model


def rows_to_csv(rows):
    """Rows in the simulator's report schema (stable column order)."""
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        rendered = []
        for col in CSV_COLUMNS:
            val = row[col]
            if col in ("num_bits", "bit_errors"):
                rendered.append(str(int(val)))
            elif col in ("method", "channel", "perturbation"):
                rendered.append(str(val))
            else:
                rendered.append(repr(float(val)))
        lines.append(",".join(rendered))
    return "\n".join(lines) + "\n"


def export_mean_params(model: HyperWienerNet, z, path, f_dim=24, s_dim=12):
    """Average the hypernetwork outputs over a batch and write a parameter
    file in the simulator's text format (17 significant digits)."""
    model.eval()
    with torch.no_grad():
        gamma, sigma, rho, c, d = model.infer_parameters(z)
    gamma = gamma.mean(dim=0).double().numpy()
    sigma = sigma.mean(dim=0).double().numpy()
    rho = rho.mean(dim=0).double().numpy()
    c = c.mean(dim=0).numpy().astype(complex)
    d = d.mean(dim=0).numpy().astype(complex)
    c = c / c[0]
    d = d / d[0]

    def fmt(name, values):
        return name + " " + " ".join(f"{v:.17g}" for v in np.asarray(values, dtype=float))

    lines = [
        "version 1",
        f"F {f_dim}", f"S {s_dim}", f"L {gamma.size}",
        fmt("gamma", gamma), fmt("sigma", sigma), fmt("rho", rho),
        fmt("c_re", c.real), fmt("c_im", c.imag),
        fmt("d_re", d.real), fmt("d_im", d.imag),
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
