"""Stage-2 refinement: coarse-to-fine generator plus multiscale discriminator.

The generator sharpens the first-stage composite (mask-weighted blend of the
warped reference over the target) into a clean result. A global path runs at
quarter resolution; a local enhancer fuses the global output features with its
own front-end features (summed, then residual blocks) and upsamples back to
full resolution, so the enhancer output sits at exactly 4x the resolution the
residual stack works at.

Losses: masked L1 reconstruction toward the reference inside the mask and the
target outside it, and least-squares adversarial terms with real -> 1,
fake -> 0, averaged over discriminator scales.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, asdict

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .extractor import extract_mask
from .geometry import build_warp, region_encoding, warp_image
from .imaging import save_image


@dataclass(frozen=True)
class GeneratorConfig:
    global_blocks: int = 6
    enhancer_blocks: int = 3
    upscale_factor: int = 4
    base_width: int = 32
    input_channels: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.global_blocks < 1 or self.enhancer_blocks < 1:
            raise ValueError("block counts must be >= 1")
        f = self.upscale_factor
        if f < 2 or (f & (f - 1)) != 0:
            raise ValueError("upscale factor must be a power of 2, >= 2")
        if self.base_width < 4:
            raise ValueError("base width too small")


@dataclass(frozen=True)
class DiscriminatorConfig:
    scales: int = 3
    depth: int = 3
    base_width: int = 32
    input_channels: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.scales < 1:
            raise ValueError("need at least one scale")
        if self.depth < 1:
            raise ValueError("need at least one conv block")


@dataclass(frozen=True)
class TrainingConfig:
    lambda_rec: float = 40.0
    lambda_gan: float = 1.0
    lr_d: float = 1e-4
    lr_g: float = 2e-4
    betas: tuple = (0.5, 0.99)
    epochs: int = 10
    batch_size: int = 4
    seed: int = 0
    sample_every: int = 0  # steps between sample grids; 0 disables

    def __post_init__(self):
        if self.lambda_rec < 0 or self.lambda_gan < 0:
            raise ValueError("loss weights must be >= 0")
        if self.lr_d <= 0 or self.lr_g <= 0:
            raise ValueError("learning rates must be > 0")
        if not all(0.0 < b < 1.0 for b in self.betas):
            raise ValueError("betas must lie in (0, 1)")
        if not (0 <= self.epochs <= 50):
            raise ValueError("epochs must lie in [0, 50]")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


class ResBlockG(nn.Module):
    """3x3 residual block with reflection padding and instance norm."""

    def __init__(self, width):
        super().__init__()
        self.block = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(width, width, 3),
            nn.InstanceNorm2d(width),
            nn.ReLU(inplace=True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(width, width, 3),
            nn.InstanceNorm2d(width),
        )

    def forward(self, x):
        return x + self.block(x)


class GlobalPath(nn.Module):
    """Quarter-resolution encoder/decoder; emits a feature map, not an image."""

    def __init__(self, cin, width, n_blocks):
        super().__init__()
        layers = [
            nn.ReflectionPad2d(3),
            nn.Conv2d(cin, width, 7),
            nn.InstanceNorm2d(width),
            nn.ReLU(inplace=True),
        ]
        w = width
        for _ in range(2):
            layers += [
                nn.Conv2d(w, w * 2, 3, stride=2, padding=1),
                nn.InstanceNorm2d(w * 2),
                nn.ReLU(inplace=True),
            ]
            w *= 2
        layers += [ResBlockG(w) for _ in range(n_blocks)]
        for _ in range(2):
            layers += [
                nn.ConvTranspose2d(w, w // 2, 3, stride=2, padding=1, output_padding=1),
                nn.InstanceNorm2d(w // 2),
                nn.ReLU(inplace=True),
            ]
            w //= 2
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return self.net(x)


class Generator(nn.Module):
    """Coarse-to-fine generator. Input is the 10-channel concatenation
    (target, mask, warped reference, first-stage composite); output is an
    RGB image in [0, 1] at the input resolution."""

    def __init__(self, cfg: GeneratorConfig = None):
        super().__init__()
        cfg = cfg or GeneratorConfig()
        self.cfg = cfg
        self.step_count = 0
        self.last_shapes = {}
        torch.manual_seed(cfg.seed)

        w = cfg.base_width
        n_down = int(math.log2(cfg.upscale_factor))
        self.global_path = GlobalPath(cfg.input_channels, w, cfg.global_blocks)

        front = [
            nn.ReflectionPad2d(3),
            nn.Conv2d(cfg.input_channels, w // 2, 7),
            nn.InstanceNorm2d(w // 2),
            nn.ReLU(inplace=True),
        ]
        cw = w // 2
        for i in range(n_down):
            nxt = w if i == n_down - 1 else cw * 2
            front += [
                nn.Conv2d(cw, nxt, 3, stride=2, padding=1),
                nn.InstanceNorm2d(nxt),
                nn.ReLU(inplace=True),
            ]
            cw = nxt
        self.enhancer_front = nn.Sequential(*front)

        self.enhancer_blocks = nn.Sequential(*[ResBlockG(w) for _ in range(cfg.enhancer_blocks)])

        up = []
        cw = w
        for _ in range(n_down):
            up += [
                nn.ConvTranspose2d(cw, max(cw // 2, 8), 3, stride=2, padding=1, output_padding=1),
                nn.InstanceNorm2d(max(cw // 2, 8)),
                nn.ReLU(inplace=True),
            ]
            cw = max(cw // 2, 8)
        self.enhancer_up = nn.Sequential(*up)
        self.out_conv = nn.Sequential(nn.ReflectionPad2d(3), nn.Conv2d(cw, 3, 7))

    def forward(self, x):
        f = self.cfg.upscale_factor
        h, w = x.shape[-2], x.shape[-1]
        if h % f or w % f:
            raise ValueError(f"input dims must be divisible by {f}, got {h}x{w}")
        x_low = F.avg_pool2d(x, f)
        feats_global = self.global_path(x_low)
        feats_local = self.enhancer_front(x)
        # the enhancer's residual stack runs on the sum of the two feature maps
        y = self.enhancer_blocks(feats_global + feats_local)
        y = self.enhancer_up(y)
        out = self.out_conv(y)
        self.last_shapes = {
            "input": (h, w),
            "global_feats": tuple(feats_global.shape[-2:]),
            "enhancer_residual_in": tuple(feats_local.shape[-2:]),
            "output": tuple(out.shape[-2:]),
        }
        return (torch.tanh(out) + 1.0) / 2.0


class PatchCritic(nn.Module):
    """One discriminator scale: strided conv blocks to a patch score map."""

    def __init__(self, cin, width, depth):
        super().__init__()
        layers = [nn.Conv2d(cin, width, 4, stride=2, padding=2), nn.LeakyReLU(0.2, inplace=True)]
        w = width
        for _ in range(depth - 1):
            nxt = min(w * 2, width * 8)
            layers += [
                nn.Conv2d(w, nxt, 4, stride=2, padding=2),
                nn.InstanceNorm2d(nxt),
                nn.LeakyReLU(0.2, inplace=True),
            ]
            w = nxt
        layers += [nn.Conv2d(w, 1, 4, stride=1, padding=2)]
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return self.net(x)


class MultiscaleDiscriminator(nn.Module):
    """Unconditional critic applied at successively halved resolutions."""

    def __init__(self, cfg: DiscriminatorConfig = None):
        super().__init__()
        cfg = cfg or DiscriminatorConfig()
        self.cfg = cfg
        self.step_count = 0
        torch.manual_seed(cfg.seed)
        self.critics = nn.ModuleList(
            [PatchCritic(cfg.input_channels, cfg.base_width, cfg.depth) for _ in range(cfg.scales)]
        )
        self.downsample = nn.AvgPool2d(3, stride=2, padding=1, count_include_pad=False)

    def forward(self, x):
        outs = []
        cur = x
        for i, critic in enumerate(self.critics):
            outs.append(critic(cur))
            if i + 1 < len(self.critics):
                cur = self.downsample(cur)
        return outs


def build_generator(cfg: GeneratorConfig = None) -> Generator:
    return Generator(cfg or GeneratorConfig())


def build_discriminator(cfg: DiscriminatorConfig = None) -> MultiscaleDiscriminator:
    return MultiscaleDiscriminator(cfg or DiscriminatorConfig())


# ---------------------------------------------------------------------------
# losses


def _to_bchw(x, channels=None):
    t = torch.as_tensor(np.asarray(x) if not isinstance(x, torch.Tensor) else x, dtype=torch.float32)
    if t.ndim == 2:
        t = t.unsqueeze(0).unsqueeze(0)
    elif t.ndim == 3:
        # (H, W, C) channel-last numpy convention, else assume (C, H, W)
        if t.shape[2] in (1, 3) and t.shape[0] not in (1, 3):
            t = t.permute(2, 0, 1)
        t = t.unsqueeze(0)
    if channels is not None and t.shape[1] != channels:
        raise ValueError(f"expected {channels} channels, got {t.shape[1]}")
    return t


def composite_input(target, mask, warped_ref) -> torch.Tensor:
    """Stack the generator input: target, mask, warped reference, and the
    first-stage composite M*ref + (1-M)*target. Returns (B, 10, H, W)."""
    t = _to_bchw(target, 3)
    r = _to_bchw(warped_ref, 3)
    m = _to_bchw(mask, 1)
    if not (t.shape[-2:] == r.shape[-2:] == m.shape[-2:]):
        raise ValueError("target/mask/reference dims differ")
    comp = m * r + (1.0 - m) * t
    return torch.cat([t, m, r, comp], dim=1)


def generate(G: Generator, target, mask, warped_ref) -> torch.Tensor:
    """Refined transfer estimate in [0, 1], same dims as the target."""
    x = composite_input(target, mask, warped_ref)
    return G(x)


def rec_loss(i_est, i_ref, i_orig, mask):
    """Masked L1 reconstruction, mean over all pixels and channels:
    |M (ref - est)| inside the mask plus |(1-M) (orig - est)| outside."""
    est = _to_bchw(i_est)
    ref = _to_bchw(i_ref)
    orig = _to_bchw(i_orig)
    m = _to_bchw(mask)
    if not (est.shape[-2:] == ref.shape[-2:] == orig.shape[-2:] == m.shape[-2:]):
        raise ValueError("rec_loss inputs have mismatched dims")
    inside = (m * ref - m * est).abs().mean()
    outside = ((1.0 - m) * orig - (1.0 - m) * est).abs().mean()
    return inside + outside


def _ls_term(outs, target_value):
    per_scale = [((o - target_value) ** 2).mean() for o in outs]
    return torch.stack(per_scale).mean()


def gan_loss_d(D: MultiscaleDiscriminator, real, fake):
    """Least-squares critic loss: real toward 1, fake toward 0, scale-averaged."""
    real_t = _to_bchw(real)
    fake_t = _to_bchw(fake)
    return _ls_term(D(real_t), 1.0) + _ls_term(D(fake_t.detach() if fake_t.requires_grad else fake_t), 0.0)


def gan_loss_g(D: MultiscaleDiscriminator, fake):
    """Least-squares generator loss: push fake critic outputs toward 1."""
    return _ls_term(D(_to_bchw(fake)), 1.0)


def _check_finite(name, value):
    if not torch.isfinite(value.detach()).all():
        raise RuntimeError(f"{name} became non-finite (value {float(value.detach())}); aborting")


# ---------------------------------------------------------------------------
# optimization steps


def total_d_step(batch, G, D, opt_d, cfg: TrainingConfig):
    """One critic step on a batch dict with target/mask/warped_ref tensors.
    Real samples are the warped references, the only makeup-domain images
    aligned with the targets."""
    with torch.no_grad():
        fake = generate(G, batch["target"], batch["mask"], batch["warped_ref"])
    loss = gan_loss_d(D, batch["warped_ref"], fake)
    _check_finite("discriminator loss", loss)
    opt_d.zero_grad()
    loss.backward()
    opt_d.step()
    D.step_count += 1
    return float(loss.detach())


def total_g_step(batch, G, D, opt_g, cfg: TrainingConfig):
    """One generator step: lambda_rec * rec_loss + lambda_gan * gan_loss_g."""
    fake = generate(G, batch["target"], batch["mask"], batch["warped_ref"])
    rec = rec_loss(fake, batch["warped_ref"], batch["target"], batch["mask"])
    adv = gan_loss_g(D, fake) if cfg.lambda_gan > 0 else torch.zeros(())
    loss = cfg.lambda_rec * rec + cfg.lambda_gan * adv
    _check_finite("generator loss", loss)
    opt_g.zero_grad()
    loss.backward()
    opt_g.step()
    G.step_count += 1
    return {"g_total": float(loss.detach()), "rec": float(rec.detach()), "gan_g": float(adv.detach())}


# ---------------------------------------------------------------------------
# pair preparation and the training loop


def prepare_pair(target_img, target_lms, ref_img, ref_lms, extractor_model) -> dict:
    """Warp the reference onto the target geometry and extract its mask.
    Returns CHW tensors ready for batching; the extractor stays frozen so
    this runs once per pair."""
    h, w = target_img.shape[:2]
    warp = build_warp(ref_lms, target_lms, (h, w))
    wref = warp_image(warp, ref_img)
    enc = region_encoding(target_lms, h, w)
    mask = extract_mask(extractor_model, wref, enc)
    return {
        "target": torch.from_numpy(np.ascontiguousarray(target_img.transpose(2, 0, 1))),
        "warped_ref": torch.from_numpy(np.ascontiguousarray(wref.transpose(2, 0, 1))),
        "mask": torch.from_numpy(mask).unsqueeze(0),
    }


def _batch_from(pairs, idx):
    return {
        "target": torch.stack([pairs[i]["target"] for i in idx]),
        "warped_ref": torch.stack([pairs[i]["warped_ref"] for i in idx]),
        "mask": torch.stack([pairs[i]["mask"] for i in idx]),
    }


def _sample_grid(batch, G, path):
    with torch.no_grad():
        fake = generate(G, batch["target"], batch["mask"], batch["warped_ref"])
        comp = batch["mask"] * batch["warped_ref"] + (1 - batch["mask"]) * batch["target"]
    rows = []
    n = min(4, batch["target"].shape[0])
    for i in range(n):
        cells = [
            batch["target"][i],
            batch["warped_ref"][i],
            batch["mask"][i].expand(3, -1, -1),
            comp[i],
            fake[i],
        ]
        rows.append(torch.cat(cells, dim=2))
    grid = torch.cat(rows, dim=1).permute(1, 2, 0).numpy()
    save_image(np.clip(grid, 0, 1).astype(np.float32), path)


def train_application(
    pairs,
    gen_cfg: GeneratorConfig = None,
    disc_cfg: DiscriminatorConfig = None,
    train_cfg: TrainingConfig = None,
    out_dir=None,
    steps_per_epoch=None,
):
    """Alternating D/G training over prepared pairs (see prepare_pair).

    Returns (generator, discriminator, history). History rows hold per-epoch
    means of the critic and generator losses; with out_dir set they are also
    written to gan_history.csv, plus per-epoch checkpoints and optional sample
    grids every cfg.sample_every generator steps.
    """
    if len(pairs) == 0:
        raise ValueError("empty training set")
    train_cfg = train_cfg or TrainingConfig()
    G = build_generator(gen_cfg)
    D = build_discriminator(disc_cfg)
    torch.manual_seed(train_cfg.seed)
    rng = np.random.default_rng(train_cfg.seed)
    opt_g = torch.optim.Adam(G.parameters(), lr=train_cfg.lr_g, betas=train_cfg.betas)
    opt_d = torch.optim.Adam(D.parameters(), lr=train_cfg.lr_d, betas=train_cfg.betas)

    if steps_per_epoch is None:
        steps_per_epoch = max(1, len(pairs) // train_cfg.batch_size)
    history = []
    step = 0
    for epoch in range(train_cfg.epochs):
        sums = {"d": 0.0, "g_total": 0.0, "rec": 0.0, "gan_g": 0.0}
        for _ in range(steps_per_epoch):
            idx = rng.integers(0, len(pairs), size=min(train_cfg.batch_size, len(pairs)))
            batch = _batch_from(pairs, idx)
            sums["d"] += total_d_step(batch, G, D, opt_d, train_cfg)
            g_stats = total_g_step(batch, G, D, opt_g, train_cfg)
            for k in ("g_total", "rec", "gan_g"):
                sums[k] += g_stats[k]
            step += 1
            if out_dir and train_cfg.sample_every and step % train_cfg.sample_every == 0:
                os.makedirs(out_dir, exist_ok=True)
                _sample_grid(batch, G, os.path.join(out_dir, f"samples_step{step:06d}.png"))
        row = {"epoch": epoch}
        row.update({k: v / steps_per_epoch for k, v in sums.items()})
        history.append(row)
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            save_generator(G, os.path.join(out_dir, f"generator_epoch{epoch:03d}.pt"))
            save_discriminator(D, os.path.join(out_dir, f"discriminator_epoch{epoch:03d}.pt"))

    if out_dir and history:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "gan_history.csv"), "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(history[0].keys()))
            writer.writeheader()
            writer.writerows(history)
    return G, D, history


# ---------------------------------------------------------------------------
# checkpoints


def _save_torch(module, cfg, path, kind):
    torch.save(
        {"state_dict": module.state_dict(), "config": asdict(cfg), "step_count": module.step_count},
        path,
    )
    with open(str(path) + ".json", "w") as f:
        json.dump({"kind": kind, "config": asdict(cfg), "step_count": module.step_count}, f, indent=2)


def save_generator(G: Generator, path) -> None:
    _save_torch(G, G.cfg, path, "generator")


def save_discriminator(D: MultiscaleDiscriminator, path) -> None:
    _save_torch(D, D.cfg, path, "discriminator")


def load_generator(path) -> Generator:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    cfg = GeneratorConfig(**blob["config"])
    G = build_generator(cfg)
    G.load_state_dict(blob["state_dict"])
    G.step_count = int(blob.get("step_count", 0))
    G.eval()
    return G


def load_discriminator(path) -> MultiscaleDiscriminator:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    cfg = DiscriminatorConfig(**blob["config"])
    D = build_discriminator(cfg)
    D.load_state_dict(blob["state_dict"])
    D.step_count = int(blob.get("step_count", 0))
    D.eval()
    return D
