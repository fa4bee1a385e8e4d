"""Patch-local convolutional makeup extractor.

A small residual trunk whose receptive field is capped at 17x17 pixels: every
cell of the output logit grid scores one 17x17 input patch and nothing else.
The network trains on image-level labels only; the per-patch sigmoid
confidences, upsampled to pixel resolution, form the makeup alpha mask.

Locality is enforced structurally: valid (unpadded) convolutions, no
normalization layers (batch or spatial statistics would couple distant
patches), and 1x1 residual blocks that add depth without growing the
receptive field. The kernel/stride ledger is recomputed at build time and
must land exactly on the configured receptive field.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, asdict

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from scipy.ndimage import map_coordinates

from .geometry import region_encoding
from .imaging import as_image


@dataclass(frozen=True)
class ExtractorConfig:
    receptive_field: int = 17
    input_channels: int = 7
    stem_width: int = 24
    stage_widths: tuple = (32, 48, 64)
    stage_kernels: tuple = (3, 3, 3)
    blocks_per_stage: tuple = (1, 1, 1)
    seed: int = 0

    def __post_init__(self):
        if self.input_channels != 7:
            raise ValueError("extractor input is RGB plus the 4 region layers (7 channels)")
        if not (len(self.stage_widths) == len(self.stage_kernels) == len(self.blocks_per_stage)):
            raise ValueError("stage tuples must have equal lengths")
        if any(b < 0 for b in self.blocks_per_stage):
            raise ValueError("block counts must be >= 0")


def rf_ledger(cfg: ExtractorConfig) -> dict:
    """Receptive field and stride bookkeeping for the configured trunk.

    rf grows by (kernel-1) * (product of strides so far) per layer; 1x1
    residual blocks contribute nothing.
    """
    layers = [("stem", 3, 1)]
    for i, (k, nblocks) in enumerate(zip(cfg.stage_kernels, cfg.blocks_per_stage)):
        layers.append((f"stage{i}_down", int(k), 2))
        for b in range(nblocks):
            layers.append((f"stage{i}_res{b}", 1, 1))
    layers.append(("head", 1, 1))

    rf, jump = 1, 1
    rows = []
    for name, k, s in layers:
        rf += (k - 1) * jump
        jump *= s
        rows.append({"layer": name, "kernel": k, "stride": s, "rf": rf, "cum_stride": jump})
    return {"layers": rows, "receptive_field": rf, "stride": jump}


class ResBlock1x1(nn.Module):
    """Pointwise residual block; adds depth with zero receptive-field growth."""

    def __init__(self, width):
        super().__init__()
        self.c1 = nn.Conv2d(width, width, 1)
        self.c2 = nn.Conv2d(width, width, 1)

    def forward(self, x):
        return F.relu(x + self.c2(F.relu(self.c1(x))))


class PatchExtractor(nn.Module):
    """Trunk + 1x1 head emitting one logit per 17x17 patch."""

    def __init__(self, cfg: ExtractorConfig):
        super().__init__()
        self.cfg = cfg
        ledger = rf_ledger(cfg)
        if ledger["receptive_field"] != cfg.receptive_field:
            raise ValueError(
                f"ledger receptive field {ledger['receptive_field']} != configured {cfg.receptive_field}"
            )
        self.ledger = ledger
        self.stride = ledger["stride"]
        self.step_count = 0

        torch.manual_seed(cfg.seed)
        body = [nn.Conv2d(cfg.input_channels, cfg.stem_width, 3), nn.ReLU()]
        w_in = cfg.stem_width
        for w_out, k, nblocks in zip(cfg.stage_widths, cfg.stage_kernels, cfg.blocks_per_stage):
            body.append(nn.Conv2d(w_in, w_out, k, stride=2))
            body.append(nn.ReLU())
            for _ in range(nblocks):
                body.append(ResBlock1x1(w_out))
            w_in = w_out
        self.trunk = nn.Sequential(*body)
        self.head = nn.Conv2d(w_in, 1, 1)

    def forward(self, x):
        """x: (B, 7, H, W) -> logit grid (B, 1, gh, gw)."""
        h, w = x.shape[-2], x.shape[-1]
        if h < self.cfg.receptive_field or w < self.cfg.receptive_field:
            raise ValueError(f"input {h}x{w} smaller than receptive field {self.cfg.receptive_field}")
        return self.head(self.trunk(x))

    def classify(self, x):
        """Scalar image logit: pool trunk features, then the same 1x1 head.

        By linearity this equals the mean of the patch logits, which is the
        image-score definition the mask shares.
        """
        feats = self.trunk(x)
        pooled = feats.mean(dim=(2, 3), keepdim=True)
        return self.head(pooled).flatten(start_dim=0)


@dataclass
class PatchLogitMap:
    logits: torch.Tensor  # (gh, gw)
    stride: int
    receptive_field: int
    input_shape: tuple

    def __post_init__(self):
        if self.logits.ndim != 2 or self.logits.numel() == 0:
            raise ValueError("logit grid must be a nonempty 2-d array")
        if not torch.isfinite(self.logits.detach()).all():
            raise ValueError("non-finite patch logits")
        h, w = self.input_shape
        gh = (h - self.receptive_field) // self.stride + 1
        gw = (w - self.receptive_field) // self.stride + 1
        if tuple(self.logits.shape) != (gh, gw):
            raise ValueError("logit grid dims inconsistent with input size and stride")

    def window(self, i, j) -> tuple:
        """Input slice cell (i, j) depends on: rows/cols [k*stride, k*stride+rf)."""
        r0, c0 = i * self.stride, j * self.stride
        return (r0, r0 + self.receptive_field, c0, c0 + self.receptive_field)


def build_extractor(cfg: ExtractorConfig = None) -> PatchExtractor:
    cfg = cfg or ExtractorConfig()
    return PatchExtractor(cfg)


def _to_input_tensor(img7) -> torch.Tensor:
    if isinstance(img7, torch.Tensor):
        t = img7
        if t.ndim == 3 and t.shape[0] == 7:
            t = t.unsqueeze(0)
        if t.ndim != 4 or t.shape[1] != 7:
            raise ValueError("expected a (7, H, W) or (B, 7, H, W) tensor")
        return t.float()
    arr = np.asarray(img7, dtype=np.float32)
    if arr.ndim != 3 or arr.shape[2] != 7:
        raise ValueError("expected an (H, W, 7) array")
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1))).unsqueeze(0)


def extractor_input(img, landmarks) -> np.ndarray:
    """RGB image concatenated with its region-encoding layers: (H, W, 7)."""
    img = as_image(img)
    h, w = img.shape[:2]
    enc = region_encoding(landmarks, h, w)
    return np.concatenate([img, enc.stack()], axis=2)


def patch_logits(model: PatchExtractor, img7) -> PatchLogitMap:
    """Logit grid for one 7-channel input; cell (i, j) sees only its window."""
    x = _to_input_tensor(img7)
    if x.shape[0] != 1:
        raise ValueError("patch_logits takes a single image")
    grid = model(x)[0, 0]
    return PatchLogitMap(
        logits=grid, stride=model.stride,
        receptive_field=model.cfg.receptive_field,
        input_shape=(int(x.shape[-2]), int(x.shape[-1])),
    )


def aggregate(plm: PatchLogitMap):
    """Image score: the plain mean of all patch logits."""
    if plm.logits.numel() == 0:
        raise ValueError("empty logit grid")
    return plm.logits.mean()


def mask_loss(m_bar, label):
    """Binary cross-entropy of the image score against the image label.

    Negated log-likelihood of sigma(m_bar) under label l, minimized during
    training. Accepts scalars or matching-shape tensors.
    """
    m = m_bar if isinstance(m_bar, torch.Tensor) else torch.as_tensor(float(m_bar))
    l = label if isinstance(label, torch.Tensor) else torch.as_tensor(float(label))
    l = l.to(dtype=m.dtype)
    if not ((l == 0) | (l == 1)).all():
        raise ValueError("labels must be binary")
    return F.binary_cross_entropy_with_logits(m, l)


def upsample_grid(grid, out_shape, stride, receptive_field) -> np.ndarray:
    """Bilinear upsample of a patch grid to pixel resolution.

    Each cell value sits at its window center (k*stride + rf//2); pixels
    outside the center lattice clamp to the nearest cell. All interpolation
    weights are nonnegative, so the result is monotone in the grid values.
    """
    grid = np.asarray(grid, dtype=np.float64)
    h, w = out_shape
    half = receptive_field // 2
    rows = (np.arange(h, dtype=np.float64) - half) / stride
    cols = (np.arange(w, dtype=np.float64) - half) / stride
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    out = map_coordinates(grid, [rr, cc], order=1, mode="nearest")
    return out.astype(np.float32)


def extract_mask(model: PatchExtractor, img, enc) -> np.ndarray:
    """Makeup alpha mask: sigmoid patch confidences at pixel resolution."""
    img = as_image(img)
    h, w = img.shape[:2]
    x7 = np.concatenate([img, enc.stack()], axis=2)
    with torch.no_grad():
        plm = patch_logits(model, x7)
        conf = torch.sigmoid(plm.logits).numpy()
    mask = upsample_grid(conf, (h, w), plm.stride, plm.receptive_field)
    return np.clip(mask, 0.0, 1.0).astype(np.float32)


# ---------------------------------------------------------------------------
# training


def train_extractor(
    dataset,
    cfg: ExtractorConfig = None,
    epochs=10,
    batch_size=32,
    lr=1e-4,
    betas=(0.5, 0.99),
    weight_decay=0.0,
    flip_prob=0.5,
    sample_weights=None,
    seed=0,
    out_dir=None,
    model: PatchExtractor = None,
):
    """Weakly supervised training from image-level labels.

    dataset: sequence of (img7 (H, W, 7) float32, label in {0, 1}). Loss is
    mask_loss on the per-image mean patch logit. Horizontal flips of the full
    7-channel stack augment each batch; optional per-example sample_weights
    switch epochs from plain shuffles to weighted draws with replacement
    (heavier makeup oversampling). Returns (model, history); history rows
    carry per-epoch mean loss and label accuracy, also written to
    out_dir/extractor_history.csv when out_dir is given.
    """
    cfg = cfg or ExtractorConfig(seed=seed)
    if model is None:
        model = build_extractor(cfg)
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    labels = {int(l) for _, l in dataset}
    if labels != {0, 1}:
        raise ValueError("training needs both makeup and no-makeup examples")

    xs = []
    for x7, _ in dataset:
        x7 = np.asarray(x7, dtype=np.float32)
        if x7.ndim != 3 or x7.shape[2] != 7:
            raise ValueError("each example must be (H, W, 7)")
        if min(x7.shape[:2]) < cfg.receptive_field:
            raise ValueError("image smaller than the receptive field")
        xs.append(np.ascontiguousarray(x7.transpose(2, 0, 1)))
    ys = np.array([float(l) for _, l in dataset], dtype=np.float32)

    probs = None
    if sample_weights is not None:
        w = np.asarray(sample_weights, dtype=np.float64)
        if w.shape != (len(xs),) or (w < 0).any() or w.sum() <= 0:
            raise ValueError("sample_weights must be nonnegative, one per example")
        probs = w / w.sum()

    rng = np.random.default_rng(seed)
    torch.manual_seed(seed)
    opt = torch.optim.Adam(model.parameters(), lr=lr, betas=betas, weight_decay=weight_decay)
    history = []
    for epoch in range(epochs):
        if probs is None:
            order = rng.permutation(len(xs))
        else:
            order = rng.choice(len(xs), size=len(xs), replace=True, p=probs)
        losses, correct, seen = [], 0, 0
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            batch = np.stack([xs[i] for i in idx])
            flips = rng.random(len(idx)) < flip_prob
            if flips.any():
                batch = batch.copy()
                batch[flips] = batch[flips, :, :, ::-1]
            xb = torch.from_numpy(batch)
            yb = torch.from_numpy(ys[idx])

            grid = model(xb)
            m_bar = grid.mean(dim=(1, 2, 3))
            loss = mask_loss(m_bar, yb)
            opt.zero_grad()
            loss.backward()
            opt.step()
            model.step_count += 1

            losses.append(float(loss.detach()))
            correct += int(((m_bar.detach() > 0).float() == yb).sum())
            seen += len(idx)
        history.append({"epoch": epoch, "loss": float(np.mean(losses)), "accuracy": correct / seen})

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "extractor_history.csv"), "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=["epoch", "loss", "accuracy"])
            writer.writeheader()
            writer.writerows(history)
    return model, history


# ---------------------------------------------------------------------------
# checkpoints


def save_extractor(model: PatchExtractor, path) -> None:
    """Binary checkpoint plus a JSON sidecar with config, step count, ledger."""
    torch.save(
        {"state_dict": model.state_dict(), "config": asdict(model.cfg), "step_count": model.step_count},
        path,
    )
    sidecar = {
        "kind": "patch-extractor",
        "config": asdict(model.cfg),
        "step_count": model.step_count,
        "rf_ledger": model.ledger,
    }
    with open(str(path) + ".json", "w") as f:
        json.dump(sidecar, f, indent=2)


def load_extractor(path) -> PatchExtractor:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    cfg_d = dict(blob["config"])
    for key in ("stage_widths", "stage_kernels", "blocks_per_stage"):
        cfg_d[key] = tuple(cfg_d[key])
    model = build_extractor(ExtractorConfig(**cfg_d))
    model.load_state_dict(blob["state_dict"])
    model.step_count = int(blob.get("step_count", 0))
    model.eval()
    return model
