"""Naive makeup-extraction baselines.

Three classical detectors, all emitting hard binary masks:

* a skin-color Gaussian mixture flagging low-likelihood pixels,
* chroma deviations from the robust skin hue/saturation center,
* residuals against an injected makeup-removal translator, with optional
  patchwise recomposition through Poisson blending.
"""
from __future__ import annotations

import json

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.special import logsumexp
from scipy.stats import multivariate_normal
from skimage.color import rgb2hsv

from .imaging import as_image, as_mask, poisson_blend

COV_REG = 1e-6
_QUANT_GRID = np.linspace(0.0, 100.0, 1001)


class SkinColorModel:
    """Gaussian mixture over skin RGB values with a stored quantile table of
    the training-pixel log-likelihoods, so percentile thresholds at inference
    need no access to the training data."""

    def __init__(self, weights, means, covs, quantiles, seed, loglik_history=None, n_train_pixels=0):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.means = np.asarray(means, dtype=np.float64)
        self.covs = np.asarray(covs, dtype=np.float64)
        self.quantiles = np.asarray(quantiles, dtype=np.float64)
        self.seed = int(seed)
        self.loglik_history = list(loglik_history or [])
        self.n_train_pixels = int(n_train_pixels)
        self.validate()

    @property
    def K(self) -> int:
        return int(self.weights.shape[0])

    def validate(self):
        k = self.weights.shape[0]
        if k < 1:
            raise ValueError("model must have at least one component")
        if abs(float(self.weights.sum()) - 1.0) > 1e-9 or (self.weights < -1e-12).any():
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if self.means.shape != (k, 3) or self.covs.shape != (k, 3, 3):
            raise ValueError("means/covariances have inconsistent shapes")
        for c in self.covs:
            if not np.allclose(c, c.T, atol=1e-9):
                raise ValueError("covariance not symmetric")
            if np.linalg.eigvalsh(c).min() <= 0:
                raise ValueError("covariance not positive definite")
        if self.quantiles.size < 2:
            raise ValueError("model is missing its training quantile table")

    def log_likelihood(self, colors) -> np.ndarray:
        """Per-row mixture log-density for an (N, 3) color array."""
        colors = np.asarray(colors, dtype=np.float64)
        parts = np.empty((colors.shape[0], self.K), dtype=np.float64)
        for k in range(self.K):
            parts[:, k] = np.log(max(self.weights[k], 1e-300)) + multivariate_normal.logpdf(
                colors, mean=self.means[k], cov=self.covs[k]
            )
        return logsumexp(parts, axis=1)

    def threshold_at(self, percentile) -> float:
        if not (0.0 <= percentile <= 100.0):
            raise ValueError("percentile must lie in [0, 100]")
        return float(np.interp(percentile, _QUANT_GRID, self.quantiles))

    def to_json(self) -> str:
        return json.dumps(
            {
                "weights": self.weights.tolist(),
                "means": self.means.tolist(),
                "covs": self.covs.tolist(),
                "quantiles": self.quantiles.tolist(),
                "seed": self.seed,
                "loglik_history": self.loglik_history,
                "n_train_pixels": self.n_train_pixels,
            }
        )

    @classmethod
    def from_json(cls, text) -> "SkinColorModel":
        d = json.loads(text)
        return cls(
            d["weights"], d["means"], d["covs"], d["quantiles"], d["seed"],
            d.get("loglik_history"), d.get("n_train_pixels", 0),
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path) -> "SkinColorModel":
        with open(path) as f:
            return cls.from_json(f.read())


def _skin_pixels(images, skin_masks) -> np.ndarray:
    px = []
    for img, m in zip(images, skin_masks):
        img = as_image(img)
        m = as_mask(m)
        if m.shape != img.shape[:2]:
            raise ValueError("skin mask dims do not match image")
        sel = m > 0.5
        if sel.any():
            px.append(img[sel].astype(np.float64))
    if not px:
        raise ValueError("no skin pixels selected")
    return np.concatenate(px, axis=0)


def fit_skin_gmm(images, skin_masks, K=3, seed=0, max_iter=200, tol=1e-7) -> SkinColorModel:
    """EM fit of a K-component Gaussian mixture to masked skin colors.

    Deterministic for a given seed. Covariances get a 1e-6 identity floor each
    M-step, which keeps flat synthetic colors from going singular. The
    per-iteration mean log-likelihood history is stored on the model and is
    non-decreasing.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    X = _skin_pixels(images, skin_masks)
    n = X.shape[0]
    if n < 10 * K:
        raise ValueError(f"need at least {10 * K} skin pixels to fit K={K}, got {n}")

    # kmeans++ init for well-separated starting means, then EM refinement
    if K == 1:
        means = X.mean(axis=0, keepdims=True)
    else:
        means, _ = kmeans2(X, K, minit="++", seed=seed)
    base_cov = np.cov(X.T) + COV_REG * np.eye(3)
    covs = np.stack([base_cov.copy() for _ in range(K)])
    weights = np.full(K, 1.0 / K)

    history = []
    prev = -np.inf
    for _ in range(max_iter):
        log_parts = np.empty((n, K), dtype=np.float64)
        for k in range(K):
            log_parts[:, k] = np.log(max(weights[k], 1e-300)) + multivariate_normal.logpdf(
                X, mean=means[k], cov=covs[k]
            )
        row_tot = logsumexp(log_parts, axis=1)
        mean_ll = float(row_tot.mean())
        history.append(mean_ll)

        resp = np.exp(log_parts - row_tot[:, None])
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-12)
        weights = nk / n
        means = (resp.T @ X) / nk[:, None]
        for k in range(K):
            d = X - means[k]
            covs[k] = (resp[:, k, None] * d).T @ d / nk[k] + COV_REG * np.eye(3)

        if mean_ll - prev < tol and np.isfinite(prev):
            break
        prev = mean_ll

    model = SkinColorModel(
        weights=weights, means=means, covs=covs,
        quantiles=np.zeros(_QUANT_GRID.size), seed=seed,
        loglik_history=history, n_train_pixels=n,
    )
    train_ll = model.log_likelihood(X)
    model.quantiles = np.percentile(train_ll, _QUANT_GRID)
    return model


def gmm_makeup_mask(img, model: SkinColorModel, threshold_percentile=5.0, within=None) -> np.ndarray:
    """Binary mask of pixels whose color is unlikely under the skin mixture.

    The threshold is the given percentile of the training skin-pixel
    log-likelihoods; pixels strictly below it are flagged. `within` optionally
    restricts flagging (e.g. to the face hull).
    """
    img = as_image(img)
    model.validate()
    thr = model.threshold_at(threshold_percentile)
    ll = model.log_likelihood(img.reshape(-1, 3)).reshape(img.shape[:2])
    flagged = ll < thr
    if within is not None:
        flagged &= as_mask(within) > 0.5
    return flagged.astype(np.float32)


def _circular_median_deg(angles_deg) -> float:
    """Median of angles on the circle: regular median of residuals around the
    circular mean, mapped back. Robust enough for skin hue distributions."""
    a = np.deg2rad(np.asarray(angles_deg, dtype=np.float64))
    mean = np.arctan2(np.sin(a).mean(), np.cos(a).mean())
    resid = np.angle(np.exp(1j * (a - mean)))
    return float(np.rad2deg(mean + np.median(resid)) % 360.0)


def hue_distance_deg(h1, h2) -> np.ndarray:
    """Circular distance between hues in degrees, in [0, 180]."""
    d = np.abs(np.asarray(h1, dtype=np.float64) - np.asarray(h2, dtype=np.float64)) % 360.0
    return np.minimum(d, 360.0 - d)


def chroma_deviation_mask(img, skin_mask, hue_band=30.0, sat_band=0.25, within=None) -> np.ndarray:
    """Flag pixels deviating from the robust skin hue/saturation center.

    Hue distance is circular (reds near 0/360 compare correctly). Comparison
    is strict, so hue_band=180 with sat_band=1 flags nothing.
    """
    img = as_image(img)
    skin = as_mask(skin_mask)
    if skin.shape != img.shape[:2]:
        raise ValueError("skin mask dims do not match image")
    sel = skin > 0.5
    if not sel.any():
        raise ValueError("empty skin mask")

    hsv = rgb2hsv(img.astype(np.float64))
    hue_deg = hsv[..., 0] * 360.0
    sat = hsv[..., 1]
    center_h = _circular_median_deg(hue_deg[sel])
    center_s = float(np.median(sat[sel]))

    flagged = (hue_distance_deg(hue_deg, center_h) > hue_band) | (np.abs(sat - center_s) > sat_band)
    if within is not None:
        flagged &= as_mask(within) > 0.5
    return flagged.astype(np.float32)


def residual_mask(img, translator, threshold=0.1, patch_boxes=None) -> np.ndarray:
    """Difference mask against a makeup-removal translation.

    translator: callable image -> image of identical dims. With patch_boxes,
    the translator runs on each (r0, r1, c0, c1) crop and the translated
    patches are seamlessly recomposed into the original via Poisson blending
    before differencing. Flags pixels whose max-channel absolute difference
    strictly exceeds the threshold.
    """
    img = as_image(img)
    h, w = img.shape[:2]
    if patch_boxes is None:
        out = np.asarray(translator(img), dtype=np.float32)
        if out.shape != img.shape:
            raise ValueError("translator output dims do not match input")
    else:
        out = img.copy()
        for (r0, r1, c0, c1) in patch_boxes:
            if not (0 < r0 < r1 < h and 0 < c0 < c1 < w):
                raise ValueError("patch box must lie strictly inside the image")
            crop = img[r0:r1, c0:c1]
            t = np.asarray(translator(crop), dtype=np.float32)
            if t.shape != crop.shape:
                raise ValueError("translator output dims do not match patch")
            region = np.zeros((h, w), dtype=np.float32)
            region[r0:r1, c0:c1] = 1.0
            src = np.zeros_like(out)
            src[r0:r1, c0:c1] = t
            out = poisson_blend(src, out, region)

    diff = np.abs(img - out).max(axis=2)
    return (diff > threshold).astype(np.float32)
