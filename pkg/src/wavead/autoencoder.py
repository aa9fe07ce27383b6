"""Convolutional autoencoder over coefficient images.

Architecture: two stride-2 convolutions (16 and 8 filters, 3x3) feed a
3-unit latent through a dense map; the decoder mirrors the stack with a
dense layer and two transpose convolutions back to the input shape.
Hidden layers use ReLU and the output is linear. The latent is bounded,
``z = s * tanh(pre / s)``: near-identity for small activations but never
outside [-s, s], which pins the scale of latent-space distances. That
keeps the separation reward of the downstream boundary calibration small
enough that a zero-initialized value table can still correct a wrong
action from its -1 accuracy reward.

Dropout (inverted, rate 0.5) acts on the latent only. Gradient training
runs with dropout off; dropout is sampled only for Monte-Carlo uncertainty
estimates, where the spread of masked latents scores each window.

The training objective is the mean squared reconstruction error of the
windows labeled normal minus ``sep_weight`` times the squared distance
between the latent centroids of the two label classes, so the decoder
only ever learns normal behavior while the encoder keeps the classes
apart. The separation bonus saturates at ``sep_cap`` so it cannot come to
dominate training; below the cap its gradient is exactly the
centroid-distance formula.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .errors import DataError, DivergenceError

_STRIDE = 2
_KERNEL = (3, 3)


def _ceil_half(size: int) -> int:
    return -(-size // _STRIDE)


@dataclass
class ReconResult:
    """Reconstruction of one image and its squared Frobenius error."""

    reconstruction: np.ndarray
    error: float


@dataclass
class UncertaintyScore:
    """Mean per-dimension spread of Monte-Carlo dropout latents."""

    value: float
    samples: int


class ConvAutoencoder:
    """Fixed-shape convolutional autoencoder with hand-derived gradients."""

    def __init__(
        self,
        image_shape: tuple[int, int],
        filters: tuple[int, int] = (16, 8),
        latent_dim: int = 3,
        dropout_rate: float = 0.5,
        latent_scale: float = 0.25,
        seed: int = 0,
    ):
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if latent_scale <= 0.0:
            raise ValueError("latent_scale must be positive")
        self.image_shape = (int(image_shape[0]), int(image_shape[1]))
        self.filters = (int(filters[0]), int(filters[1]))
        self.latent_dim = int(latent_dim)
        self.dropout_rate = float(dropout_rate)
        self.latent_scale = float(latent_scale)
        self.seed = int(seed)

        h0, w0 = self.image_shape
        self._shape0 = (h0, w0)
        self._shape1 = (_ceil_half(h0), _ceil_half(w0))
        self._shape2 = (_ceil_half(self._shape1[0]), _ceil_half(self._shape1[1]))
        self._flat = self._shape2[0] * self._shape2[1] * self.filters[1]

        rng = np.random.default_rng(seed)
        f1, f2 = self.filters
        k = _KERNEL[0] * _KERNEL[1]
        # small positive biases keep ReLU units off their kink at init
        bias0 = 0.01
        self.params: dict[str, np.ndarray] = {
            "conv1_w": rng.standard_normal((*_KERNEL, 1, f1)) * math.sqrt(2.0 / k),
            "conv1_b": np.full(f1, bias0),
            "conv2_w": rng.standard_normal((*_KERNEL, f1, f2)) * math.sqrt(2.0 / (k * f1)),
            "conv2_b": np.full(f2, bias0),
            "enc_w": rng.standard_normal((self._flat, self.latent_dim))
            * math.sqrt(2.0 / (self._flat + self.latent_dim)),
            "enc_b": np.full(self.latent_dim, bias0),
            "dec_w": rng.standard_normal((self.latent_dim, self._flat))
            * math.sqrt(2.0 / (self._flat + self.latent_dim)),
            "dec_b": np.full(self._flat, bias0),
            "tconv1_w": rng.standard_normal((*_KERNEL, f1, f2)) * math.sqrt(2.0 / (k * f2)),
            "tconv1_b": np.full(f1, bias0),
            "tconv2_w": rng.standard_normal((*_KERNEL, 1, f1)) * math.sqrt(2.0 / (k * f1)),
            "tconv2_b": np.full(1, bias0),
        }

    # -- forward ---------------------------------------------------------

    def _as_batch(self, images: np.ndarray) -> tuple[np.ndarray, bool]:
        arr = np.asarray(images, dtype=float)
        single = arr.ndim == 2
        if single:
            arr = arr[None]
        if arr.shape[1:] != self.image_shape:
            raise ValueError(
                f"image shape {arr.shape[1:]} does not match model shape {self.image_shape}"
            )
        return arr, single

    def _encode_cache(self, batch: np.ndarray) -> dict[str, np.ndarray]:
        p = self.params
        x4 = batch[..., None]
        c1_pre = nn.conv2d(x4, p["conv1_w"], p["conv1_b"], _STRIDE)
        c1 = nn.relu(c1_pre)
        c2_pre = nn.conv2d(c1, p["conv2_w"], p["conv2_b"], _STRIDE)
        c2 = nn.relu(c2_pre)
        flat = c2.reshape(batch.shape[0], self._flat)
        z_pre = flat @ p["enc_w"] + p["enc_b"]
        s = self.latent_scale
        z = s * np.tanh(z_pre / s)
        return {
            "x4": x4,
            "c1_pre": c1_pre,
            "c1": c1,
            "c2_pre": c2_pre,
            "flat": flat,
            "z_pre": z_pre,
            "z": z,
        }

    def _decode_cache(self, z: np.ndarray) -> dict[str, np.ndarray]:
        p = self.params
        d_pre = z @ p["dec_w"] + p["dec_b"]
        d = nn.relu(d_pre)
        d3 = d.reshape(z.shape[0], *self._shape2, self.filters[1])
        t1_pre = nn.conv2d_transpose(d3, p["tconv1_w"], p["tconv1_b"], _STRIDE, self._shape1)
        t1 = nn.relu(t1_pre)
        out = nn.conv2d_transpose(t1, p["tconv2_w"], p["tconv2_b"], _STRIDE, self._shape0)
        return {"d_pre": d_pre, "d3": d3, "t1_pre": t1_pre, "t1": t1, "recon": out[..., 0]}

    def encode(self, images: np.ndarray, dropout_rng: np.random.Generator | None = None) -> np.ndarray:
        """Latent vectors; pass a generator to sample inverted dropout."""
        batch, single = self._as_batch(images)
        z = self._encode_cache(batch)["z"]
        if dropout_rng is not None and self.dropout_rate > 0.0:
            keep = dropout_rng.random(z.shape) >= self.dropout_rate
            z = z * keep / (1.0 - self.dropout_rate)
        return z[0] if single else z

    def decode(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        if single:
            z = z[None]
        if z.shape[1] != self.latent_dim:
            raise ValueError(f"latent dimension {z.shape[1]} != {self.latent_dim}")
        recon = self._decode_cache(z)["recon"]
        return recon[0] if single else recon

    def reconstruct(self, images: np.ndarray) -> np.ndarray:
        batch, single = self._as_batch(images)
        recon = self._decode_cache(self._encode_cache(batch)["z"])["recon"]
        return recon[0] if single else recon

    def recon_errors(self, images: np.ndarray) -> np.ndarray:
        """Per-image squared Frobenius reconstruction error, dropout off."""
        batch, single = self._as_batch(images)
        recon = self.reconstruct(batch)
        errors = ((batch - recon) ** 2).sum(axis=(1, 2))
        return errors[:1][0] if single else errors

    # -- objective and gradients -----------------------------------------

    def total_loss(
        self,
        images: np.ndarray,
        labels: np.ndarray,
        sep_weight: float,
        sep_cap: float = math.inf,
    ) -> tuple[float, float, float]:
        """Return (total, reconstruction part, separation part).

        Reconstruction averages the squared errors of the windows labeled
        normal; the separation part is the squared distance between the two
        class centroids in latent space (0 when a class is absent),
        credited in the total only up to ``sep_cap``.
        """
        batch, _ = self._as_batch(images)
        labels = np.asarray(labels, dtype=int)
        enc = self._encode_cache(batch)
        dec = self._decode_cache(enc["z"])
        normal = labels == 0
        if normal.any():
            residual = dec["recon"][normal] - batch[normal]
            recon_part = float((residual**2).sum() / normal.sum())
        else:
            recon_part = 0.0
        sep_part = 0.0
        if normal.any() and (~normal).any():
            mu0 = enc["z"][normal].mean(axis=0)
            mu1 = enc["z"][~normal].mean(axis=0)
            sep_part = float(((mu0 - mu1) ** 2).sum())
        total = recon_part - sep_weight * min(sep_part, sep_cap)
        return total, recon_part, sep_part

    def grad_total_loss(
        self,
        images: np.ndarray,
        labels: np.ndarray,
        sep_weight: float,
        sep_cap: float = math.inf,
    ) -> tuple[dict[str, np.ndarray], float, float]:
        """Gradients of the joint objective for every parameter."""
        if sep_weight < 0:
            raise ValueError("sep_weight must be nonnegative")
        batch, _ = self._as_batch(images)
        if batch.shape[0] == 0:
            raise ValueError("empty batch")
        labels = np.asarray(labels, dtype=int)
        p = self.params
        n = batch.shape[0]

        enc = self._encode_cache(batch)
        dec = self._decode_cache(enc["z"])
        self._check_finite("latent", enc["z"])
        self._check_finite("reconstruction", dec["recon"])

        normal = labels == 0
        n0 = int(normal.sum())
        n1 = n - n0

        g_recon = np.zeros_like(dec["recon"])
        recon_part = 0.0
        if n0 > 0:
            residual = dec["recon"][normal] - batch[normal]
            recon_part = float((residual**2).sum() / n0)
            g_recon[normal] = 2.0 * residual / n0

        g_z_sep = np.zeros_like(enc["z"])
        sep_part = 0.0
        if n0 > 0 and n1 > 0:
            mu0 = enc["z"][normal].mean(axis=0)
            mu1 = enc["z"][~normal].mean(axis=0)
            diff = mu0 - mu1
            sep_part = float((diff**2).sum())
            if sep_part < sep_cap:  # saturated bonus stops pushing
                g_z_sep[normal] = -sep_weight * 2.0 * diff / n0
                g_z_sep[~normal] = sep_weight * 2.0 * diff / n1

        grads: dict[str, np.ndarray] = {}

        # decoder, from the reconstruction term only
        g_out = g_recon[..., None]
        grads["tconv2_w"], grads["tconv2_b"] = nn.conv2d_transpose_weight_grad(
            dec["t1"], g_out, _STRIDE, _KERNEL
        )
        g_t1 = nn.conv2d_transpose_input_grad(g_out, p["tconv2_w"], _STRIDE)
        g_t1 = nn.relu_grad(g_t1, dec["t1_pre"])
        grads["tconv1_w"], grads["tconv1_b"] = nn.conv2d_transpose_weight_grad(
            dec["d3"], g_t1, _STRIDE, _KERNEL
        )
        g_d3 = nn.conv2d_transpose_input_grad(g_t1, p["tconv1_w"], _STRIDE)
        g_d = nn.relu_grad(g_d3.reshape(n, self._flat), dec["d_pre"])
        grads["dec_w"] = enc["z"].T @ g_d
        grads["dec_b"] = g_d.sum(axis=0)

        # encoder, from both terms; squash jacobian is 1 - (z/s)^2
        g_z = g_d @ p["dec_w"].T + g_z_sep
        g_z_pre = g_z * (1.0 - (enc["z"] / self.latent_scale) ** 2)
        grads["enc_w"] = enc["flat"].T @ g_z_pre
        grads["enc_b"] = g_z_pre.sum(axis=0)
        g_flat = g_z_pre @ p["enc_w"].T
        g_c2 = nn.relu_grad(
            g_flat.reshape(n, *self._shape2, self.filters[1]), enc["c2_pre"]
        )
        grads["conv2_w"], grads["conv2_b"] = nn.conv2d_weight_grad(
            enc["c1"], g_c2, _STRIDE, _KERNEL
        )
        g_c1 = nn.conv2d_input_grad(g_c2, p["conv2_w"], _STRIDE, self._shape1)
        g_c1 = nn.relu_grad(g_c1, enc["c1_pre"])
        grads["conv1_w"], grads["conv1_b"] = nn.conv2d_weight_grad(
            enc["x4"], g_c1, _STRIDE, _KERNEL
        )
        for name, g in grads.items():
            self._check_finite(f"gradient of {name}", g)
        return grads, recon_part, sep_part

    @staticmethod
    def _check_finite(name: str, arr: np.ndarray) -> None:
        if not np.isfinite(arr).all():
            raise DivergenceError(f"non-finite values in {name}")

    def copy_params(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.params.items()}


def recon_loss(originals: np.ndarray, reconstructions: np.ndarray) -> float:
    """Mean squared Frobenius error over a batch of (input, output) pairs."""
    x = np.asarray(originals, dtype=float)
    y = np.asarray(reconstructions, dtype=float)
    if x.shape != y.shape:
        raise ValueError("originals and reconstructions must share a shape")
    if x.ndim == 2:
        x, y = x[None], y[None]
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    return float(((x - y) ** 2).sum(axis=(1, 2)).mean())


def recon_error(model: ConvAutoencoder, image: np.ndarray) -> ReconResult:
    """Reconstruction and squared error for one image, dropout off."""
    recon = model.reconstruct(image)
    return ReconResult(reconstruction=recon, error=float(((np.asarray(image) - recon) ** 2).sum()))


def mc_uncertainty(
    model: ConvAutoencoder, image: np.ndarray, samples: int = 30, seed: int = 0
) -> UncertaintyScore:
    """Spread of dropout-masked latents: mean per-dimension sample std.

    Dropout acts on the latent alone, so the masked encodings all derive
    from one deterministic encoder pass.
    """
    if samples < 2:
        raise ValueError("at least 2 Monte-Carlo samples are required")
    z = model.encode(image)
    if z.ndim != 1:
        raise ValueError("mc_uncertainty scores one image at a time")
    if model.dropout_rate == 0.0:
        # deterministic network: every pass returns the same latent
        return UncertaintyScore(value=0.0, samples=samples)
    rng = np.random.default_rng(seed)
    keep = rng.random((samples, z.size)) >= model.dropout_rate
    draws = z[None, :] * keep / (1.0 - model.dropout_rate)
    return UncertaintyScore(value=float(draws.std(axis=0, ddof=1).mean()), samples=samples)


def nearest_rank(values: np.ndarray, q: float) -> float:
    """Nearest-rank percentile: the ceil(q*n)-th smallest sample."""
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        raise ValueError("empty sample")
    if not 0.0 < q <= 1.0:
        raise ValueError("q must be in (0, 1]")
    k = math.ceil(q * values.size)
    return float(values[k - 1])


def split_by_uncertainty(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Partition scores at their nearest-rank 75th percentile.

    Returns (low indices, high indices, threshold); scores strictly above
    the threshold are high, the rest (ties included) are low.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.size < 4:
        raise ValueError("need at least 4 scores to split")
    threshold = nearest_rank(scores, 0.75)
    high = np.flatnonzero(scores > threshold)
    low = np.flatnonzero(scores <= threshold)
    return low, high, threshold


def train_epoch(
    model: ConvAutoencoder,
    images: np.ndarray,
    labels: np.ndarray,
    optimizer: nn.Adam,
    sep_weight: float,
    rng: np.random.Generator,
    batch_size: int = 16,
    sep_cap: float = math.inf,
) -> dict[str, list[float]]:
    """One shuffled pass over the data; returns per-batch loss parts."""
    n = images.shape[0]
    if n == 0:
        raise ValueError("empty training set")
    order = rng.permutation(n)
    recon_parts: list[float] = []
    sep_parts: list[float] = []
    for lo in range(0, n, batch_size):
        idx = order[lo : lo + batch_size]
        grads, recon_part, sep_part = model.grad_total_loss(
            images[idx], labels[idx], sep_weight, sep_cap
        )
        optimizer.step(model.params, grads)
        recon_parts.append(recon_part)
        sep_parts.append(sep_part)
    return {"recon": recon_parts, "sep": sep_parts}


# -- checkpointing ---------------------------------------------------------

_CHECKPOINT_FORMAT = "wavead-checkpoint-1"


def save_checkpoint(model: ConvAutoencoder, path: str | Path) -> None:
    """Write architecture metadata and float64 little-endian parameters."""
    payload = {
        "format": _CHECKPOINT_FORMAT,
        "architecture": {
            "image_shape": list(model.image_shape),
            "filters": list(model.filters),
            "latent_dim": model.latent_dim,
            "dropout_rate": model.dropout_rate,
            "latent_scale": model.latent_scale,
        },
        "seed": model.seed,
        "params": {
            name: {
                "shape": list(arr.shape),
                "data": base64.b64encode(
                    np.ascontiguousarray(arr, dtype="<f8").tobytes()
                ).decode("ascii"),
            }
            for name, arr in sorted(model.params.items())
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> ConvAutoencoder:
    """Rebuild a model whose encodings match the saved one bit for bit."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    payload = json.loads(path.read_text())
    if payload.get("format") != _CHECKPOINT_FORMAT:
        raise DataError(f"unrecognized checkpoint format in {path}")
    arch = payload["architecture"]
    model = ConvAutoencoder(
        image_shape=tuple(arch["image_shape"]),
        filters=tuple(arch["filters"]),
        latent_dim=arch["latent_dim"],
        dropout_rate=arch["dropout_rate"],
        latent_scale=arch["latent_scale"],
        seed=payload["seed"],
    )
    for name, entry in payload["params"].items():
        arr = np.frombuffer(base64.b64decode(entry["data"]), dtype="<f8").reshape(
            entry["shape"]
        )
        if name not in model.params or model.params[name].shape != arr.shape:
            raise DataError(f"checkpoint parameter {name!r} does not fit the architecture")
        model.params[name] = arr.astype(float)
    return model
