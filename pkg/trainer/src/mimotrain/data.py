"""Training-sample generation: messages, Rayleigh channels, noise.

Every sample is fresh (message realisation, channel matrix, noise draw);
the SNR of each sample is drawn uniformly from the configured range and
converted via sigma2 = (N_T / N_R) * 10^(-SNR/10) per real component.
"""

from __future__ import annotations

import torch


def sample_batch(
    gen: torch.Generator,
    batch: int,
    n_t: int,
    n_r: int,
    m: int,
    snr_lo: float,
    snr_hi: float,
):
    """-> (messages0 [B, N_T] int64, h_real [B, N, K] f64, sigma2 [B] f64,
    noise [B, N] f64 unit-variance)."""
    messages0 = torch.randint(0, m, (batch, n_t), generator=gen)
    std = (1.0 / (2.0 * n_r)) ** 0.5
    h_re = torch.randn(batch, n_r, n_t, generator=gen, dtype=torch.float64) * std
    h_im = torch.randn(batch, n_r, n_t, generator=gen, dtype=torch.float64) * std
    h_real = torch.cat(
        [torch.cat([h_re, -h_im], dim=2), torch.cat([h_im, h_re], dim=2)], dim=1
    )
    snr = torch.empty(batch, dtype=torch.float64).uniform_(snr_lo, snr_hi, generator=gen)
    sigma2 = (n_t / n_r) * torch.pow(10.0, -snr / 10.0)
    noise = torch.randn(batch, 2 * n_r, generator=gen, dtype=torch.float64)
    return messages0, h_real, sigma2, noise


def received(h_real: torch.Tensor, x: torch.Tensor, sigma2: torch.Tensor,
             noise: torch.Tensor) -> torch.Tensor:
    """y = H x + sqrt(sigma2) * noise, in float64."""
    hx = (h_real @ x.to(h_real.dtype).unsqueeze(2)).squeeze(2)
    return hx + torch.sqrt(sigma2).unsqueeze(1) * noise
