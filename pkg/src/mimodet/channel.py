"""System model: constellations, modulation, Rayleigh channel, noise.

Real-equivalent convention: the complex system y~ = H~ x~ + n~ with N_T
single-antenna users and N_R receive antennas is rewritten as y = H x + n
with K = 2*N_T, N = 2*N_R, stacking real parts before imaginary parts.

Message labels are 1-based ({1..M}) everywhere they cross an interface
(JSON, CSV, detector results); internal arrays are 0-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidOrderError, LabelError, NormalizationError, ShapeError

POWER_TOL = 1e-5


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Seeded PCG64 generator; distinct ``stream`` tuples give independent
    streams for the same seed (identical (seed, stream) -> identical draws)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *stream])))


@dataclass(frozen=True)
class Constellation:
    """M labeled complex points with unit average power.

    ``points[i]`` is the symbol for message label i+1.
    """

    points: np.ndarray
    source: str = "qam"  # "qam" | "learned"

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.complex128))
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 2:
            raise InvalidOrderError("constellation needs at least 2 points")
        if not np.all(np.isfinite(pts.view(np.float64))):
            raise NormalizationError("constellation contains non-finite points")
        power = float(np.mean(np.abs(pts) ** 2))
        if abs(power - 1.0) > POWER_TOL:
            raise NormalizationError(
                f"average power {power:.8f} violates unit-power contract"
            )
        if self.source not in ("qam", "learned"):
            raise ValueError(f"unknown constellation source {self.source!r}")

    @property
    def order(self) -> int:
        return self.points.size


def _axis_levels(n: int) -> np.ndarray:
    """Per-axis amplitude levels for n PAM levels, largest first, in the order
    bits are assigned. Gray-coded for power-of-two n so neighbouring grid
    points differ in a single bit; natural order otherwise."""
    amps = float(n - 1) - 2.0 * np.arange(n)  # +(n-1), +(n-3), ..., -(n-1)
    if n & (n - 1) == 0:
        idx = np.zeros(n, dtype=np.int64)
        for g in range(n):
            # binary value of the Gray pattern g
            b, shift = g, 1
            while (g >> shift) > 0:
                b ^= g >> shift
                shift += 1
            idx[g] = b
        return amps[idx]
    return amps


def qam_constellation(m: int) -> Constellation:
    """Square M-QAM grid with odd-integer coordinates scaled to unit average
    power; labels follow a per-axis Gray assignment (I bits high, Q bits low)."""
    if m < 4:
        raise InvalidOrderError(f"M={m} is not a square QAM order (need even sqrt(M) >= 2)")
    side = int(round(np.sqrt(m)))
    if side * side != m or side % 2 != 0:
        raise InvalidOrderError(f"M={m} is not a square QAM order (need even sqrt(M) >= 2)")
    levels = _axis_levels(side)
    i_idx, q_idx = np.divmod(np.arange(m), side)
    raw = levels[i_idx] + 1j * levels[q_idx]
    scale = np.sqrt(np.mean(np.abs(raw) ** 2))
    return Constellation(points=raw / scale, source="qam")


@dataclass(frozen=True)
class ChannelInstance:
    """One channel draw: complex matrix, its real-equivalent block form, and
    the per-component noise variance of the real model."""

    h_cplx: np.ndarray  # complex, [N_R, N_T]
    h_real: np.ndarray  # float64, [N, K]
    sigma2: float

    @property
    def n_r(self) -> int:
        return self.h_cplx.shape[0]

    @property
    def n_t(self) -> int:
        return self.h_cplx.shape[1]


def real_equivalent(h_cplx: np.ndarray) -> np.ndarray:
    """[[Re, -Im], [Im, Re]] block matrix of a complex channel matrix."""
    h_cplx = np.asarray(h_cplx, dtype=np.complex128)
    re, im = h_cplx.real, h_cplx.imag
    return np.block([[re, -im], [im, re]])


def complex_from_real(h_real: np.ndarray) -> np.ndarray:
    """Exact inverse of ``real_equivalent``."""
    h_real = np.asarray(h_real, dtype=np.float64)
    n, k = h_real.shape
    if n % 2 or k % 2:
        raise ShapeError("real-equivalent matrix must have even dimensions")
    n_r, n_t = n // 2, k // 2
    return h_real[:n_r, :n_t] + 1j * h_real[n_r:, :n_t]


def snr_to_sigma2(snr_db: float, n_t: int, n_r: int) -> float:
    """Per-component noise variance of the real model at a given SNR."""
    return (n_t / n_r) * 10.0 ** (-snr_db / 10.0)


def sample_channel(
    rng: np.random.Generator, n_t: int, n_r: int, sigma2: float = 0.0
) -> ChannelInstance:
    """Draw a Rayleigh channel: entries i.i.d. complex Gaussian with per-entry
    variance 1/N_R (so each column has unit expected squared norm)."""
    std = np.sqrt(1.0 / (2.0 * n_r))
    parts = rng.normal(0.0, std, size=(2, n_r, n_t))
    h_cplx = parts[0] + 1j * parts[1]
    return ChannelInstance(h_cplx=h_cplx, h_real=real_equivalent(h_cplx), sigma2=float(sigma2))


def with_sigma2(channel: ChannelInstance, sigma2: float) -> ChannelInstance:
    return replace(channel, sigma2=float(sigma2))


def modulate(s, constellation: Constellation) -> np.ndarray:
    """Map 1-based message labels to the stacked real symbol vector
    [Re(a_{s_1})..Re(a_{s_NT}), Im(a_{s_1})..Im(a_{s_NT})]."""
    s = np.asarray(s, dtype=np.int64)
    if s.ndim != 1:
        raise ShapeError("message vector must be 1-d")
    if np.any(s < 1) or np.any(s > constellation.order):
        raise LabelError(f"message labels must lie in 1..{constellation.order}")
    pts = constellation.points[s - 1]
    return np.concatenate([pts.real, pts.imag])


def transmit(x: np.ndarray, channel: ChannelInstance, rng: np.random.Generator) -> np.ndarray:
    """y = H x + n with i.i.d. zero-mean Gaussian noise of variance sigma2
    per real component."""
    x = np.asarray(x, dtype=np.float64)
    n, k = channel.h_real.shape
    if x.shape != (k,):
        raise ShapeError(f"x has shape {x.shape}, channel expects ({k},)")
    y = channel.h_real @ x
    if channel.sigma2 > 0.0:
        y = y + rng.normal(0.0, np.sqrt(channel.sigma2), size=n)
    return y


@dataclass(frozen=True)
class TransmissionSample:
    """One end-to-end draw: messages, modulated vector, received vector."""

    messages: np.ndarray  # 1-based labels, [N_T]
    x: np.ndarray         # stacked real symbol vector, [K]
    y: np.ndarray         # received vector, [N]
    channel: ChannelInstance


def random_transmission(
    rng: np.random.Generator, constellation: Constellation, channel: ChannelInstance
) -> TransmissionSample:
    """Uniform messages through the given channel instance."""
    s = rng.integers(1, constellation.order + 1, size=channel.n_t)
    x = modulate(s, constellation)
    return TransmissionSample(messages=s, x=x, y=transmit(x, channel, rng), channel=channel)


def nearest_labels(est_cplx: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Per-user nearest constellation point; returns 1-based labels.
    Ties resolve to the smallest label."""
    est = np.atleast_1d(np.asarray(est_cplx, dtype=np.complex128))
    d2 = np.abs(est[:, None] - constellation.points[None, :]) ** 2
    return np.argmin(d2, axis=1).astype(np.int64) + 1


def split_complex(x: np.ndarray) -> np.ndarray:
    """Stacked real vector [Re.., Im..] -> per-user complex estimates."""
    x = np.asarray(x, dtype=np.float64)
    n_t = x.size // 2
    return x[:n_t] + 1j * x[n_t:]


# ---------------------------------------------------------------------------
# Constellation JSON schema: {"M": 16, "source": "learned",
#                             "points": [[re, im], ...]} ordered by label.

def constellation_to_json(c: Constellation) -> str:
    body = {
        "M": c.order,
        "source": c.source,
        "points": [[float(p.real), float(p.imag)] for p in c.points],
    }
    return json.dumps(body)


def constellation_from_json(text: str) -> Constellation:
    body = json.loads(text)
    pts = np.asarray(body["points"], dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] != int(body["M"]):
        raise ShapeError("constellation JSON points do not match declared M")
    return Constellation(points=pts[:, 0] + 1j * pts[:, 1], source=body["source"])


def save_constellation(c: Constellation, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(constellation_to_json(c))
        fh.write("\n")


def load_constellation(path) -> Constellation:
    with open(path, "r", encoding="utf-8") as fh:
        return constellation_from_json(fh.read())
