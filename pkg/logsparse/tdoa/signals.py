import numpy as np

from ..utils.log import debug, error
from ..utils.errors import InvalidParams, LengthMismatch
from ..utils.types import as_vector
from .scene import DelayTable, TdoaScene

__all__ = ["cross_correlate", "simulate_signals", "extract_delays", "DEFAULT_FS", "DEFAULT_SAMPLES"]

DEFAULT_FS = 1e8
DEFAULT_SAMPLES = 16384


def cross_correlate(sig_a, sig_b) -> list[tuple[int, float]]:
    """
    Circular cross-correlation r[l] = sum_n a[n] b[n - l] over every lag.
    A copy of b delayed by d samples peaks at lag d.

    :return:        (lag, value) pairs with signed lags in ascending order
    """
    a = as_vector(sig_a, "sig_a")
    b = as_vector(sig_b, "sig_b")
    if a.shape[0] != b.shape[0]:
        raise error(f"Signals have different lengths ({a.shape[0]} and {b.shape[0]}).", cross_correlate, LengthMismatch)
    n = a.shape[0]
    if n < 2:
        raise error("Signals need at least 2 samples.", cross_correlate, LengthMismatch)

    r = np.fft.irfft(np.fft.rfft(a) * np.conj(np.fft.rfft(b)), n=n)
    lags = np.arange(n)
    lags[lags > n // 2] -= n
    order = np.argsort(lags)
    return [(int(lags[i]), float(r[i])) for i in order]


def simulate_signals(scene: TdoaScene, seed: int, fs: float = DEFAULT_FS, n_samples: int = DEFAULT_SAMPLES, noise_std: float = 0.0) -> np.ndarray:
    """
    Receiver recordings for mutually uncorrelated white emitters.
    Every emitter's sequence reaches each receiver after its propagation delay, rounded to whole samples.
    `noise_std` adds white receiver noise relative to the unit-power emitters.

    :return:        receivers x n_samples array
    """
    if fs <= 0 or n_samples < 2:
        raise error("Sampling rate must be positive and at least 2 samples are needed.", simulate_signals, InvalidParams)
    rng = np.random.default_rng(seed)
    rec = scene.receiver_array
    tgt = scene.target_array
    travel = np.linalg.norm(tgt[None, :, :] - rec[:, None, :], axis=2) / scene.c
    shifts = np.rint(travel * fs).astype(int)
    if shifts.max() >= n_samples // 2:
        raise error(f"{n_samples} samples cannot hold a {shifts.max()} sample propagation delay.", simulate_signals, InvalidParams)

    sources = rng.standard_normal((scene.K, n_samples))
    signals = np.zeros((rec.shape[0], n_samples))
    for j in range(rec.shape[0]):
        for k in range(scene.K):
            signals[j] += np.roll(sources[k], shifts[j, k])
    if noise_std > 0:
        signals += rng.normal(0.0, noise_std, size=signals.shape)
    return signals


def extract_delays(signals: np.ndarray, fs: float, K: int) -> DelayTable:
    """
    Picks the K strongest correlation peaks of every receiver against the reference (row 0).

    :param signals:     receivers x samples recordings
    :param fs:          Sampling rate
    :param K:           Number of emitters
    """
    signals = np.asarray(signals, dtype=np.float64)
    if signals.ndim != 2 or signals.shape[0] < 2:
        raise error("Need a receivers x samples array with at least 2 receivers.", extract_delays, InvalidParams)
    if K < 1:
        raise error("K must be positive.", extract_delays, InvalidParams)

    rows = []
    for j in range(1, signals.shape[0]):
        corr = cross_correlate(signals[j], signals[0])
        lags = np.array([lag for lag, _ in corr])
        values = np.array([value for _, value in corr])
        strongest = np.argsort(-values, kind="stable")[:K]
        rows.append(np.sort(lags[strongest]) / fs)
    debug(f"extracted {K} peaks for {signals.shape[0] - 1} receivers", extract_delays)
    return DelayTable(np.vstack(rows))
