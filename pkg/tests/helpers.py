"""Independent oracle implementations used to pin expected values.

Deliberately written as plain loops and explicit matrices so they share no
code path with the package: the DFT is a matrix product, the mel filterbank
a per-filter loop, the DCT an explicit cosine matrix.
"""

import numpy as np
from scipy.signal import welch


def oracle_mfcc(samples, sample_rate=16000, win=400, hop=160, n_fft=512,
                n_filters=23, n_ceps=13, fmin=0.0, fmax=8000.0, floor=1e-10):
    """Textbook MFCC chain, all steps explicit, float64 throughout."""
    x = np.asarray(samples, dtype=np.float64)
    n_frames = 1 + (len(x) - win) // hop
    window = np.hanning(win + 1)[:-1]

    # DFT as an explicit matrix product (zero-padded frames)
    n_bins = n_fft // 2 + 1
    n_idx = np.arange(win)
    k_idx = np.arange(n_bins)
    dft = np.exp(-2j * np.pi * np.outer(k_idx, n_idx) / n_fft)

    # triangular filterbank via per-filter loops, HTK mel scale, unit peaks
    def mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def imel(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    edges = imel(np.linspace(mel(fmin), mel(fmax), n_filters + 2))
    bin_freqs = np.arange(n_bins) * sample_rate / n_fft
    bank = np.zeros((n_filters, n_bins))
    for j in range(n_filters):
        lo, mid, hi = edges[j], edges[j + 1], edges[j + 2]
        for i, f in enumerate(bin_freqs):
            if lo < f <= mid:
                bank[j, i] = (f - lo) / (mid - lo)
            elif mid < f < hi:
                bank[j, i] = (hi - f) / (hi - mid)
            elif f == lo and f == mid:  # degenerate, not hit for our configs
                bank[j, i] = 1.0

    # orthonormal DCT-II as an explicit cosine matrix
    dct = np.zeros((n_ceps, n_filters))
    for j in range(n_ceps):
        for i in range(n_filters):
            dct[j, i] = np.cos(np.pi * j * (2 * i + 1) / (2.0 * n_filters))
    dct *= np.sqrt(2.0 / n_filters)
    dct[0] *= np.sqrt(0.5)

    ceps = np.zeros((n_frames, n_ceps))
    for t in range(n_frames):
        frame = x[t * hop : t * hop + win] * window
        spectrum = dft @ frame
        power = np.abs(spectrum) ** 2
        energies = bank @ power
        ceps[t] = dct @ np.log(np.maximum(energies, floor))
    return ceps


def oracle_deltas(feats, n=2):
    """Regression deltas with clamped (edge-replicated) indices, per element."""
    x = np.asarray(feats, dtype=np.float64)
    t_max = len(x)
    out = np.zeros_like(x)
    denom = 2.0 * sum(i * i for i in range(1, n + 1))
    for t in range(t_max):
        acc = np.zeros_like(x[0])
        for i in range(1, n + 1):
            plus = x[min(t + i, t_max - 1)]
            minus = x[max(t - i, 0)]
            acc = acc + i * (plus - minus)
        out[t] = acc / denom
    return out


def oracle_mfcc39(samples, **kwargs):
    ceps = oracle_mfcc(samples, **kwargs)
    d1 = oracle_deltas(ceps)
    d2 = oracle_deltas(d1)
    return np.concatenate([ceps, d1, d2], axis=1)


def oracle_band_ratio(samples, sample_rate=16000, cutoff=4000.0):
    """Averaged-periodogram (Welch) estimate of the high-band energy share."""
    freqs, pxx = welch(np.asarray(samples, dtype=np.float64), fs=sample_rate,
                       window="hann", nperseg=512, detrend=False)
    return pxx[freqs > cutoff].sum() / pxx.sum()


def oracle_confusion(y_true, y_pred):
    counts = [[0, 0], [0, 0]]
    for t, p in zip(y_true, y_pred):
        counts[t][p] += 1
    return counts


def oracle_uar(y_true, y_pred):
    counts = oracle_confusion(y_true, y_pred)
    rec0 = counts[0][0] / (counts[0][0] + counts[0][1])
    rec1 = counts[1][1] / (counts[1][0] + counts[1][1])
    return 0.5 * (rec0 + rec1)


def oracle_conv1d(x, w, b=None, stride=1, pad=0):
    """Direct quadruple-loop convolution."""
    c_out, c_in, width = w.shape
    length = x.shape[1]
    l_out = (length + 2 * pad - width) // stride + 1
    y = np.zeros((c_out, l_out), dtype=np.float64)
    for o in range(c_out):
        for t in range(l_out):
            acc = 0.0
            for c in range(c_in):
                for j in range(width):
                    src = t * stride + j - pad
                    if 0 <= src < length:
                        acc += float(w[o, c, j]) * float(x[c, src])
            y[o, t] = acc + (float(b[o]) if b is not None else 0.0)
    return y


def fft_peak_hz(samples, sample_rate=16000):
    spectrum = np.abs(np.fft.rfft(np.asarray(samples, dtype=np.float64)))
    freqs = np.fft.rfftfreq(len(samples), 1.0 / sample_rate)
    return freqs[int(np.argmax(spectrum))]
