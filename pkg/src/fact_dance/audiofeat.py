"""35-dim music features at exactly 60 frames per second.

Layout per frame: ``[envelope | mfcc(20) | chroma(12) | peak | beat]``.
Analysis runs at 30720 Hz with a 1024-point Hann STFT and hop 512, so one
hop is one motion frame. Frames are centred on ``i * hop`` with zero padding.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dct
from scipy.signal import resample_poly

FPS = 60
SAMPLE_RATE = 30720
HOP = SAMPLE_RATE // FPS
N_FFT = 1024
CHROMA_FFT = 8192  # 3.75 Hz bins, fine enough to separate semitones above ~65 Hz
N_MELS = 64
N_MFCC = 20
FMIN = 20.0
LOG_FLOOR = 1e-10
TOP_DB = 80.0
AUDIO_DIM = 35

ENVELOPE = slice(0, 1)
MFCC = slice(1, 21)
CHROMA = slice(21, 33)
PEAK = 33
BEAT = 34

MIN_BPM, MAX_BPM = 60.0, 180.0
BEAT_TIGHTNESS = 100.0


class InsufficientAudioError(ValueError):
    pass


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def at_analysis_rate(self) -> "AudioClip":
        if self.sample_rate == SAMPLE_RATE:
            return self
        g = np.gcd(int(self.sample_rate), SAMPLE_RATE)
        y = resample_poly(self.samples, SAMPLE_RATE // g, int(self.sample_rate) // g)
        return AudioClip(y, SAMPLE_RATE)


def read_wav(path: str | Path) -> AudioClip:
    """16-bit PCM or 32-bit float WAV; channels are averaged."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as w:
            sr, ch, width, n = w.getframerate(), w.getnchannels(), w.getsampwidth(), w.getnframes()
            raw = w.readframes(n)
        if width == 2:
            data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
        elif width == 4:
            data = np.frombuffer(raw, dtype="<i4").astype(np.float64) / 2147483648.0
        else:
            raise ValueError(f"unsupported sample width {width}")
    except wave.Error:
        # the stdlib reader rejects IEEE float WAVs (format tag 3)
        from scipy.io import wavfile

        sr, data = wavfile.read(str(path))
        ch = 1 if data.ndim == 1 else data.shape[1]
        data = data.astype(np.float64)
        data = data.reshape(-1)
    data = data.reshape(-1, ch).mean(axis=1)
    return AudioClip(data, sr)


def write_wav(path: str | Path, clip: AudioClip) -> None:
    pcm = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(clip.sample_rate))
        w.writeframes(pcm.tobytes())


def n_frames(clip: AudioClip) -> int:
    return int(np.floor(clip.duration * FPS + 1e-9))


def _check_length(clip: AudioClip) -> None:
    if len(clip.samples) < N_FFT:
        raise InsufficientAudioError(f"need at least {N_FFT} samples at {SAMPLE_RATE} Hz, got {len(clip.samples)}")


def power_spectrogram(clip: AudioClip, n_fft: int = N_FFT) -> np.ndarray:
    """|STFT|^2, shape (frames, n_fft // 2 + 1)."""
    clip = clip.at_analysis_rate()
    _check_length(clip)
    T = n_frames(clip)
    pad = n_fft // 2
    y = np.pad(clip.samples, (pad, pad + n_fft))
    idx = np.arange(T)[:, None] * HOP + np.arange(n_fft)[None, :]
    window = np.hanning(n_fft + 1)[:-1]
    spec = np.fft.rfft(y[idx] * window, axis=1)
    return spec.real**2 + spec.imag**2


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int = N_MELS, fmin: float = FMIN, fmax: float | None = None) -> np.ndarray:
    fmax = SAMPLE_RATE / 2 if fmax is None else fmax
    freqs = np.fft.rfftfreq(N_FFT, 1.0 / SAMPLE_RATE)
    edges = _mel_to_hz(np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_mels + 2))
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (freqs - lo) / (mid - lo)
    down = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(up, down))


_MEL = None


def log_mel(clip: AudioClip) -> np.ndarray:
    """Mel power in dB, shape (frames, 64).

    Floored at 1e-10 and at 80 dB below the loudest bin of the clip, so
    leakage far under the signal does not ripple with window phase.
    """
    global _MEL
    if _MEL is None:
        _MEL = mel_filterbank()
    mel = power_spectrogram(clip) @ _MEL.T
    db = 10.0 * np.log10(np.maximum(mel, LOG_FLOOR))
    return np.maximum(db, db.max() - TOP_DB)


def onset_envelope(clip: AudioClip) -> np.ndarray:
    """Mean half-wave-rectified log-mel flux per frame; first frame is 0."""
    S = log_mel(clip)
    flux = np.maximum(0.0, np.diff(S, axis=0)).mean(axis=1)
    return np.concatenate([[0.0], flux])


def mfcc(clip: AudioClip) -> np.ndarray:
    return dct(log_mel(clip), type=2, norm="ortho", axis=1)[:, :N_MFCC]


def chroma(clip: AudioClip) -> np.ndarray:
    """Magnitude folded to 12 pitch classes (C = 0, A440), max-normalised per frame."""
    mag = np.sqrt(power_spectrogram(clip, CHROMA_FFT))
    freqs = np.fft.rfftfreq(CHROMA_FFT, 1.0 / SAMPLE_RATE)
    keep = freqs >= FMIN
    pitch = 69.0 + 12.0 * np.log2(freqs[keep] / 440.0)
    pc = np.round(pitch).astype(int) % 12
    fold = np.zeros((keep.sum(), 12))
    fold[np.arange(keep.sum()), pc] = 1.0
    out = mag[:, keep] @ fold
    peak = out.max(axis=1, keepdims=True)
    return np.where(peak > 1e-8, out / np.where(peak > 1e-8, peak, 1.0), 0.0)


def pick_peaks(env, pre_max: int = 3, avg_window: int = 10, delta_frac: float = 0.1) -> np.ndarray:
    """One-hot peaks: strict max over +-3 frames and above the +-10 frame mean by 0.1 * global max."""
    env = np.asarray(env, dtype=np.float64)
    out = np.zeros(len(env))
    top = env.max() if len(env) else 0.0
    if top <= 0:
        return out
    delta = delta_frac * top
    n = len(env)
    for i in range(n):
        lo, hi = max(0, i - pre_max), min(n, i + pre_max + 1)
        neighbours = np.concatenate([env[lo:i], env[i + 1 : hi]])
        if neighbours.size and not (env[i] > neighbours.max()):
            continue
        a_lo, a_hi = max(0, i - avg_window), min(n, i + avg_window + 1)
        if env[i] >= env[a_lo:a_hi].mean() + delta:
            out[i] = 1.0
    return out


def estimate_tempo(env) -> tuple[float, float]:
    """(bpm, period in frames) from the envelope autocorrelation over 60-180 BPM."""
    env = np.asarray(env, dtype=np.float64)
    if not env.any():
        return 0.0, 0.0
    # sub-frame beat periods split click energy across neighbouring lags
    x = np.convolve(env, np.hanning(7)[1:-1], mode="same")
    x = x - x.mean()
    n = len(x)
    ac = np.correlate(x, x, mode="full")[n - 1 :]
    lo = int(np.floor(60.0 * FPS / MAX_BPM))
    hi = int(np.ceil(60.0 * FPS / MIN_BPM))
    lags = np.arange(lo, min(hi, n - 2) + 1)
    best = lags[np.argmax(ac[lags])]
    # parabolic refinement of the peak lag
    a, b, c = ac[best - 1], ac[best], ac[best + 1]
    denom = a - 2 * b + c
    shift = 0.5 * (a - c) / denom if denom < 0 else 0.0
    period = best + float(np.clip(shift, -0.5, 0.5))
    period = float(np.clip(period, 60.0 * FPS / MAX_BPM, 60.0 * FPS / MIN_BPM))
    return 60.0 * FPS / period, period


def _beat_dp(score: np.ndarray, period: float, tightness: float) -> list[int]:
    n = len(score)
    cum = np.zeros(n)
    back = np.full(n, -1)
    lo_off = max(1, int(round(period / 2)))
    hi_off = int(round(2 * period))
    for t in range(n):
        first = t - hi_off
        last = t - lo_off
        if last < 0:
            cum[t] = score[t]
            continue
        taus = np.arange(max(0, first), last + 1)
        penalty = -tightness * np.log((t - taus) / period) ** 2
        cand = cum[taus] + penalty
        k = int(np.argmax(cand))
        if cand[k] > 0:
            cum[t] = score[t] + cand[k]
            back[t] = taus[k]
        else:
            cum[t] = score[t]
    # finish on the best local maximum in the final period
    tail_start = max(0, n - int(round(period)) - 1)
    t = tail_start + int(np.argmax(cum[tail_start:]))
    beats = [t]
    while back[t] >= 0:
        t = int(back[t])
        beats.append(t)
    return beats[::-1]


def track_beats(env, tightness: float = BEAT_TIGHTNESS) -> tuple[np.ndarray, float]:
    """One-hot beats and tempo in BPM.

    Tempo comes from the autocorrelation peak; beat frames maximise the summed
    normalised envelope minus ``tightness * log(interval / period) ** 2``.
    Weak leading/trailing beats are trimmed. Silence yields no beats, tempo 0.
    """
    env = np.asarray(env, dtype=np.float64)
    if len(env) < 4 * FPS:
        raise InsufficientAudioError(f"beat tracking needs >= {4 * FPS} frames, got {len(env)}")
    out = np.zeros(len(env))
    bpm, period = estimate_tempo(env)
    if bpm == 0.0:
        return out, 0.0
    score = env / env.std()
    beats = np.asarray(_beat_dp(score, period, tightness))
    strength = score[beats]
    thresh = 0.5 * np.sqrt(np.mean(strength**2))
    strong = np.nonzero(strength >= thresh)[0]
    beats = beats[strong[0] : strong[-1] + 1]
    out[beats] = 1.0
    return out, bpm


def extract_music_features(clip: AudioClip) -> np.ndarray:
    """(floor(duration * 60), 35) feature matrix."""
    clip = clip.at_analysis_rate()
    if clip.duration < 4.0:
        raise InsufficientAudioError(f"feature extraction needs >= 4 s of audio, got {clip.duration:.2f} s")
    S = log_mel(clip)
    env = np.concatenate([[0.0], np.maximum(0.0, np.diff(S, axis=0)).mean(axis=1)])
    coeffs = dct(S, type=2, norm="ortho", axis=1)[:, :N_MFCC]
    chro = chroma(clip)
    peaks = pick_peaks(env)
    beats, _ = track_beats(env)
    return np.concatenate([env[:, None], coeffs, chro, peaks[:, None], beats[:, None]], axis=1)


def beat_frames(features) -> np.ndarray:
    """Frame indices of the one-hot beat channel."""
    return np.nonzero(np.asarray(features)[:, BEAT] > 0.5)[0]
