"""Reference log-mel values computed with librosa (HTK mel, no filter norm).

Run: python3 logmel_oracle.py  (librosa + numpy required)
Prints values frozen into tests/unit/audio_test.cc.
"""
import numpy as np
import librosa

SR, N_FFT, HOP, N_MELS, EPS = 16000, 512, 256, 32, 1e-10


def signal():
    n = np.arange(2048)
    return 0.5 * np.sin(2 * np.pi * 440 * n / SR) + 0.25 * np.sin(2 * np.pi * 3000 * n / SR)


def main():
    fb = librosa.filters.mel(sr=SR, n_fft=N_FFT, n_mels=N_MELS, htk=True, norm=None,
                             dtype=np.float64)
    for j in (0, 7, 31):
        print(f"fb_row_sum[{j}] = {fb[j].sum():.15g}")
    print(f"fb[10][29] = {fb[10][29]:.15g}")
    spec = np.abs(librosa.stft(signal(), n_fft=N_FFT, hop_length=HOP, window="hann",
                               center=False, dtype=np.complex128)) ** 2
    lm = np.log(fb @ spec + EPS).T
    print("frames", lm.shape)
    for t, j in ((0, 0), (0, 9), (3, 9), (3, 20), (6, 31)):
        print(f"logmel[{t}][{j}] = {lm[t, j]:.15g}")
    # Sine at each mel center: which bins win on interior frames.
    edges = librosa.mel_frequencies(N_MELS + 2, fmin=0, fmax=SR / 2, htk=True)
    ok = []
    for j in range(N_MELS):
        n = np.arange(4096)
        x = np.sin(2 * np.pi * edges[j + 1] * n / SR)
        s = np.abs(librosa.stft(x, n_fft=N_FFT, hop_length=HOP, window="hann",
                                center=False)) ** 2
        m = fb @ s
        ok.append(bool(np.all(np.argmax(m[:, 1:-1], axis=0) == j)))
    print("center_argmax_ok", [j for j in range(N_MELS) if ok[j]])


if __name__ == "__main__":
    main()
