import numpy as np
import pytest

from spellersim.signal import (
    FS,
    N_CHANNELS,
    N_SAMPLES,
    DISCARD_SAMPLES,
    FEATURE_DIM,
    SessionSynthesizer,
    SubjectModel,
    Trial,
    default_erp_template,
    load_trials_bin,
    load_trials_csv,
    overlap_schedule,
    preprocess,
    save_trials_bin,
    save_trials_csv,
    subject_preset,
    synthesize_trial,
    trials_to_matrix,
)

T_MS = np.arange(N_SAMPLES) * (1000.0 / FS)


def test_template_shape_and_peak_latencies():
    wave = default_erp_template().render()
    assert wave.shape == (N_CHANNELS, N_SAMPLES)
    # positivity peaks at 290 ms on every channel
    assert np.all(T_MS[np.argmax(wave, axis=1)] == 290.0)
    # the early negativity is strongest occipitally and sits at 190 ms
    for ch in (6, 7):
        assert T_MS[np.argmin(wave[ch])] == 190.0
    # phase reversal: fronto-central channels are positive at 190 ms
    at_190 = wave[:, np.flatnonzero(T_MS == 190.0)[0]]
    assert np.all(at_190[:3] > 0.0)
    assert np.all(at_190[6:] < 0.0)


def test_component_fwhm_definition():
    template = default_erp_template()
    for comp in template.components:
        sigma = comp.width_ms / (2.0 * np.sqrt(2.0 * np.log(2.0)))
        bump = np.exp(-0.5 * ((T_MS - comp.peak_ms) / sigma) ** 2)
        half = np.interp(comp.peak_ms + comp.width_ms / 2.0, T_MS, bump)
        assert half == pytest.approx(0.5, abs=1e-12)


def test_template_amplitudes_at_peaks():
    wave = default_erp_template().render()
    k290 = np.flatnonzero(T_MS == 290.0)[0]
    # Pz gain 1.0 on the positivity; the early bump is negligible 100 ms out
    assert wave[4, k290] == pytest.approx(8.0, abs=1e-2)
    k190 = np.flatnonzero(T_MS == 190.0)[0]
    # occipital: -5 from the negativity plus the positivity's left tail
    tail = 8.0 * 0.6 * np.exp(-0.5 * ((190.0 - 290.0) / (80.0 / 2.3548200450309493)) ** 2)
    assert wave[6, k190] == pytest.approx(-5.0 + tail, abs=1e-9)


def test_render_jitter_shifts_peak():
    wave = default_erp_template().render(jitter_ms=10.0)
    assert np.all(T_MS[np.argmax(wave, axis=1)] == 300.0)


def test_oracle_trials_are_deterministic_templates():
    subject = subject_preset("oracle")
    rng = np.random.default_rng(0)
    odd = synthesize_trial(subject, True, rng)
    non = synthesize_trial(subject, False, rng)
    assert np.array_equal(odd.samples, subject.template.render())
    assert np.array_equal(non.samples, np.zeros((N_CHANNELS, N_SAMPLES)))


def test_trial_synthesis_is_seed_deterministic():
    subject = subject_preset("midsnr")
    a = synthesize_trial(subject, True, np.random.default_rng(7))
    b = synthesize_trial(subject, True, np.random.default_rng(7))
    assert np.array_equal(a.samples, b.samples)


def test_attention_zero_never_fires():
    subject = subject_preset("noise")
    rng = np.random.default_rng(3)
    trials = [synthesize_trial(subject, True, rng) for _ in range(50)]
    peak = subject.template.render()[4].max()
    for trial in trials:
        # oddball windows are label-free noise, so no systematic positivity
        assert abs(trial.samples[4].mean()) < peak


def test_attention_rate_matches_probability():
    template = default_erp_template()
    subject = SubjectModel(template, 0.0, 0.7, 0.0)
    rng = np.random.default_rng(11)
    fired = 0
    n = 4000
    for _ in range(n):
        trial = synthesize_trial(subject, True, rng)
        if trial.samples.any():
            fired += 1
    assert fired / n == pytest.approx(0.7, abs=0.02)


def test_subject_model_validation():
    template = default_erp_template()
    with pytest.raises(ValueError):
        SubjectModel(template, -1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        SubjectModel(template, 1.0, 1.5, 0.0)
    with pytest.raises(ValueError):
        SubjectModel(template, 1.0, 1.0, -2.0)
    with pytest.raises(ValueError):
        SubjectModel(template, 1.0, 1.0, 0.0, noise_ar=1.0)
    with pytest.raises(ValueError):
        subject_preset("nope")


def test_trial_validation():
    with pytest.raises(ValueError):
        Trial(samples=np.zeros((N_CHANNELS, N_SAMPLES - 1)), is_oddball=False)
    bad = np.zeros((N_CHANNELS, N_SAMPLES))
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        Trial(samples=bad, is_oddball=False)


def test_preprocess_layout_and_linearity():
    rng = np.random.default_rng(5)
    samples = rng.normal(size=(N_CHANNELS, N_SAMPLES))
    vec = preprocess(samples)
    assert vec.shape == (FEATURE_DIM,)
    for c in range(N_CHANNELS):
        for k in (0, 17, 59):
            assert vec[c * 60 + k] == samples[c, DISCARD_SAMPLES + k]
    other = rng.normal(size=(N_CHANNELS, N_SAMPLES))
    lhs = preprocess(2.0 * samples + 3.0 * other)
    rhs = 2.0 * preprocess(samples) + 3.0 * preprocess(other)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_preprocess_accepts_trial_and_validates():
    trial = synthesize_trial(subject_preset("oracle"), True, np.random.default_rng(0))
    assert np.array_equal(preprocess(trial), preprocess(trial.samples))
    with pytest.raises(ValueError):
        preprocess(np.zeros((N_CHANNELS, 10)))


def test_overlap_schedule_windows():
    windows = overlap_schedule(400.0, 3)
    assert np.array_equal(windows, [[0.0, 400.0], [400.0, 800.0], [800.0, 1200.0]])
    windows = overlap_schedule(160.0, 4)
    # consecutive windows share 240 ms of signal
    assert np.all(windows[:-1, 1] - windows[1:, 0] == 240.0)
    with pytest.raises(ValueError):
        overlap_schedule(0.0, 2)


def test_session_bleed_at_short_iti():
    # oracle subject: signal is exactly the sum of evoked templates
    subject = subject_preset("oracle")
    session = SessionSynthesizer(subject, np.random.default_rng(0))
    wave = subject.template.render()
    first = session.trial(0.0, ("A",), True)
    second = session.trial(0.160, ("B",), False)
    assert np.array_equal(first.samples, wave)
    # 160 ms = 32 samples: the tail of the first response leaks in
    assert np.array_equal(second.samples[:, :48], wave[:, 32:])
    assert np.all(second.samples[:, 48:] == 0.0)


def test_session_no_bleed_at_long_iti():
    subject = subject_preset("oracle")
    session = SessionSynthesizer(subject, np.random.default_rng(0))
    session.trial(0.0, ("A",), True)
    second = session.trial(0.400, ("B",), False)
    assert np.all(second.samples == 0.0)


def test_session_overlapping_windows_share_noise():
    subject = SubjectModel(default_erp_template(), 4.0, 1.0, 0.0)
    session = SessionSynthesizer(subject, np.random.default_rng(21))
    first = session.trial(0.0, ("A",), False)
    second = session.trial(0.160, ("B",), False)
    assert np.array_equal(second.samples[:, :48], first.samples[:, 32:])


def test_session_ar_noise_statistics():
    subject = SubjectModel(default_erp_template(), 5.0, 1.0, 0.0, noise_ar=0.9)
    session = SessionSynthesizer(subject, np.random.default_rng(2))
    # grow the buffer in uneven chunks to cross extension boundaries
    n = 200_000
    pos = 0
    for step in (37, 1000, 50_000):
        session._extend_noise(pos + step)
        pos += step
    session._extend_noise(n)
    x = session._noise
    assert x.shape == (N_CHANNELS, n)
    var = x.var(axis=1)
    assert np.allclose(var, 25.0, rtol=0.1)
    lag1 = np.array([np.corrcoef(ch[:-1], ch[1:])[0, 1] for ch in x])
    assert np.allclose(lag1, 0.9, atol=0.01)


def test_trials_to_matrix():
    subject = subject_preset("oracle")
    rng = np.random.default_rng(0)
    trials = [synthesize_trial(subject, bool(i % 2), rng) for i in range(4)]
    x, y = trials_to_matrix(trials)
    assert x.shape == (4, FEATURE_DIM)
    assert np.array_equal(y, [False, True, False, True])
    assert np.array_equal(x[1], preprocess(trials[1]))


def _sample_trials(n=5):
    subject = subject_preset("midsnr")
    rng = np.random.default_rng(9)
    return [
        synthesize_trial(
            subject, bool(i % 2), rng, stimulus=("A", "B") if i % 2 else ("C",), onset_s=0.4 * i
        )
        for i in range(n)
    ]


def test_csv_round_trip_exact(tmp_path):
    trials = _sample_trials()
    path = tmp_path / "trials.csv"
    save_trials_csv(trials, path)
    back = load_trials_csv(path)
    assert len(back) == len(trials)
    for a, b in zip(trials, back):
        assert np.array_equal(a.samples, b.samples)
        assert a.is_oddball == b.is_oddball


def test_bin_round_trip_exact(tmp_path):
    trials = _sample_trials()
    symbols = tuple("ABCDEF")
    path = tmp_path / "trials.eegt"
    save_trials_bin(trials, path, symbols)
    back = load_trials_bin(path)
    assert len(back) == len(trials)
    for a, b in zip(trials, back):
        assert np.array_equal(a.samples, b.samples)
        assert a.is_oddball == b.is_oddball
        assert set(a.stimulus) == set(b.stimulus)
        assert a.onset_s == b.onset_s


def test_bin_rejects_unknown_stimulus(tmp_path):
    trials = _sample_trials(2)
    with pytest.raises(ValueError):
        save_trials_bin(trials, tmp_path / "x.eegt", ("X", "Y"))


def test_bin_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.eegt"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ValueError):
        load_trials_bin(path)
