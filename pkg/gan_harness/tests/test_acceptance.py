"""Acceptance gate for the GAN harness: smoke training and the MSE bridge."""

import time

import numpy as np
import pytest

from gan_harness.data import load_manifest, mse, read_image
from gan_harness.evaluate import evaluate
from gan_harness.infer import infer, load_checkpoint
from gan_harness.toy import make_toy_corpus
from gan_harness.train import TrainConfig, train


def verdict(name):
    print(f"\nACCEPTANCE PASS: {name}", flush=True)


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("gan_smoke")
    manifest = make_toy_corpus(root / "toy", pairs=8)
    corpus = load_manifest(manifest)
    t0 = time.monotonic()
    result = train(corpus, TrainConfig(epochs=50, seed=3), root / "run")
    elapsed = time.monotonic() - t0
    return corpus, result, elapsed, root


@pytest.mark.slow
def test_gan_smoke(toy_run):
    """Toy corpus, 50 epochs: finite losses, learning progress, determinism."""
    corpus, result, elapsed, root = toy_run
    assert elapsed < 300, f"training took {elapsed:.0f}s"

    for row in result.epochs:
        assert np.isfinite([row["g_loss"], row["d_loss"], row["train_mse"]]).all()
    assert len(result.epochs) == 50

    first_mse = result.epochs[0]["train_mse"]
    final_mse = result.epochs[-1]["train_mse"]
    assert final_mse < first_mse, f"no learning progress: {first_mse} -> {final_mse}"

    log_lines = result.loss_log_path.read_text().splitlines()
    assert log_lines[0] == "epoch,g_loss,d_loss,train_mse"
    assert len(log_lines) == 51

    checkpoint = load_checkpoint(result.checkpoint_path)
    wav = corpus.entries[2].wav_path
    image = infer(checkpoint, wav)
    assert image.shape == (64, 64)
    assert image.dtype == np.uint8

    again = infer(load_checkpoint(result.checkpoint_path), wav)
    assert np.array_equal(image, again), "fixed-checkpoint reruns differ"
    verdict(
        f"gan smoke (8 pairs, 50 epochs in {elapsed:.0f}s, "
        f"mse {first_mse:.5f} -> {final_mse:.5f})"
    )


def test_convention_bridge(tmp_path):
    """gan_harness MSE equals the imaging pipeline's on 20 shared pairs."""
    porevoice_stats = pytest.importorskip(
        "porevoice.stats", reason="primary package not installed"
    )
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(20):
        a = rng.integers(0, 256, (64, 64), dtype=np.uint8)
        b = rng.integers(0, 256, (64, 64), dtype=np.uint8)
        ours = mse(a, b)
        theirs = porevoice_stats.mse(a, b)
        worst = max(worst, abs(ours - theirs))
        assert abs(ours - theirs) <= 1e-9
    verdict(f"convention bridge (20 pairs, worst gap {worst:.2e})")


def test_identity_double_gives_zero_mse(toy_run, tmp_path):
    """Evaluate with a copy-the-original generator: mean MSE must be 0."""
    corpus, _, _, _ = toy_run
    originals = {e.wav_path: read_image(e.image_path) for e in corpus.entries}
    summary = evaluate(
        None, corpus, tmp_path / "eval", generate_fn=lambda wav: originals[wav]
    )
    assert summary["mean_mse"] == 0.0
    gen_manifest = (tmp_path / "eval" / "generated" / "manifest.tsv").read_text()
    assert len(gen_manifest.splitlines()) == len(corpus)
    verdict("identity-double evaluation (mean MSE 0)")


def test_split_evaluation_emits_two_histograms(toy_run, tmp_path):
    corpus, result, _, _ = toy_run
    train_keys = set(corpus.keys()[:6])
    summary = evaluate(
        result.checkpoint_path, corpus, tmp_path / "eval", train_keys=train_keys
    )
    assert (tmp_path / "eval" / "mse_histogram_train.csv").exists()
    assert (tmp_path / "eval" / "mse_histogram_test.csv").exists()
    assert summary["train_count"] == 6 and summary["test_count"] == 2
    verdict("train/test histogram export")


def test_degenerate_corpus_learnability(tmp_path):
    """Identical audio/image pairs: post-training MSE below the epoch-1 value."""
    from gan_harness.data import write_image
    from gan_harness.toy import disk_image, write_tone_wav

    lines = []
    image = disk_image(9.0)
    for k in range(4):
        key = f"s{k:04d}"
        write_image(tmp_path / f"{key}.png", image)
        write_tone_wav(tmp_path / f"{key}.wav", 700.0, duration_s=0.5)
        lines.append(f"{key}.png\t{key}.wav\n")
    (tmp_path / "manifest.tsv").write_text("".join(lines))
    corpus = load_manifest(tmp_path / "manifest.tsv")
    result = train(corpus, TrainConfig(epochs=30, seed=1), tmp_path / "run")
    assert result.epochs[-1]["train_mse"] < result.epochs[0]["train_mse"]

    generated = infer(load_checkpoint(result.checkpoint_path), tmp_path / "s0000.wav")
    post_mse = mse(generated, image)
    assert post_mse < result.epochs[0]["train_mse"]


def test_different_duration_wav_padded(toy_run, tmp_path):
    corpus, result, _, _ = toy_run
    from gan_harness.toy import write_tone_wav

    write_tone_wav(tmp_path / "short.wav", 900.0, duration_s=0.25)
    write_tone_wav(tmp_path / "long.wav", 900.0, duration_s=2.0)
    checkpoint = load_checkpoint(result.checkpoint_path)
    for wav in (tmp_path / "short.wav", tmp_path / "long.wav"):
        image = infer(checkpoint, wav)
        assert image.shape == (64, 64) and image.dtype == np.uint8


def test_corrupt_checkpoint_rejected(tmp_path):
    from gan_harness.data import CorpusError

    bad = tmp_path / "ckpt.pt"
    bad.write_bytes(b"definitely not a checkpoint")
    with pytest.raises(CorpusError, match="corrupt checkpoint"):
        load_checkpoint(bad)
