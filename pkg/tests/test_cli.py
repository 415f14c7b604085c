import json
import tarfile

import numpy as np
import pytest

from synth import TONES_HZ, command_clip

from lognet_kws.audio import AudioClip, write_wav
from lognet_kws.cli import COMMANDS, main


@pytest.fixture(scope="module")
def trained(tone_root, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cache = tmp_path_factory.mktemp("cache")
    rc = main(["train", "--data", str(tone_root), "--agg", "adaptive", "--arch", "64:50:40:4",
               "--split", "speaker-independent", "--seed", "1", "--cache-dir", str(cache),
               "--out", str(out), "--csv"])
    assert rc == 0
    return out, cache


def _common(tone_root, cache):
    return ["--data", str(tone_root), "--cache-dir", str(cache)]


def test_train_outputs(trained):
    out, _ = trained
    report = json.loads((out / "report.json").read_text())
    assert report["accuracy"] == 1.0
    assert report["extra"]["arch"] == "64:50:40:4"
    assert (out / "model.lgnt").stat().st_size > 0
    assert (out / "confusion.csv").exists() and (out / "per_class.csv").exists()
    assert not [p for p in out.iterdir() if p.name.startswith(".tmp-")]


def test_train_reproducible(trained, tone_root, tmp_path):
    out, cache = trained
    rc = main(["train", *_common(tone_root, cache), "--seed", "1", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "model.lgnt").read_bytes() == (out / "model.lgnt").read_bytes()


def test_eval(trained, tone_root, tmp_path, capsys):
    out, cache = trained
    rc = main(["eval", "--model", str(out / "model.lgnt"), *_common(tone_root, cache),
               "--subset", "test", "--out", str(tmp_path)])
    assert rc == 0
    assert json.loads((tmp_path / "report.json").read_text())["accuracy"] == 1.0
    assert main(["eval", "--model", str(out / "model.lgnt"), *_common(tone_root, cache),
                 "--subset", "all", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "report.json").read_text())["n_samples"] == 20


def test_infer_stdout_contract(trained, tmp_path, capsys):
    out, _ = trained
    wav = tmp_path / "left.wav"
    write_wav(wav, command_clip(TONES_HZ["left"] * 1.005, seed=999))
    capsys.readouterr()
    assert main(["infer", str(wav), "--model", str(out / "model.lgnt")]) == 0
    line = capsys.readouterr().out.strip()
    label, probs = line.split("\t")
    p = [float(v) for v in probs.split(",")]
    assert label == "left" and len(p) == 4 and abs(sum(p) - 1) < 1e-5


def test_infer_silent_wav(trained, tmp_path, capsys):
    out, _ = trained
    wav = tmp_path / "silent.wav"
    write_wav(wav, AudioClip(np.zeros(16000), 16000))
    assert main(["infer", str(wav), "--model", str(out / "model.lgnt")]) == 4
    assert "no speech detected" in capsys.readouterr().err


def test_infer_whole_clip_fallback(trained, tmp_path, capsys):
    out, _ = trained
    x = np.zeros(16000)
    x[2000:16000] = 0.3 * np.sin(2 * np.pi * 900 * np.arange(14000) / 16000)  # too long for the gate
    wav = tmp_path / "long.wav"
    write_wav(wav, AudioClip(x, 16000))
    assert main(["infer", str(wav), "--model", str(out / "model.lgnt")]) == 0
    assert "whole clip" in capsys.readouterr().err


def test_stream(trained, tmp_path, capsys):
    out, _ = trained
    rng = np.random.default_rng(0)
    x = 0.01 * rng.standard_normal(12000)
    t = np.arange(3200)
    x[4000:7200] += 0.2 * np.sin(2 * np.pi * TONES_HZ["right"] * t / 8000)
    wav = tmp_path / "s.wav"
    write_wav(wav, AudioClip(x, 8000))
    capsys.readouterr()
    rc = main(["stream", str(wav), "--model", str(out / "model.lgnt"), "--trace",
               str(tmp_path / "trace.csv"), "--chunk", "37"])
    assert rc == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert len(rows) == 2
    start, end, label, _ = rows[1].split("\t")
    assert abs(int(start) - 4000) <= 40 and abs(int(end) - 7200) <= 40
    trace = (tmp_path / "trace.csv").read_text().splitlines()
    assert trace[0] == "frame_index,energy,noise_level,state"


def test_pfi_reduce_sweep(tone_root, trained, tmp_path):
    _, cache = trained
    common = [*_common(tone_root, cache), "--epochs", "30"]
    assert main(["pfi", *common, "--repeats", "2", "--out", str(tmp_path), "--csv"]) == 0
    pfi = json.loads((tmp_path / "pfi.json").read_text())
    assert len(pfi["mean_drop"]) == 64 and sorted(pfi["ranking"]) == list(range(64))
    assert main(["reduce", *common, "--pfi", str(tmp_path / "pfi.csv"), "--ks", "64,60,8",
                 "--out", str(tmp_path), "--csv"]) == 0
    red = json.loads((tmp_path / "reduction.json").read_text())
    assert [c["k"] for c in red["curve"]] == [64, 60, 8]
    assert main(["sweep", *common, "--p-values", "5,10", "--m-values", "3",
                 "--out", str(tmp_path), "--csv"]) == 0
    assert (tmp_path / "sweep.csv").read_text().splitlines()[0] == "P,M,accuracy"


def test_export_header(trained, tmp_path):
    out, _ = trained
    assert main(["export-header", "--model", str(out / "model.lgnt"), "--out",
                 str(tmp_path / "m.h")]) == 0
    assert "#define LOGNET_P_RESERVOIR 50" in (tmp_path / "m.h").read_text()


def test_mem_budget(capsys, tmp_path):
    assert main(["mem-budget", "--arch", "64:33:9:4", "--out", str(tmp_path / "mem.json")]) == 0
    out = capsys.readouterr().out
    assert "18016" in out and "54.9%" in out
    for total in ("168", "632", "556", "276"):
        assert total in out
    mem = json.loads((tmp_path / "mem.json").read_text())
    assert mem["total_bytes"] == 18016 and mem["utilization_pct"] == "54.9%"
    assert main(["mem-budget", "--csv"]) == 0
    assert "Total,18016" in capsys.readouterr().out


def test_timer(capsys):
    assert main(["timer", "--f-clk", "48e6", "--div", "64", "--cc", "93"]) == 0
    out = capsys.readouterr().out
    assert "7978.7 Hz" in out and "93.75" in out


def test_exit_codes(tmp_path, capsys):
    assert main(["nonsense"]) == 64
    assert main(["train", "--arch", "64:33"]) == 2
    assert main(["train", "--agg", "median", "--out", str(tmp_path)]) == 2
    assert main(["infer", str(tmp_path / "none.wav"), "--model", str(tmp_path / "m")]) == 3
    assert main(["train", "--data", str(tmp_path / "nodata"), "--out", str(tmp_path)]) == 3
    bad = tmp_path / "bad.lgnt"
    bad.write_bytes(b"junk")
    wav = tmp_path / "x.wav"
    write_wav(wav, AudioClip(np.zeros(100), 8000))
    assert main(["infer", str(wav), "--model", str(bad)]) == 5
    assert "bad magic" in capsys.readouterr().err


@pytest.mark.parametrize("cmd", sorted(COMMANDS))
def test_help(cmd, capsys):
    assert main([cmd, "--help"]) == 0
    assert "--" in capsys.readouterr().out


def test_fetch_from_local_archive(tmp_path):
    src = tmp_path / "src"
    for lab in ("go", "left", "right", "stop", "yes"):
        (src / lab).mkdir(parents=True)
        write_wav(src / lab / "a_nohash_0.wav", AudioClip(np.zeros(10), 16000))
    archive = tmp_path / "sc.tar.gz"
    with tarfile.open(archive, "w:gz") as tar:
        for p in sorted(src.rglob("*.wav")):
            tar.add(p, arcname=f"./{p.relative_to(src)}")
    dest = tmp_path / "data"
    assert main(["fetch", "--dest", str(dest), "--url", str(archive)]) == 0
    assert sorted(p.name for p in dest.iterdir()) == ["go", "left", "right", "stop"]
    assert main(["fetch", "--dest", str(dest), "--url", str(archive), "--sha256", "00"]) == 0
    assert main(["fetch", "--dest", str(dest), "--url", str(archive), "--sha256", "00",
                 "--force"]) == 5
