import subprocess
import sys

import pytest

from specmix.cli import main
from specmix.pipeline import read_manifest

SUBCOMMANDS = ["synth", "smooth", "select-bands", "unmix", "evaluate", "compare", "pipeline"]


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    args = ["synth", "--rows", "24", "--cols", "24", "--bands", "60", "--k", "3", "--junk", "0.2", "--seed", "5"]
    assert main(args + ["--out", str(root / "cube"), "--out-truth", str(root / "truth")]) == 0
    return root


def test_help_lists_subcommands():
    out = subprocess.run([sys.executable, "-m", "specmix", "--help"], capture_output=True, text=True, check=True).stdout
    for name in SUBCOMMANDS:
        assert name in out


def test_subcommand_help_shows_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["pipeline", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "--threshold-db" in out and "default: 15" in out


def test_unknown_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["pipeline", "--bogus"])
    assert exc.value.code != 0
    assert "usage" in capsys.readouterr().err


def test_missing_cube(tmp_path, capsys):
    assert main(["pipeline", "--in", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 2
    assert "cube not found" in capsys.readouterr().err


def test_synth_truth(synth_dir):
    truth = synth_dir / "truth"
    assert sorted(p.name for p in truth.iterdir()) == ["abundance", "endmembers.csv", "junk_bands.txt", "manifest.txt"]
    assert len((truth / "junk_bands.txt").read_text().split()) == 12
    assert read_manifest(truth / "manifest.txt")["seed"] == "5"


def test_pipeline_records_parameters(synth_dir, capsys):
    out = synth_dir / "p12"
    code = main(
        ["pipeline", "--in", str(synth_dir / "cube"), "--out", str(out), "--threshold-db", "15", "--k", "12", "--n-init", "1"]
    )
    assert code == 0
    m = read_manifest(out / "manifest.txt")
    assert m["threshold_db"] == "15" and m["k"] == "12"
    assert "retained" in capsys.readouterr().out


def test_staged_equals_single_shot(synth_dir):
    d = synth_dir
    lib = str(d / "truth" / "endmembers.csv")
    common = ["--k", "3", "--seed", "9"]
    assert main(["pipeline", "--in", str(d / "cube"), "--library", lib, "--out", str(d / "single")] + common) == 0

    assert main(["smooth", "--in", str(d / "cube"), "--out", str(d / "smoothed")]) == 0
    assert (
        main(
            [
                "select-bands",
                "--in",
                str(d / "smoothed"),
                "--threshold-db",
                "15",
                "--out-mask",
                str(d / "mask.txt"),
                "--out-profile",
                str(d / "snr.csv"),
                "--out-image",
                str(d / "snr.pgm"),
                "--out-cube",
                str(d / "selected"),
            ]
        )
        == 0
    )
    assert (
        main(
            ["unmix", "--in", str(d / "selected"), "--out-endmembers", str(d / "w.csv"), "--out-abundance", str(d / "ab")]
            + common
        )
        == 0
    )
    assert (
        main(
            ["evaluate", "--endmembers", str(d / "w.csv"), "--library", lib, "--mask", str(d / "mask.txt"), "--report", str(d / "eval.csv")]
        )
        == 0
    )
    single = d / "single"
    pairs = [
        ("mask.txt", "mask.txt"),
        ("snr.csv", "snr_profile.csv"),
        ("snr.pgm", "snr_profile.pgm"),
        ("w.csv", "w_custom.csv"),
        ("eval.csv", "evaluation.csv"),
    ]
    for staged, joined in pairs:
        assert (d / staged).read_bytes() == (single / joined).read_bytes(), staged
    for f in (single / "abundance").iterdir():
        assert (d / "ab" / f.name).read_bytes() == f.read_bytes(), f.name


def test_manifest_replay_and_threads(synth_dir):
    d = synth_dir
    lib = str(d / "truth" / "endmembers.csv")
    assert main(["pipeline", "--in", str(d / "cube"), "--library", lib, "--out", str(d / "r1"), "--k", "3"]) == 0
    assert main(["pipeline", "--manifest", str(d / "r1" / "manifest.txt"), "--out", str(d / "r2"), "--threads", "4"]) == 0
    for a in (d / "r1").rglob("*"):
        if a.is_file():
            assert a.read_bytes() == (d / "r2" / a.relative_to(d / "r1")).read_bytes(), a.name


def test_compare(synth_dir, capsys):
    d = synth_dir
    report = d / "cmp.csv"
    code = main(
        ["compare", "--in", str(d / "cube"), "--library", str(d / "truth" / "endmembers.csv"), "--report", str(report), "--n-init", "2"]
    )
    assert code == 0
    rows = report.read_text().splitlines()
    assert [r.split(",")[0] for r in rows[1:]] == ["fourier", "wavelet", "phaselock"]
    assert "full_cos" in capsys.readouterr().out


def test_compare_unknown_method(synth_dir, capsys):
    d = synth_dir
    code = main(["compare", "--in", str(d / "cube"), "--library", str(d / "truth" / "endmembers.csv"), "--methods", "median"])
    assert code == 2
    assert "unknown methods" in capsys.readouterr().err


def test_compute_failure_names_stage(synth_dir, capsys):
    code = main(["pipeline", "--in", str(synth_dir / "cube"), "--out", str(synth_dir / "bad"), "--threshold-db", "999"])
    assert code == 1
    assert "band-selection" in capsys.readouterr().err


def test_malformed_cube_is_usage_error(tmp_path, capsys):
    (tmp_path / "c.hdr").write_text("rows=2\ncols=2\nbands=2\ndtype=float32\nbyteorder=little\ninterleave=pixel\n")
    (tmp_path / "c.raw").write_bytes(b"\0" * 4)
    assert main(["smooth", "--in", str(tmp_path / "c"), "--out", str(tmp_path / "o")]) == 2
    assert "payload size mismatch" in capsys.readouterr().err
