import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from rirkit import write_audio
from rirkit.cli import ANALYZE_CSV_HEADER, main

from _helpers import exponential_ir


def run_cli(*args) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "rirkit.cli", *[str(a) for a in args]],
        capture_output=True,
        text=True,
    )


@pytest.fixture(scope="module")
def small_datasets(tmp_path_factory):
    """Paired 3-item image/gas datasets shared across CLI tests."""
    base = tmp_path_factory.mktemp("cli_ds")
    for engine, extra in (("image", ["--max-order", "2"]), ("gas", ["--rays", "3000"])):
        rc = main(
            [
                "sample-rooms",
                "--n", "3",
                "--seed", "7",
                "--engine", engine,
                "--out-dir", str(base / engine),
                "--fs", "8000",
                "--ir-length", "0.08",
                *extra,
            ]
        )
        assert rc == 0
    return base / "image" / "manifest_image.json", base / "gas" / "manifest_gas.json"


class TestSimulate:
    def test_writes_wav_and_sidecar(self, tmp_path):
        out = tmp_path / "rir.wav"
        r = run_cli(
            "simulate", "--room", "4x5x3", "--t60", "0.3", "--source", "1,2.5,1.5",
            "--array", "3,2.5,1.5", "--engine", "gas", "--rays", "2000",
            "--ir-length", "0.1", "--seed", "7", "--out", out,
        )
        assert r.returncode == 0, r.stderr
        assert "seed: 7" in r.stdout
        assert out.exists() and out.with_suffix(".json").exists()
        doc = json.loads(out.with_suffix(".json").read_text())
        assert doc["engine"] == "gas"
        assert doc["room_dims_m"] == [4.0, 5.0, 3.0]
        assert len(doc["mics_m"]) == 6

    def test_bit_identical_reruns(self, tmp_path):
        args = (
            "simulate", "--room", "4x5x3", "--t60", "0.25", "--source", "1,2.5,1.5",
            "--array", "3,2.5,1.5", "--engine", "gas", "--rays", "2000",
            "--ir-length", "0.1", "--seed", "3",
        )
        r1 = run_cli(*args, "--out", tmp_path / "a.wav")
        r2 = run_cli(*args, "--out", tmp_path / "b.wav")
        assert r1.returncode == r2.returncode == 0
        assert (tmp_path / "a.wav").read_bytes() == (tmp_path / "b.wav").read_bytes()

    def test_unreachable_t60_exits_one(self, tmp_path):
        r = run_cli(
            "simulate", "--room", "8x10x6", "--t60", "0.01", "--source", "1,2,1.5",
            "--array", "4,5,3", "--engine", "image", "--out", tmp_path / "x.wav",
        )
        assert r.returncode == 1
        assert "unreachable" in r.stderr
        assert "minimum achievable" in r.stderr

    def test_unknown_flag_exits_two(self):
        r = run_cli("simulate", "--nonsense", "1")
        assert r.returncode == 2

    def test_missing_required_exits_two(self, tmp_path):
        r = run_cli("simulate", "--room", "4x5x3")
        assert r.returncode == 2

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "sim.toml"
        cfg.write_text(
            'room = "4x5x3"\nt60 = 0.3\nsource = "1,2.5,1.5"\narray = "3,2.5,1.5"\n'
            'engine = "image"\nir_length = 0.08\nout = "unused.wav"\n'
        )
        out = tmp_path / "cfg.wav"
        r = run_cli("simulate", "--config", cfg, "--out", out, "--max-order", "1")
        assert r.returncode == 0, r.stderr
        assert out.exists()
        doc = json.loads(out.with_suffix(".json").read_text())
        assert doc["engine"] == "image"
        assert doc["params"]["max_order"] == 1  # flag beat the file

    def test_json_config(self, tmp_path):
        cfg = tmp_path / "sim.json"
        cfg.write_text(
            json.dumps(
                {
                    "room": [4, 5, 3],
                    "t60": 0.2,
                    "source": [1, 2.5, 1.5],
                    "array": [3, 2.5, 1.5],
                    "engine": "image",
                    "ir_length": 0.08,
                }
            )
        )
        out = tmp_path / "cfg.wav"
        assert run_cli("simulate", "--config", cfg, "--out", out).returncode == 0
        assert out.exists()


class TestSampleRooms:
    def test_paired_datasets(self, small_datasets, tmp_path):
        m_img, m_gas = small_datasets
        a = json.loads(Path(m_img).read_text())
        b = json.loads(Path(m_gas).read_text())
        assert a["count"] == b["count"] == 3
        for ia, ib in zip(a["items"], b["items"]):
            assert ia["config"] == ib["config"]

    def test_interrupted_rerun_completes_remaining(self, small_datasets):
        m_img, _ = small_datasets
        out_dir = Path(m_img).parent
        victim = out_dir / "rir_image_00001.wav"
        original = victim.read_bytes()
        untouched = out_dir / "rir_image_00000.wav"
        mtime = untouched.stat().st_mtime_ns
        victim.unlink()
        rc = main(
            [
                "sample-rooms", "--n", "3", "--seed", "7", "--engine", "image",
                "--out-dir", str(out_dir), "--fs", "8000", "--ir-length", "0.08",
                "--max-order", "2",
            ]
        )
        assert rc == 0
        assert victim.read_bytes() == original
        assert untouched.stat().st_mtime_ns == mtime


class TestAugmentCommand:
    def test_exit_one_on_failures(self, small_datasets, tmp_path):
        m_img, _ = small_datasets
        rng = np.random.default_rng(0)
        sp = tmp_path / "s.wav"
        write_audio(sp, rng.standard_normal(500) * 0.1, 8000)
        nz = tmp_path / "n.wav"
        write_audio(nz, rng.standard_normal(2000) * 0.1, 8000)
        (tmp_path / "speech.txt").write_text(f"{sp}\n{tmp_path/'gone.wav'}\n")
        (tmp_path / "noise.txt").write_text(f"{nz}\n")
        r = run_cli(
            "augment", "--speech-list", tmp_path / "speech.txt", "--rir-manifest", m_img,
            "--noise-list", tmp_path / "noise.txt", "--snr", "0:24", "--channels", "first",
            "--seed", "3", "--out-dir", tmp_path / "out",
        )
        assert r.returncode == 1
        assert "gone.wav" in r.stderr
        report = json.loads((tmp_path / "out" / "augment_report.json").read_text())
        assert report["count"] == 1 and report["failure_count"] == 1

    def test_clean_run_exit_zero(self, small_datasets, tmp_path):
        m_img, _ = small_datasets
        rng = np.random.default_rng(0)
        sp = tmp_path / "s.wav"
        write_audio(sp, rng.standard_normal(500) * 0.1, 8000)
        nz = tmp_path / "n.wav"
        write_audio(nz, rng.standard_normal(2000) * 0.1, 8000)
        (tmp_path / "speech.txt").write_text(f"{sp}\n")
        (tmp_path / "noise.txt").write_text(f"{nz}\n")
        r = run_cli(
            "augment", "--speech-list", tmp_path / "speech.txt", "--rir-manifest", m_img,
            "--noise-list", tmp_path / "noise.txt", "--seed", "3", "--out-dir", tmp_path / "out",
        )
        assert r.returncode == 0, r.stderr
        assert len(list((tmp_path / "out").glob("*.wav"))) == 1


class TestAnalyze:
    def test_csv_header_and_values(self, tmp_path):
        from rirkit.io import write_ir

        ir = exponential_ir(t60=0.3, fs=16000, length_s=0.36)
        write_ir(ir, tmp_path / "syn.wav")
        out = tmp_path / "report.csv"
        rc = main(["analyze", "--ir", str(tmp_path / "syn.wav"), "--csv", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == ANALYZE_CSV_HEADER
        row = lines[1].split(",")
        assert row[0] == "0" and row[1] == "0"
        assert float(row[2]) == pytest.approx(0.300, abs=0.003)

    def test_unit_impulse_drr_serialized_as_inf(self, tmp_path):
        from rirkit import ImpulseResponse
        from rirkit.analysis import IrMetadata
        from rirkit.io import write_ir

        h = np.zeros((1, 2000))
        h[0, 47] = 1.0
        ir = ImpulseResponse(
            samples=h,
            sample_rate=16000,
            metadata=IrMetadata(engine="image", source_m=[0, 0, 0], mics_m=[[1.0, 0, 0]]),
        )
        write_ir(ir, tmp_path / "imp.wav")
        out = tmp_path / "r.json"
        rc = main(["analyze", "--ir", str(tmp_path / "imp.wav"), "--json", "--out", str(out)])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["items"][0]["channels"][0]["drr_db"] == "inf"

    def test_manifest_rows_and_plots(self, small_datasets, tmp_path):
        m_img, _ = small_datasets
        out = tmp_path / "rep.csv"
        plots = tmp_path / "plots"
        rc = main(["analyze", "--manifest", str(m_img), "--csv", "--out", str(out), "--plot", str(plots)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == ANALYZE_CSV_HEADER
        assert len(lines) == 1 + 3 * 6  # 3 IRs x 6 channels
        svgs = sorted(plots.glob("*.svg"))
        assert len(svgs) == 3

    def test_plot_bytes_deterministic(self, small_datasets, tmp_path):
        m_img, _ = small_datasets
        p1, p2 = tmp_path / "p1", tmp_path / "p2"
        for p in (p1, p2):
            rc = main(["analyze", "--manifest", str(m_img), "--csv", "--out", str(tmp_path / "x.csv"), "--plot", str(p)])
            assert rc == 0
        for f1 in sorted(p1.glob("*.svg")):
            f2 = p2 / f1.name
            assert f1.read_bytes() == f2.read_bytes()

    def test_requires_exactly_one_input(self):
        assert main(["analyze"]) == 2
        assert main(["analyze", "--ir", "a.wav", "--manifest", "m.json"]) == 2

    def test_csv_output_matches_golden_file(self, tmp_path):
        from rirkit.io import write_ir

        ir = exponential_ir(t60=0.3, fs=16000, length_s=0.36)
        write_ir(ir, tmp_path / "syn.wav")
        out = tmp_path / "report.csv"
        rc = main(["analyze", "--ir", str(tmp_path / "syn.wav"), "--csv", "--out", str(out)])
        assert rc == 0
        golden = Path(__file__).parent / "golden" / "analyze_synthetic.csv"
        assert out.read_text() == golden.read_text()


class TestCompare:
    def test_self_comparison_is_zero(self, small_datasets, tmp_path):
        m_img, _ = small_datasets
        out = tmp_path / "cmp.json"
        rc = main(["compare", "--manifest-a", str(m_img), "--manifest-b", str(m_img), "--json", "--out", str(out)])
        assert rc == 0
        doc = json.loads(out.read_text())
        for pair in doc["pairs"]:
            for key in ("delta_t60_s", "delta_drr_db", "delta_late_share"):
                assert pair[key] is None or pair[key] == 0.0

    def test_paired_engines_compare(self, small_datasets, tmp_path):
        m_img, m_gas = small_datasets
        out = tmp_path / "cmp.json"
        rc = main(["compare", "--manifest-a", str(m_gas), "--manifest-b", str(m_img), "--json", "--out", str(out)])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["summary"]["count"] == 3

    def test_mismatched_manifests_exit_three(self, small_datasets, tmp_path):
        m_img, _ = small_datasets
        other = tmp_path / "other"
        rc = main(
            [
                "sample-rooms", "--n", "3", "--seed", "8", "--engine", "image",
                "--out-dir", str(other), "--fs", "8000", "--ir-length", "0.08",
                "--max-order", "1",
            ]
        )
        assert rc == 0
        rc = main(
            [
                "compare",
                "--manifest-a", str(m_img),
                "--manifest-b", str(other / "manifest_image.json"),
            ]
        )
        assert rc == 3
