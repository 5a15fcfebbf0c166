import subprocess
import sys

import numpy as np
import pytest

from meissner_trap.cli import build_trap, main
from meissner_trap.config import Config, ConfigError, dump_config, parse_config, parse_quantity
from meissner_trap.io import read_csv, read_report


def run(*argv):
    return main([str(a) for a in argv])


def write_ini(path, text):
    path.write_text(text)
    return path


# ------------------------------------------------------------------ config


def test_config_defaults_and_roundtrip():
    cfg = parse_config("")
    assert cfg == Config()
    assert parse_config(dump_config(cfg)) == cfg


def test_config_units_and_comments():
    cfg = parse_config("[trap]\n# gap\nseparation_m = 0.8mm\n[nv]\nbz_t = 3 mT  # lab z\n")
    assert cfg.trap.separation_m == pytest.approx(0.8e-3)
    assert cfg.nv.bz_t == pytest.approx(3e-3)


@pytest.mark.parametrize("text", [
    "[coil]\nbogus_m = 1\n",
    "[nonsense]\nx_m = 1\n",
    "[trap]\nseparation_m = 3 A\n",
    "[trap]\nseparation_m = -1\n",
    "[coil]\nstate = liquid\n",
    "[nv]\ncontrast = 2\n",
    "no section header\n",
])
def test_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_parse_quantity():
    assert parse_quantity("173.5mT", "T") == pytest.approx(0.1735)
    assert parse_quantity("2.5", "T") == 2.5
    assert parse_quantity("1e-3 m", "m") == 1e-3
    with pytest.raises(ConfigError):
        parse_quantity("5 kT", "A")


# ------------------------------------------------------------------ general


def test_help_every_command():
    for cmd in ["fieldmap", "trap", "sweep", "odmr", "ringdown"]:
        out = subprocess.run([sys.executable, "-m", "meissner_trap.cli", cmd, "--help"],
                             capture_output=True, text=True)
        assert out.returncode == 0 and "usage" in out.stdout


def test_config_error_exit_and_no_partial_output(tmp_path, capsys):
    bad = write_ini(tmp_path / "bad.ini", "[coil]\nbogus_m = 1\n")
    out = tmp_path / "fm.csv"
    assert run("fieldmap", "--config", bad, "--grid=0:1mm:3,0:1mm:3", "--out", out) == 2
    assert not out.exists()
    assert "bogus_m" in capsys.readouterr().err
    assert list(tmp_path.iterdir()) == [bad]


def test_threads_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("MEISSNER_TRAP_THREADS", "0")
    assert run("fieldmap", "--grid=0:1mm:2,0:1mm:2", "--out", tmp_path / "a.csv") == 2
    monkeypatch.setenv("MEISSNER_TRAP_THREADS", "2")
    assert run("fieldmap", "--grid=0:1mm:2,0:1mm:2", "--out", tmp_path / "a.csv") == 0


# ------------------------------------------------------------------ fieldmap


def test_fieldmap_format_and_minimum(tmp_path):
    out = tmp_path / "fm.csv"
    assert run("fieldmap", "--plane", "xz", "--grid=-0.3mm:0.3mm:13,-0.5mm:0.5mm:21",
               "--out", out) == 0
    raw = out.read_bytes()
    assert raw.startswith(b"# schema=fieldmap/xz\nx_m,y_m,z_m,Bx_T,By_T,Bz_T,Bnorm_T\n")
    assert b"\r" not in raw
    header, data = read_csv(out)
    assert data.shape == (13 * 21, 7)
    assert np.all(data[:, 1] == 0)
    # row-major: the first plane axis varies slowest
    assert np.all(np.diff(data[:21, 0]) == 0) and np.all(np.diff(data[:21, 2]) > 0)
    k = np.argmin(data[:, 6])
    assert abs(data[k, 2]) < 0.6e-3 / 2 and abs(data[k, 0]) < 0.1e-3
    assert data[k, 6] < 0.05 * data[:, 6].max()


def test_fieldmap_zero_current_and_linearity(tmp_path):
    zero = write_ini(tmp_path / "z.ini", "[coil]\ncurrent_top_a = 0\ncurrent_bottom_a = 0\n")
    two = write_ini(tmp_path / "t.ini", "[coil]\ncurrent_top_a = 2\ncurrent_bottom_a = 2\n")
    grid = "--grid=-0.4mm:0.4mm:5,-0.4mm:0.4mm:5"
    run("fieldmap", grid, "--plane", "yz", "--out", tmp_path / "one.csv")
    run("fieldmap", grid, "--plane", "yz", "--config", zero, "--out", tmp_path / "zero.csv")
    run("fieldmap", grid, "--plane", "yz", "--config", two, "--out", tmp_path / "two.csv")
    _, one = read_csv(tmp_path / "one.csv")
    _, z = read_csv(tmp_path / "zero.csv")
    _, t = read_csv(tmp_path / "two.csv")
    assert np.all(z[:, 3:] == 0)
    np.testing.assert_allclose(t[:, 3:], 2 * one[:, 3:], rtol=1e-8, atol=1e-15)


def test_fieldmap_singularity_exit(tmp_path):
    coil = build_trap(Config()).bottom.drive
    r, z = coil.lattice()
    zc = coil.center[2] + z[0]
    rc = r[0]
    spec = f"--grid={rc}:{rc + 1e-4}:2,{zc}:{zc + 1e-4}:2"
    assert run("fieldmap", "--plane", "xz", spec, "--out", tmp_path / "s.csv") == 3
    assert not (tmp_path / "s.csv").exists()


# ------------------------------------------------------------------ trap / sweep


def test_trap_report_with_bc1(tmp_path):
    rep = tmp_path / "trap.txt"
    assert run("trap", "--bc1", "173.5mT", "--out", rep) == 0
    r = read_report(rep)
    assert float(r["fz_hz"]) > float(r["fy_hz"]) > float(r["fx_hz"]) > 0
    assert float(r["bc1_t"]) == pytest.approx(0.1735)
    assert 0.5 <= float(r["breach_current_a"]) <= 1.2


def test_trap_no_minimum_exit(tmp_path):
    weak = write_ini(tmp_path / "w.ini", "[coil]\ncurrent_top_a = 1e-3\ncurrent_bottom_a = 1e-3\n")
    assert run("trap", "--config", weak, "--out", tmp_path / "r.txt") == 4
    assert not (tmp_path / "r.txt").exists()


def test_sweep_current_linear(tmp_path):
    out, rep = tmp_path / "sw.csv", tmp_path / "sw.txt"
    assert run("sweep", "--current", "0.2:1.7:4", "--out", out, "--report", rep) == 0
    header, data = read_csv(out)
    assert header[0] == "I_A" and header[-1] == "Bhot_T" and len(header) == 11
    r = read_report(rep)
    for ax in "xyz":
        assert float(r[f"r_squared_f{ax}"]) > 0.9999


def test_sweep_separation_monotone(tmp_path):
    out, rep = tmp_path / "sep.csv", tmp_path / "sep.txt"
    assert run("sweep", "--separation", "0.2mm:2mm:4", "--out", out, "--report", rep) == 0
    header, data = read_csv(out)
    assert header[0] == "d_m"
    assert np.all(np.diff(data[:, 1:4], axis=0) < 0)
    assert read_report(rep)["frequencies_decrease_with_separation"] == "true"


# ------------------------------------------------------------------ odmr


def test_odmr_zero_field_single_dip(tmp_path):
    spec, lines = tmp_path / "s.csv", tmp_path / "l.csv"
    assert run("odmr", "simulate", "--out", spec) == 0
    assert spec.read_text().splitlines()[1] == "freq_Hz,signal"
    assert run("odmr", "fit", "--in", spec, "--out", lines, "--report", tmp_path / "r.txt") == 0
    header, data = read_csv(lines)
    assert header == ["center_Hz", "fwhm_Hz", "depth", "center_err_Hz"]
    assert data.shape[0] == 1
    assert data[0, 0] == pytest.approx(2.877e9, rel=1e-9)


def test_odmr_round_trip_3mT(tmp_path):
    ini = write_ini(tmp_path / "c.ini", "[nv]\nbz_t = 3mT\n")
    spec, rep = tmp_path / "s.csv", tmp_path / "r.txt"
    run("odmr", "simulate", "--config", ini, "--out", spec)
    assert run("odmr", "fit", "--in", spec, "--out", tmp_path / "l.csv", "--report", rep) == 0
    assert float(read_report(rep)["magnitude_t"]) == pytest.approx(3e-3, rel=1e-2)


def test_odmr_normal_state_sweep(tmp_path):
    ini = write_ini(tmp_path / "n.ini", "[coil]\nstate = normal\n")
    out, rep = tmp_path / "h.csv", tmp_path / "r.txt"
    assert run("odmr", "sweep", "--config", ini, "--out", out, "--report", rep) == 0
    header, data = read_csv(out)
    assert header == ["current_A", "freq_Hz", "signal"]
    assert data.shape[0] == 11 * 1501
    assert float(read_report(rep)["slope_mt_per_ma"]) == pytest.approx(0.011, rel=0.25)


def test_odmr_fit_failure_exit(tmp_path):
    f = np.linspace(2.8e9, 2.95e9, 500)
    flat = tmp_path / "flat.csv"
    flat.write_text("freq_Hz,signal\n" + "".join(f"{v:.9e},1\n" for v in f))
    assert run("odmr", "fit", "--in", flat, "--out", tmp_path / "l.csv") == 5
    assert not (tmp_path / "l.csv").exists()


def test_missing_input_exit(tmp_path):
    assert run("odmr", "fit", "--in", tmp_path / "nope.csv", "--out", tmp_path / "l.csv") == 2
    assert run("ringdown", "fit", "--out", tmp_path / "p.csv") == 2


# ------------------------------------------------------------------ ringdown


@pytest.fixture
def ringdown_fixture(tmp_path):
    ini = write_ini(tmp_path / "r.ini", "[analysis]\nnoise_rms_m = 7.07e-8\nseed = 3\n")
    series, frames = tmp_path / "ts.csv", tmp_path / "frames"
    assert run("ringdown", "simulate", "--config", ini, "--out", series, "--frames", frames) == 0
    return ini, series, frames


def test_ringdown_csv_q(tmp_path, ringdown_fixture):
    ini, series, _ = ringdown_fixture
    rep, psd_out = tmp_path / "rep.txt", tmp_path / "psd.csv"
    assert run("ringdown", "fit", "--config", ini, "--in", series, "--out", psd_out,
               "--report", rep) == 0
    r = read_report(rep)
    assert float(r["q"]) == pytest.approx(628.3, rel=3e-2)
    assert psd_out.read_text().startswith("# schema=ringdown/psd\n")


def test_ringdown_frames_match_csv(tmp_path, ringdown_fixture):
    ini, series, frames = ringdown_fixture
    run("ringdown", "fit", "--in", series, "--out", tmp_path / "a.csv", "--report", tmp_path / "a")
    assert run("ringdown", "fit", "--in", frames, "--out", tmp_path / "b.csv",
               "--report", tmp_path / "b") == 0
    fa = float(read_report(tmp_path / "a")["f0_hz"])
    fb = float(read_report(tmp_path / "b")["f0_hz"])
    assert fb == pytest.approx(fa, rel=5e-3)


def test_ringdown_constant_exit(tmp_path):
    t = np.arange(200) / 300
    src = tmp_path / "c.csv"
    src.write_text("t_s,x_m\n" + "".join(f"{v:.9e},1e-6\n" for v in t))
    assert run("ringdown", "fit", "--in", src, "--out", tmp_path / "p.csv") == 6


# ------------------------------------------------------------------ determinism


def test_byte_identical_outputs(tmp_path):
    ini = write_ini(tmp_path / "c.ini",
                    "[nv]\nbz_t = 3mT\nnoise_rms = 0.002\n[analysis]\nseed = 11\n"
                    "noise_rms_m = 1e-8\n")
    outputs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        run("odmr", "simulate", "--config", ini, "--out", d / "spec.csv")
        run("ringdown", "simulate", "--config", ini, "--out", d / "ts.csv")
        run("fieldmap", "--config", ini, "--grid=-0.2mm:0.2mm:4,-0.2mm:0.2mm:4",
            "--out", d / "fm.csv")
        run("ringdown", "fit", "--config", ini, "--in", d / "ts.csv", "--out", d / "psd.csv",
            "--report", d / "rep.txt")
        outputs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outputs[0] == outputs[1]
    assert len(outputs[0]) == 5


def test_fieldmap_independent_of_thread_count(tmp_path):
    grid = "--grid=-1mm:1mm:41,-0.5mm:0.5mm:31"
    run("fieldmap", "--threads", 1, grid, "--out", tmp_path / "a.csv")
    run("fieldmap", "--threads", 3, grid, "--out", tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
