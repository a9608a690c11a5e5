import subprocess
import sys
from pathlib import Path

import pytest

from cdfplot import CdfDataError, FigureSpec, load_cdf_csv, plot_cdfs

DATA = Path(__file__).parent / "data"
BUNDLED = sorted(DATA.glob("desk_rates_cdf_*.csv"))


def scheme_label(path: Path) -> str:
    return path.stem.replace("desk_rates_cdf_", "")


def csv_row_count(path: Path) -> int:
    return len(path.read_text().splitlines()) - 1


def test_bundled_data_present():
    assert len(BUNDLED) == 5


def test_point_counts_match_csv_rows(tmp_path):
    spec = FigureSpec(inputs=tuple((scheme_label(p), p) for p in BUNDLED),
                      output=tmp_path / "fig.png", title="aging r = 0.9")
    counts = plot_cdfs(spec)
    assert (tmp_path / "fig.png").exists()
    for path in BUNDLED:
        assert counts[scheme_label(path)] == csv_row_count(path)


def test_loader_returns_rows_verbatim():
    rates, cdf = load_cdf_csv(BUNDLED[0])
    lines = BUNDLED[0].read_text().splitlines()[1:]
    assert len(rates) == len(lines)
    first_rate, first_cdf = map(float, lines[0].split(","))
    assert rates[0] == first_rate and cdf[0] == first_cdf
    assert rates == sorted(rates)
    assert cdf == sorted(cdf)


def test_two_point_curve_renders(tmp_path):
    csv = tmp_path / "two.csv"
    csv.write_text("rate_bits_per_hz,cdf\n1.0,0.5\n2.0,1.0\n")
    counts = plot_cdfs(FigureSpec(inputs=(("toy", csv),), output=tmp_path / "two.png"))
    assert counts == {"toy": 2}
    assert (tmp_path / "two.png").stat().st_size > 0


def test_vector_output(tmp_path):
    csv = tmp_path / "one.csv"
    csv.write_text("rate_bits_per_hz,cdf\n1.5,1.0\n")
    plot_cdfs(FigureSpec(inputs=(("toy", csv),), output=tmp_path / "one.pdf"))
    assert (tmp_path / "one.pdf").stat().st_size > 0


def test_duplicate_labels_rejected(tmp_path):
    with pytest.raises(ValueError, match="unique"):
        FigureSpec(inputs=(("a", Path("x.csv")), ("a", Path("y.csv"))),
                   output=tmp_path / "fig.png")


def test_empty_csv_rejected(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("rate_bits_per_hz,cdf\n")
    with pytest.raises(CdfDataError, match="no data rows"):
        load_cdf_csv(empty)


def test_malformed_row_reports_line_number(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("rate_bits_per_hz,cdf\n1.0,0.5\nnot-a-number,0.9\n")
    with pytest.raises(CdfDataError, match="bad.csv:3"):
        load_cdf_csv(bad)


# ---------------------------------------------------------------- CLI

def run_cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "cdfplot.cli", *args],
                          capture_output=True, text=True, cwd=cwd)


def test_cli_renders_bundled_curves(tmp_path):
    out = tmp_path / "desk.png"
    curves = [f"{scheme_label(p)}={p}" for p in BUNDLED]
    proc = run_cli("--out", str(out), "--title", "desk scale", *curves)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
    for path in BUNDLED:
        assert f"{scheme_label(path)}: {csv_row_count(path)} points" in proc.stdout


def test_cli_malformed_csv_exits_nonzero(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("rate_bits_per_hz,cdf\noops\n")
    proc = run_cli("--out", str(tmp_path / "fig.png"), f"x={bad}")
    assert proc.returncode == 2
    assert "bad.csv:2" in proc.stderr


def test_cli_missing_file_exits_nonzero(tmp_path):
    proc = run_cli("--out", str(tmp_path / "fig.png"), "x=does_not_exist.csv")
    assert proc.returncode == 2


def test_cli_usage_errors(tmp_path):
    assert run_cli("--out", str(tmp_path / "f.png")).returncode == 1
    assert run_cli("--out", str(tmp_path / "f.png"), "no-equals-sign").returncode == 1
