from pathlib import Path

import numpy as np
import pytest

from spinres.dataio.sweep_file import (
    dump_sweep,
    format_meta_value,
    load_sweep,
    parse_meta_value,
    save_sweep,
)
from spinres.errors import DomainError, SweepFormatError
from spinres.models.sweep import FieldSweep


def small_sweep(**meta) -> FieldSweep:
    rng = np.random.default_rng(0)
    s21 = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    return FieldSweep(
        B_axis=np.array([0.448, 0.44805, 0.4481]),
        f_axis=np.linspace(12.58e9, 12.61e9, 4),
        s21=s21,
        meta=meta,
    )


def test_save_then_load_is_exact(tmp_path: Path):
    sweep = small_sweep(scenario="two_crossings", seed=0, noise_sigma=0.01)
    path = tmp_path / "sweeps" / "a.sweep"
    save_sweep(sweep, path)
    assert load_sweep(path).equals(sweep)
    assert not list(path.parent.glob(".a.sweep.*"))


def test_simulated_fixture_round_trip(tmp_path: Path, two_crossings_sweep: FieldSweep):
    path = tmp_path / "two_crossings.sweep"
    save_sweep(two_crossings_sweep, path)
    loaded = load_sweep(path)
    np.testing.assert_array_equal(loaded.s21, two_crossings_sweep.s21)
    assert loaded.meta["scenario"] == "two_crossings"


def test_dump_is_deterministic():
    sweep = small_sweep(b="x", a=1)
    text = dump_sweep(sweep)
    assert text == dump_sweep(sweep)
    header = [line for line in text.splitlines() if line.startswith("#")]
    assert header == [
        "# spinres-sweep v1",
        "# n_B = 3",
        "# n_f = 4",
        "# columns = re_im",
        "# meta.a = 1",
        "# meta.b = x",
    ]


def test_missing_row_names_expected_and_found(tmp_path: Path):
    path = tmp_path / "short.sweep"
    path.write_text(dump_sweep(small_sweep()).rstrip("\n").rsplit("\n", 1)[0] + "\n")
    with pytest.raises(SweepFormatError) as info:
        load_sweep(path)
    assert "expected n_B x n_f = 12 data rows, found 11" in str(info.value)


def test_db_deg_columns_are_converted(tmp_path: Path):
    sweep = small_sweep()
    lines = ["# spinres-sweep v1", "# n_B = 3", "# n_f = 4", "# columns = db_deg"]
    for i, B in enumerate(sweep.B_axis):
        for f, z in zip(sweep.f_axis, sweep.s21[i]):
            db = 20 * np.log10(abs(z))
            deg = np.degrees(np.angle(z))
            lines.append(f"{float(B)!r},{float(f)!r},{float(db)!r},{float(deg)!r}")
    path = tmp_path / "db.sweep"
    path.write_text("\n".join(lines) + "\n")
    loaded = load_sweep(path)
    np.testing.assert_allclose(loaded.s21, sweep.s21, rtol=1e-12)
    np.testing.assert_allclose(
        20 * np.log10(loaded.amplitude), 20 * np.log10(sweep.amplitude), atol=1e-9
    )
    np.testing.assert_allclose(
        np.degrees(loaded.phase), np.degrees(sweep.phase), atol=1e-9
    )


@pytest.mark.parametrize(
    "mangle, message",
    [
        (lambda t: t.replace("# spinres-sweep v1", "# other v1"), "expected"),
        (lambda t: t.replace("# n_f = 4\n", ""), "missing 'n_f'"),
        (lambda t: t.replace("re_im", "mag_phase"), "unsupported columns"),
        (
            lambda t: t.replace("# columns", "# colour = red\n# columns"),
            "unknown header",
        ),
        (lambda t: t.replace("# n_B = 3", "# n_B = three"), "must be an integer"),
        (lambda t: t.replace(",", ";", 1), "expected 4 fields"),
    ],
)
def test_malformed_files(tmp_path: Path, mangle, message: str):
    path = tmp_path / "bad.sweep"
    path.write_text(mangle(dump_sweep(small_sweep())))
    with pytest.raises(SweepFormatError) as info:
        load_sweep(path)
    assert message in str(info.value)


def test_non_finite_value_names_the_line(tmp_path: Path):
    lines = dump_sweep(small_sweep()).splitlines()
    fields = lines[6].split(",")
    lines[6] = ",".join(fields[:2] + ["nan", fields[3]])
    path = tmp_path / "nan.sweep"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SweepFormatError) as info:
        load_sweep(path)
    assert info.value.line == 7
    assert "non-finite" in info.value.message


def test_rows_off_the_grid_are_rejected(tmp_path: Path):
    lines = dump_sweep(small_sweep()).splitlines()
    fields = lines[10].split(",")
    lines[10] = ",".join([fields[0], "1.0", *fields[2:]])
    path = tmp_path / "grid.sweep"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SweepFormatError) as info:
        load_sweep(path)
    assert info.value.line == 11


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_sweep(Path("/nonexistent/sweep.sweep"))


def test_meta_values():
    assert parse_meta_value("12") == 12
    assert parse_meta_value("0.01") == 0.01
    assert parse_meta_value("two_crossings") == "two_crossings"
    assert format_meta_value("x", 0.1) == "0.1"
    with pytest.raises(DomainError):
        format_meta_value("flag", True)
    with pytest.raises(DomainError):
        format_meta_value("text", "two\nlines")
