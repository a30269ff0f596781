from dataclasses import replace

import pytest

from igacq.cli import (
    ConfigError,
    StudyConfig,
    load_config,
    main,
    parse_config,
    run_study,
    serialize_config,
    shipped_configs,
)
from igacq.geometry import format_multipatch, sphere6_patches

TINY = StudyConfig(name="tiny", formulation="elliptic", scheme="galerkin", levels=(0,), degrees=(1,), order=6,
                   singular_order=4)


def write_config(path, cfg):
    path.write_text(serialize_config(cfg))
    return str(path)


class TestConfig:
    @pytest.mark.parametrize("name", shipped_configs())
    def test_round_trip(self, name):
        cfg = load_config(name)
        assert parse_config(serialize_config(cfg)) == cfg
        cfg.validate()

    def test_shipped_set(self):
        assert set(shipped_configs()) == {
            "fig_laplace_acoustic", "fig_laplace_elastic", "fig_diri_ind_slp", "fig_diri_ind_dlp",
            "fig_neum_ind_adlp", "fig_neum_ind_hyp", "fig_time_acoustic", "fig_time_elastic"}

    @pytest.mark.parametrize("text,field", [
        ("[study]\nproblem = fluid\n", "problem"),
        ("[study]\nlevels = 2, 1\n", "levels"),
        ("[study]\ndt = fast\n", "dt"),
        ("[study]\ncolour = red\n", "colour"),
        ("[study]\nproblem = elastic\nformulation = galerkin\n", "formulation"),
    ])
    def test_errors_name_the_field(self, text, field):
        with pytest.raises(ConfigError, match=f"^{field}:"):
            parse_config(text).validate()

    def test_large_levels_need_flag(self):
        cfg = StudyConfig(levels=(3, 4))
        with pytest.raises(ConfigError, match="allow-large"):
            cfg.validate()
        assert cfg.validate(allow_large=True) is cfg

    def test_level_range_syntax(self):
        assert parse_config("[study]\nlevels = 0-3\n").levels == (0, 1, 2, 3)

    def test_unknown_shipped_name(self):
        with pytest.raises(ConfigError):
            load_config("no_such_study")


class TestRunStudy:
    def test_single_level(self, tmp_path):
        out = run_study(TINY, output=tmp_path)
        for f in out.files:
            lines = f.read_text().splitlines()
            assert len(lines) == 2
            assert lines[1].split(",")[-1] == ""

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = replace(TINY, levels=(0, 1))
        a = run_study(cfg, output=tmp_path / "a")
        b = run_study(cfg, output=tmp_path / "b")
        assert [f.name for f in a.files] == [f.name for f in b.files]
        for fa, fb in zip(a.files, b.files):
            assert fa.read_bytes() == fb.read_bytes()

    def test_time_domain_level_zero(self):
        cfg = replace(load_config("fig_time_acoustic"), levels=(0,), degrees=(1,), order=6, singular_order=4)
        out = run_study(cfg, output="")
        row = out.results[(1, "dirichlet")].rows[0]
        assert row.N == cfg.steps and row.dt == cfg.dt
        assert out.files == []

    def test_csv_names(self, tmp_path):
        out = run_study(TINY, output=tmp_path)
        assert sorted(f.name for f in out.files) == ["tiny_p1_dirichlet.csv", "tiny_p1_neumann.csv"]


class TestMain:
    def test_tableau(self, capsys):
        assert main(["tableau", "print", "3"]) == 0
        text = capsys.readouterr().out
        assert "order 5" in text and "stage order 3" in text

    def test_geometry_validate(self, tmp_path, capsys):
        path = tmp_path / "sphere.txt"
        path.write_text(format_multipatch(sphere6_patches()))
        assert main(["geometry", "validate", str(path)]) == 0
        out = capsys.readouterr().out
        assert "patches 6 elements 6 interfaces 12" in out
        area = float(out.split("area")[1])
        assert area == pytest.approx(4 * 3.141592653589793, rel=1e-8)

    def test_bad_config(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("[study]\nstages = zero\n")
        assert main(["study", str(path)]) == 2
        assert capsys.readouterr().err.startswith("error[config]: stages")

    def test_bad_geometry(self, tmp_path, capsys):
        path = tmp_path / "broken.txt"
        path.write_text("not a multipatch file\n")
        assert main(["geometry", "validate", str(path)]) == 3
        assert "error[geometry]" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["geometry", "validate", str(tmp_path / "absent.txt")]) == 5
        assert "error[io]" in capsys.readouterr().err

    def test_large_level_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "big.cfg", replace(TINY, levels=(4,)))
        assert main(["study", cfg]) == 2
        assert "allow-large" in capsys.readouterr().err

    def test_study_writes_csv(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "tiny.cfg", TINY)
        assert main(["study", cfg, "--levels", "0-1", "--output", str(tmp_path / "out")]) == 0
        out = capsys.readouterr().out
        assert "rates" in out
        assert len(list((tmp_path / "out").glob("*.csv"))) == 2
