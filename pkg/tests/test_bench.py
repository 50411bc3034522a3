"""Benchmark CLI: parsing, CSV round trip, studies, exit codes."""

import math

import numpy as np
import pytest

from vofrac.bench import (ConvergenceReport, RungRow, StudySpec, emit_csv,
                          emit_markdown, load_config, main, parse_csv,
                          parse_ladder, run_study)


def test_parse_ladder():
    assert parse_ladder("20:400,40:1600") == ((20, 400), (40, 1600))
    assert parse_ladder(" 1:8 ") == ((1, 8),)
    for bad in ("20", "0:8", "a:b", ""):
        with pytest.raises(ValueError):
            parse_ladder(bad)


def test_csv_round_trip():
    spec = StudySpec(study="temporal_order")
    report = ConvergenceReport(spec=spec, rows=[
        RungRow(m=20, n=400, error=1.19712e-6, order=None, wall=4.25,
                storage=52345),
        RungRow(m=40, n=1600, error=7.43741e-8, order=4.0087, wall=31.2,
                storage=260000),
        RungRow(m=80, n=6400, failed=True, storage=1300000),
    ])
    text = emit_csv(report)
    lines = text.strip().splitlines()
    assert lines[0] == "m,n,error,order,wall_time_s,storage_scalars"
    assert lines[1].startswith("20,400,1.19712e-06,,")
    assert lines[3] == "80,6400,-,-,-,1300000"
    rows = parse_csv(text)
    assert rows[0].error == pytest.approx(1.19712e-6, rel=1e-5)
    assert rows[0].order is None
    assert rows[1].order == pytest.approx(4.0087, rel=1e-4)
    assert rows[2].failed and rows[2].error is None
    assert rows[2].storage == 1300000


def test_parse_csv_rejects_foreign_header():
    with pytest.raises(ValueError, match="header"):
        parse_csv("a,b,c\n1,2,3\n")


def test_emit_markdown_formats():
    spec = StudySpec(study="spacetime_order", problem="example1_2d")
    report = ConvergenceReport(spec=spec, rows=[
        RungRow(m=20, n=400, error=1.1971e-6, wall=4.0, storage=100),
        RungRow(m=40, n=1600, error=7.4374e-8, order=4.0087, wall=30.0,
                storage=200),
    ])
    text = emit_markdown(report)
    assert "| m | n | error | order | time (s) | storage |" in text
    assert "1.1971e-06" in text
    assert "4.01" in text
    assert "spacetime_order" in text


def test_load_config(tmp_path):
    cfg = tmp_path / "bench.cfg"
    cfg.write_text(
        "# defaults for the nightly sweep\n"
        "study = scaling\n"
        "problem = scalar_ode   # scalar path\n"
        "epsilon = 1e-8\n"
        "max_storage = 100000\n"
        "\n")
    cfg_map = load_config(str(cfg))
    assert cfg_map == {"study": "scaling", "problem": "scalar_ode",
                       "epsilon": "1e-8", "max_storage": "100000"}
    bad = tmp_path / "bad.cfg"
    bad.write_text("studdy = scaling\n")
    with pytest.raises(ValueError, match="unknown key"):
        load_config(str(bad))
    malformed = tmp_path / "malformed.cfg"
    malformed.write_text("just words\n")
    with pytest.raises(ValueError, match="key = value"):
        load_config(str(malformed))


def test_scalar_temporal_study_converges():
    spec = StudySpec(study="temporal_order", problem="scalar_ode",
                     scheme="fast", ladder=((1, 16), (1, 32), (1, 64)))
    report = run_study(spec)
    errs = [r.error for r in report.rows]
    assert all(e is not None for e in errs)
    assert errs[0] > errs[1] > errs[2]
    # evaluator error order sits near 3 - alpha(t); demand a safe floor
    assert report.rows[2].order is not None and report.rows[2].order > 1.8
    assert report.rows[0].order is None
    assert not report.failed


def test_agreement_study_scalar():
    spec = StudySpec(study="agreement", problem="scalar_ode",
                     epsilon="1e-12", ladder=((1, 32),))
    report = run_study(spec)
    assert report.rows[0].error <= 1e-9
    assert not report.failed


def test_kernel_certify_study():
    spec = StudySpec(study="kernel_certify", epsilon="1e-6",
                     ladder=((1, 64), (1, 256)))
    report = run_study(spec)
    for row in report.rows:
        assert not row.failed
        assert row.error <= 1e-6
        assert row.storage > 0


def test_coefficient_audit_study():
    spec = StudySpec(study="coefficient_audit", ladder=((1, 32),))
    report = run_study(spec)
    assert not report.failed
    assert report.rows[0].error <= 1.0   # max gap ratio within allowance


def test_scaling_rejects_pde_problem():
    spec = StudySpec(study="scaling", problem="example1_2d",
                     ladder=((1, 8),))
    report = run_study(spec)
    assert report.failed
    assert "scalar_ode" in report.rows[0].note


def test_storage_cap_fails_rung_not_study(tmp_path):
    out = tmp_path / "caps.csv"
    code = main(["--study", "scaling", "--problem", "scalar_ode",
                 "--scheme", "direct", "--ladder", "1:8,1:4096",
                 "--epsilon", "1e-8", "--max-storage", "200",
                 "--out", str(out)])
    assert code == 1
    rows = parse_csv(out.read_text())
    assert not rows[0].failed
    assert rows[1].failed


def test_main_writes_csv_and_markdown(tmp_path):
    out = tmp_path / "t.csv"
    md = tmp_path / "t.md"
    code = main(["--study", "temporal_order", "--problem", "scalar_ode",
                 "--ladder", "1:8,1:16", "--out", str(out),
                 "--markdown", str(md)])
    assert code == 0
    rows = parse_csv(out.read_text())
    assert len(rows) == 2 and rows[1].error < rows[0].error
    assert "| m | n |" in md.read_text()


def test_main_stdout_when_no_out(capsys):
    code = main(["--study", "kernel_certify", "--ladder", "1:32",
                 "--epsilon", "1e-4"])
    assert code == 0
    captured = capsys.readouterr()
    assert captured.out.startswith("m,n,error,order")


def test_config_flags_precedence(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("study = kernel_certify\nladder = 1:32\nepsilon = 1e-4\n")
    out = tmp_path / "o.csv"
    # flag overrides config epsilon
    code = main(["--config", str(cfg), "--epsilon", "1e-6",
                 "--out", str(out)])
    assert code == 0
    assert parse_csv(out.read_text())[0].error <= 1e-6


def test_missing_study_errors():
    with pytest.raises(SystemExit):
        main(["--ladder", "1:8"])
    with pytest.raises(SystemExit):
        main(["--study", "not_a_study"])


def test_deterministic_apart_from_wall_time(tmp_path):
    argv = ["--study", "temporal_order", "--problem", "scalar_ode",
            "--ladder", "1:8,1:16"]
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        assert main(argv + ["--out", str(out)]) == 0
        outs.append(parse_csv(out.read_text()))
    for r1, r2 in zip(*outs):
        assert r1.error == r2.error
        assert r1.order == r2.order
        assert r1.storage == r2.storage


def test_parallel_rungs_match_serial():
    spec = StudySpec(study="kernel_certify", epsilon="1e-4",
                     ladder=((1, 16), (1, 32), (1, 64)))
    serial = run_study(spec)
    par = run_study(StudySpec(**{**spec.__dict__, "parallel": True}))
    for r1, r2 in zip(serial.rows, par.rows):
        assert r1.error == r2.error
        assert r1.storage == r2.storage


def test_default_ladders_cover_every_study():
    from vofrac.bench import _DEFAULT_LADDERS, STUDIES
    assert set(_DEFAULT_LADDERS) == set(STUDIES)
    for text in _DEFAULT_LADDERS.values():
        parse_ladder(text)
