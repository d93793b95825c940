import json
import math

import numpy as np
import pytest

from nilheat.cli import main, parse_points, read_field
from nilheat.errors import ParseError
from nilheat.nilmanifold import (
    LatticeParams,
    ManifoldFunction,
    manifold_grid,
    matrix_coefficient_field,
    sector_synthesize,
    twisted_average,
)
from nilheat.numerics import SampledField, gaussian_function

K1 = LatticeParams(1, 1)


def _write_field(path, points=8, xi_points=4, value=lambda node: 1.0 + 0.0j):
    grid = manifold_grid(1, points, xi_points)
    lines = ["x u xi re im"]
    for node in grid.mesh().reshape(-1, 3):
        v = complex(value(node))
        lines.append(" ".join(repr(float(c)) for c in node) + f" {v.real!r} {v.imag!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return grid


def _table(path):
    lines = [l for l in path.read_text(encoding="utf-8").splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    return header, [row.split(",") for row in lines[1:]]


def test_verify_list(capsys):
    assert main(["verify", "--list", "--check", "hermite.*"]) == 0
    out = capsys.readouterr().out
    assert "hermite.semigroup" in out
    assert "bergman." not in out


def test_verify_writes_report(tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main(["-q", "verify", "--check", "numerics.parseval", "--workers", "1", "--out", str(out)])
    assert code == 0
    assert out.exists()
    assert "1/1 checks passed" in capsys.readouterr().out


def test_bad_configuration_exits_with_two(tmp_path, capsys):
    assert main(["verify", "--list", "--k", "0"]) == 2
    assert "k:" in capsys.readouterr().err
    conf = tmp_path / "bad.conf"
    conf.write_text("n = 1\nnot a setting\n", encoding="utf-8")
    assert main(["verify", "--list", "--config", str(conf)]) == 2
    assert "bad.conf:2" in capsys.readouterr().err


def test_read_field(tmp_path):
    path = tmp_path / "field.csv"
    grid = _write_field(path, value=lambda node: node[0] + 1j * node[2])
    F = read_field(str(path))
    assert F.n == 1
    assert F.field.grid.points == grid.points
    mesh = grid.mesh()
    assert np.allclose(F.field.values, mesh[..., 0] + 1j * mesh[..., 2])


def test_read_field_errors_name_the_line(tmp_path):
    path = tmp_path / "field.csv"
    path.write_text("x u xi re im\n0 0 0 1 0\n0 0 0.25 one 0\n", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        read_field(str(path))
    assert info.value.line == 3
    path.write_text("0 0 0 1 0\n0 0 0.25 1\n", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        read_field(str(path))
    assert info.value.line == 2
    with pytest.raises(ParseError):
        read_field(str(tmp_path / "missing.csv"))


def test_read_field_rejects_rows_off_the_grid(tmp_path):
    path = tmp_path / "field.csv"
    _write_field(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    lines[3] = "0.0 0.0 0.125 1.0 0.0"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        read_field(str(path))
    assert info.value.line == 4


def test_parse_points():
    pts = parse_points(["0.3+0.1j, 0.5", "1 2i 0.25", "# skipped"], 1)
    assert pts.shape == (2, 3)
    assert pts[0, 2] == 0
    assert pts[1, 1] == 2j
    with pytest.raises(ParseError) as info:
        parse_points(["1 2", "1 2 3 4"], 1, "pts.txt", first_line=10)
    assert info.value.line == 11
    with pytest.raises(ParseError):
        parse_points(["x y"], 1)
    with pytest.raises(ParseError):
        parse_points([], 1)


def test_dump_kernel_table(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["-q", "dump-kernel", "p", "--points", "5", "--extent", "1", "--out", str(out)]) == 0
    text = out.read_text(encoding="utf-8")
    assert text.startswith("# kind=p")
    assert "# p_kernel = " in text
    header, rows = _table(out)
    assert header == ["x", "u", "p"]
    assert len(rows) == 25
    centre = [float(r[2]) for r in rows if float(r[0]) == 0.0 and float(r[1]) == 0.0][0]
    lam, t = 4.0 * math.pi, 0.1
    assert centre == pytest.approx((lam / (4 * math.pi * math.sinh(lam * t))), rel=1e-12)


def test_eval_requires_points(capsys):
    assert main(["eval", "--alpha", "0"]) == 2
    assert "points" in capsys.readouterr().err


@pytest.mark.slow
def test_decompose_constant_field(tmp_path):
    field = tmp_path / "field.csv"
    out = tmp_path / "sectors.csv"
    _write_field(field)
    assert main(["-q", "decompose", str(field), "--out", str(out)]) == 0
    header, rows = _table(out)
    assert header[:4] == ["k", "j", "l2_norm", "transform_norm"]
    assert [r[0] for r in rows] == ["0"]
    assert float(rows[0][2]) == pytest.approx(math.sqrt(0.5), rel=1e-12)
    assert float(rows[0][3]) > 0.0


def _write_manifold(path, F):
    lines = ["x u xi re im"]
    for node, v in zip(F.grid.mesh().reshape(-1, 3), F.field.values.reshape(-1)):
        lines.append(" ".join(repr(float(c)) for c in node) + f" {complex(v).real!r} {complex(v).imag!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _decompose(tmp_path, F):
    field = tmp_path / "field.csv"
    out = tmp_path / "sectors.csv"
    _write_manifold(field, F)
    assert main(["-q", "decompose", str(field), "--out", str(out)]) == 0
    return out


@pytest.mark.slow
def test_decompose_single_matrix_coefficient(tmp_path):
    M = matrix_coefficient_field(K1, (1,), gaussian_function(0.2, 0.5), 16)
    out = _decompose(tmp_path, sector_synthesize(M, 4))
    _, rows = _table(out)
    assert [(r[0], r[1]) for r in rows] == [("1", "1")]
    assert float(rows[0][2]) == pytest.approx(math.sqrt(0.5) * M.norm(), rel=1e-10)
    assert float(rows[0][3]) > 0.0


@pytest.mark.slow
def test_decompose_energy_adds_up(tmp_path):
    M = matrix_coefficient_field(K1, (0,), gaussian_function(-0.1, 0.4), 16)
    negative = twisted_average(LatticeParams(1, -1), gaussian_function([0.5, 0.5], 0.3), points=16)
    cell = M.grid
    F = ManifoldFunction.from_sectors(1, {0: SampledField(cell, np.ones(cell.size)), 1: M.field, -1: negative.field}, 8)
    out = _decompose(tmp_path, F)
    text = out.read_text(encoding="utf-8")
    assert "# sectors k < 0 get one row with j blank and no transform norm" in text
    _, rows = _table(out)
    by_key = {(r[0], r[1]): r for r in rows}
    assert set(by_key) == {("-1", ""), ("0", ""), ("1", "0")}
    assert by_key[("-1", "")][3] == ""
    # the constant 1 has L2(M) norm sqrt(1/2), the volume of the fundamental domain
    assert float(by_key[("0", "")][2]) == pytest.approx(math.sqrt(0.5), rel=1e-12)
    energy = sum(float(r[2]) ** 2 for r in rows)
    assert energy == pytest.approx(F.field.norm() ** 2, rel=1e-8)


@pytest.mark.slow
def test_verify_on_a_coarse_grid_fails(tmp_path):
    out = tmp_path / "report.json"
    cid = "heat_transform.cross_route"
    assert main(["-q", "verify", "--grid", "8", "--workers", "1", "--check", cid, "--out", str(out)]) != 0
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["summary"]["failed"] == [cid]
    assert any(w.startswith("TruncationWarning: grid 8 gives 4 nodes") for w in report["checks"][0]["warnings"])


def test_dump_kernel_p_is_even_in_lambda(tmp_path):
    plus, minus = tmp_path / "plus.csv", tmp_path / "minus.csv"
    assert main(["-q", "dump-kernel", "p", "--points", "5", "--lam=12.5", "--out", str(plus)]) == 0
    assert main(["-q", "dump-kernel", "p", "--points", "5", "--lam=-12.5", "--out", str(minus)]) == 0
    assert plus.read_text(encoding="utf-8") == minus.read_text(encoding="utf-8")
    assert "lam=12.5 " in plus.read_text(encoding="utf-8")


def test_lambda_nodes_flag(tmp_path, capsys):
    assert main(["dump-kernel", "heat", "--lambda-nodes", "8"]) == 2
    assert "lambda_nodes" in capsys.readouterr().err
    out = tmp_path / "heat.csv"
    assert main(["-q", "dump-kernel", "heat", "--points", "3", "--lambda-nodes", "256", "--out", str(out)]) == 0
    header, rows = _table(out)
    assert header == ["x", "u", "k_re", "k_im"]
    assert len(rows) == 9
