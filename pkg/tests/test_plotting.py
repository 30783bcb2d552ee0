import pytest

from bohmorder.errors import SchemaMismatch
from bohmorder.plotting import SCHEMAS, emit_plot


def write(path, text):
    path.write_text(text)
    return path


SAMPLES = {
    "path": "t,x,y\n0,0,0\n1,1,0.5\n2,0.5,1\n",
    "loglog-chi": "t,x,y,chi\n" + "".join(f"{t},0,0,{1.0 / t}\n" for t in (1, 10, 100, 1000, 10000)),
    "contour": "x,y,P_s,psi2\n" + "".join(f"{x},{y},{x * x + y},{x + y * y}\n"
                                         for x in range(4) for y in range(4)),
    "section": "traj_id,k,x,y\n0,0,0.1,0.2\n0,1,0.2,0.1\n1,0,-0.3,0.4\n",
    "metrics": "t,D,H_s,D_bar\n0,40,3,38\n1,39,2.5,36\n",
}


@pytest.mark.parametrize("kind", sorted(SCHEMAS))
def test_every_kind_renders(tmp_path, kind):
    csv = write(tmp_path / f"{kind}.csv", SAMPLES[kind])
    svg = emit_plot(csv, kind)
    assert svg.suffix == ".svg" and "<svg" in svg.read_text()


@pytest.mark.parametrize("kind", sorted(SCHEMAS))
def test_empty_files_give_empty_axes(tmp_path, kind):
    csv = write(tmp_path / "e.csv", ",".join(SCHEMAS[kind]) + "\n")
    assert emit_plot(csv, kind, tmp_path / "e.svg").exists()


def test_header_mismatch(tmp_path):
    csv = write(tmp_path / "bad.csv", "a,b,c\n1,2,3\n")
    with pytest.raises(SchemaMismatch):
        emit_plot(csv, "path")


def test_unknown_kind(tmp_path):
    with pytest.raises(SchemaMismatch):
        emit_plot(write(tmp_path / "x.csv", SAMPLES["path"]), "histogram")


def test_chi_plot_reports_fit(tmp_path):
    svg = emit_plot(write(tmp_path / "c.csv", SAMPLES["loglog-chi"]), "loglog-chi")
    assert "fit -1.00" in svg.read_text().replace("−", "-")
