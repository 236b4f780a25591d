import json

from lambda_lab_report import figures
from lambda_lab_report.cli import main
from lambda_lab_report.readers import load_flow, load_scan, load_variations
from lambda_lab_report.render import render_page

from test_readers import sample_rows, write_flow_csv


def make_artifacts(tmp_path):
    flow_dir = tmp_path / "flow"
    flow_dir.mkdir()
    write_flow_csv(flow_dir, sample_rows(12))
    (flow_dir / "flow-summary.json").write_text(json.dumps(
        {"decay_rate": 1.70837245913, "decay_r2": 0.99931, "converged": True}))
    scan_dir = tmp_path / "scan"
    scan_dir.mkdir()
    (scan_dir / "scan-report.json").write_text(json.dumps(
        {"c_B": 1.8218, "c_C": 0.1108, "sample_count": 500, "seed": 42,
         "excluded_count": 50, "ratios_b": [1.9, 2.4, 3.0],
         "ratios_c": [0.12, 0.4, 0.9]}))
    var_dir = tmp_path / "var"
    var_dir.mkdir()
    (var_dir / "variations.csv").write_text(
        "order,method,value,cross_error,g_id,h_id,seed\n"
        "1,perelman,0.13,2e-08,g0,h0,3\n"
        "2,perturbation-series,-0.25,1e-09,g0,h0,3\n"
        "3,perturbation-series,0.02,3e-06,g0,h0,3\n")
    return flow_dir, scan_dir, var_dir


def test_decay_annotation_is_the_stored_rate(tmp_path):
    flow_dir, _, _ = make_artifacts(tmp_path)
    flow = load_flow(flow_dir)
    name = figures.fig_decay(flow, tmp_path)
    text = (tmp_path / name).read_text()
    marker = "rate = "
    idx = text.find(marker)
    assert idx >= 0
    val = float(text[idx + len(marker):].split("<")[0])
    assert abs(val - 1.70837245913) <= 1e-9


def test_decay_without_fit(tmp_path):
    flow_dir, _, _ = make_artifacts(tmp_path)
    (flow_dir / "flow-summary.json").write_text(json.dumps({"decay_rate": None}))
    flow = load_flow(flow_dir)
    name = figures.fig_decay(flow, tmp_path)
    assert "no stored fit" in (tmp_path / name).read_text()


def test_all_figures_render(tmp_path):
    flow_dir, scan_dir, var_dir = make_artifacts(tmp_path)
    flow = load_flow(flow_dir)
    scan = load_scan(scan_dir)
    rows = load_variations(var_dir)
    names = [figures.fig_lambda(flow, tmp_path),
             figures.fig_decay(flow, tmp_path),
             figures.fig_monitors(flow, tmp_path),
             figures.fig_scan(scan, tmp_path),
             figures.fig_variations(rows, tmp_path)]
    for name in names:
        body = (tmp_path / name).read_bytes()
        assert body.startswith(b"<?xml")
        assert len(body) > 2000


def test_figures_are_deterministic(tmp_path):
    flow_dir, _, _ = make_artifacts(tmp_path)
    flow = load_flow(flow_dir)
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    figures.fig_decay(flow, a)
    figures.fig_decay(flow, b)
    assert (a / "flow-decay.svg").read_bytes() == (b / "flow-decay.svg").read_bytes()


def test_render_page_escapes_and_links():
    page = render_page([("flow <run>", ["flow-lambda.svg"],
                         [("rate", -1.5), ("note", "a<b")])])
    assert '<img src="flow-lambda.svg"' in page
    assert "flow &lt;run&gt;" in page
    assert "a&lt;b" in page
    assert "-1.5" in page


def test_cli_end_to_end(tmp_path):
    flow_dir, scan_dir, var_dir = make_artifacts(tmp_path)
    out = tmp_path / "out"
    rc = main(["--flow", str(flow_dir), "--scan", str(scan_dir),
               "--variations", str(var_dir), "--out", str(out)])
    assert rc == 0
    produced = sorted(p.name for p in out.iterdir())
    assert produced == ["flow-decay.svg", "flow-lambda.svg", "flow-monitors.svg",
                        "index.html", "scan-ratios.svg", "variations-cross.svg"]
    page = (out / "index.html").read_text()
    for name in produced:
        if name.endswith(".svg"):
            assert name in page


def test_cli_requires_an_input(tmp_path, capsys):
    rc = main(["--out", str(tmp_path / "out")])
    assert rc == 2
    assert "nothing to render" in capsys.readouterr().err


def test_cli_rejects_malformed_input(tmp_path, capsys):
    flow_dir = tmp_path / "flow"
    flow_dir.mkdir()
    (flow_dir / "flow.csv").write_text("time,lambda\n0,1\n")
    rc = main(["--flow", str(flow_dir), "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "report input error" in capsys.readouterr().err
