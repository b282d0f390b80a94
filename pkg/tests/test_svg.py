import xml.etree.ElementTree as ET

import pytest

from ftlwave.svg import line_plot, nice_ticks

NS = "{http://www.w3.org/2000/svg}"


@pytest.mark.parametrize(
    "lo,hi,expected",
    [(0.0, 1.0, [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]), (-10.0, 10.0, [-10.0, -5.0, 0.0, 5.0, 10.0]), (2.0, 2.0, [2.0])],
)
def test_nice_ticks(lo, hi, expected):
    assert nice_ticks(lo, hi) == pytest.approx(expected)


def test_line_plot_is_valid_svg(tmp_path):
    path = line_plot(
        tmp_path / "p.svg",
        [("a & b", [0, 1, 2], [0, 1, 4]), ("flat", [0, 2], [1, float("nan")])],
        title="t<1>",
        ylabel="W",
    )
    root = ET.parse(path).getroot()
    lines = root.findall(f"{NS}polyline")
    assert len(lines) == 2
    assert len(lines[0].get("points").split()) == 3
    assert len(lines[1].get("points").split()) == 1
    texts = [t.text for t in root.iter(f"{NS}text")]
    assert "a & b" in texts and "t<1>" in texts


def test_line_plot_needs_series(tmp_path):
    with pytest.raises(ValueError):
        line_plot(tmp_path / "x.svg", [])
