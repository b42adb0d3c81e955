"""Rendering: regression tables, the valence scatter figure, QQ CSVs.

All renderers consume the plain-dict form used in report.json so the same
code path serves a fresh audit run and re-rendering from a saved report.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence

from .errors import ValidationError

STAR_LEGEND = "Note: *p<0.1; **p<0.05; ***p<0.01 (t-test)"


def format_coefficient(coef: float, se: float, stars: str) -> str:
    return f"{coef:.2f}{stars} ({se:.2f})"


def render_table(entry: dict) -> str:
    """Plain-text regression table in a journal-style layout."""
    if entry.get("degenerate"):
        return (f"Model: {entry['model']} | condition: {entry['condition']} | "
                f"scorer: {entry['scorer']}\n"
                f"Not fitted: {entry.get('reason', 'degenerate')}\n")
    title = (f"Model: {entry['model']} | condition: {entry['condition']} | "
             f"scorer: {entry['scorer']}")
    rows = [
        (term, format_coefficient(coef, se, stars))
        for term, coef, se, stars in zip(entry["columns"], entry["coefficients"],
                                         entry["standard_errors"], entry["stars"])
    ]
    footer = [
        ("Observations", str(entry["n"])),
        ("R2", f"{entry['r2']:.3f}"),
        ("Adjusted R2", f"{entry['adj_r2']:.3f}"),
        ("Residual Std. Error", f"{entry['residual_se']:.2f} (df={entry['df_resid']})"),
    ]
    if entry.get("permutation_p") is not None:
        footer.append(("P-value (permutation)", f"{entry['permutation_p']:.3f}"))

    width = max(len(term) for term, _ in rows + footer) + 2
    rule = "-" * (width + 24)
    lines = [title, rule, f"{'':{width}}Valence (0-100)", rule]
    lines += [f"{term:{width}}{value}" for term, value in rows]
    lines.append(rule)
    lines += [f"{term:{width}}{value}" for term, value in footer]
    lines += [rule, STAR_LEGEND, ""]
    return "\n".join(lines)


def table_csv_rows(entry: dict) -> list[list[str]]:
    header = ["term", "coefficient", "std_error", "t_stat", "p_value", "stars"]
    rows = [header]
    if entry.get("degenerate"):
        rows.append(["(not fitted)", "", "", "", "", ""])
        return rows
    for term, coef, se, t, p, stars in zip(
            entry["columns"], entry["coefficients"], entry["standard_errors"],
            entry["t_stats"], entry["p_values"], entry["stars"]):
        rows.append([term, repr(coef), repr(se), repr(t), repr(p), stars])
    rows.append(["Observations", str(entry["n"]), "", "", "", ""])
    rows.append(["R2", repr(entry["r2"]), "", "", "", ""])
    rows.append(["Adjusted R2", repr(entry["adj_r2"]), "", "", "", ""])
    rows.append(["Residual Std. Error", repr(entry["residual_se"]),
                 f"df={entry['df_resid']}", "", "", ""])
    if entry.get("permutation_p") is not None:
        rows.append(["P-value (permutation)", repr(entry["permutation_p"]), "", "", "", ""])
    return rows


def figure_scatter(aggregated_raw_name: dict[str, float], entities: Sequence,
                   party_order: Sequence[str]) -> list[dict]:
    """Scatter points for the raw-name valence figure.

    One point per entity: x is the party's position in party_order, the dot
    area is proportional to the mention count, and zero-mention entities are
    flagged (they get a minimum marker when drawn).
    """
    missing = [e.id for e in entities if e.id not in aggregated_raw_name]
    if missing:
        raise ValidationError(f"raw_name scores missing for entities: {missing}")
    points = []
    for entity in entities:
        if entity.party not in party_order:
            raise ValidationError(f"entity {entity.id!r}: party {entity.party!r} "
                                  f"not in party order {list(party_order)}")
        points.append({
            "entity_id": entity.id,
            "label": entity.surname,
            "party": entity.party,
            "x": party_order.index(entity.party),
            "valence100": float(aggregated_raw_name[entity.id]),
            "mention_count": int(entity.mention_count),
            "area": float(entity.mention_count),
            "flagged": entity.mention_count == 0,
        })
    return points


def scatter_svg(points: Sequence[dict], party_order: Sequence[str],
                width: int = 720, height: int = 480, area_scale: float = 6.0,
                min_radius: float = 2.0) -> str:
    """Self-contained SVG for the scatter figure. Deterministic output."""
    margin_left, margin_right, margin_top, margin_bottom = 60, 20, 20, 50
    plot_w = width - margin_left - margin_right
    plot_h = height - margin_top - margin_bottom

    values = [p["valence100"] for p in points]
    lo = min(values) if values else 0.0
    hi = max(values) if values else 100.0
    pad = max(1.0, (hi - lo) * 0.15)
    lo, hi = lo - pad, hi + pad

    def sx(x: float) -> float:
        step = plot_w / max(1, len(party_order))
        return margin_left + (x + 0.5) * step

    def sy(value: float) -> float:
        return margin_top + (hi - value) / (hi - lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin_left}" y1="{margin_top}" x2="{margin_left}" '
        f'y2="{height - margin_bottom}" stroke="black"/>',
        f'<line x1="{margin_left}" y1="{height - margin_bottom}" x2="{width - margin_right}" '
        f'y2="{height - margin_bottom}" stroke="black"/>',
    ]
    n_ticks = 5
    for k in range(n_ticks + 1):
        value = lo + (hi - lo) * k / n_ticks
        y = sy(value)
        parts.append(f'<line x1="{margin_left - 4}" y1="{y:.2f}" x2="{margin_left}" '
                     f'y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{margin_left - 8}" y="{y + 4:.2f}" text-anchor="end" '
                     f'font-size="11">{value:.1f}</text>')
    for i, party in enumerate(party_order):
        x = sx(i)
        parts.append(f'<text x="{x:.2f}" y="{height - margin_bottom + 18}" '
                     f'text-anchor="middle" font-size="12">{party}</text>')

    # Deterministic within-party spread so same-party dots do not overlap.
    by_party: dict[str, int] = {}
    for p in points:
        k = by_party.get(p["party"], 0)
        by_party[p["party"]] = k + 1
        offset = (k - 1.5) * 9.0
        x = sx(p["x"]) + offset
        y = sy(p["valence100"])
        radius = max(min_radius, math.sqrt(area_scale * p["area"] / math.pi))
        fill = "none" if p["flagged"] else "steelblue"
        stroke = "crimson" if p["flagged"] else "black"
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{radius:.2f}" fill="{fill}" '
                     f'fill-opacity="0.6" stroke="{stroke}"/>')
        parts.append(f'<text x="{x:.2f}" y="{y - radius - 3:.2f}" text-anchor="middle" '
                     f'font-size="9">{p["label"]}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_figure_csv(points: Sequence[dict], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity_id", "label", "party", "x", "valence100",
                         "mention_count", "area", "flagged"])
        for p in points:
            writer.writerow([p["entity_id"], p["label"], p["party"], p["x"],
                             repr(p["valence100"]), p["mention_count"], repr(p["area"]),
                             int(p["flagged"])])


def write_qq_csv(qq: Sequence, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theoretical", "observed"])
        for theoretical, observed in qq:
            writer.writerow([repr(theoretical), repr(observed)])


def report_json(report_dict: dict) -> str:
    """Canonical JSON form: sorted keys, stable float repr, trailing newline."""
    return json.dumps(report_dict, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def model_key(entry: dict) -> str:
    return f"{entry['model']}__{entry['condition']}__{entry['scorer']}"


def write_report_files(report_dict: dict, outdir: str | Path) -> None:
    """Write report.json plus all rendered tables, figure, and QQ files."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for entry in report_dict["models"]:
        key = model_key(entry)
        (outdir / f"table_{key}.txt").write_text(render_table(entry), encoding="utf-8")
        with (outdir / f"table_{key}.csv").open("w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows(table_csv_rows(entry))
        if entry.get("qq"):
            write_qq_csv(entry["qq"], outdir / f"qq_{key}.csv")
    points = report_dict.get("figure1")
    if points:
        write_figure_csv(points, outdir / "figure1.csv")
        svg = scatter_svg(points, report_dict["config"]["parties"])
        (outdir / "figure1.svg").write_text(svg, encoding="utf-8")
    (outdir / "report.json").write_text(report_json(report_dict), encoding="utf-8")
