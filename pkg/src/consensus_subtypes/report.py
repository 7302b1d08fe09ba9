"""Render a finished run directory as SVG figures and a text summary.

Only the CSV artifacts in the directory are read; nothing is recomputed.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import artifacts
from .errors import DataError

PALETTE = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"]
MAX_HEATMAP_CELLS = 200


class MissingArtifacts(DataError):
    def __init__(self, run_dir, missing):
        self.missing = list(missing)
        super().__init__(f"{run_dir}: missing artifact(s): {', '.join(self.missing)}")


def _svg(width, height, body):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n' + "\n".join(body) + "\n</svg>\n"
    )


def _text(x, y, s, size=12, anchor="start"):
    return f'<text x="{x:.1f}" y="{y:.1f}" font-family="sans-serif" font-size="{size}" text-anchor="{anchor}">{escape(str(s))}</text>'


def heatmap_svg(values, order, title="consensus matrix"):
    """Ordered matrix as a grid of gray cells (darker = higher consensus)."""
    M = np.asarray(values)[np.ix_(order, order)]
    n = M.shape[0]
    if n > MAX_HEATMAP_CELLS:
        # average-pool to a bounded grid
        edges = np.linspace(0, n, MAX_HEATMAP_CELLS + 1).astype(int)
        M = np.array([[M[a:b, c:d].mean() for c, d in zip(edges[:-1], edges[1:])]
                      for a, b in zip(edges[:-1], edges[1:])])
        n = MAX_HEATMAP_CELLS
    side = 500
    cell = side / n
    pad = 40
    body = [_text(pad, 25, title, 14)]
    for i in range(n):
        for j in range(n):
            level = int(round(255 * (1.0 - min(max(M[i, j], 0.0), 1.0))))
            body.append(
                f'<rect x="{pad + j * cell:.2f}" y="{pad + i * cell:.2f}" width="{cell + 0.05:.2f}" '
                f'height="{cell + 0.05:.2f}" fill="rgb({level},{level},255)"/>'
            )
    return _svg(side + 2 * pad, side + 2 * pad, body)


def cdf_svg(curves, title="consensus CDF"):
    """Step curves of the consensus CDF; ``curves`` maps a label to (grid, cdf)."""
    w, h, pad = 520, 400, 50
    pw, ph = w - 2 * pad, h - 2 * pad
    body = [_text(pad, 25, title, 14)]
    body.append(f'<rect x="{pad}" y="{pad}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in (0.0, 0.1, 0.5, 0.9, 1.0):
        x = pad + t * pw
        body.append(_text(x, h - pad + 16, f"{t:g}", 10, "middle"))
        body.append(_text(pad - 6, pad + (1 - t) * ph + 4, f"{t:g}", 10, "end"))
    for x in (0.1, 0.9):
        body.append(f'<line x1="{pad + x * pw:.1f}" y1="{pad}" x2="{pad + x * pw:.1f}" y2="{pad + ph}" stroke="#bbbbbb" stroke-dasharray="4 3"/>')
    for idx, (label, (grid, cdf)) in enumerate(curves.items()):
        color = PALETTE[idx % len(PALETTE)]
        pts = []
        prev = None
        for x, y in zip(grid, cdf):
            px, py = pad + x * pw, pad + (1 - y) * ph
            if prev is not None:
                pts.append(f"{px:.1f},{prev:.1f}")
            pts.append(f"{px:.1f},{py:.1f}")
            prev = py
        body.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        body.append(_text(w - pad + 4, pad + 14 * (idx + 1), label, 11))
        body.append(f'<line x1="{w - pad - 14}" y1="{pad + 14 * (idx + 1) - 4}" x2="{w - pad}" y2="{pad + 14 * (idx + 1) - 4}" stroke="{color}" stroke-width="2"/>')
    body.append(_text(pad + pw / 2, h - 10, "consensus index", 11, "middle"))
    return _svg(w + 40, h, body)


def silhouette_svg(rows, title="silhouette plot"):
    """Horizontal bars per sample, grouped by cluster, widest first."""
    n = len(rows)
    bar = max(1.0, min(8.0, 600.0 / max(n, 1)))
    gap = 6
    clusters = sorted({c for _, c, _ in rows})
    pad, pw = 50, 400
    zero = pad + pw / 2
    height = int(2 * pad + n * bar + gap * len(clusters))
    body = [_text(pad, 25, title, 14)]
    y = pad
    for c in clusters:
        members = sorted((w for _, cc, w in rows if cc == c), reverse=True)
        color = PALETTE[c % len(PALETTE)]
        for wdt in members:
            x = zero if wdt >= 0 else zero + wdt * pw / 2
            body.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{abs(wdt) * pw / 2:.2f}" height="{bar:.2f}" fill="{color}"/>')
            y += bar
        body.append(_text(pad - 6, y - bar * len(members) / 2 + 4, f"{c}", 10, "end"))
        y += gap
    body.append(f'<line x1="{zero}" y1="{pad}" x2="{zero}" y2="{y}" stroke="black"/>')
    for t in (-1, 0, 1):
        body.append(_text(zero + t * pw / 2, y + 16, f"{t}", 10, "middle"))
    asw = np.mean([w for _, _, w in rows]) if rows else 0.0
    body.append(_text(pad + pw, 25, f"ASW = {asw:.4f}", 12, "end"))
    return _svg(pad * 2 + pw, height + 20, body)


def _require(run_dir, names):
    missing = [n for n in names if not (run_dir / n).is_file()]
    if missing:
        raise MissingArtifacts(run_dir, missing)


def detect_kind(run_dir):
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise DataError(f"{run_dir}: not a directory")
    if (run_dir / "k_selection.csv").is_file():
        return "select-k"
    if (run_dir / "consensus_matrix.csv").is_file():
        return "consensus"
    if (run_dir / "assignment.csv").is_file():
        return "cluster"
    raise MissingArtifacts(
        run_dir, ["assignment.csv (cluster run)", "consensus_matrix.csv (consensus run)", "k_selection.csv (select-k run)"]
    )


def _silhouette_lines(rows):
    widths = np.array([w for _, _, w in rows])
    k = len({c for _, c, _ in rows})
    lines = [f"ASW = {widths.mean():.6f} over {len(widths)} samples, {k} clusters"]
    for c in sorted({c for _, c, _ in rows}):
        cw = [w for _, cc, w in rows if cc == c]
        lines.append(f"  cluster {c}: n={len(cw)}, mean width={np.mean(cw):.4f}")
    return lines


def render_report(run_dir):
    """Write SVG figures and ``report.txt`` into ``run_dir``; returns written paths."""
    run_dir = Path(run_dir)
    kind = detect_kind(run_dir)
    written = {}
    lines = [f"run directory: {run_dir.name}", f"run type: {kind}"]

    if kind == "consensus":
        _require(run_dir, ["consensus_matrix.csv", "heatmap_order.csv", "cdf.csv", "silhouette.csv", "assignment.csv"])
        ids, values = artifacts.read_square(run_dir / "consensus_matrix.csv")
        order_rows = artifacts.read_table(run_dir / "heatmap_order.csv", ["position", "sample_id", "index"])
        order = [int(r["index"]) for r in order_rows]
        grid, cdf = artifacts.read_cdf(run_dir / "cdf.csv")
        sil = artifacts.read_silhouette(run_dir / "silhouette.csv")
        written["heatmap"] = run_dir / "heatmap.svg"
        written["heatmap"].write_text(heatmap_svg(values, order), encoding="utf-8")
        written["cdf"] = run_dir / "cdf.svg"
        written["cdf"].write_text(cdf_svg({"consensus": (grid, cdf)}), encoding="utf-8")
        written["silhouette"] = run_dir / "silhouette.svg"
        written["silhouette"].write_text(silhouette_svg(sil), encoding="utf-8")
        lo = float(cdf[np.searchsorted(grid, 0.1 - 1e-12)])
        hi = float(cdf[np.searchsorted(grid, 0.9 - 1e-12)])
        lines.append(f"samples: {len(ids)}")
        lines.append(f"CDF flatness on [0.1, 0.9]: {(hi - lo) / 0.8:.4f}")
        lines.extend(_silhouette_lines(sil))
    elif kind == "select-k":
        table = artifacts.read_k_selection(run_dir / "k_selection.csv")
        ks = [int(r["k"]) for r in table]
        chosen = [int(r["k"]) for r in table if r["chosen"] == "1"]
        needed = [f"cdf_k{k}.csv" for k in ks] + [f"consensus_matrix_k{k}.csv" for k in chosen]
        needed += [f"heatmap_order_k{k}.csv" for k in chosen]
        _require(run_dir, needed)
        curves = {f"K={k}": artifacts.read_cdf(run_dir / f"cdf_k{k}.csv") for k in ks}
        written["cdf"] = run_dir / "cdf.svg"
        written["cdf"].write_text(cdf_svg(curves, "consensus CDF by K"), encoding="utf-8")
        for k in chosen:
            _, values = artifacts.read_square(run_dir / f"consensus_matrix_k{k}.csv")
            rows = artifacts.read_table(run_dir / f"heatmap_order_k{k}.csv", ["index"])
            written["heatmap"] = run_dir / "heatmap.svg"
            written["heatmap"].write_text(
                heatmap_svg(values, [int(r["index"]) for r in rows], f"consensus matrix, K={k}"), encoding="utf-8"
            )
        lines.append("k\tarea\tdelta_area\tflatness\tchosen")
        for r in table:
            lines.append(
                f"{r['k']}\t{float(r['area']):.4f}\t{float(r['delta_area']):.4f}\t{float(r['flatness']):.4f}\t{r['chosen']}"
            )
        lines.append(f"chosen k: {', '.join(map(str, chosen)) or 'none'}")
    else:
        _require(run_dir, ["assignment.csv", "silhouette.csv"])
        sil = artifacts.read_silhouette(run_dir / "silhouette.csv")
        written["silhouette"] = run_dir / "silhouette.svg"
        written["silhouette"].write_text(silhouette_svg(sil), encoding="utf-8")
        lines.extend(_silhouette_lines(sil))

    written["summary"] = run_dir / "report.txt"
    written["summary"].write_text("\n".join(lines) + "\n", encoding="utf-8")
    return written
