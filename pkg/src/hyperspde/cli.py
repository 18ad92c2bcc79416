"""Command-line entry point: studies, verification suites, and plots.

Subcommands:

    study         run a coupled convergence study, write CSV + report (+ SVG)
    verify-order  deterministic semigroup-approximation order checks
    oracle        scalar SDE strong-order and iterated-integral identity checks
    plot          render the CSV error table as a self-contained SVG

Configuration may come from a flat ``key = value`` file (``#`` comments);
command-line flags override file values.  Every run echoes the fully resolved
configuration, and a fixed seed reproduces all data outputs byte for byte.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .harness import (
    StudyConfig,
    desk_config,
    milstein_identity_check,
    paper_config,
    run_study,
    scalar_strong_order,
    study_report,
    write_study_outputs,
    VARIANT_LABELS,
)
from .models import MODEL_NAMES
from .schemes import (
    CRANK_NICOLSON,
    EXPONENTIAL,
    IMPLICIT_EULER,
    SCHRODINGER,
    TimeScheme,
    measure_operator_order,
    predicted_order,
)
from .spectral import ModeSet

SCHEME_BY_NAME = {
    "exe": EXPONENTIAL,
    "ie": IMPLICIT_EULER,
    "cn": CRANK_NICOLSON,
}

#: verify-order defaults: a short horizon pushes the critical mode deep into
#: the resolved range, where the measured order plateaus at the sharp rate.
ORDER_HORIZON = 2.0**-6
ORDER_STEPS = tuple(2.0**-k for k in range(14, 20))
ORDER_MODES = 2**10
ORDER_TOLERANCE = 0.1

ORDER_SUITE = (("ie", 1.0), ("ie", 2.0), ("cn", 1.5), ("cn", 0.75), ("exe", 1.0))


def parse_step_token(token: str) -> float:
    """Accept '2^-5' style tokens or plain decimals."""
    token = token.strip()
    if "^" in token:
        base, _, exponent = token.partition("^")
        return float(base) ** float(exponent)
    return float(token)


def parse_steps(spec: str) -> tuple:
    return tuple(parse_step_token(tok) for tok in spec.split(",") if tok.strip())


_STUDY_KEYS = (
    "model", "scale", "modes", "samples", "steps", "href", "seed",
    "out", "plot", "force", "potential", "kernel",
)
_BOOL_KEYS = ("plot", "force")


def parse_config_file(path) -> dict:
    """Flat key = value with # comments; unknown keys are rejected."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _STUDY_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value.strip()
    for key in _BOOL_KEYS:
        if key in values:
            lowered = values[key].lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"config key {key} must be boolean, got {values[key]!r}")
            values[key] = lowered in ("true", "1", "yes")
    return values


def _resolve_study_config(args) -> tuple:
    settings = dict(parse_config_file(args.config)) if args.config else {}
    for key in _STUDY_KEYS:
        cli_value = getattr(args, key.replace("-", "_"), None)
        if cli_value is not None and cli_value is not False:
            settings[key] = cli_value
    model = settings.get("model", "linear")
    if model not in MODEL_NAMES:
        raise ValueError(f"unknown model {model!r}; choose one of {MODEL_NAMES}")
    scale = settings.get("scale", "desk")
    if scale not in ("desk", "paper"):
        raise ValueError(f"unknown scale {scale!r}; choose desk or paper")
    base = desk_config(model) if scale == "desk" else paper_config(model)
    overrides = {}
    if "modes" in settings:
        overrides["mode_count"] = int(settings["modes"])
    if "samples" in settings:
        overrides["samples"] = int(settings["samples"])
    if "steps" in settings:
        steps = settings["steps"]
        overrides["step_sizes"] = parse_steps(steps) if isinstance(steps, str) else steps
    if "href" in settings:
        href = settings["href"]
        overrides["h_ref"] = parse_step_token(href) if isinstance(href, str) else href
    if "seed" in settings:
        overrides["seed"] = int(settings["seed"])
    if "potential" in settings:
        overrides["potential_path"] = str(settings["potential"])
    if "kernel" in settings:
        overrides["kernel_path"] = str(settings["kernel"])
    from dataclasses import replace

    cfg = replace(base, **overrides) if overrides else base
    out_dir = settings.get("out", "hyperspde_study")
    want_plot = bool(settings.get("plot", False))
    force = bool(settings.get("force", False))
    return cfg, out_dir, want_plot, force


def cmd_study(args) -> int:
    try:
        cfg, out_dir, want_plot, force = _resolve_study_config(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    result = run_study(cfg)
    try:
        paths = write_study_outputs(result, out_dir, force=force)
    except FileExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if want_plot:
        svg_path = os.path.join(out_dir, "plot.svg")
        if os.path.exists(svg_path) and not force:
            print(f"error: {svg_path} exists; pass --force to overwrite", file=sys.stderr)
            return 1
        with open(paths["csv"]) as fh:
            svg = render_plot(fh.read())
        with open(svg_path, "w") as fh:
            fh.write(svg)
        paths["svg"] = svg_path
    sys.stdout.write(study_report(result))
    for kind, path in paths.items():
        print(f"wrote {kind}: {path}")
    return 0


def cmd_verify_order(args) -> int:
    if args.scheme is not None:
        if args.scheme not in SCHEME_BY_NAME:
            print(f"error: unknown scheme {args.scheme!r}", file=sys.stderr)
            return 1
        if args.beta is None:
            print("error: --beta is required with --scheme", file=sys.stderr)
            return 1
        suite = ((args.scheme, args.beta),)
    else:
        suite = ORDER_SUITE
    steps = parse_steps(args.steps) if args.steps else ORDER_STEPS
    horizon = parse_step_token(args.horizon) if args.horizon else ORDER_HORIZON
    modes = ModeSet(args.modes)
    failures = 0
    print(f"{'scheme':>8} {'beta':>6} {'predicted':>10} {'measured':>10} {'status':>8}")
    for name, beta in suite:
        scheme = SCHEME_BY_NAME[name]
        measurement = measure_operator_order(
            SCHRODINGER, scheme, beta, modes, steps, horizon
        )
        predicted = predicted_order(scheme, beta)
        if predicted is None:
            ok = measurement.exact
            status = "exact" if ok else "FAIL"
            measured_str = "exact" if measurement.exact else f"{measurement.slope:.3f}"
            print(f"{name:>8} {beta:>6.3g} {'exact':>10} {measured_str:>10} {status:>8}")
            if not ok:
                failures += 1
                worst = max(measurement.errors)
                print(f"  breach: max error {worst:.3e} exceeds 1e-12", file=sys.stderr)
        else:
            measured = measurement.slope
            ok = measured is not None and abs(measured - predicted) <= ORDER_TOLERANCE
            status = "ok" if ok else "FAIL"
            print(f"{name:>8} {beta:>6.3g} {predicted:>10.3f} {measured:>10.3f} {status:>8}")
            if not ok:
                failures += 1
                print(
                    f"  breach: |{measured:.3f} - {predicted:.3f}| > {ORDER_TOLERANCE}",
                    file=sys.stderr,
                )
    return 1 if failures else 0


def cmd_oracle(args) -> int:
    try:
        a = complex(args.a)
        b = complex(args.b)
    except ValueError as exc:
        print(f"error: bad coefficient: {exc}", file=sys.stderr)
        return 1
    try:
        result = scalar_strong_order(a, b, samples=args.samples, seed=args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    failures = 0
    if result.euler_exact and result.milstein_exact:
        print("scalar orders: exact (zero noise, exponential propagator)")
    else:
        print(f"scalar Euler order:    {result.euler_order:.3f} (target 0.5)")
        print(f"scalar Milstein order: {result.milstein_order:.3f} (target 1.0)")
        if abs(result.euler_order - 0.5) > 0.1:
            print(f"  breach: Euler order {result.euler_order:.3f} not within 0.5 +/- 0.1",
                  file=sys.stderr)
            failures += 1
        if abs(result.milstein_order - 1.0) > 0.1:
            print(f"  breach: Milstein order {result.milstein_order:.3f} not within 1.0 +/- 0.1",
                  file=sys.stderr)
            failures += 1
    check = milstein_identity_check(seed=args.seed)
    verdict = "ok" if check.within() else "FAIL"
    print(
        f"iterated-integral identity: mean diff {check.mean_difference:+.3e}"
        f" (stderr {check.standard_error:.3e}) {verdict}"
    )
    if not check.within():
        print(
            f"  breach: |{check.mean_difference:.3e}| > 3 * {check.standard_error:.3e}",
            file=sys.stderr,
        )
        failures += 1
    return 1 if failures else 0


def cmd_plot(args) -> int:
    try:
        with open(args.csv) as fh:
            text = fh.read()
        svg = render_plot(text)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(svg)
        print(f"wrote svg: {args.out}")
    else:
        sys.stdout.write(svg)
    return 0


# -- SVG rendering ---------------------------------------------------------

_SERIES_COLORS = {
    "EXE": "#4477aa",
    "CNE": "#66ccee",
    "LIE": "#228833",
    "EXM": "#ccbb44",
    "CNM": "#ee6677",
    "LIM": "#aa3377",
}

_VIEW_W, _VIEW_H = 760.0, 520.0
_ML, _MR, _MT, _MB = 80.0, 150.0, 20.0, 60.0


def parse_error_csv(text: str):
    """Parse the study CSV; raises ValueError with a line number on bad input."""
    lines = [ln for ln in text.splitlines()]
    if not lines:
        raise ValueError("line 1: empty file")
    expected = "Stepsize," + ",".join(VARIANT_LABELS)
    if lines[0].strip() != expected:
        raise ValueError(f"line 1: header must be {expected!r}")
    hs = []
    series = {label: [] for label in VARIANT_LABELS}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 1 + len(VARIANT_LABELS):
            raise ValueError(f"line {lineno}: expected {1 + len(VARIANT_LABELS)} cells")
        try:
            h = float(cells[0])
            errs = [float(c) for c in cells[1:]]
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric cell") from None
        if h <= 0.0 or any(e <= 0.0 for e in errs):
            raise ValueError(f"line {lineno}: log axes need positive values")
        hs.append(h)
        for label, err in zip(VARIANT_LABELS, errs):
            series[label].append(err)
    if not hs:
        raise ValueError("line 2: no data rows")
    return hs, series


def _pow2_label(exponent: int) -> str:
    return f"2^{exponent}"


def render_plot(csv_text: str) -> str:
    """Self-contained SVG log2-log2 error chart; identical input, identical bytes."""
    hs, series = parse_error_csv(csv_text)
    lx = [np.log2(h) for h in hs]
    guide_anchor_h = max(hs)
    i_anchor = hs.index(guide_anchor_h)
    anchor_half = series["EXE"][i_anchor] * 1.5
    anchor_one = series["EXM"][i_anchor] * 0.6
    guides = [
        ("order 0.5", 0.5, anchor_half, "4,4"),
        ("order 1.0", 1.0, anchor_one, "8,4"),
    ]
    ys = [np.log2(e) for errs in series.values() for e in errs]
    for _, slope, anchor, _ in guides:
        for h in (min(hs), max(hs)):
            ys.append(np.log2(anchor) + slope * (np.log2(h) - np.log2(guide_anchor_h)))
    x_lo, x_hi = min(lx) - 0.5, max(lx) + 0.5
    y_lo, y_hi = min(ys) - 0.5, max(ys) + 0.5
    plot_w = _VIEW_W - _ML - _MR
    plot_h = _VIEW_H - _MT - _MB

    def sx(logh):
        return _ML + (logh - x_lo) / (x_hi - x_lo) * plot_w

    def sy(logerr):
        return _MT + (y_hi - logerr) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_VIEW_W:.0f} {_VIEW_H:.0f}">',
        f'<rect width="{_VIEW_W:.0f}" height="{_VIEW_H:.0f}" fill="white"/>',
        f'<rect x="{_ML:.1f}" y="{_MT:.1f}" width="{plot_w:.1f}" height="{plot_h:.1f}" '
        'fill="none" stroke="black" stroke-width="1"/>',
    ]
    # Ticks at integer exponents.
    for ex in range(int(np.ceil(x_lo)), int(np.floor(x_hi)) + 1):
        x = sx(ex)
        parts.append(
            f'<line x1="{x:.2f}" y1="{_MT + plot_h:.2f}" x2="{x:.2f}" '
            f'y2="{_MT + plot_h + 6:.2f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{_MT + plot_h + 22:.2f}" text-anchor="middle" '
            f'font-family="monospace" font-size="12">{_pow2_label(ex)}</text>'
        )
    for ey in range(int(np.ceil(y_lo)), int(np.floor(y_hi)) + 1):
        y = sy(ey)
        parts.append(
            f'<line x1="{_ML - 6:.2f}" y1="{y:.2f}" x2="{_ML:.2f}" y2="{y:.2f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_ML - 10:.2f}" y="{y + 4:.2f}" text-anchor="end" '
            f'font-family="monospace" font-size="12">{_pow2_label(ey)}</text>'
        )
    parts.append(
        f'<text x="{_ML + plot_w / 2:.2f}" y="{_VIEW_H - 14:.2f}" text-anchor="middle" '
        'font-family="monospace" font-size="13">step size</text>'
    )
    parts.append(
        f'<text x="20" y="{_MT + plot_h / 2:.2f}" text-anchor="middle" '
        'font-family="monospace" font-size="13" '
        f'transform="rotate(-90 20 {_MT + plot_h / 2:.2f})">uniform L2 error</text>'
    )
    # Guide lines.
    for name, slope, anchor, dash in guides:
        x1, x2 = min(lx), max(lx)
        y1 = np.log2(anchor) + slope * (x1 - np.log2(guide_anchor_h))
        y2 = np.log2(anchor) + slope * (x2 - np.log2(guide_anchor_h))
        parts.append(
            f'<line x1="{sx(x1):.2f}" y1="{sy(y1):.2f}" x2="{sx(x2):.2f}" y2="{sy(y2):.2f}" '
            f'stroke="#888888" stroke-width="1" stroke-dasharray="{dash}"/>'
        )
    # Data series.
    for label in VARIANT_LABELS:
        color = _SERIES_COLORS[label]
        pts = " ".join(
            f"{sx(np.log2(h)):.2f},{sy(np.log2(e)):.2f}"
            for h, e in zip(hs, series[label])
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        for h, e in zip(hs, series[label]):
            parts.append(
                f'<circle cx="{sx(np.log2(h)):.2f}" cy="{sy(np.log2(e)):.2f}" r="2.5" '
                f'fill="{color}"/>'
            )
    # Legend.
    legend_x = _ML + plot_w + 14
    entries = [(label, _SERIES_COLORS[label], None) for label in VARIANT_LABELS]
    entries += [(name, "#888888", dash) for name, _, _, dash in guides]
    for i, (label, color, dash) in enumerate(entries):
        y = _MT + 16 + 20 * i
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        parts.append(
            f'<line x1="{legend_x:.2f}" y1="{y:.2f}" x2="{legend_x + 24:.2f}" y2="{y:.2f}" '
            f'stroke="{color}" stroke-width="2"{dash_attr}/>'
        )
        parts.append(
            f'<text x="{legend_x + 30:.2f}" y="{y + 4:.2f}" font-family="monospace" '
            f'font-size="12">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperspde",
        description="Strong temporal approximation of hyperbolic stochastic "
        "evolution equations by Euler- and Milstein-type schemes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_study = sub.add_parser("study", help="run a coupled convergence study")
    p_study.add_argument("--model", choices=MODEL_NAMES)
    p_study.add_argument("--scale", choices=("desk", "paper"))
    p_study.add_argument("--modes", type=int, help="Galerkin mode count K")
    p_study.add_argument("--samples", type=int)
    p_study.add_argument("--steps", help="comma list of step sizes, e.g. 2^-5,2^-6")
    p_study.add_argument("--href", help="reference step size, e.g. 2^-12")
    p_study.add_argument("--seed", type=int)
    p_study.add_argument("--out", help="output directory")
    p_study.add_argument("--plot", action="store_true", default=None)
    p_study.add_argument("--force", action="store_true", default=None)
    p_study.add_argument("--config", help="flat key = value configuration file")
    p_study.add_argument("--potential", help="coefficient file overriding the potential")
    p_study.add_argument("--kernel", help="coefficient file overriding the kernel")
    p_study.set_defaults(func=cmd_study)

    p_order = sub.add_parser("verify-order", help="deterministic scheme-order checks")
    p_order.add_argument("--scheme", choices=tuple(SCHEME_BY_NAME))
    p_order.add_argument("--beta", type=float)
    p_order.add_argument("--modes", type=int, default=ORDER_MODES)
    p_order.add_argument("--horizon", help="measurement horizon, e.g. 2^-6")
    p_order.add_argument("--steps", help="comma list of step sizes")
    p_order.set_defaults(func=cmd_verify_order)

    p_oracle = sub.add_parser("oracle", help="scalar strong-order oracle suite")
    p_oracle.add_argument("--a", default="1j", help="drift coefficient (complex)")
    p_oracle.add_argument("--b", default="-0.8j", help="noise coefficient (complex)")
    p_oracle.add_argument("--samples", type=int, default=1000)
    p_oracle.add_argument("--seed", type=int, default=7)
    p_oracle.set_defaults(func=cmd_oracle)

    p_plot = sub.add_parser("plot", help="render a study CSV as SVG")
    p_plot.add_argument("csv", help="path to the study CSV")
    p_plot.add_argument("--out", help="output SVG path (default: stdout)")
    p_plot.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
