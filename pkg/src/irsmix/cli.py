"""Batch command-line front door: config-driven runs that emit CSV tables,
mixture records, and a JSON manifest (config hash, seed, version) per run.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 validation failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .channel import (
    LinkGeometry,
    cascaded_gain,
    direct_gain,
    mixture_gain_normalized,
    product_pair,
)
from .errors import ConfigError, IrsmixError, NumericError
from .geometry import Mode, NetworkConfig
from .interference import (
    InterferenceContext,
    Population,
    interference_cdf,
    laplace_total,
)
from .metrics import SinrContext, network_metrics, spectral_efficiency
from .mixgamma import MixtureGamma, fit_fading, mmse_against
from .montecarlo import (
    estimate_channel_law,
    estimate_interference_laplace,
    estimate_metrics,
    simulate,
    write_samples_csv,
)
from .specfun import gauss_laguerre_rule

DEFAULT_CONFIG = {
    "lambda_b": 1e-5,
    "lambda_i": 1e-4,
    "lambda_u": 1e-3,
    "d1": 25.0,
    "d2": 50.0,
    "irs": {"n_elements": 500, "eps_ref": 1e-3},
    "fading": {
        "bu": {"family": "nakagami", "m": 2.0, "omega": 1.0},
        "bi": {"family": "nakagami", "m": 2.0, "omega": 1.0},
        "iu": {"family": "nakagami", "m": 2.0, "omega": 1.0},
    },
    "alpha": {"bu": 3.5, "bi": 3.5, "iu": 3.5},
    "noise_power": "-147 dBm",
    "tx_power": "1 W",
    "geometry": {"d_bu": None, "d_iu": None},
}


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_override(raw: dict, key: str, value: str) -> None:
    parts = key.split(".")
    node = raw
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override through non-mapping key {p!r}")
    node[parts[-1]] = _coerce(value)


def _load_config(args) -> tuple[dict, NetworkConfig]:
    raw = json.loads(json.dumps(DEFAULT_CONFIG))
    if args.config:
        try:
            user = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        def merge(dst, src):
            for k, v in src.items():
                if isinstance(v, dict) and isinstance(dst.get(k), dict):
                    merge(dst[k], v)
                else:
                    dst[k] = v
        merge(raw, user)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        _apply_override(raw, key, value)
    return raw, NetworkConfig.from_dict(raw)


def _default_geometry(raw: dict, cfg: NetworkConfig) -> LinkGeometry:
    geo = raw.get("geometry", {})
    d_bu = geo.get("d_bu") or 0.5 / math.sqrt(cfg.lambda_b)
    d_iu = geo.get("d_iu") or 0.5 * cfg.d1
    d_bi = geo.get("d_bi") or d_bu
    return LinkGeometry(d_bu, d_iu, d_bi, cfg.alpha["bu"], cfg.alpha["bi"], cfg.alpha["iu"])


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.12e}" if isinstance(v, float) else str(v) for v in row))
            fh.write("\n")


def _manifest(outdir: Path, command: str, raw: dict, args) -> None:
    canonical = json.dumps(raw, sort_keys=True).encode()
    manifest = {
        "command": command,
        "config_sha256": hashlib.sha256(canonical).hexdigest(),
        "seed": args.seed,
        "quad_order": args.quad_order,
        "mc_realizations": args.mc_realizations,
        "version": __version__,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _pdf_grid_rows(dist: MixtureGamma, label: str, n: int = 400):
    grid = dist.probe_grid(n)
    pdf = dist.pdf(grid)
    cdf = dist.cdf(grid)
    for x, p, c in zip(grid, pdf, cdf):
        yield (float(x), float(p), float(c), label)


def _cmd_fit(args, raw, cfg, outdir: Path) -> int:
    records = {}
    rows = []
    for link, spec in cfg.fading.items():
        dist = fit_fading(spec)
        records[link] = dist.to_record()
        grid = dist.probe_grid(1000)
        if spec.family in ("nakagami", "rayleigh"):
            rate = spec.m / spec.omega
            ref = np.exp(
                spec.m * np.log(rate) + (spec.m - 1) * np.log(grid) - rate * grid
                - math.lgamma(spec.m)
            )
        else:
            ref = spec.pdf(grid)
        rows.append((link, len(dist), float(mmse_against(dist, grid, ref))))
    (outdir / "mixtures.json").write_text(json.dumps(records, sort_keys=True, indent=2) + "\n")
    _write_csv(outdir / "fit_report.csv", ["link", "terms", "mmse_vs_analytic_pdf"], rows)
    return 0


def _cmd_cascade(args, raw, cfg, outdir: Path) -> int:
    rule = gauss_laguerre_rule(args.quad_order)
    geom = _default_geometry(raw, cfg)
    dist = cascaded_gain(geom, cfg.fading["bi"].m, cfg.fading["iu"].m, cfg.irs, rule)
    (outdir / "cascade.json").write_text(json.dumps(dist.to_record(), sort_keys=True) + "\n")
    _write_csv(
        outdir / "cascade_pdf.csv",
        ["x_w", "pdf_per_w", "cdf", "label"],
        _pdf_grid_rows(dist, "cascaded"),
    )
    return 0


def _cmd_mixture(args, raw, cfg, outdir: Path) -> int:
    rule = gauss_laguerre_rule(args.quad_order)
    geom = _default_geometry(raw, cfg)
    direct = direct_gain(geom, cfg.fading["bu"].m, cfg.irs)
    casc = cascaded_gain(geom, cfg.fading["bi"].m, cfg.fading["iu"].m, cfg.irs, rule)
    mix, scale = mixture_gain_normalized(direct, casc)
    (outdir / "mixture.json").write_text(
        json.dumps({"scale_w": scale, "normalized": mix.to_record()}, sort_keys=True) + "\n"
    )
    rows = [(float(x * scale), float(p / scale), float(c), lab)
            for x, p, c, lab in _pdf_grid_rows(mix, "mixture")]
    _write_csv(outdir / "mixture_pdf.csv", ["x_w", "pdf_per_w", "cdf", "label"], rows)
    return 0


def _auto_s_grid(cfg: NetworkConfig, ctx: InterferenceContext, n: int = 24) -> np.ndarray:
    # scale s so the direct transform spans (0.05, 0.99)
    mean_i = 2 * math.pi * cfg.lambda_b * cfg.irs.eps_ref * (
        ctx.d_bu0 ** (2 - cfg.alpha["bu"]) / (cfg.alpha["bu"] - 2)
    )
    return np.logspace(math.log10(0.01 / mean_i), math.log10(50.0 / mean_i), n)


def _cmd_interference(args, raw, cfg, outdir: Path) -> int:
    geom = _default_geometry(raw, cfg)
    ctx = InterferenceContext(cfg, d_bu0=geom.d_bu, quad_order=args.quad_order)
    s = _auto_s_grid(cfg, ctx)
    l_dir = laplace_total(s, ctx, Population.DIRECT_ONLY)
    l_tot = laplace_total(s, ctx, Population.DIRECT_PLUS_CASCADED)
    _write_csv(
        outdir / "laplace.csv",
        ["s_per_w", "laplace_direct_only", "laplace_direct_plus_cascaded"],
        zip(s.tolist(), np.real(l_dir).tolist(), np.real(l_tot).tolist()),
    )
    mean_i = -float(np.gradient(np.log(np.real(l_tot)), s)[0])
    x = np.logspace(math.log10(mean_i * 1e-3), math.log10(mean_i * 50), 64)
    cdf = interference_cdf(x, ctx, Population.DIRECT_PLUS_CASCADED)
    _write_csv(outdir / "interference_cdf.csv", ["x_w", "cdf"], zip(x.tolist(), np.atleast_1d(cdf).tolist()))
    return 0


def _cmd_metrics(args, raw, cfg, outdir: Path) -> int:
    sweep = raw.get("sweep") or {}
    taus = np.asarray(sweep.get("taus", [0.01, 0.1, 1.0, 10.0]), dtype=float)
    param = sweep.get("parameter")
    values = sweep.get("values") or [None]
    rows = []
    header = ["sweep_value", "spectral_efficiency_nats", "sinr_moment_1"] + [
        f"outage_tau_{t:g}" for t in taus
    ]
    for value in values:
        cfg_v = cfg
        if param is not None:
            raw_v = json.loads(json.dumps(raw))
            _apply_override(raw_v, param, json.dumps(value))
            cfg_v = NetworkConfig.from_dict(raw_v)
        res = network_metrics(
            cfg_v, quad_order=args.quad_order, taus=taus, moments=(1.0,),
        )
        rows.append(
            (float(value) if value is not None else 0.0,
             float(res["spectral_efficiency"]), float(res["sinr_moments"][1.0]),
             *[float(v) for v in res["outage"]])
        )
    _write_csv(outdir / "metrics.csv", header, rows)
    return 0


def _cmd_simulate(args, raw, cfg, outdir: Path) -> int:
    res = simulate(cfg, args.mc_realizations, args.seed)
    write_samples_csv(res, outdir / "samples.csv")
    se, se_err = res.spectral_efficiency()
    summary = {
        "realizations": res.realizations,
        "seed": res.seed,
        "spectral_efficiency_nats": se,
        "spectral_efficiency_stderr": se_err,
        "mode_fractions": res.mode_fractions(),
    }
    (outdir / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return 0


def _cmd_validate(args, raw, cfg, outdir: Path) -> int:
    """Analytic-vs-oracle battery at desk scale; exit 4 on any failure."""
    from scipy.special import kv
    from scipy.stats import kstest

    checks = []
    rule = gauss_laguerre_rule(args.quad_order)

    exp1 = MixtureGamma([1.0], [1.0], [1.0])
    prod = product_pair(exp1, exp1, rule)
    grid = np.logspace(-0.5, 0.8, 60)
    err = float(np.max(np.abs(prod.pdf(grid) - 2 * kv(0, 2 * np.sqrt(grid)))))
    checks.append(("product_pdf_vs_bessel_bulk", err, 5e-3, err <= 5e-3))

    mom_err = max(
        abs(prod.moment(l) - exp1.moment(l) ** 2) / exp1.moment(l) ** 2 for l in (1, 2, 3)
    )
    checks.append(("product_moment_factorization", mom_err, 1e-4, mom_err <= 1e-4))

    geom = LinkGeometry(1.0, 1.0, 1.0, 3.0, 3.0, 3.0)
    from .channel import IrsSpec as _IrsSpec

    irs = _IrsSpec(16, 1.0)
    direct = direct_gain(geom, 2.0, irs)
    casc = cascaded_gain(geom, 2.0, 2.0, irs, rule)
    mix, scale = mixture_gain_normalized(direct, casc)
    expected = direct.moment(1) + casc.moment(1) + 2 * direct.moment(0.5) * casc.moment(0.5)
    rel = abs(mix.moment(1) * scale - expected) / expected
    checks.append(("mixture_first_moment_identity", rel, 1e-3, rel <= 1e-3))

    law = estimate_channel_law("direct", geom, irs, m_bu=2.0, n_samples=200_000, seed=args.seed)
    ks = float(kstest(law["samples"], lambda v: np.clip(direct.cdf(v), 0, 1)).statistic)
    checks.append(("direct_law_ks_vs_mc", ks, 5e-3, ks <= 5e-3))

    ctx = InterferenceContext(cfg, d_bu0=0.5 / math.sqrt(cfg.lambda_b), quad_order=args.quad_order)
    s = _auto_s_grid(cfg, ctx, n=6)
    mc = estimate_interference_laplace(
        cfg, ctx.d_bu0, s, realizations=max(args.mc_realizations // 5, 500),
        seed=args.seed, population=Population.DIRECT_ONLY,
    )
    analytic = np.real(laplace_total(s, ctx, Population.DIRECT_ONLY))
    lap_err = float(np.max(np.abs(analytic - mc["laplace"])))
    checks.append(("laplace_direct_vs_mc", lap_err, 0.03, lap_err <= 0.03))

    rows = [(name, val, tol, "PASS" if ok else "FAIL") for name, val, tol, ok in checks]
    _write_csv(outdir / "validation.csv", ["check", "value", "tolerance", "status"], rows)
    for name, val, tol, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {val:.3e} (tol {tol:g})")
    return 0 if all(ok for *_, ok in checks) else 4


_COMMANDS = {
    "fit": _cmd_fit,
    "cascade": _cmd_cascade,
    "mixture": _cmd_mixture,
    "interference": _cmd_interference,
    "metrics": _cmd_metrics,
    "simulate": _cmd_simulate,
    "validate": _cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="irsmix",
        description="Mixture-Gamma channel modeling and system analysis for IRS-assisted downlinks",
    )
    ap.add_argument("command", choices=sorted(_COMMANDS), help="what to run")
    ap.add_argument("--config", help="JSON config file (defaults merged underneath)")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--seed", type=int, default=0, help="RNG seed for stochastic commands")
    ap.add_argument("--set", action="append", metavar="KEY=VALUE",
                    help="override a config key (dotted path), repeatable")
    ap.add_argument("--quad-order", type=int, default=20, help="Gauss-Laguerre order")
    ap.add_argument("--mc-realizations", type=int, default=2000,
                    help="Monte-Carlo realization count")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        raw, cfg = _load_config(args)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        status = _COMMANDS[args.command](args, raw, cfg, outdir)
        _manifest(outdir, args.command, raw, args)
        return status
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure in {args.command}: {exc}", file=sys.stderr)
        return 3
    except IrsmixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
