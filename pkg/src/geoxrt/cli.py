"""``geoxrt`` command line: trace, sinogram and probe subcommands.

Exit codes: 0 success, 2 configuration error, 3 geometry / trapping /
hypothesis failure, 4 numerical failure.  Probe outcomes (pass, fail,
non-identifiable) are data, so they exit 0.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .discrete import NumericalError, assemble
from .expressions import ExpressionError
from .geometry import (DomainError, InfluxPoint, TrappingError, geodesic_trace, influx_fan,
                       metric_from_config)
from .lab import (DivergenceError, HypothesisError, ProbeReport, _jsonable, check_hypotheses, global_probe,
                  higgs_recover, layer_stripping, lens_phantom, local_probe, oversampled_fan)
from .microlocal import GeometryMismatch, radon_wf_consistency
from .pixels import PixelBasis
from .transforms import (BumpAttenuation, PixelAttenuation, WeightSingularError,
                         scattering_sinogram, sinogram, source_from_config, weight_from_config)

log = logging.getLogger("geoxrt")

EXIT_OK, EXIT_CONFIG, EXIT_GEOMETRY, EXIT_NUMERICAL = 0, 2, 3, 4
PROBES = ("global", "local", "strip", "higgs", "wf")


class ConfigError(ValueError):
    pass


_TOP = {"metric", "fan", "weight", "phantom", "grid", "probe", "trace", "step", "tau_max",
        "higgs", "seed"}
_PROBE = {"rel_error", "sigma_min_rel", "beta0", "depth", "halfwidth", "n_rings", "noise",
          "max_iters", "tol", "radius", "zeta_scale", "eps_threshold", "max_iterations"}
_FAN = {"n_beta", "n_alpha", "alpha_margin"}
_GRID = {"m", "delta_support"}
_TRACE = {"beta", "alpha"}
_HIGGS = {"n", "amplitude", "iterations"}


@dataclass
class RunConfig:
    metric: dict = field(default_factory=lambda: {"kind": "euclidean"})
    fan: dict | None = None
    weight: dict = field(default_factory=lambda: {"kind": "identity", "n": 1})
    phantom: dict = field(default_factory=lambda: {"kind": "gaussian", "center": [0.1, -0.2],
                                                   "width": 0.3})
    grid: dict = field(default_factory=dict)
    probe: dict = field(default_factory=dict)
    trace: dict = field(default_factory=dict)
    higgs: dict = field(default_factory=dict)
    step: float = 1e-2
    tau_max: float = 100.0
    seed: int | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, cfg):
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        _keys(cfg, _TOP, "config")
        for name, allowed in (("fan", _FAN), ("grid", _GRID), ("probe", _PROBE), ("trace", _TRACE),
                              ("higgs", _HIGGS)):
            if name in cfg:
                if not isinstance(cfg[name], dict):
                    raise ConfigError(f"'{name}' must be an object")
                _keys(cfg[name], allowed, name)
        out = cls(**{k: v for k, v in cfg.items()}, raw=cfg)
        try:
            out.step = float(out.step)
            out.tau_max = float(out.tau_max)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"step/tau_max must be numbers: {exc}") from exc
        if not out.step > 0 or not out.tau_max > 0:
            raise ConfigError("step and tau_max must be positive")
        # build every declared object now so errors surface before any computation
        out.build_metric()
        out.build_weight()
        out.build_phantom()
        return out

    def build_metric(self):
        return _wrap(metric_from_config, self.metric, "metric")

    def build_weight(self):
        return _wrap(weight_from_config, self.weight, "weight")

    def build_phantom(self):
        return _wrap(source_from_config, self.phantom, "phantom")

    def build_fan(self, metric, default=None):
        if self.fan is None:
            if default is None:
                raise ConfigError("'fan' is required for this command")
            return default
        try:
            return influx_fan(metric, int(self.fan["n_beta"]), int(self.fan["n_alpha"]),
                              float(self.fan.get("alpha_margin", 0.05)))
        except KeyError as exc:
            raise ConfigError(f"fan is missing {exc}") from exc

    def build_grid(self, m_default=32, delta_default=None):
        return PixelBasis(int(self.grid.get("m", m_default)), self.grid.get("delta_support", delta_default))


def _keys(cfg, allowed, where):
    extra = sorted(set(cfg) - set(allowed))
    if extra:
        raise ConfigError(f"unknown keys in {where}: {extra}")


def _wrap(fn, cfg, where):
    if not isinstance(cfg, dict):
        raise ConfigError(f"'{where}' must be an object")
    try:
        return fn(cfg)
    except (ValueError, KeyError, TypeError, ExpressionError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return RunConfig.from_dict(cfg)


def _threads(arg):
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("GEOXRT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"GEOXRT_THREADS must be an integer, got {env!r}") from exc
    return 1


def _seed(args, cfg):
    if args.seed is not None:
        return args.seed
    return int(cfg.seed) if cfg.seed is not None else 0


# ---------------------------------------------------------------------------
# commands


def cmd_trace(cfg: RunConfig, beta, alpha, out: Path):
    metric = cfg.build_metric()
    beta = cfg.trace.get("beta", 0.0) if beta is None else beta
    alpha = cfg.trace.get("alpha", 0.0) if alpha is None else alpha
    path = geodesic_trace(metric, InfluxPoint(float(beta), float(alpha)), cfg.step, cfg.tau_max)
    io.atomic_write(out / "trace.csv", io.trace_csv(path))
    return {"tau_plus": path.tau_plus, "file": "trace.csv"}


def cmd_sinogram(cfg: RunConfig, out: Path, seed):
    metric = cfg.build_metric()
    weight = cfg.build_weight()
    phantom = cfg.build_phantom()
    if phantom.n != weight.n:
        raise ConfigError(f"phantom has {phantom.n} components, weight is {weight.n}x{weight.n}")
    fan = cfg.build_fan(metric)
    sino = sinogram(weight, phantom, fan, metric, cfg.step, cfg.tau_max,
                    metadata={"phantom": io.content_hash(cfg.phantom)[:16]})
    io.write_sinogram(sino, out, cfg.raw, seed)
    return {"rays": len(fan), "file": "sinogram.csv"}


def _thresholds(cfg, keys):
    return {k: cfg.probe[k] for k in keys if k in cfg.probe}


def cmd_probe(cfg: RunConfig, which, out: Path, seed, threads=1):
    metric = cfg.build_metric()
    p = cfg.probe
    if which == "global":
        weight, phantom = cfg.build_weight(), cfg.build_phantom()
        basis = cfg.build_grid()
        fan = cfg.build_fan(metric, oversampled_fan(metric, basis.n_pixels))
        rep = global_probe(metric, weight, phantom, basis, fan, _thresholds(cfg, ("rel_error", "sigma_min_rel")),
                           cfg.step, p.get("max_iters", 5000), p.get("tol", 1e-10), p.get("noise", 0.0),
                           seed, threads=threads)
        rep.notes.pop("solution", None)
    elif which == "local":
        weight = cfg.build_weight()
        basis = cfg.build_grid(96, 0.0)
        beta0, depth = float(p.get("beta0", 0.0)), float(p.get("depth", 0.15))
        half = float(p.get("halfwidth", 0.3))
        if "phantom" in cfg.raw:
            phantom = cfg.build_phantom()
        else:
            phantom = lens_phantom(basis, beta0, depth, weight.n, half)
        rep = local_probe(metric, weight, beta0, phantom, basis, None, depth, half,
                          _thresholds(cfg, ("rel_error", "sigma_min_rel")), min(cfg.step, 5e-3),
                          threads=threads)
    elif which == "strip":
        weight, phantom = cfg.build_weight(), cfg.build_phantom()
        basis = cfg.build_grid()
        fan = cfg.build_fan(metric, oversampled_fan(metric, basis.n_pixels))
        hyp = check_hypotheses(metric, fan, weight=weight, step=cfg.step)
        op = assemble(weight, basis, fan, metric, cfg.step, cfg.tau_max, threads=threads)
        truth = np.asarray(phantom(basis.centers), dtype=complex).reshape(-1)
        n_rings = int(p.get("n_rings", 4))
        res = layer_stripping(op, op.matrix @ truth, n_rings, metric, truth)
        limit = float(p.get("rel_error", 0.03))
        rep = ProbeReport("layer-stripping", bool(res.final_error <= limit),
                          {"final_error": res.final_error, "ring_errors": res.ring_errors,
                           "ring_rays": res.ring_rays, "ring_convexity": res.convexity},
                          {"rel_error": limit, "n_rings": n_rings}, hyp,
                          {"operator": op.config_hash})
    elif which == "higgs":
        h = cfg.higgs
        n = int(h.get("n", 2))
        basis = cfg.build_grid(16)
        rng = np.random.default_rng(seed)
        truth = PixelAttenuation(basis, BumpAttenuation.random(n, rng, float(h.get("amplitude", 0.3)))(basis.centers))
        fan = cfg.build_fan(metric, oversampled_fan(metric, basis.n_pixels))
        scatter = scattering_sinogram(truth, fan, metric, cfg.step, cfg.tau_max)
        res = higgs_recover(metric, scatter, basis, iters=int(h.get("iterations", 15)), truth=truth,
                            thresholds=_thresholds(cfg, ("rel_error", "max_iterations")), threads=threads)
        rep = res.report
    elif which == "wf":
        rep_d = radon_wf_consistency(float(p.get("radius", 0.5)), zeta_scale=float(p.get("zeta_scale", 0.2)),
                                     metric=metric, eps_threshold=float(p.get("eps_threshold", 1e-3)))
        io.write_json(out / "probe-wf.json", _jsonable(rep_d))
        return {"passed": rep_d["passed"], "file": "probe-wf.json"}
    else:
        raise ConfigError(f"unknown probe {which!r}")
    rep.config_hashes["config"] = io.content_hash(cfg.raw)[:16]
    rep.config_hashes["seed"] = seed
    io.write_json(out / f"probe-{which}.json", rep.to_dict())
    return {"passed": rep.passed, "file": f"probe-{which}.json"}


# ---------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="geoxrt", description="Geodesic X-ray transform toolkit.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="u64 seed")
        p.add_argument("--threads", type=int, default=None, help="worker threads (or GEOXRT_THREADS)")

    p = sub.add_parser("trace", help="trace one geodesic to trace.csv")
    common(p)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p = sub.add_parser("sinogram", help="weighted transform over a fan to sinogram.csv")
    common(p)
    p = sub.add_parser("probe", help="run an injectivity or wavefront probe")
    p.add_argument("which", choices=PROBES)
    common(p)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        threads = _threads(args.threads)
        seed = _seed(args, cfg)
        if seed < 0 or seed >= 2 ** 64:
            raise ConfigError("seed must be a u64")
        if args.command == "trace":
            res = cmd_trace(cfg, args.beta, args.alpha, out)
        elif args.command == "sinogram":
            res = cmd_sinogram(cfg, out, seed)
        else:
            res = cmd_probe(cfg, args.which, out, seed, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrappingError, DomainError, HypothesisError, GeometryMismatch) as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except ValueError as exc:  # invalid parameters caught by the library
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, WeightSingularError, DivergenceError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps({k: res[k] for k in sorted(res)}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
