"""Command-line front end: config parsing, run orchestration, snapshots,
and CSV emission.

Subcommands: flow, reduced, counterexample, soliton, verify, poincare.
Exit codes: 0 clean, 1 config error, 2 degeneracy event, 3 blowup,
4 verification / convergence failure.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import struct
import sys
from pathlib import Path

import numpy as np

from . import calculus, diagnostics, flows, forms, reduced, scenarios, soliton
from .diagnostics import CSV_COLUMNS
from .errors import (DegenerateForm, FormatError, HodgeFlowError, NoConvergence,
                     NumericalBlowup)
from .flows import FlowState
from .forms import TwoForm
from .grid import PeriodicGrid, ScalarField

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DEGENERACY = 2
EXIT_BLOWUP = 3
EXIT_VERIFY = 4

SNAPSHOT_MAGIC = b"NHF1"


class ConfigError(HodgeFlowError):
    pass


# ---------------------------------------------------------------------------
# configuration

_SCHEMA = {
    "grid": {"dims", "lengths"},
    "flow": {"scheme", "t_end", "sample_every", "snapshot_every", "safety",
             "u_floor", "fixed_dt"},
    "scenario": {"kind", "eps", "band", "seed", "amplitude", "n1d", "a0",
                 "ny", "t_end"},
    "diagnostics": {"q1_weight", "monitor_a", "monitor_b"},
    "output": {"dir"},
    "reduced": {"model", "dims", "amplitude", "t_end", "sample_every",
                "safety", "u_floor", "fixed_dt"},
    "soliton": {"dims", "v1", "v2", "tol", "max_iter", "safety",
                "manufactured"},
}


class RunConfig:
    """Validated flat key/value configuration (unknown keys are rejected)."""

    def __init__(self, parser: configparser.ConfigParser):
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key in parser[section]:
                if key not in _SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
        self._parser = parser

    @classmethod
    def load(cls, path: str, overrides=()) -> "RunConfig":
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path!r}")
        for item in overrides:
            key, _, value = item.partition("=")
            if not _ or "." not in key:
                raise ConfigError(f"override must look like section.key=value: {item!r}")
            section, _, name = key.partition(".")
            if not parser.has_section(section):
                parser.add_section(section)
            parser[section][name] = value
        return cls(parser)

    def get(self, section, key, default=None, cast=str):
        if not self._parser.has_option(section, key):
            if default is None:
                raise ConfigError(f"missing required key {section}.{key}")
            return default
        raw = self._parser.get(section, key)
        try:
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc

    def ints(self, section, key, default=None):
        if default is not None and not self._parser.has_option(section, key):
            return default
        return tuple(int(tok) for tok in self.get(section, key).split())

    def floats(self, section, key, default=None):
        if default is not None and not self._parser.has_option(section, key):
            return default
        return tuple(float(tok) for tok in self.get(section, key).split())

    def digest(self) -> str:
        blob = "\n".join(f"{s}.{k}={self._parser[s][k]}"
                         for s in sorted(self._parser.sections())
                         for k in sorted(self._parser[s]))
        return hashlib.sha256(blob.encode()).hexdigest()


def _grid_from_config(cfg: RunConfig) -> PeriodicGrid:
    dims = cfg.ints("grid", "dims")
    lengths = cfg.floats("grid", "lengths", default=())
    return PeriodicGrid(dims, lengths)


def _scenario_from_config(cfg: RunConfig, grid: PeriodicGrid) -> TwoForm:
    kind = cfg.get("scenario", "kind", default="omega")
    if kind == "omega":
        return scenarios.make_omega(grid)
    if kind == "random_near_omega":
        return scenarios.make_random_near_omega(
            grid, eps=cfg.get("scenario", "eps", 0.05, float),
            band=cfg.get("scenario", "band", 4, int),
            seed=cfg.get("scenario", "seed", 0, int))
    if kind == "product_u":
        amp = cfg.get("scenario", "amplitude", 0.3, float)
        g2 = PeriodicGrid(grid.dims[:2], grid.lengths[:2])
        u2 = ScalarField.from_function(g2, lambda x1, x2: 1.0 + amp * np.sin(x1))
        return reduced.embed_product(u2, dims34=grid.dims[2:])
    if kind == "ab":
        amp = cfg.get("scenario", "amplitude", 0.1, float)
        g2 = PeriodicGrid(grid.dims[:2], grid.lengths[:2])
        a = ScalarField.from_function(g2, lambda x1, x2: amp * np.sin(x1))
        b = ScalarField.from_function(g2, lambda x1, x2: amp * np.sin(x2))
        return reduced.embed_ab(a, b, dims34=grid.dims[2:])
    if kind == "counterexample":
        n1d = cfg.get("scenario", "n1d", 512, int)
        a0 = cfg.get("scenario", "a0", "auto")
        scen = scenarios.make_example_counterexample(
            PeriodicGrid((n1d,)), "auto" if a0 == "auto" else float(a0))
        return scen.two_form(t=0.0, nx=grid.dims[0], ny=grid.dims[1],
                             dims34=grid.dims[2:])
    raise ConfigError(f"unknown scenario kind {kind!r}")


# ---------------------------------------------------------------------------
# persistence

def snapshot_write(state: FlowState, path, scheme_name: str = "",
                   config_digest: str = "") -> None:
    rho = state.rho
    grid = rho.grid
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<I", grid.rank))
        fh.write(struct.pack(f"<{grid.rank}I", *grid.dims))
        fh.write(struct.pack(f"<{grid.rank}d", *grid.lengths))
        fh.write(struct.pack("<I", rho.comps.shape[0]))
        fh.write(np.ascontiguousarray(rho.comps, dtype="<f8").tobytes())
    sidecar = {"scheme": scheme_name, "t": state.t, "step": state.step,
               "dt": state.dt, "config_digest": config_digest}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=1))


def snapshot_read(path) -> FlowState:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read snapshot {path!r}: {exc}") from exc
    if raw[:4] != SNAPSHOT_MAGIC:
        raise FormatError("bad snapshot magic")
    off = 4
    try:
        (rank,) = struct.unpack_from("<I", raw, off)
        off += 4
        if rank not in (1, 2, 4):
            raise FormatError(f"bad snapshot rank {rank}")
        dims = struct.unpack_from(f"<{rank}I", raw, off)
        off += 4 * rank
        lengths = struct.unpack_from(f"<{rank}d", raw, off)
        off += 8 * rank
        (ncomp,) = struct.unpack_from("<I", raw, off)
        off += 4
    except struct.error as exc:
        raise FormatError("truncated snapshot header") from exc
    count = ncomp * int(np.prod(dims))
    payload = raw[off:]
    if len(payload) != 8 * count:
        raise FormatError(f"snapshot payload has {len(payload)} bytes, "
                          f"expected {8 * count}")
    grid = PeriodicGrid(dims, lengths)
    comps = np.frombuffer(payload, dtype="<f8").reshape((ncomp,) + grid.dims).copy()
    if ncomp != 6:
        raise FormatError(f"expected 6 components, snapshot has {ncomp}")
    meta_path = Path(str(path) + ".json")
    t = step = dt = 0
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        t, step, dt = meta.get("t", 0.0), meta.get("step", 0), meta.get("dt", 0.0)
    return FlowState(rho=TwoForm(grid, comps), t=float(t), step=int(step),
                     dt=float(dt))


def write_series(trajectory, path) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for rec in trajectory:
        lines.append(",".join(format(getattr(rec, col), ".17e")
                              for col in CSV_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")


def _write_summary(out_dir: Path, trajectory, event, extra=None) -> None:
    summary = {"samples": len(trajectory),
               "final_t": trajectory[-1].t if trajectory else None,
               "event": None}
    if event is not None:
        summary["event"] = {"t": event.t, "cause": event.cause,
                            "min_u": event.min_u,
                            "location": list(event.location)}
    e0 = [(r.t, r.E0) for r in trajectory
          if np.isfinite(r.E0) and r.E0 > 0]
    if len(e0) >= 10:
        rate, r2 = diagnostics.decay_rate_fit(e0[len(e0) // 2:])
        summary["decay_rate"] = rate
        summary["decay_r_squared"] = r2
    if extra:
        summary.update(extra)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=1))


# ---------------------------------------------------------------------------
# subcommands

def _event_exit(event) -> int:
    if event is None:
        return EXIT_OK
    return EXIT_DEGENERACY if event.cause == "u_floor" else EXIT_BLOWUP


def cmd_flow(cfg: RunConfig) -> int:
    grid = _grid_from_config(cfg)
    initial = _scenario_from_config(cfg, grid)
    scheme = forms.scheme_from_name(cfg.get("flow", "scheme", "conformal"))
    t_end = cfg.get("flow", "t_end", cast=float)
    sample_every = cfg.get("flow", "sample_every", t_end / 50.0, float)
    snapshot_every = cfg.get("flow", "snapshot_every", 0.0, float)
    out_dir = Path(cfg.get("output", "dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)

    fixed_dt = cfg.get("flow", "fixed_dt", 0.0, float) or None
    trajectory, final, event = flows.run_flow(
        initial, scheme, t_end, sample_every,
        safety=cfg.get("flow", "safety", 0.25, float),
        u_floor=cfg.get("flow", "u_floor", forms.DEFAULT_U_FLOOR, float),
        q1_weight=cfg.get("diagnostics", "q1_weight", 10.0, float),
        monitor_a=cfg.get("diagnostics", "monitor_a", 10.0, float),
        monitor_b=cfg.get("diagnostics", "monitor_b", 100.0, float),
        fixed_dt=fixed_dt)
    write_series(trajectory, out_dir / "series.csv")
    if snapshot_every > 0 or event is None:
        snapshot_write(final, out_dir / "final.nhf", scheme.kind, cfg.digest())
    _write_summary(out_dir, trajectory, event)
    return _event_exit(event)


def cmd_reduced(cfg: RunConfig) -> int:
    model = cfg.get("reduced", "model")
    dims = cfg.ints("reduced", "dims")
    grid = PeriodicGrid(dims)
    amp = cfg.get("reduced", "amplitude", 0.5, float)
    if model == "ab_system":
        a = ScalarField.from_function(grid, lambda x1, x2: amp * np.sin(x1))
        b = ScalarField.from_function(grid, lambda x1, x2: amp * np.sin(x2))
        state = reduced.ReducedState(model, (a, b))
    else:
        if grid.rank == 1:
            base = ScalarField.from_function(grid, lambda x: 1.0 + amp * np.sin(x))
        else:
            base = ScalarField.from_function(
                grid, lambda x1, x2: 1.0 + amp * np.sin(x1))
        state = reduced.ReducedState(model, (base,))
    t_end = cfg.get("reduced", "t_end", cast=float)
    try:
        # precondition: the initial data must already satisfy positivity
        reduced.reduced_cfl_dt(
            state, u_floor=cfg.get("reduced", "u_floor",
                                   forms.DEFAULT_U_FLOOR, float))
        trajectory, final, event = reduced.run_reduced(
            state, t_end,
            sample_every=cfg.get("reduced", "sample_every", t_end / 20.0, float),
            safety=cfg.get("reduced", "safety", 0.25, float),
            u_floor=cfg.get("reduced", "u_floor", forms.DEFAULT_U_FLOOR, float))
    except DegenerateForm as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(cfg.get("output", "dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["t,dt,mass,minU,maxU"]
    for rec in trajectory:
        lines.append(",".join(format(v, ".17e") for v in
                              (rec.t, rec.dt, rec.mass, rec.minU, rec.maxU)))
    (out_dir / "series.csv").write_text("\n".join(lines) + "\n")
    return _event_exit(event)


def cmd_counterexample(cfg: RunConfig) -> int:
    """Shear-data run under the unweighted scheme; expected to degenerate."""
    if not cfg._parser.has_section("scenario"):
        cfg._parser.add_section("scenario")
    cfg._parser["scenario"]["kind"] = "counterexample"
    if not cfg._parser.has_section("flow"):
        cfg._parser.add_section("flow")
    cfg._parser["flow"].setdefault("scheme", "linear")
    cfg._parser["flow"].setdefault("t_end", "1.0")
    return cmd_flow(cfg)


def cmd_soliton(cfg: RunConfig) -> int:
    dims = cfg.ints("soliton", "dims", default=(128, 128))
    grid = PeriodicGrid(dims)
    v = (cfg.get("soliton", "v1", 1.0, float), cfg.get("soliton", "v2", 0.5, float))
    manufactured = cfg.get("soliton", "manufactured", "yes") != "no"
    if manufactured:
        a_star = ScalarField.from_function(
            grid, lambda x, y: 2.0 + 0.5 * np.cos(x) * np.cos(y))
        forcing = soliton.manufactured_forcing(a_star, v)
        start = ScalarField.constant(grid, a_star.mean())
    else:
        forcing = None
        start = ScalarField.constant(grid, 1.0)
    problem = soliton.SolitonProblem(start, v, forcing)
    try:
        a, res_norm = soliton.solve_soliton(
            problem, tol=cfg.get("soliton", "tol", 1e-7, float),
            max_iter=cfg.get("soliton", "max_iter", 200000, int),
            safety=cfg.get("soliton", "safety", 0.5, float))
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    out_dir = Path(cfg.get("output", "dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    np.save(out_dir / "soliton_a.npy", a.values)
    report = {"residual_sup": res_norm, "mean": a.mean(), "v": list(v)}
    if manufactured:
        report["error_sup"] = float(np.abs(a.values - a_star.values).max())
    (out_dir / "soliton.json").write_text(json.dumps(report, indent=1))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verification suites

def _suite_algebra(n: int):
    grid = PeriodicGrid((n,) * 4)
    rng = np.random.default_rng(7)
    worst = {"star": 0.0, "2u": 0.0, "eig": 0.0, "ab": 0.0}
    for _ in range(5):
        rho = scenarios.make_random_near_omega(grid, 0.3, band=3,
                                               seed=int(rng.integers(1 << 30)))
        twice = forms.hodge_star(forms.hodge_star(rho))
        worst["star"] = max(worst["star"], float(np.abs(twice.comps - rho.comps).max()))
        u = forms.volume_potential_values(rho)
        pair = calculus.two_form_pointwise_inner(rho, forms.hodge_star(rho))
        worst["2u"] = max(worst["2u"], float(np.abs(2 * u - pair).max()))
        lam1, lam2 = forms.eigenvalue_values(rho)
        worst["eig"] = max(worst["eig"],
                           float(np.abs(lam1 * lam2 - u).max()),
                           float(np.abs(lam1 ** 2 + lam2 ** 2
                                        - forms.norm_sq_values(rho)).max()))
        a, b = forms.matrix_ab(rho)
        total = a.entries + b.entries
        eye = np.eye(4).reshape(4, 4, 1, 1, 1, 1)
        worst["ab"] = max(worst["ab"], float(
            np.abs(total - forms.norm_sq_values(rho) * eye).max()))
    return [("star involution", worst["star"], 1e-13),
            ("2u = <rho,*rho>", worst["2u"], 1e-12),
            ("eigenvalue identities", worst["eig"], 1e-11),
            ("a + b = |rho|^2 I", worst["ab"], 1e-12)]


def _suite_calculus(n: int):
    grid = PeriodicGrid((n,) * 4)
    rng = np.random.default_rng(11)
    checks = []
    zeta = calculus.OneForm(grid, np.stack(
        [scenarios._band_limited_field(rng, grid, 3) for _ in range(4)]))
    ddz = calculus.d_two(calculus.d_one(zeta))
    checks.append(("d o d = 0", calculus.max_abs_three(ddz), 1e-12))
    rho = scenarios.make_random_near_omega(grid, 0.3, band=3, seed=5)
    from .grid import integrate
    lhs = integrate(ScalarField(grid, calculus.two_form_pointwise_inner(
        calculus.d_one(zeta), rho)))
    rhs = integrate(ScalarField(grid, calculus.one_form_pointwise_inner(
        zeta, calculus.codiff_two(rho))))
    scale = max(abs(lhs), abs(rhs), 1e-30)
    checks.append(("adjointness", abs(lhs - rhs) / scale, 1e-11))
    drift = calculus.periods(rho) - calculus.periods(forms.omega(grid))
    checks.append(("period invariance", float(np.abs(drift).max()), 1e-11))
    return checks


def _suite_identities(n: int):
    grid = PeriodicGrid((n,) * 4)
    rho = _identity_probe(grid)
    checks = []
    for scheme in forms.ALL_SCHEMES:
        for quantity in ("rho_sq", "u"):
            res = diagnostics.evolution_residual(rho, scheme, quantity)
            checks.append((f"{scheme.kind}/{quantity}", res, 1e-7))
    for kind in diagnostics._LAMBDA_SCHEMES:
        for quantity in ("lambda1", "lambda2"):
            res = diagnostics.evolution_residual(rho, forms.FlowScheme(kind),
                                                 quantity)
            checks.append((f"{kind}/{quantity}", res, 1e-7))
    return checks


def _identity_probe(grid: PeriodicGrid, eps: float = 0.003,
                    asd: float = 0.35) -> TwoForm:
    """Band-limited probe with both eigenvalues bounded away from each other."""
    base = forms.omega(grid)
    base.comps[0] += asd
    base.comps[5] -= asd
    pert = scenarios.make_random_near_omega(grid, eps, band=3, seed=23)
    return TwoForm(grid, base.comps + (pert.comps - forms.omega(grid).comps))


def _suite_reductions(n: int):
    g2 = PeriodicGrid((max(n, 16),) * 2)
    u2 = ScalarField.from_function(g2, lambda x1, x2: 1.0 + 0.3 * np.sin(x1))
    rho = reduced.embed_product(u2)
    full = flows.flow_rhs(rho, forms.CONFORMAL)
    fast = reduced.fast_diffusion_rhs(u2)
    diff = float(np.abs(full.comps[0][:, :, 0, 0] - fast.values).max())
    checks = [("product embedding rhs", diff
               / max(float(np.abs(fast.values).max()), 1e-30), 1e-5)]
    others = float(np.abs(full.comps[1:]).max())
    checks.append(("off-product components", others, 1e-9))
    return checks


def _suite_inequalities(n: int):
    grid = PeriodicGrid((n,) * 4)
    checks = []
    worst = 0.0
    for seed in range(10):
        rho = scenarios.make_random_near_omega(grid, 0.05, band=3, seed=seed)
        worst = max(worst, diagnostics.poincare_ratio(rho))
    checks.append(("poincare ratio <= 1", worst, 1.0 + 1e-8))
    mode = forms.omega(grid)
    x1 = grid.coordinates()[0]
    zeta = calculus.OneForm.zero(grid)
    zeta.comps[2] = 0.05 * np.sin(x1) * np.ones(grid.dims)
    lowest = TwoForm(grid, mode.comps + calculus.d_one(zeta).comps)
    ratio = diagnostics.poincare_ratio(lowest)
    checks.append(("lowest mode attains 1", abs(ratio - 1.0), 1e-8))
    return checks


_SUITES = {"algebra": _suite_algebra, "calculus": _suite_calculus,
           "identities": _suite_identities, "reductions": _suite_reductions,
           "inequalities": _suite_inequalities}


def cmd_verify(suite: str, resolution: int) -> int:
    if suite not in _SUITES:
        print(f"error: unknown suite {suite!r}; choose from {sorted(_SUITES)}",
              file=sys.stderr)
        return EXIT_CONFIG
    checks = _SUITES[suite](resolution)
    failed = 0
    for name, measured, bound in checks:
        ok = measured <= bound
        failed += not ok
        print(f"[{'pass' if ok else 'FAIL'}] {suite}/{name}: "
              f"{measured:.3e} (bound {bound:.3e})")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


def cmd_poincare(resolution: int, probes: int = 50) -> int:
    grid = PeriodicGrid((resolution,) * 4)
    worst = 0.0
    for seed in range(probes):
        rho = scenarios.make_random_near_omega(grid, 0.05, band=3, seed=seed)
        worst = max(worst, diagnostics.poincare_ratio(rho))
    print(f"max ratio over {probes} random probes: {worst:.12f}")
    return EXIT_OK if worst <= 1.0 + 1e-8 else EXIT_VERIFY


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hodgeflow")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("flow", "reduced", "counterexample", "soliton"):
        p = sub.add_parser(name)
        p.add_argument("config")
        p.add_argument("--override", action="append", default=[])
    p = sub.add_parser("verify")
    p.add_argument("suite")
    p.add_argument("--resolution", type=int, default=16)
    p = sub.add_parser("poincare")
    p.add_argument("--resolution", type=int, default=16)
    p.add_argument("--probes", type=int, default=50)
    args = parser.parse_args(argv)

    try:
        if args.command == "verify":
            return cmd_verify(args.suite, args.resolution)
        if args.command == "poincare":
            return cmd_poincare(args.resolution, args.probes)
        cfg = RunConfig.load(args.config, args.override)
        handler = {"flow": cmd_flow, "reduced": cmd_reduced,
                   "counterexample": cmd_counterexample,
                   "soliton": cmd_soliton}[args.command]
        return handler(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalBlowup as exc:
        print(f"blowup: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except HodgeFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
