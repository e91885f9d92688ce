"""Command-line surface: ground-state, evolve, analyze, verify.

Each invocation runs one mode from one config file (see ``config``).
Outputs land in the config's output_dir, overridable with the
DSBU_OUTPUT_DIR environment variable. Exit codes: 0 success, 1 domain
errors (including failed verify checks), 2 usage errors. Reruns of the
same config with the same build produce byte-identical CSV and snapshot
files; nothing is randomized.
"""

from __future__ import annotations

import os
import sys

import numpy as np

from .concentration import (
    LambdaSchedule,
    PARABOLIC_MINUS_EPS,
    disk_concentration_trace,
    square_concentration_trace,
)
from .config import RunConfig, config_summary, parse_config
from .errors import DomainError, DsbuError, UsageError
from .evolution import (
    ConservationRecord,
    EvolveConfig,
    SimulationState,
    estimate_t_star,
    run,
)
from .exact import eval_pc_blowup, eval_standing_wave, pde_residual
from .ground_state import GroundStateConfig, solve_ground_state
from .snapshot_io import SnapshotMeta, read_snapshot, write_snapshot
from .spectral import (
    PHYSICAL,
    Field,
    Grid2D,
    OperatorParams,
    apply_b,
    apply_l,
    gradient_norm_sq,
    mass,
)

USAGE = """usage: dsbu <command> [config]

commands:
  ground-state <config>   compute the standing-wave profile and c_opt
  evolve <config>         time-step an initial condition, emit records + snapshots
  analyze <config>        windowed-mass concentration trace over saved snapshots
  verify [config]         run the exact-solution oracle battery
"""

RECORD_COLUMNS = "t,mass,energy,grad_sq,second_moment,moment_valid,sup_abs,l4_accum,dt"
ANALYSIS_COLUMNS = "t,lambda,best_mass,yx,yy,rho,rescaled_energy,rescaled_quartic"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _output_dir(cfg: RunConfig) -> str:
    out = os.environ.get("DSBU_OUTPUT_DIR", cfg.output_dir)
    os.makedirs(out, exist_ok=True)
    # resolved-config record: one config fully determines a run
    _atomic_write_text(os.path.join(out, "run_config.txt"), config_summary(cfg) + "\n")
    return out


def _records_csv(records: list[ConservationRecord]) -> str:
    lines = [RECORD_COLUMNS]
    for r in records:
        lines.append(
            ",".join(
                [
                    _fmt(r.t),
                    _fmt(r.mass),
                    _fmt(r.energy),
                    _fmt(r.gradient_norm_sq),
                    _fmt(r.second_moment),
                    "1" if r.moment_valid else "0",
                    _fmt(r.sup_abs_u),
                    _fmt(r.l4_accum),
                    _fmt(r.dt_used),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _read_records_csv(path: str) -> list[ConservationRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().strip().splitlines()
    if not lines or lines[0] != RECORD_COLUMNS:
        raise DomainError(f"{path}: unrecognized records schema")
    records = []
    for line in lines[1:]:
        t, m, e, g, sm, valid, sup, l4, dt = line.split(",")
        records.append(
            ConservationRecord(
                t=float(t),
                mass=float(m),
                energy=float(e),
                gradient_norm_sq=float(g),
                second_moment=float(sm),
                moment_valid=valid == "1",
                sup_abs_u=float(sup),
                l4_accum=float(l4),
                dt_used=float(dt),
            )
        )
    return records


def _load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _initial_condition(cfg: RunConfig) -> tuple[Field, OperatorParams]:
    params = OperatorParams(cfg.nu, cfg.gamma)
    if cfg.ic == "snapshot":
        field, meta = read_snapshot(cfg.snapshot_path)
        return field, OperatorParams(meta.nu, meta.gamma)
    if cfg.ic in ("standing_wave", "pc_blowup"):
        profile, _meta = read_snapshot(cfg.profile_path)
        if cfg.ic == "standing_wave":
            return eval_standing_wave(profile, 0.0), params
        target = Grid2D(cfg.n, cfg.box_length)
        return eval_pc_blowup(profile, cfg.pc_start_time, target), params
    grid = Grid2D(cfg.n, cfg.box_length)
    x1, x2 = grid.coords()
    values = cfg.amplitude * np.exp(
        -(x1**2 + (cfg.aspect * x2) ** 2) / (2 * cfg.width**2)
    )
    return Field(grid, values, PHYSICAL), params


def _cmd_ground_state(cfg: RunConfig) -> int:
    out = _output_dir(cfg)
    grid = Grid2D(cfg.n, cfg.box_length)
    params = OperatorParams(cfg.nu, cfg.gamma)
    gs = solve_ground_state(
        grid,
        params,
        GroundStateConfig(tol=cfg.tol, max_iter=cfg.max_iter,
                          init_amplitude=cfg.init_amplitude),
    )
    snap_path = os.path.join(out, "ground_state.dsbu")
    write_snapshot(snap_path, gs.profile, SnapshotMeta(0.0, cfg.nu, cfg.gamma))
    report = "\n".join(
        [
            f"mass = {_fmt(mass(gs.profile))}",
            f"c_opt = {_fmt(gs.c_opt)}",
            f"residual = {_fmt(gs.residual)}",
            f"iterations = {gs.iterations}",
            f"sharpness_ratio = {_fmt(gs.sharpness_ratio)}",
            f"profile = {snap_path}",
        ]
    )
    _atomic_write_text(os.path.join(out, "ground_state_report.txt"), report + "\n")
    print(report)
    return 0


def _cmd_evolve(cfg: RunConfig) -> int:
    out = _output_dir(cfg)
    u0, params = _initial_condition(cfg)
    state = SimulationState.initial(u0, params)
    result = run(
        state,
        EvolveConfig(
            t_end=cfg.t_end,
            dt0=cfg.dt0,
            adaptive=cfg.adaptive,
            c_adapt=cfg.c_adapt,
            guard=cfg.guard,
            sample_interval=cfg.sample_interval,
            dealias=cfg.dealias,
            keep_snapshots=True,
        ),
    )
    _atomic_write_text(os.path.join(out, "records.csv"), _records_csv(result.records))
    for index, (t, field) in enumerate(result.snapshots):
        write_snapshot(
            os.path.join(out, f"snap_{index:06d}.dsbu"),
            field,
            SnapshotMeta(t, params.nu, params.gamma),
        )
    lines = [f"stop_reason = {result.stop_reason}",
             f"steps = {result.state.step_index}",
             f"t_final = {_fmt(result.state.t)}"]
    if result.blowup is not None:
        lines += [
            f"t_star_estimate = {_fmt(result.blowup.t_star_estimate)}",
            f"fit_window = {_fmt(result.blowup.fit_window[0])} .. {_fmt(result.blowup.fit_window[1])}",
            f"fit_residual = {_fmt(result.blowup.fit_residual)}",
            f"method = {result.blowup.method}",
        ]
        _atomic_write_text(os.path.join(out, "blowup.txt"), "\n".join(lines[3:]) + "\n")
    summary = "\n".join(lines)
    print(summary)
    return 0


def _cmd_analyze(cfg: RunConfig) -> int:
    out = _output_dir(cfg)
    names = sorted(
        f for f in os.listdir(cfg.snapshot_dir)
        if f.startswith("snap_") and f.endswith(".dsbu")
    )
    if not names:
        raise DomainError(f"no snap_*.dsbu files in {cfg.snapshot_dir}")
    snapshots: list[tuple[float, Field]] = []
    metas: list[SnapshotMeta] = []
    for name in names:
        field, meta = read_snapshot(os.path.join(cfg.snapshot_dir, name))
        snapshots.append((meta.t, field))
        metas.append(meta)
    if any((m.nu, m.gamma) != (metas[0].nu, metas[0].gamma) for m in metas):
        raise DomainError(f"{cfg.snapshot_dir}: snapshots carry mixed operator couplings")
    params = OperatorParams(metas[0].nu, metas[0].gamma)

    t_star = cfg.t_star
    if t_star is None:
        records_path = os.path.join(cfg.snapshot_dir, "records.csv")
        if not os.path.exists(records_path):
            raise DomainError(
                "analyze needs t_star in the config or records.csv next to the snapshots"
            )
        t_star = estimate_t_star(_read_records_csv(records_path)).t_star_estimate

    if cfg.trace == "disk":
        schedule = LambdaSchedule(PARABOLIC_MINUS_EPS, cfg.epsilon, t_star)
        records, summary = disk_concentration_trace(
            snapshots, schedule, cfg.c_opt, params
        )
        summary_lines = [
            "trace = disk",
            f"t_star = {_fmt(t_star)}",
            f"threshold_mass = {_fmt(summary.threshold_mass)}",
            f"terminal_min_mass = {_fmt(summary.terminal_min_mass)}",
            f"terminal_final_mass = {_fmt(summary.terminal_final_mass)}",
            f"min_ratio = {_fmt(summary.min_ratio)}",
            f"final_ratio = {_fmt(summary.final_ratio)}",
            f"lambda_grad_growing = {summary.lambda_grad_growing}",
            f"energy_trend_ok = {summary.energy_trend_ok}",
            f"terminal_quartic_dev = {_fmt(summary.terminal_quartic_dev)}",
            f"sensitivity = {summary.sensitivity}",
            f"skipped = {summary.skipped_times}",
        ]
    else:
        records, summary = square_concentration_trace(
            snapshots, cfg.c_side, t_star, eta=cfg.eta
        )
        summary_lines = [
            "trace = square",
            f"t_star = {_fmt(t_star)}",
            f"max_sqrt_mass = {_fmt(summary.max_sqrt_mass)}",
            f"terminal_min_sqrt_mass = {_fmt(summary.terminal_min_sqrt_mass)}",
            f"terminal_max_sqrt_mass = {_fmt(summary.terminal_max_sqrt_mass)}",
            f"eta = {_fmt(summary.eta)}",
            f"above_eta = {summary.above_eta}",
            f"skipped = {summary.skipped_times}",
        ]

    lines = [ANALYSIS_COLUMNS]
    for r in records:
        lines.append(
            ",".join(
                [
                    _fmt(r.t),
                    _fmt(r.window.size),
                    _fmt(r.best_mass),
                    _fmt(r.best_center[0]),
                    _fmt(r.best_center[1]),
                    _fmt(r.rho) if r.rho is not None else "nan",
                    _fmt(r.rescaled_energy) if r.rescaled_energy is not None else "nan",
                    _fmt(r.rescaled_quartic) if r.rescaled_quartic is not None else "nan",
                ]
            )
        )
    _atomic_write_text(os.path.join(out, "analysis.csv"), "\n".join(lines) + "\n")
    summary_text = "\n".join(summary_lines)
    _atomic_write_text(os.path.join(out, "analysis_summary.txt"), summary_text + "\n")
    print(summary_text)
    return 0


def _cmd_verify(cfg: RunConfig | None) -> int:
    n = cfg.n if cfg else 256
    box = cfg.box_length if cfg else 20.0
    gamma = cfg.gamma if cfg else 1.0
    grid = Grid2D(n, box)
    params = OperatorParams(1, gamma)
    checks: list[tuple[str, float, float]] = []  # (name, value, bound)

    x1, x2 = grid.coords()
    gauss = Field(grid, np.exp(-(x1**2 + x2**2) / 2), PHYSICAL)
    checks.append(("gaussian mass vs pi", abs(mass(gauss) - np.pi) / np.pi, 1e-10))

    a = 2 * np.pi * round(0.2 * box) / box
    cc = Field(grid, np.cos(a * x1) * np.cos(a * x2) + 0j, PHYSICAL)
    dev = np.max(np.abs(apply_b(cc).values - 0.5 * cc.values))
    checks.append(("B on cos*cos equals f/2", float(dev), 1e-12))

    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        f = Field(grid, rng.standard_normal((n, n)) + 0j, PHYSICAL)
        ratio = np.linalg.norm(apply_l(f, params).values) / np.linalg.norm(f.values)
        worst = max(worst, ratio / (1 + gamma))
    checks.append(("operator bound ||Lf|| <= (1+gamma)||f||", worst, 1.0 + 1e-12))

    gs = solve_ground_state(grid, params)
    checks.append(("ground-state residual", gs.residual, 1e-10))
    checks.append(
        ("sharpness ratio deviation", abs(gs.sharpness_ratio - gs.c_opt) / gs.c_opt, 1e-4)
    )

    h = 1e-4
    sw = [eval_standing_wave(gs.profile, 1.0 + k * h) for k in (-1, 0, 1)]
    checks.append(("standing-wave residual", pde_residual(sw[0], sw[1], sw[2], h, params), 1e-6))

    m_ref = mass(gs.profile)
    worst_dev = 0.0
    for t in (-1.0, -0.5, -0.25):
        target = Grid2D(n, box * abs(t))
        worst_dev = max(
            worst_dev, abs(mass(eval_pc_blowup(gs.profile, t, target)) - m_ref) / m_ref
        )
    checks.append(("pc-solution mass invariance", worst_dev, 1e-8))

    ts = -np.geomspace(0.05, 0.5, 8)
    grads = [
        gradient_norm_sq(eval_pc_blowup(gs.profile, float(t), Grid2D(n, box * abs(t))))
        for t in ts
    ]
    slope = float(np.polyfit(np.log(1.0 / np.abs(ts)), np.log(grads), 1)[0])
    checks.append(("pc gradient log-log slope vs 2", abs(slope - 2.0), 0.05))

    hh = 1e-5
    t0 = -0.5
    target = Grid2D(n, box * (abs(t0) - 2 * hh))
    slices = [eval_pc_blowup(gs.profile, t0 + k * hh, target) for k in (-1, 0, 1)]
    clean = pde_residual(slices[0], slices[1], slices[2], hh, params)
    checks.append(("pc-solution equation residual", clean, 5e-2))
    corrupted = Field(target, slices[1].values * 1.01, PHYSICAL)
    neg = pde_residual(slices[0], corrupted, slices[2], hh, params)
    checks.append(("corrupted-field residual exceeds 1e-2 (negative control)",
                   1e-2 / neg, 1.0))

    width = max(len(name) for name, _, _ in checks)
    all_ok = True
    for name, value, bound in checks:
        ok = value <= bound
        all_ok &= ok
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  value={value:.3e}  bound={bound:.3e}")
    return 0 if all_ok else 1


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(USAGE)
        return 0 if argv else 2
    command, *rest = argv
    try:
        if command == "verify":
            cfg = _load_config(rest[0]) if rest else None
            if cfg is not None and cfg.mode != "verify":
                raise UsageError(f"config mode is {cfg.mode!r}, expected 'verify'")
            return _cmd_verify(cfg)
        if command in ("ground-state", "evolve", "analyze"):
            if len(rest) != 1:
                raise UsageError(f"{command} takes exactly one config argument")
            cfg = _load_config(rest[0])
            expected = command
            if cfg.mode != expected:
                raise UsageError(f"config mode is {cfg.mode!r}, expected {expected!r}")
            if command == "ground-state":
                return _cmd_ground_state(cfg)
            if command == "evolve":
                return _cmd_evolve(cfg)
            return _cmd_analyze(cfg)
        print(USAGE, file=sys.stderr)
        print(f"error: unknown command {command!r}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DsbuError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
