"""Scenario orchestration: configuration in, CSV/JSON/SVG files out."""

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import (
    ObservableSeries,
    detect_critical_times,
    observable_series,
    phase_diagram,
    rate_function,
)
from .config import ConfigError, ExperimentConfig, parse_quantity
from .entanglement import concurrence, extract_phase_profile, nuclear_factor, tangle, PhaseProfile
from .hamiltonian import (
    CarbonSite,
    FieldQuenchBuilder,
    FieldSchedule,
    PairGeometry,
    QuenchSpec,
    build_full_hamiltonian,
    literature_dataset,
    make_chain_geometry,
)
from .io import Table, write_json, write_series_csv
from .metrology import fisher_information
from .propagation import (
    TimeGrid,
    apply_manifold_quench,
    dephasing_model,
    evolve_lindblad,
    evolve_static,
    evolve_timedep,
)
from .spin import SpinRegister, basis_state

TC1_HORIZON = 20e-6
TC1_STEP = 1e-9


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str
    wall_clock_s: float
    outputs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def config_hash(cfg: ExperimentConfig) -> str:
    canon = json.dumps(cfg.raw, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _us(xs):
    return [x * 1e6 for x in xs]


class _Context:
    """Per-run view of the configuration with units resolved."""

    def __init__(self, cfg: ExperimentConfig, run: Optional[dict]):
        self.cfg = cfg
        self.run = run
        self.label = run["label"] if run else None
        system = cfg.section("system", run)
        self.n = system.get("n_nuclei", 2)
        self.beta12 = cfg.quantity("system", "beta", run).value
        self.system = system
        self._tc1 = None

    def q(self, section, key, default=None):
        val = self.cfg.quantity(section, key, self.run)
        if val is None:
            return default
        return val.resolve(self.tc1 if val.in_tc1 else None)

    @property
    def register(self):
        return SpinRegister(self.n)

    @property
    def pairs(self):
        return make_chain_geometry(self.n, self.beta12) if self.n >= 2 else []

    @property
    def tc1(self) -> float:
        """First critical time of the constant-field quench at the reference field."""
        if self._tc1 is None:
            bz = self.cfg.quantity("fields", "bz", self.run).value
            bx = self.cfg.quantity("fields", "reference_bx", self.run).value
            reg = self.register
            b = FieldQuenchBuilder(self.pairs, FieldSchedule.constant(bx, bz), reg)
            grid = TimeGrid.span(TC1_HORIZON, TC1_STEP)
            traj = evolve_static(b(0.0), basis_state("↓" * self.n, reg), grid, reg)
            s = observable_series(traj)
            first = detect_critical_times(s.p_down, s.p_up, s.times).first
            if not math.isfinite(first):
                raise ConfigError(f"reference quench at Bx={bx} G, Bz={bz} G has no critical time; tc1 undefined")
            self._tc1 = first
        return self._tc1

    def schedule(self) -> FieldSchedule:
        f = self.cfg.section("fields", self.run)
        bz = self.q("fields", "bz", 0.0)
        kind = f.get("kind", "constant")
        if kind == "constant":
            return FieldSchedule.constant(self.q("fields", "bx", 0.0), bz)
        if kind == "oscillating":
            return FieldSchedule.oscillating(self.q("fields", "bx0", 0.0), self.q("fields", "amplitude", 0.0),
                                             self.q("fields", "period"), bz)
        return FieldSchedule.gaussian(self.q("fields", "amplitude", 0.0), self.q("fields", "center"),
                                      self.q("fields", "width"), bz)

    def grid(self) -> TimeGrid:
        return TimeGrid.span(self.q("grid", "t_end"), self.q("grid", "step"), self.q("grid", "dt"))

    def stem(self):
        return self.cfg.name if self.label is None else f"{self.cfg.name}_{self.label}"

    def echo(self) -> dict:
        out = {}
        for sec in ("system", "fields", "grid", "probe", "validation", "sweep", "observables"):
            body = self.cfg.section(sec, self.run)
            if body:
                out[sec] = body
        if any(self.cfg.quantity("fields", k, self.run) is not None and
               self.cfg.quantity("fields", k, self.run).in_tc1 for k in ("period", "center", "width")):
            out["tc1_us"] = self.tc1 * 1e6
        return out


def _coincidence(crit, step) -> Optional[float]:
    """Largest distance from a branch switch to the nearest magnetization zero."""
    if not crit.switch_times:
        return None
    if not crit.mz_zero_times:
        return math.inf
    z = np.asarray(crit.mz_zero_times)
    return float(max(np.min(np.abs(z - s)) for s in crit.switch_times))


class _Writer:
    def __init__(self, out_dir: Path, svg: bool):
        self.dir = out_dir
        self.svg = svg
        self.files = []

    def csv(self, series, stem):
        self.files.append(str(write_series_csv(series, self.dir / f"{stem}.csv").name))

    def figure(self, fn, *args, stem, **kw):
        if self.svg:
            self.files.append(str(fn(*args, self.dir / f"{stem}.svg", **kw).name))


def _series_summary(ctx, series: ObservableSeries, grid: TimeGrid) -> dict:
    crit = detect_critical_times(series.p_down, series.p_up, series.times, series.mz)
    gap = _coincidence(crit, grid.spacing)
    return {
        "critical_times_us": _us(crit.switch_times),
        "mz_zero_times_us": _us(crit.mz_zero_times),
        "first_switch_us": crit.first * 1e6 if crit.switch_times else None,
        "n_switches": len(crit.switch_times),
        "max_switch_to_mz_zero_us": None if gap is None else gap * 1e6,
        "switches_match_mz_zeros": None if gap is None else bool(gap <= grid.spacing * (1 + 1e-9)),
        "max_mz": float(np.max(series.mz)),
        "saturated_points": int(np.sum(series.saturated)),
        "skipped_brackets": len(crit.skipped_brackets),
    }, crit


def _run_field_quench(ctx: _Context, w: _Writer):
    reg, grid, sched = ctx.register, ctx.grid(), ctx.schedule()
    psi0 = basis_state(ctx.system.get("initial_state", "↓" * ctx.n), reg)
    builder = FieldQuenchBuilder(ctx.pairs, sched, reg)
    traj = evolve_static(builder(0.0), psi0, grid, reg) if sched.is_static else evolve_timedep(builder, psi0, grid, reg)
    series = observable_series(traj)
    summary, crit = _series_summary(ctx, series, grid)
    w.csv(series, ctx.stem())
    from .plotting import render_observables
    w.figure(render_observables, series, stem=ctx.stem(), critical_times=crit.switch_times, title=ctx.stem())
    return summary


def _run_central_quench(ctx: _Context, w: _Writer):
    reg, grid = ctx.register, ctx.grid()
    name = ctx.system.get("dataset")
    if not name:
        raise ConfigError("central-quench needs system.dataset")
    ds = literature_dataset(name)
    if len(ds) != ctx.n:
        raise ConfigError(f"dataset {name!r} has {len(ds)} sites but n_nuclei={ctx.n}")
    sched = ctx.schedule()
    if not sched.is_static:
        raise ConfigError("central-quench supports constant fields only")
    spec = QuenchSpec("central", initial_state_label="↓" * ctx.n, ms_target=ctx.system.get("ms", 1),
                      schedule=sched, pairs=tuple(ctx.pairs), sites=ds.sites)
    h, psi0 = apply_manifold_quench(basis_state(spec.initial_state_label, reg), spec, reg)
    series = observable_series(evolve_static(h, psi0, grid, reg))
    summary, crit = _series_summary(ctx, series, grid)
    summary["a_ani_kHz"] = [s.a_ani / (2e3 * math.pi) for s in ds.sites]
    summary["a_zz_kHz"] = [s.hyperfine_zz / (2e3 * math.pi) for s in ds.sites]
    w.csv(series, ctx.stem())
    from .plotting import render_observables
    w.figure(render_observables, series, stem=ctx.stem(), critical_times=crit.switch_times, title=ctx.stem())
    return summary


def _run_sweep(ctx: _Context, w: _Writer, threads):
    sw = ctx.cfg.section("sweep", ctx.run)

    def q(key, default):
        v = ctx.cfg.quantity("sweep", key, ctx.run) if key in sw else None
        return v.value if v is not None else default

    bx = np.linspace(q("bx_min", 0.0), q("bx_max", 300.0), sw.get("bx_points", 60))
    bz = np.linspace(q("bz_min", 0.0), q("bz_max", 100.0), sw.get("bz_points", 60))
    extra = [parse_quantity(v, "field", "sweep.bz_values").value for v in sw.get("bz_values", [])]
    bz = np.unique(np.concatenate([bz, extra])) if extra else bz
    diagram = phase_diagram(bx, bz, ctx.pairs, horizon=q("horizon", 20e-6), n_output=sw.get("n_output", 2000),
                            n_nuclei=ctx.n, workers=threads)
    w.csv(diagram, ctx.stem())
    from .plotting import render_phase_diagram
    w.figure(render_phase_diagram, diagram, stem=ctx.stem(), title=ctx.stem())
    no_dqpt = {f"{b:g} G": diagram.no_dqpt_fraction(int(np.argmin(np.abs(bz - b)))) for b in extra}
    zero_col = np.where(np.isclose(bx, 0.0))[0]
    negative = diagram.mean_mz[~diagram.dqpt_flag]
    return {
        "grid_shape": [len(bx), len(bz)],
        "dqpt_fraction": float(np.mean(diagram.dqpt_flag)),
        "no_dqpt_fraction_by_bz": no_dqpt,
        "bx0_never_dqpt": bool(not diagram.dqpt_flag[zero_col].any()) if zero_col.size else None,
        "no_dqpt_region_mean_mz_max": float(negative.max()) if negative.size else None,
    }


def _run_fisher(ctx: _Context, w: _Writer):
    probe = ctx.cfg.section("probe", ctx.run)
    reg, grid, sched = SpinRegister(2), ctx.grid(), ctx.schedule()
    psi0 = basis_state(probe.get("state", "↑↓"), reg)
    delta = ctx.q("probe", "delta_beta")
    fs = fisher_information(ctx.beta12, sched, psi0, grid, probe.get("measured_site", 1), delta)
    w.csv(fs, ctx.stem())
    from .plotting import render_fisher
    w.figure(render_fisher, fs, stem=ctx.stem(), title=ctx.stem())
    mask = grid.times >= 0.1e-6
    ratio = fs.relative_to_t2()[mask]
    return {
        "beta_kHz": ctx.beta12 / (2e3 * math.pi),
        "delta_beta_Hz": fs.delta_beta / (2 * math.pi),
        "fd_rel_change": fs.fd_rel_change,
        "max_rel_dev_from_t2": float(np.nanmax(np.abs(ratio - 1.0))) if ratio.size else None,
        "max_fi_over_t2": float(np.nanmax(ratio)) if ratio.size else None,
        "undefined_points": int(np.sum(np.isnan(fs.fi))),
    }


def _run_entanglement(ctx: _Context, w: _Writer):
    obs = ctx.cfg.section("observables", ctx.run)
    reg, grid, sched = ctx.register, ctx.grid(), ctx.schedule()
    psi0 = basis_state(ctx.system.get("initial_state", "↓" * ctx.n), reg)
    builder = FieldQuenchBuilder(ctx.pairs, sched, reg)
    traj = evolve_static(builder(0.0), psi0, grid, reg) if sched.is_static else evolve_timedep(builder, psi0, grid, reg)
    conc = tau = None
    if obs.get("concurrence", ctx.n == 2):
        if ctx.n != 2:
            raise ConfigError("concurrence output needs n_nuclei = 2")
        conc = np.array([concurrence(p) for p in traj.states])
    if obs.get("tangle", ctx.n == 3):
        if ctx.n != 3:
            raise ConfigError("tangle output needs n_nuclei = 3")
        tau = np.array([tangle(p).tau123 for p in traj.states])
    series = observable_series(traj, concurrence=conc, tangle=tau)
    summary, crit = _series_summary(ctx, series, grid)
    if conc is not None:
        k = int(np.argmax(conc))
        above = np.where(conc > 0.5)[0]
        summary.update({
            "concurrence_initial": float(conc[0]),
            "concurrence_max": float(conc[k]),
            "concurrence_max_time_us": float(grid.times[k] * 1e6),
            "concurrence_first_above_half_us": float(grid.times[above[0]] * 1e6) if above.size else None,
        })
        if obs.get("phase_profile"):
            prof = extract_phase_profile(nuclear_factor(traj.states[k], reg))
            summary["phase_profile_at_max"] = (
                {"r": prof.r, "phi1": prof.phi1, "phi2": prof.phi2, "phi3": prof.phi3,
                 "phi1_minus_phi3": prof.relative_13, "phi1_plus_phi3_minus_2phi2": prof.relative_entangling}
                if isinstance(prof, PhaseProfile) else {"mismatch": prof.reason, "magnitudes": list(prof.magnitudes)}
            )
    if tau is not None:
        summary.update({"tangle_initial": float(tau[0]), "tangle_max": float(np.max(tau))})
    w.csv(series, ctx.stem())
    from .plotting import render_observables
    w.figure(render_observables, series, stem=ctx.stem(), critical_times=crit.switch_times, title=ctx.stem())
    return summary


def validation_sites(distance: float, beta12: float, polar: float = math.pi / 4):
    """Two carbons ``distance`` from the NV, separated along z so the pair has ``beta12``."""
    r12 = PairGeometry.from_coupling(1, 2, beta12).r
    p1 = np.array([distance * math.sin(polar), 0.0, distance * math.cos(polar)])
    p2 = p1 + np.array([0.0, 0.0, r12])
    sites = (CarbonSite(1, position=tuple(p1)), CarbonSite(2, position=tuple(p2)))
    return sites, [PairGeometry.from_positions(1, 2, p1, p2)]


def run_validation(bx, bz, beta12, grid: TimeGrid, t2n_star=0.5e-3, t2e=7e-6, distance=3e-9, method="split"):
    """Full model with dephasing against the lossless secular two-spin model.

    Returns ``(times, mz_secular, mz_full, lambda_secular, lambda_full)``.
    """
    from .analysis import magnetization, manifold_probabilities

    reg_full = SpinRegister(2, include_electron=True)
    sites, pairs = validation_sites(distance, beta12)
    h_full = build_full_hamiltonian(sites, (bx, bz), pairs, reg_full)
    rho0 = basis_state("0↓↓", reg_full)
    model = dephasing_model(reg_full, t2n_star, t2e)
    full = evolve_lindblad(h_full, rho0, model, grid, reg_full, method=method)
    reg = SpinRegister(2)
    sec_b = FieldQuenchBuilder(make_chain_geometry(2, beta12), FieldSchedule.constant(bx, bz), reg)
    sec = evolve_static(sec_b(0.0), basis_state("↓↓", reg), grid, reg)
    pd_f, pu_f = manifold_probabilities(full)
    pd_s, pu_s = manifold_probabilities(sec)
    return (grid.times, magnetization(sec), magnetization(full),
            rate_function(pd_s, pu_s, 2), rate_function(pd_f, pu_f, 2))


def _run_validate(ctx: _Context, w: _Writer):
    sched = ctx.schedule()
    if not sched.is_static:
        raise ConfigError("validate supports constant fields only")
    val = ctx.cfg.section("validation", ctx.run)
    grid = ctx.grid()
    t, mz_s, mz_f, lam_s, lam_f = run_validation(
        sched.bx0, sched.bz, ctx.beta12, grid,
        t2n_star=ctx.q("validation", "t2n_star", 0.5e-3), t2e=ctx.q("validation", "t2e", 7e-6),
        distance=ctx.q("validation", "distance", 3e-9), method=val.get("method", "split"),
    )
    diff = np.abs(mz_f - mz_s)
    table = Table({"t_us": t * 1e6, "mz_secular": mz_s, "mz_full": mz_f, "abs_diff_mz": diff,
                   "lambda_secular": lam_s, "lambda_full": lam_f})
    w.csv(table, ctx.stem())
    from .plotting import render_comparison
    w.figure(render_comparison, t, {"secular": mz_s, "full + dephasing": mz_f}, stem=ctx.stem(),
             ylabel=r"$\langle M_z\rangle$", title=ctx.stem())
    return {"max_abs_diff_mz": float(diff.max()), "mz_within_0.02": bool(diff.max() < 0.02)}


def _checks(cfg: ExperimentConfig, runs: dict, top: dict) -> dict:
    """Pass/fail booleans for the named reproduction targets."""
    name = cfg.name
    c = {}
    if name == "fig2":
        r = runs[None]
        c["first_switch_in_2.2_2.6_us"] = r["first_switch_us"] is not None and 2.2 <= r["first_switch_us"] <= 2.6
        c["switches_match_mz_zeros"] = bool(r["switches_match_mz_zeros"])
    elif name == "fig4":
        d, n = runs["dreau"], runs["nizovtsev"]
        c["dreau_has_dqpt"] = d["n_switches"] >= 1 and bool(d["switches_match_mz_zeros"])
        c["nizovtsev_no_dqpt_negative_mz"] = n["n_switches"] == 0 and n["max_mz"] < 0
    elif name == "fig5a":
        c["T2tc1_no_switch"] = runs["T2tc1"]["n_switches"] == 0
        c["T6tc1_has_switch"] = runs["T6tc1"]["n_switches"] >= 1
    elif name == "fig6":
        dev = runs["bx0"]["max_rel_dev_from_t2"]
        c["bx0_fi_equals_t2"] = dev is not None and dev < 1e-5
    elif name == "fig3":
        r = runs[None]
        frac = r["no_dqpt_fraction_by_bz"]
        if "5 G" in frac and "50 G" in frac:
            c["broader_no_dqpt_at_50G"] = frac["50 G"] > frac["5 G"]
        c["bx0_never_dqpt"] = bool(r["bx0_never_dqpt"])
    elif name == "fig8":
        r = runs[None]
        c["concurrence_starts_at_0"] = abs(r["concurrence_initial"]) < 1e-10
        c["concurrence_exceeds_half_within_window"] = r["concurrence_first_above_half_us"] is not None
    elif name == "fig10":
        firsts = [r["first_switch_us"] for r in runs.values()]
        ok = all(f is not None for f in firsts)
        c["critical_times_within_10pct"] = ok and max(firsts) <= 1.1 * min(firsts)
    elif name == "validate":
        c["mz_within_0.02"] = runs[None]["mz_within_0.02"]
    return c


def run_scenario(cfg: ExperimentConfig, out_dir=None, threads: Optional[int] = None,
                 svg: Optional[bool] = None) -> RunManifest:
    """Execute ``cfg``, writing ``<name>[_<label>].csv``, ``<name>_summary.json``,
    optional SVGs and ``manifest.json`` into the output directory."""
    start = time.perf_counter()
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    w = _Writer(out, cfg.svg if svg is None else svg)
    run_list = cfg.runs or [None]
    results, echoes = {}, {}
    for run in run_list:
        ctx = _Context(cfg, run)
        if cfg.scenario == "field-quench":
            res = _run_field_quench(ctx, w)
        elif cfg.scenario == "central-quench":
            res = _run_central_quench(ctx, w)
        elif cfg.scenario == "sweep":
            res = _run_sweep(ctx, w, threads)
        elif cfg.scenario == "fisher":
            res = _run_fisher(ctx, w)
        elif cfg.scenario == "entanglement":
            res = _run_entanglement(ctx, w)
        else:
            res = _run_validate(ctx, w)
        results[ctx.label] = res
        echoes[ctx.label or cfg.name] = ctx.echo()
    summary = {
        "scenario": cfg.scenario,
        "name": cfg.name,
        "parameters": echoes,
        "runs": {(k or cfg.name): v for k, v in results.items()},
        "checks": _checks(cfg, results, {}),
    }
    w.files.append(str(write_json(summary, out / f"{cfg.name}_summary.json").name))
    manifest = RunManifest(config_hash(cfg), __version__, time.perf_counter() - start, list(w.files), summary)
    write_json({"config_hash": manifest.config_hash, "tool_version": manifest.tool_version,
                "wall_clock_s": manifest.wall_clock_s, "outputs": manifest.outputs},
               out / f"{cfg.name}_manifest.json")
    return manifest
