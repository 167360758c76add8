"""Command-line interface: simulate / analyze / saturate / selftest.

Runs are configured by a JSON document (sections: emitter, detector, sim,
analysis, saturation, output); unknown keys are rejected. Flags cover only
paths, seed override and verbosity. All outputs are deterministic for a
fixed config + seed.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import correlation, emitter, errors, fitting, lifetime_flid, photon_stream
from .svgplot import SvgFigure

_EMITTER_KEYS = {"mean_excitons_per_pulse", "tau_exciton_ns", "qy_exciton",
                 "tau_trion_ns", "qy_trion", "qy_biexciton", "tau_biexciton_ns",
                 "blinking"}
_BLINK_KEYS = {"telegraph": {"model", "k_on_per_s", "k_off_per_s"},
               "power_law": {"model", "alpha_on", "alpha_off", "t_min_s", "t_max_s"}}
_DETECTOR_KEYS = {"efficiency_total", "split_ratio", "jitter_sigma_ps",
                  "dead_time_ns", "dark_rate_hz"}
_SIM_KEYS = {"duration_s", "sync_period_ps", "resolution_ps", "seed"}
_ANALYSIS_KEYS = {"trace_bin_width_s", "g2_intra_window_ps", "n_side_peaks",
                  "side_peak_range", "envelope_tau_min_s", "envelope_tau_max_s",
                  "envelope_points_per_decade", "decay_bin_width_ps",
                  "decay_components", "fit_start_offset_ps",
                  "flid_lifetime_bins", "flid_intensity_bins", "photon_floor"}
_SATURATION_KEYS = {"p_sat_true", "fluences", "duration_s"}
_OUTPUT_KEYS = {"directory", "formats"}
_SECTIONS = {"emitter", "detector", "sim", "analysis", "saturation", "output"}


def _check_keys(d, allowed, where):
    unknown = set(d) - allowed
    if unknown:
        raise errors.ConfigInvalid(
            f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise errors.IoError(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise errors.ConfigInvalid(f"config is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise errors.ConfigInvalid("config must be a JSON object")
    _check_keys(cfg, _SECTIONS, "config")
    for section, allowed in (("emitter", _EMITTER_KEYS), ("detector", _DETECTOR_KEYS),
                             ("sim", _SIM_KEYS), ("analysis", _ANALYSIS_KEYS),
                             ("saturation", _SATURATION_KEYS), ("output", _OUTPUT_KEYS)):
        if section in cfg:
            _check_keys(cfg[section], allowed, f'"{section}"')
    blink = cfg.get("emitter", {}).get("blinking")
    if blink is not None:
        model = blink.get("model")
        if model not in _BLINK_KEYS:
            raise errors.ConfigInvalid(f'unknown blinking model {model!r}')
        _check_keys(blink, _BLINK_KEYS[model], '"emitter.blinking"')
    return cfg


def build_params(cfg, seed_override=None):
    """EmitterParams, DetectorParams, SimConfig from a validated config."""
    e = dict(cfg.get("emitter", {}))
    blink = e.pop("blinking", None)
    if blink is not None:
        b = dict(blink)
        model = b.pop("model")
        blink = emitter.TelegraphBlinking(**b) if model == "telegraph" \
            else emitter.PowerLawBlinking(**b)
    try:
        em = emitter.EmitterParams(blinking=blink, **e)
        det = emitter.DetectorParams(**cfg.get("detector", {}))
        s = dict(cfg.get("sim", {}))
        if seed_override is not None:
            s["seed"] = seed_override
        sim = emitter.SimConfig(**s)
        em.validate()
        det.validate()
        sim.validate()
    except (TypeError, errors.InvalidParams) as exc:
        raise errors.ConfigInvalid(str(exc))
    return em, det, sim


def _json_dump(obj, path=None):
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is None:
        return text
    with open(path, "w") as fh:
        fh.write(text)


def _write_csv(path, header, columns):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


# --- subcommands -------------------------------------------------------------

def cmd_simulate(config_path, out_path, seed_override=None, quiet=False):
    cfg = load_config(config_path)
    em, det, sim = build_params(cfg, seed_override)
    stream = emitter.simulate_stream(em, det, sim)
    try:
        photon_stream.write_stream(out_path, stream)
    except OSError as exc:
        raise errors.IoError(f"cannot write {out_path}: {exc}")
    summary = {
        "out_path": str(out_path),
        "duration_s": sim.duration_s,
        "record_count": len(stream),
        "mean_rate_hz": len(stream) / sim.duration_s,
        "seed": sim.seed,
    }
    if not quiet:
        sys.stdout.write(_json_dump(summary))
    return summary


def cmd_analyze(stream_path, config_path=None, out_dir="analysis", quiet=False):
    cfg = load_config(config_path) if config_path else {}
    a = cfg.get("analysis", {})
    try:
        stream = photon_stream.read_stream(stream_path)
    except OSError as exc:
        raise errors.IoError(f"cannot read {stream_path}: {exc}")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def out(name):
        p = os.path.join(out_dir, name)
        written.append(p)
        return p

    try:
        _analyze_into(stream, a, out)
    except errors.PhotonStatError as exc:
        for p in written:
            if os.path.exists(p):
                os.unlink(p)
        raise type(exc)(f"[{type(exc).__module__}] {exc}")
    if not quiet:
        sys.stdout.write(_json_dump({"out_dir": out_dir,
                                     "files": sorted(os.path.basename(p) for p in written)}))
    return written


def _analyze_into(stream, a, out):
    bin_width = a.get("trace_bin_width_s", 0.005)
    floor = a.get("photon_floor", 5)

    # intensity trace + occurrence histogram (Fig-3a class)
    trace = correlation.bin_intensity(stream, bin_width)
    t_axis = (np.arange(len(trace.counts)) + 0.5) * bin_width
    _write_csv(out("trace.csv"), ["time_s", "counts"], (t_axis, trace.counts))
    occ = correlation.intensity_histogram(trace)
    _write_csv(out("intensity_hist.csv"), ["counts_per_bin", "occurrences"],
               (np.arange(len(occ)), occ))
    fig = SvgFigure(title="Intensity trace", xlabel="time (s)",
                    ylabel=f"counts / {bin_width * 1e3:g} ms")
    fig.line(t_axis, trace.counts)
    fig.save(out("trace.svg"))
    fig = SvgFigure(title="Intensity occurrences", xlabel="counts per bin",
                    ylabel="occurrences")
    fig.line(np.arange(len(occ)), occ, color="#2ca02c")
    fig.save(out("intensity_hist.svg"))

    # pulsed g2 (Fig-2d class)
    g2 = correlation.g2_pulsed(
        stream,
        intra_window_ps=a.get("g2_intra_window_ps"),
        n_side_peaks=a.get("n_side_peaks", 20),
        side_peak_range=tuple(a.get("side_peak_range", (10, 20))))
    centers = (g2.lag_edges_ps[:-1] + g2.lag_edges_ps[1:]) / 2
    _write_csv(out("g2.csv"), ["lag_ps", "counts"], (centers, g2.counts))
    sel = (np.abs(g2.peak_ks) >= g2.side_peak_selection[0]) \
        & (np.abs(g2.peak_ks) <= g2.side_peak_selection[1])
    side_sum = int(g2.peak_areas[sel].sum())
    raw_sigma = (g2.g2_zero_raw * math.sqrt(1.0 / max(g2.center_peak_area, 1)
                                            + 1.0 / max(side_sum, 1))
                 if g2.center_peak_area > 0 else
                 1.0 / max(g2.peak_areas[sel].mean(), 1.0))
    _json_dump({
        "g2_zero_raw": g2.g2_zero_raw,
        "g2_zero_raw_sigma": raw_sigma,
        "g2_zero_corrected": g2.g2_zero_corrected,
        "signal_fraction_rho": g2.signal_fraction_rho,
        "center_peak_area": g2.center_peak_area,
        "side_peak_mean_area": float(g2.peak_areas[sel].mean()),
        "side_peak_selection": list(g2.side_peak_selection),
        "intra_window_ps": g2.intra_window_ps,
        "peak_areas": [{"k": int(k), "area": int(v)}
                       for k, v in zip(g2.peak_ks, g2.peak_areas)],
    }, out("g2_summary.json"))
    fig = SvgFigure(title="Pulsed g2", xlabel="delay (ps)", ylabel="coincidences")
    fig.line(centers, g2.counts)
    fig.save(out("g2.svg"))

    # coincidence-peak envelope (Fig-3b class)
    dur = stream.duration_s()
    tau_min = a.get("envelope_tau_min_s", 1e-6)
    tau_max = min(a.get("envelope_tau_max_s", 1.0), dur / 10)
    if tau_max > tau_min:
        taus = correlation.default_tau_grid(
            tau_max, tau_min, a.get("envelope_points_per_decade", 5))
        env = correlation.g2_envelope(stream, taus)
        _write_csv(out("envelope.csv"), ["tau_s", "value", "one_sigma"],
                   (env.taus_s, env.values, env.one_sigma))
        fig = SvgFigure(title="Coincidence-peak envelope", xlabel="delay (s)",
                        ylabel="g2 envelope", xlog=True)
        fig.errorbars(env.taus_s, env.values, env.one_sigma)
        fig.line(env.taus_s, np.ones_like(env.taus_s), color="#888888", dash="4 3")
        fig.save(out("envelope.svg"))

    # decay histogram + multi-exp tail fit (Fig-2b class)
    decay = lifetime_flid.decay_histogram(stream, a.get("decay_bin_width_ps"))
    t_ps = np.arange(len(decay.counts)) * decay.bin_width_ps
    _write_csv(out("decay.csv"), ["time_ps", "counts"], (t_ps, decay.counts))
    fit_report = {"flagged": None, "components": [], "background_level": None,
                  "fit_quality": None, "converged": None, "covariance": None,
                  "lifetime_stderr_ns": None}
    try:
        fit = lifetime_flid.fit_multiexp(
            decay, a.get("decay_components", 3),
            a.get("fit_start_offset_ps", 0.0))
        n = len(fit.amplitudes)
        tau_err = np.sqrt(np.maximum(np.diag(fit.covariance), 0.0))[n:2 * n] \
            if fit.covariance.shape[0] >= 2 * n else np.full(n, np.nan)
        fit_report.update({
            "components": [
                {"amplitude_fraction": f, "lifetime_ns": tau,
                 "lifetime_stderr_ns": (float(tau_err[i])
                                        if i < len(tau_err) and np.isfinite(tau_err[i])
                                        else None)}
                for i, (f, tau) in enumerate(fit.components)],
            "background_level": fit.background_level,
            "fit_quality": fit.fit_quality,
            "converged": fit.converged,
            "covariance": np.asarray(fit.covariance).tolist(),
        })
    except errors.InsufficientCounts as exc:
        fit_report["flagged"] = f"InsufficientCounts: {exc}"
    _json_dump(fit_report, out("decay_fit.json"))
    fig = SvgFigure(title="PL decay", xlabel="delay (ps)", ylabel="counts",
                    ylog=True)
    fig.line(t_ps + decay.bin_width_ps / 2, np.maximum(decay.counts, 0.5))
    fig.save(out("decay.svg"))

    # FLID + intensity-lifetime correlation (Fig-3c/d class)
    flid = lifetime_flid.build_flid(
        stream, bin_width, a.get("flid_lifetime_bins", 40),
        a.get("flid_intensity_bins", 40), photon_floor=floor)
    with open(out("flid.csv"), "w") as fh:
        fh.write("# rows: lifetime bins (first row = flagged low-count), "
                 "columns: intensity bins\n")
        fh.write("# lifetime_edges_ns," +
                 ",".join(repr(float(v)) for v in flid.lifetime_edges_ns) + "\n")
        fh.write("# intensity_edges," +
                 ",".join(repr(float(v)) for v in flid.intensity_edges) + "\n")
        for row in flid.occurrence:
            fh.write(",".join(str(int(v)) for v in row) + "\n")
    fig = SvgFigure(title="FLID", xlabel="lifetime (ns)", ylabel="counts per bin")
    fig.heatmap(flid.lifetime_edges_ns, flid.intensity_edges,
                flid.occurrence[1:, :])
    fig.save(out("flid.svg"))

    corr_report = {"pearson_r": None, "pearson_r_sigma": None,
                   "n_bins_used": 0, "bin_width_s": bin_width, "flagged": None}
    try:
        r = lifetime_flid.intensity_lifetime_correlation(
            stream, bin_width, photon_floor=floor)
        n_used = int(np.isfinite(lifetime_flid._per_bin_estimates(
            stream, bin_width, lifetime_flid.decay_histogram(stream).t0_ps,
            floor)[1]).sum())
        corr_report.update({
            "pearson_r": r,
            "pearson_r_sigma": math.sqrt(max(1 - r ** 2, 0.0) / max(n_used - 2, 1)),
            "n_bins_used": n_used,
        })
    except errors.InsufficientBins as exc:
        corr_report["flagged"] = f"InsufficientBins: {exc}"
    _json_dump(corr_report, out("correlation.json"))


def cmd_saturate(config_path, fluences=None, out_dir="saturation", quiet=False):
    cfg = load_config(config_path)
    sat = cfg.get("saturation", {})
    fluences = fluences if fluences is not None else sat.get("fluences")
    if not fluences or len(fluences) < 4:
        raise errors.InsufficientSpan("need >= 4 fluences")
    p_sat_true = float(sat.get("p_sat_true", 9.0))
    duration = float(sat.get("duration_s", cfg.get("sim", {}).get("duration_s", 2.0)))

    em, det, sim = build_params(cfg)
    base_seed = sim.seed

    def run_point(i_fl):
        i, fl = i_fl
        em_i = emitter.EmitterParams(
            **{**_emitter_kwargs(em), "mean_excitons_per_pulse": fl / p_sat_true})
        sim_i = emitter.SimConfig(duration_s=duration,
                                  sync_period_ps=sim.sync_period_ps,
                                  resolution_ps=sim.resolution_ps,
                                  seed=base_seed + i)
        stream = emitter.simulate_stream(em_i, det, sim_i)
        return fitting.SaturationPoint(
            fluence=float(fl), intensity=len(stream) / duration,
            sigma=max(math.sqrt(len(stream)), 1.0) / duration)

    n_threads = max(int(os.environ.get("PHOTONSTAT_THREADS", "1")), 1)
    jobs = list(enumerate(fluences))
    if n_threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            points = list(pool.map(run_point, jobs))
    else:
        points = [run_point(j) for j in jobs]
    fit = fitting.fit_saturation(points)

    os.makedirs(out_dir, exist_ok=True)
    _write_csv(os.path.join(out_dir, "saturation.csv"),
               ["fluence_uj_cm2", "intensity_hz", "sigma_hz"],
               ([p.fluence for p in points], [p.intensity for p in points],
                [p.sigma for p in points]))
    report = {
        "A": fit.A, "A_stderr": float(fit.stderr[0]),
        "B": fit.B, "B_stderr": float(fit.stderr[1]),
        "P_sat": fit.P_sat, "P_sat_stderr": float(fit.stderr[2]),
        "covariance": np.asarray(fit.covariance).tolist(),
        "converged": fit.converged,
        "planted_p_sat": p_sat_true,
    }
    _json_dump(report, os.path.join(out_dir, "saturation_fit.json"))
    grid = np.linspace(0, max(p.fluence for p in points), 200)
    fig = SvgFigure(title="Saturation", xlabel="fluence (uJ/cm^2)",
                    ylabel="counts/s")
    fig.line(grid, fitting.saturation_model([fit.A, fit.B, fit.P_sat], grid),
             color="#444444", dash="5 3")
    fig.errorbars([p.fluence for p in points], [p.intensity for p in points],
                  [p.sigma for p in points])
    fig.save(os.path.join(out_dir, "saturation.svg"))
    if not quiet:
        sys.stdout.write(_json_dump(report))
    return report


def _emitter_kwargs(em):
    return {"mean_excitons_per_pulse": em.mean_excitons_per_pulse,
            "tau_exciton_ns": em.tau_exciton_ns, "qy_exciton": em.qy_exciton,
            "tau_trion_ns": em.tau_trion_ns, "qy_trion": em.qy_trion,
            "qy_biexciton": em.qy_biexciton, "blinking": em.blinking,
            "tau_biexciton_ns": em.tau_biexciton_ns}


def cmd_selftest(quiet=False):
    """Oracle-equivalence and analytic-limit checks; returns failure count."""
    from . import selftest
    return selftest.run(quiet=quiet)


# --- entry point --------------------------------------------------------------

def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="photonstat",
        description="Photon-stream simulation and TCSPC analysis toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a .phst photon stream")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("analyze", help="full analysis report from a .phst stream")
    p.add_argument("stream")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="analysis")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("saturate", help="saturation curve across fluences")
    p.add_argument("--config", required=True)
    p.add_argument("--fluences", default=None,
                   help="comma-separated fluences (uJ/cm^2); default from config")
    p.add_argument("--out", default="saturation")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("selftest", help="run oracle-equivalence and analytic checks")
    p.add_argument("--quiet", action="store_true")

    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            cmd_simulate(args.config, args.out, args.seed, args.quiet)
        elif args.command == "analyze":
            cmd_analyze(args.stream, args.config, args.out, args.quiet)
        elif args.command == "saturate":
            fl = None
            if args.fluences:
                fl = [float(v) for v in args.fluences.split(",")]
            cmd_saturate(args.config, fl, args.out, args.quiet)
        elif args.command == "selftest":
            return 1 if cmd_selftest(args.quiet) else 0
    except errors.PhotonStatError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
