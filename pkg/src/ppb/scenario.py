"""Scenario files: parsing, validation and the end-to-end experiment runner.

Scenarios are TOML. Pump power is only a label: every rate is
``<rate>_per_mW * pump_mW``. Detectors are named D1, D2, D3 and a
``[detectors.default]`` table fills any that are not listed.

Topologies (signal/idler routing onto detectors):

==============  ==========================================
cross           signal -> D1, idler -> D2
hbt-signal      signal -> 50/50 splitter -> D2, D3
hbt-idler       idler -> 50/50 splitter -> D2, D3
conditional     signal -> D1, idler -> 50/50 splitter -> D2, D3
==============  ==========================================
"""

import hashlib
import json
import math
import re
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__, io as pio, theory
from .analyze import (MULTI_STOP, START_STOP, auto_correlation, cauchy_schwarz_R, centered_range,
                      cross_correlation, gaussian_fit, heralded_analysis, rate_report)
from .errors import ConfigError, FitError, InputError
from .simulate import DetectorConfig, Route, SourceConfig, simulate_detection

TOPOLOGIES = ("cross", "hbt-signal", "hbt-idler", "conditional")
DETECTORS = {"D1": 1, "D2": 2, "D3": 3}
_NEEDS = {"cross": ("D1", "D2"), "hbt-signal": ("D2", "D3"), "hbt-idler": ("D2", "D3"),
          "conditional": ("D1", "D2", "D3")}

_TOP_KEYS = {"name", "description", "seed", "topology", "source", "detectors", "analysis",
             "outputs", "sweep", "input"}
_SOURCE_KEYS = {"pump_mW", "pair_rate_per_mW", "background_signal_cps_per_mW",
                "background_idler_cps_per_mW", "waveform", "temperature_K", "decay_time_ns",
                "thermal_coherence_time_ns", "duration_s", "full_duration_s"}
_DETECTOR_KEYS = {"efficiency", "jitter_sigma_ps", "dead_time_ns", "dark_rate_cps"}
_ANALYSIS_KEYS = {"resolution_ps", "rebin_ps", "range_ps", "mode", "coincidence_window_ns",
                  "dead_time_correction_ns", "herald_window_ns", "herald_bin_ps",
                  "herald_side_bins", "fit"}
_OUTPUT_KEYS = {"prefix", "events"}
_SWEEP_KEYS = {"pump_mW", "duration_s"}
_INPUT_KEYS = {"events", "duration_s"}


@dataclass
class AnalysisConfig:
    resolution_ps: int = 4
    rebin_ps: int = 300
    range_ps: tuple = (-100_000, 100_000)
    mode: str = MULTI_STOP
    coincidence_window_ns: float = 4.1
    dead_time_correction_ns: float = 50.0
    herald_window_ns: float = 3.3
    herald_bin_ps: int = 300
    herald_side_bins: int = 4
    fit: bool = True


@dataclass
class Scenario:
    name: str
    seed: int
    topologies: list
    pump_mW: float
    pair_rate_per_mW: float
    background_signal_cps_per_mW: float
    background_idler_cps_per_mW: float
    waveform: str
    temperature_K: float
    decay_time_ns: float
    thermal_coherence_time_ns: float
    duration_s: float
    full_duration_s: float
    detectors: dict
    analysis: AnalysisConfig
    prefix: str
    write_events: bool = False
    sweep_pump_mW: list = None
    sweep_duration_s: list = None
    input_events: Path = None
    input_duration_s: float = None
    description: str = ""
    source_text: str = field(default="", repr=False)
    path: Path = None

    @property
    def sha256(self):
        return hashlib.sha256(self.source_text.encode()).hexdigest()

    def make_waveform(self):
        if self.waveform == "doppler":
            return theory.doppler_averaged_g2(theory.default_tau_grid(),
                                              theory.AtomicParams(temperature=self.temperature_K))
        return theory.exponential_waveform(self.decay_time_ns * 1e-9)

    def source_config(self, pump_mW, duration, seed):
        return SourceConfig(pair_rate=self.pair_rate_per_mW * pump_mW, waveform=self.make_waveform(),
                            thermal_coherence_time=self.thermal_coherence_time_ns * 1e-9,
                            background_rate_signal=self.background_signal_cps_per_mW * pump_mW,
                            background_rate_idler=self.background_idler_cps_per_mW * pump_mW,
                            duration=duration, seed=seed)


def _locate(text, section, key=None):
    """1-based line of ``key`` inside table ``section`` (or the table header)."""
    current = ""
    header_line = None
    for n, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        m = re.match(r"^\[+\s*([^\]]+?)\s*\]+", stripped)
        if m:
            current = m.group(1).replace('"', "").replace(" ", "")
            if current == section:
                header_line = n
            continue
        if current == section and key is not None and re.match(rf"^\"?{re.escape(key)}\"?\s*=", stripped):
            return n
    return header_line


class _Checker:
    def __init__(self, text):
        self.text = text

    def fail(self, section, key, message):
        fname = f"{section}.{key}" if section and key else (key or section)
        raise ConfigError(message, field=fname, line=_locate(self.text, section, key))

    def table(self, data, section, allowed):
        if not isinstance(data, dict):
            self.fail("", section, "must be a table")
        unknown = sorted(set(data) - allowed)
        if unknown:
            self.fail(section, unknown[0], f"unknown key {unknown[0]!r}")
        return data

    def number(self, data, section, key, default=None, lo=None, lo_open=False, hi=None, integer=False):
        if key not in data:
            if default is None:
                self.fail(section, key, "required key is missing")
            return default
        v = data[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or (integer and not isinstance(v, int)):
            self.fail(section, key, f"expected {'an integer' if integer else 'a number'}, got {v!r}")
        if not math.isfinite(v):
            self.fail(section, key, "must be finite")
        if lo is not None and (v <= lo if lo_open else v < lo):
            self.fail(section, key, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
        if hi is not None and v > hi:
            self.fail(section, key, f"must be <= {hi}, got {v}")
        return v

    def choice(self, data, section, key, options, default):
        v = data.get(key, default)
        if v not in options:
            self.fail(section, key, f"must be one of {list(options)}, got {v!r}")
        return v


def parse_scenario(text, path=None):
    """Parse and fully validate scenario text; nothing is computed here."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed scenario: {exc}", line=int(m.group(1)) if m else None) from None
    ck = _Checker(text)
    ck.table(data, "", _TOP_KEYS)
    name = data.get("name")
    if not isinstance(name, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", name or ""):
        ck.fail("", "name", "name must be a non-empty identifier ([A-Za-z0-9_.-])")
    seed = ck.number(data, "", "seed", default=0, lo=0, hi=2 ** 64 - 1, integer=True)
    topo = data.get("topology", "cross")
    topo = [topo] if isinstance(topo, str) else topo
    if not isinstance(topo, list) or not topo:
        ck.fail("", "topology", "topology must be a name or a non-empty list")
    for t in topo:
        if t not in TOPOLOGIES:
            ck.fail("", "topology", f"unknown topology {t!r}; expected one of {list(TOPOLOGIES)}")
    if len(set(topo)) != len(topo):
        ck.fail("", "topology", "topology listed twice")

    src = ck.table(data.get("source", {}), "source", _SOURCE_KEYS)
    pump = ck.number(src, "source", "pump_mW", default=1.0, lo=0, lo_open=True)
    per_mw = ck.number(src, "source", "pair_rate_per_mW", default=0.0, lo=0)
    bg_s = ck.number(src, "source", "background_signal_cps_per_mW", default=0.0, lo=0)
    bg_i = ck.number(src, "source", "background_idler_cps_per_mW", default=0.0, lo=0)
    wf = ck.choice(src, "source", "waveform", ("doppler", "exponential"), "doppler")
    temp = ck.number(src, "source", "temperature_K", default=325.15, lo=0, lo_open=True)
    decay = ck.number(src, "source", "decay_time_ns", default=26.24, lo=0, lo_open=True)
    tc = ck.number(src, "source", "thermal_coherence_time_ns", default=0.0, lo=0)
    duration = ck.number(src, "source", "duration_s", default=5.0, lo=0, lo_open=True)
    full = ck.number(src, "source", "full_duration_s", default=duration, lo=0, lo_open=True)

    det_data = ck.table(data.get("detectors", {}), "detectors", set(DETECTORS) | {"default"})
    base = {}
    if "default" in det_data:
        base = ck.table(det_data["default"], "detectors.default", _DETECTOR_KEYS)
    detectors = {}
    for dname in DETECTORS:
        if dname not in det_data and "default" not in det_data:
            continue
        sec = f"detectors.{dname}" if dname in det_data else "detectors.default"
        own = ck.table(det_data.get(dname, {}), sec, _DETECTOR_KEYS)
        merged = {**base, **own}
        kw = {}
        for key, attr, scale, hi in (("efficiency", "efficiency", 1.0, 1.0),
                                     ("jitter_sigma_ps", "jitter_sigma", 1e-12, None),
                                     ("dead_time_ns", "dead_time", 1e-9, None),
                                     ("dark_rate_cps", "dark_rate", 1.0, None)):
            where = sec if key in own else "detectors.default"
            if key in merged:
                kw[attr] = ck.number(merged, where, key, lo=0, hi=hi) * scale
        detectors[dname] = DetectorConfig(**kw)
    for t in topo:
        for dname in _NEEDS[t]:
            if dname not in detectors:
                ck.fail("detectors", dname, f"topology {t!r} needs detector {dname}")

    ana = ck.table(data.get("analysis", {}), "analysis", _ANALYSIS_KEYS)
    a = AnalysisConfig()
    a.resolution_ps = ck.number(ana, "analysis", "resolution_ps", a.resolution_ps, lo=1, integer=True)
    a.rebin_ps = ck.number(ana, "analysis", "rebin_ps", a.rebin_ps, lo=1, integer=True)
    rng = ana.get("range_ps", list(a.range_ps))
    if (not isinstance(rng, list) or len(rng) != 2 or not all(isinstance(x, int) and not isinstance(x, bool) for x in rng)
            or rng[0] >= rng[1]):
        ck.fail("analysis", "range_ps", "range_ps must be [lo, hi] integers with lo < hi")
    a.range_ps = (rng[0], rng[1])
    a.mode = ck.choice(ana, "analysis", "mode", (START_STOP, MULTI_STOP), a.mode)
    a.coincidence_window_ns = ck.number(ana, "analysis", "coincidence_window_ns",
                                        a.coincidence_window_ns, lo=0, lo_open=True)
    a.dead_time_correction_ns = ck.number(ana, "analysis", "dead_time_correction_ns",
                                          a.dead_time_correction_ns, lo=0)
    a.herald_window_ns = ck.number(ana, "analysis", "herald_window_ns", a.herald_window_ns,
                                   lo=0, lo_open=True)
    a.herald_bin_ps = ck.number(ana, "analysis", "herald_bin_ps", a.herald_bin_ps, lo=1, integer=True)
    a.herald_side_bins = ck.number(ana, "analysis", "herald_side_bins", a.herald_side_bins,
                                   lo=1, integer=True)
    fit = ana.get("fit", True)
    if not isinstance(fit, bool):
        ck.fail("analysis", "fit", "fit must be true or false")
    a.fit = fit

    out = ck.table(data.get("outputs", {}), "outputs", _OUTPUT_KEYS)
    prefix = out.get("prefix", name)
    if not isinstance(prefix, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", prefix):
        ck.fail("outputs", "prefix", "prefix must be a plain file-name stem")
    events = out.get("events", False)
    if not isinstance(events, bool):
        ck.fail("outputs", "events", "events must be true or false")

    sweep_p = sweep_d = None
    if "sweep" in data:
        sw = ck.table(data["sweep"], "sweep", _SWEEP_KEYS)
        sweep_p = sw.get("pump_mW")
        if not isinstance(sweep_p, list) or not sweep_p:
            ck.fail("sweep", "pump_mW", "pump_mW must be a non-empty list")
        for v in sweep_p:
            ck.number({"pump_mW": v}, "sweep", "pump_mW", lo=0, lo_open=True)
        sweep_d = sw.get("duration_s", [duration] * len(sweep_p))
        if not isinstance(sweep_d, list) or len(sweep_d) != len(sweep_p):
            ck.fail("sweep", "duration_s", "duration_s must list one duration per pump point")
        for v in sweep_d:
            ck.number({"duration_s": v}, "sweep", "duration_s", lo=0, lo_open=True)

    in_events = in_dur = None
    if "input" in data:
        inp = ck.table(data["input"], "input", _INPUT_KEYS)
        if not isinstance(inp.get("events"), str):
            ck.fail("input", "events", "events must be a file path")
        in_events = Path(inp["events"])
        if path is not None and not in_events.is_absolute():
            in_events = Path(path).parent / in_events
        if "duration_s" in inp:
            in_dur = ck.number(inp, "input", "duration_s", lo=0, lo_open=True)
        if len(topo) != 1:
            ck.fail("", "topology", "an input events file feeds exactly one topology")
        if sweep_p is not None:
            ck.fail("sweep", None, "sweeps need simulated streams, not an input file")

    scenario = Scenario(name=name, seed=seed, topologies=topo, pump_mW=pump, pair_rate_per_mW=per_mw,
                        background_signal_cps_per_mW=bg_s, background_idler_cps_per_mW=bg_i,
                        waveform=wf, temperature_K=temp, decay_time_ns=decay,
                        thermal_coherence_time_ns=tc, duration_s=duration, full_duration_s=full,
                        detectors=detectors, analysis=a, prefix=prefix, write_events=events,
                        sweep_pump_mW=sweep_p, sweep_duration_s=sweep_d, input_events=in_events,
                        input_duration_s=in_dur, description=str(data.get("description", "")),
                        source_text=text, path=Path(path) if path else None)
    check_analysis(scenario, ck)
    return scenario


def check_analysis(scenario, ck=None):
    """Cross-field checks, rerun after command-line overrides."""
    ck = ck or _Checker(scenario.source_text)
    a = scenario.analysis
    if a.rebin_ps % a.resolution_ps:
        ck.fail("analysis", "rebin_ps", f"rebin_ps {a.rebin_ps} is not a multiple of resolution_ps {a.resolution_ps}")
    if a.herald_bin_ps % a.resolution_ps and "conditional" in scenario.topologies:
        ck.fail("analysis", "herald_bin_ps", "herald_bin_ps must be a multiple of resolution_ps")
    w_ps = round(a.herald_window_ns * 1000)
    if "conditional" in scenario.topologies and (abs(a.herald_window_ns * 1000 - w_ps) > 1e-6
                                                  or w_ps % a.herald_bin_ps):
        ck.fail("analysis", "herald_window_ns",
                f"herald window {a.herald_window_ns} ns must be a whole number of {a.herald_bin_ps} ps bins")
    lo, hi = a.range_ps
    if any(t.startswith("hbt") for t in scenario.topologies) and not lo < 0 < hi:
        ck.fail("analysis", "range_ps", "auto-correlation needs a range straddling zero")


def load_scenario(path):
    path = Path(path)
    return parse_scenario(path.read_text(), path)


def bundled_scenario_path(name):
    here = Path(__file__).parent / "scenarios" / f"{name}.scenario"
    if not here.exists():
        raise InputError(f"no bundled scenario named {name!r}")
    return here


def bundled_scenarios():
    return sorted(p.stem for p in (Path(__file__).parent / "scenarios").glob("*.scenario"))


@dataclass
class RunManifest:
    scenario_name: str
    scenario_sha256: str
    seed: int
    version: str
    runtime_s: float
    outputs: dict
    settings: dict
    summary: dict = field(default_factory=dict, repr=False)

    def to_json(self):
        d = asdict(self)
        d.pop("summary")
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @property
    def checksums(self):
        return dict(self.outputs)


def _child_seeds(seed, n):
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def _routes(topology, transmittance=0.5):
    if topology == "cross":
        return Route.direct(1), Route.direct(2)
    if topology == "hbt-signal":
        return Route.split(2, 3, transmittance), Route([])
    if topology == "hbt-idler":
        return Route([]), Route.split(2, 3, transmittance)
    return Route.direct(1), Route.split(2, 3, transmittance)


def simulate_topology(scenario, topology, pump_mW, duration, seed):
    """Detected streams (channel -> EventStream) for one topology."""
    s_route, i_route = _routes(topology)
    dets = {DETECTORS[d]: scenario.detectors[d] for d in _NEEDS[topology]}
    return simulate_detection(scenario.source_config(pump_mW, duration, seed), s_route, i_route, dets)


def _curve_section(curve):
    wing, wing_sigma = curve.wing_stats()
    return {"peak_g2": curve.peak_value, "peak_g2_sigma": curve.peak_sigma,
            "peak_tau_ps": curve.peak_tau, "fwhm_ns": curve.fwhm / 1000.0,
            "wing_mean_g2": wing, "wing_mean_g2_sigma": wing_sigma, "bin_ps": curve.bin_width}


def _fit_section(curve):
    try:
        f = gaussian_fit(curve)
    except FitError as exc:
        return {"fit_error": str(exc)}
    return {"fit_baseline": f.baseline, "fit_amplitude": f.amplitude, "fit_center_ps": f.center,
            "fit_sigma_ps": f.sigma, "fit_g2_zero": f.g2_zero, "fit_residual_rms": f.residual_rms}


def analyze_topology(scenario, topology, streams, workers=None):
    """Run the configured analysis; returns (summary section, {suffix: curve})."""
    a = scenario.analysis
    curves = {}
    if topology == "cross":
        d1, d2 = streams[1], streams[2]
        curve, _ = cross_correlation(d1, d2, a.resolution_ps, a.range_ps, a.rebin_ps, a.mode, workers)
        rep = rate_report(d1, d2, a.coincidence_window_ns * 1e-9, a.dead_time_correction_ns * 1e-9,
                          workers=workers)
        sec = _curve_section(curve)
        if a.fit:
            sec.update(_fit_section(curve))
        sec.update({"singles_signal_measured_cps": rep.measured_s,
                    "singles_idler_measured_cps": rep.measured_i,
                    "singles_signal_cps": rep.n_s, "singles_idler_cps": rep.n_i,
                    "coincidence_raw_cps": rep.raw_coincidence,
                    "coincidence_accidental_cps": rep.accidental,
                    "coincidence_net_cps": rep.n_c, "coincidence_net_sigma_cps": rep.sigma_n_c,
                    "coincidence_window_ns": a.coincidence_window_ns,
                    "pair_rate_estimate_hz": rep.n_pair_estimate,
                    "heralding_signal": rep.heralding_s, "heralding_idler": rep.heralding_i})
        curves["g2"] = curve
        return sec, curves
    if topology.startswith("hbt"):
        half = max(abs(a.range_ps[0]), abs(a.range_ps[1]))
        n_side = max(1, half // a.rebin_ps)
        rng = centered_range(0, a.rebin_ps, n_side)
        curve = auto_correlation(streams[2], streams[3], a.resolution_ps, rng, a.rebin_ps, a.mode, workers)
        sec = _curve_section(curve)
        if a.fit:
            sec.update(_fit_section(curve))
        sec.update({"singles_a_cps": streams[2].rate, "singles_b_cps": streams[3].rate})
        curves["g2"] = curve
        return sec, curves
    rep = heralded_analysis(streams[1], streams[2], streams[3], a.herald_window_ns * 1e-9,
                            a.herald_bin_ps, a.herald_side_bins, workers)
    T = streams[1].duration
    g_c_curve = rep.g_c
    sec = {"g_c0": rep.g_c0, "g_c0_sigma": rep.sigma_g_c0,
           "g_sii_peak": rep.g_sii_peak, "g_sii_peak_sigma": rep.sigma_g_sii_peak,
           "herald_singles_cps": rep.r0 / T, "herald_coincidence_cps": rep.n_si1_0 / T,
           "herald_offset_ps": rep.herald_offset, "probe_center_ps": rep.probe_center,
           "herald_window_ns": a.herald_window_ns, "bin_ps": a.herald_bin_ps,
           "probe_singles_cps": streams[3].rate}
    curves["gC"] = g_c_curve
    curves["gSII"] = rep.g_sii
    return sec, curves


def _cauchy_schwarz(summary):
    try:
        c, s, i = summary["cross"], summary["hbt-signal"], summary["hbt-idler"]
        R, sR = cauchy_schwarz_R(c["peak_g2"], s["peak_g2"], i["peak_g2"],
                                 c["peak_g2_sigma"], s["peak_g2_sigma"], i["peak_g2_sigma"])
    except (KeyError, ValueError):
        return None
    return {"R": R, "R_sigma": sR}


_SWEEP_COLUMNS = {
    "cross": ("singles_signal_cps", "singles_idler_cps", "coincidence_net_cps",
              "coincidence_net_sigma_cps", "pair_rate_estimate_hz", "heralding_signal",
              "heralding_idler", "peak_g2"),
    "hbt-signal": ("peak_g2", "peak_g2_sigma"),
    "hbt-idler": ("peak_g2", "peak_g2_sigma"),
    "conditional": ("g_c0", "g_c0_sigma", "g_sii_peak", "g_sii_peak_sigma", "herald_singles_cps",
                    "herald_coincidence_cps"),
}


def apply_overrides(scenario, resolution_ps=None, window_ns=None, rebin_ps=None):
    """Command-line overrides; ``window_ns`` sets the coincidence and herald windows."""
    a = scenario.analysis
    if resolution_ps is not None:
        a.resolution_ps = int(resolution_ps)
    if rebin_ps is not None:
        a.rebin_ps = int(rebin_ps)
    if window_ns is not None:
        if not window_ns > 0:
            raise ConfigError("window must be positive", field="--window-ns")
        a.coincidence_window_ns = float(window_ns)
        a.herald_window_ns = float(window_ns)
    if resolution_ps is not None and resolution_ps < 1:
        raise ConfigError("resolution must be at least 1 ps", field="--resolution-ps")
    try:
        check_analysis(scenario)
    except ConfigError as exc:
        raise ConfigError(str(exc).split("] ", 1)[-1], field=exc.field) from None
    return scenario


def run_scenario(scenario, out_dir=".", seed=None, full=False, resolution_ps=None, window_ns=None,
                 rebin_ps=None, workers=None, analyze=True, write_events=None):
    """Simulate (or load) streams, analyze them and write outputs plus a manifest.

    Output files: ``<prefix>_<topology>_<curve>.csv`` curves, a sweep table
    when the scenario sweeps pump power, ``<prefix>_summary.toml`` and
    ``<prefix>_manifest.json``. Outputs depend only on the scenario, seed and
    overrides, never on the worker count.
    """
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    apply_overrides(scenario, resolution_ps, window_ns, rebin_ps)
    t_start = time.perf_counter()
    out_dir = Path(out_dir)
    seed = scenario.seed if seed is None else int(seed)
    write_events = scenario.write_events if write_events is None else write_events
    prefix = scenario.prefix
    written = {}

    def emit(fname, text):
        path = pio.atomic_write(out_dir / fname, text)
        written[fname] = pio.sha256_file(path)

    def emit_events(fname, streams):
        path = pio.write_events(out_dir / fname, streams)
        written[fname] = pio.sha256_file(path)

    summary = {"scenario": {"name": scenario.name, "seed": seed, "topology": scenario.topologies,
                            "pump_mW": scenario.pump_mW,
                            "pair_rate_hz": scenario.pair_rate_per_mW * scenario.pump_mW,
                            "full": bool(full)}}

    if scenario.sweep_pump_mW is not None:
        durations = ([scenario.full_duration_s] * len(scenario.sweep_pump_mW) if full
                     else scenario.sweep_duration_s)
        seeds = _child_seeds(seed, len(scenario.sweep_pump_mW) * len(scenario.topologies))
        columns = ["pump_mW", "pair_rate_hz", "duration_s"]
        for t in scenario.topologies:
            columns += [f"{t}.{c}" for c in _SWEEP_COLUMNS[t]]
        rows = []
        k = 0
        for pump, dur in zip(scenario.sweep_pump_mW, durations):
            row = [pump, scenario.pair_rate_per_mW * pump, dur]
            for t in scenario.topologies:
                streams = simulate_topology(scenario, t, pump, dur, seeds[k])
                k += 1
                if write_events:
                    emit_events(f"{prefix}_{t}_{pump:g}mW.ppes", streams)
                if analyze:
                    sec, _ = analyze_topology(scenario, t, streams, workers)
                    row += [sec[c] for c in _SWEEP_COLUMNS[t]]
            rows.append(row)
        if analyze:
            emit(f"{prefix}_sweep.csv", pio.table_csv_text(columns, rows))
            summary["sweep"] = {"columns": columns, "rows": rows}
    else:
        duration = scenario.full_duration_s if full else scenario.duration_s
        seeds = _child_seeds(seed, len(scenario.topologies))
        for t, s in zip(scenario.topologies, seeds):
            if scenario.input_events is not None:
                streams = pio.read_events(scenario.input_events, scenario.input_duration_s)
                for dname in _NEEDS[t]:
                    if DETECTORS[dname] not in streams:
                        raise InputError(f"input file has no events on channel {DETECTORS[dname]} ({dname})")
            else:
                streams = simulate_topology(scenario, t, scenario.pump_mW, duration, s)
            if write_events:
                emit_events(f"{prefix}_{t}.ppes", streams)
            if analyze:
                sec, curves = analyze_topology(scenario, t, streams, workers)
                sec["duration_s"] = streams[min(streams)].duration
                summary[t] = sec
                for suffix, curve in curves.items():
                    emit(f"{prefix}_{t}_{suffix}.csv", pio.curve_csv_text(curve))
        cs = _cauchy_schwarz(summary)
        if cs:
            summary["cauchy_schwarz"] = cs

    if analyze:
        emit(f"{prefix}_summary.toml", pio.summary_text(summary))
    settings = {"full": bool(full), "resolution_ps": scenario.analysis.resolution_ps,
                "rebin_ps": scenario.analysis.rebin_ps,
                "coincidence_window_ns": scenario.analysis.coincidence_window_ns,
                "herald_window_ns": scenario.analysis.herald_window_ns}
    manifest = RunManifest(scenario.name, scenario.sha256, seed, __version__,
                           time.perf_counter() - t_start, dict(sorted(written.items())), settings,
                           summary)
    pio.atomic_write(out_dir / f"{prefix}_manifest.json", manifest.to_json())
    return manifest
