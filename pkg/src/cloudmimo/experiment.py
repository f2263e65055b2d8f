"""Monte Carlo experiment runner, aggregation, and run artifacts.

Every experiment draws a fresh static cloud field per trial (capacity and
correlation studies are snapshot studies), traces the antenna-pair rays of
the configured link through it, and feeds the accumulated cloud phases into
the LoS MIMO channel.  Per-trial random streams derive deterministically
from the master seed and the trial index, so results are reproducible and
independent of worker parallelism.

Runs write two artifacts: ``results.csv`` with plot-ready columns and
``manifest.json`` with the full configuration, which can be fed back as a
config file to reproduce the run byte for byte.
"""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy import stats as sstats

from .analyticmodel import (AnalyticParams, PhaseDistribution, laplace_pdf,
                            stationary_distribution)
from .cloudfield import CloudConfig, cloudlet_radius, generate_field
from .errors import ConfigurationError
from .mimochannel import (ChannelMatrix, MimoScenario, capacity_bits,
                          los_channel, subchannel_correlation)
from .phasephysics import (SPEED_OF_LIGHT, PathPhase, PhysicsParams,
                           mixture_coefficient, path_phase)
from .raygeometry import LinkGeometry, broadside_link, build_rays, \
    map_rays_to_field

# Relative water content of 1 corresponds to this ice water content bound.
MAX_WATER_CONTENT = 0.6   # [g/m^3]

# Reference per-round complexity figures for the operation-count mode: the
# cloudlet model at the 20 m x 1000 m configuration, and a grid-interpolation
# cloud simulator at 500 m^2 coverage for context.
REFERENCE_MAC_PER_ROUND = 10367
GRID_MODEL_REFERENCE_MAC = 5391772

MODES = ("field", "phase-dist", "capacity-cdf", "correlation",
         "compensated", "phase-compare", "mac-count")


# ============================================================
# Experiment specification
# ============================================================

@dataclasses.dataclass(frozen=True)
class ExperimentSpec:
    """Complete, reproducible description of one experiment run."""

    scenario: MimoScenario
    cloud: CloudConfig
    physics: PhysicsParams
    elevation_deg: float = 90.0            # link elevation [deg]
    cloud_upper_altitude: float = 8000.0   # layer top altitude [m]
    mode: str = "capacity-cdf"
    trials: int = 10000
    master_seed: int = 0
    sweep_rwc: tuple | None = None         # relative water content values
    sweep_thickness: tuple | None = None   # layer thickness values [m]
    distance_grid: tuple | None = None     # link distances [m]
    dt: float = 0.0                        # drift interval for reports [s]
    outage_probability: float = 0.5
    threads: int = 1                       # execution hint, never affects results

    def __post_init__(self) -> None:
        problems = []
        if self.mode not in MODES:
            problems.append(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.trials < 1:
            problems.append(f"trials must be >= 1, got {self.trials}")
        if not (0.0 < self.outage_probability <= 1.0):
            problems.append(
                f"outage_probability must be in (0, 1], got "
                f"{self.outage_probability}")
        if self.dt < 0.0:
            problems.append(f"dt must be >= 0, got {self.dt}")
        if self.threads < 1:
            problems.append(f"threads must be >= 1, got {self.threads}")
        if self.sweep_rwc is not None and self.sweep_thickness is not None:
            problems.append("sweep_rwc and sweep_thickness are exclusive")
        if self.sweep_rwc is not None:
            if any(v < 0.0 for v in self.sweep_rwc):
                problems.append("relative water content values must be >= 0")
            object.__setattr__(self, "sweep_rwc", tuple(self.sweep_rwc))
        if self.sweep_thickness is not None:
            if any(v <= 0.0 for v in self.sweep_thickness):
                problems.append("thickness sweep values must be > 0")
            object.__setattr__(self, "sweep_thickness",
                               tuple(self.sweep_thickness))
        if self.distance_grid is not None:
            if any(v <= 0.0 for v in self.distance_grid):
                problems.append("distance grid values must be > 0")
            object.__setattr__(self, "distance_grid",
                               tuple(self.distance_grid))
        if self.mode in ("correlation", "compensated") \
                and self.distance_grid is None:
            problems.append(f"mode {self.mode!r} needs a distance grid")
        freq_gap = abs(self.scenario.carrier_frequency
                       - self.physics.carrier_frequency)
        if freq_gap > 1e-6 * self.physics.carrier_frequency:
            problems.append(
                "scenario and physics carrier frequencies disagree")
        if problems:
            raise ConfigurationError("; ".join(problems))


def trial_seed(master_seed: int, trial: int) -> int:
    """Deterministic per-trial seed derived from the master seed."""
    words = np.random.SeedSequence([master_seed, trial]).generate_state(2)
    return int(words[0]) << 32 | int(words[1])


def _apply_rwc(cloud: CloudConfig, rwc: float) -> CloudConfig:
    return dataclasses.replace(cloud, max_iwc_c=rwc * MAX_WATER_CONTENT)


def _link_for(spec: ExperimentSpec, distance: float,
              thickness: float) -> LinkGeometry:
    return broadside_link(
        num_tx=spec.scenario.num_tx, num_rx=spec.scenario.num_rx,
        tx_spacing=spec.scenario.tx_spacing,
        rx_spacing=spec.scenario.rx_spacing,
        link_distance=distance, elevation_deg=spec.elevation_deg,
        cloud_upper_altitude=spec.cloud_upper_altitude,
        layer_thickness=thickness)


def _segments_for(spec: ExperimentSpec, cloud: CloudConfig,
                  distance: float):
    link = _link_for(spec, distance, cloud.thickness_d)
    segments = map_rays_to_field(build_rays(link), link, cloud)
    engaged = any(seg.length > 0.0 for seg in segments)
    return segments, engaged


def _run_trials(worker, trials: int, threads: int) -> list:
    if threads <= 1:
        return [worker(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(trials)))


# ============================================================
# Capacity CDF
# ============================================================

@dataclasses.dataclass(frozen=True)
class CapacityCdf:
    """Sorted per-trial capacity samples of one sweep point."""

    samples: np.ndarray   # ascending [bit/s/Hz]
    trial_count: int


def outage_capacity(cdf: CapacityCdf, p: float) -> float:
    """Nearest-rank lower quantile of the capacity samples."""
    if not (0.0 < p <= 1.0):
        raise ConfigurationError(f"outage probability must be in (0, 1], got {p}")
    if cdf.trial_count == 0:
        raise ConfigurationError("empty capacity CDF has no quantiles")
    rank = max(int(math.ceil(p * cdf.trial_count)), 1)
    return float(cdf.samples[rank - 1])


@dataclasses.dataclass(frozen=True)
class SweepPoint:
    parameter: str     # "rwc", "thickness_m" or "none"
    value: float
    cdf: CapacityCdf


def run_capacity_cdf(spec: ExperimentSpec) -> list[SweepPoint]:
    """Per-trial capacities for each sweep point of the configured sweep.

    A relative-water-content sweep rescales the ice water content bound; a
    thickness sweep rebuilds the layer (and the in-layer geometry) per
    value.  Without a sweep a single point at the configured cloud runs.
    """
    if spec.sweep_rwc is not None:
        points = [("rwc", v, _apply_rwc(spec.cloud, v)) for v in spec.sweep_rwc]
    elif spec.sweep_thickness is not None:
        points = [("thickness_m", v,
                   dataclasses.replace(spec.cloud, thickness_d=v))
                  for v in spec.sweep_thickness]
    else:
        points = [("none", 0.0, spec.cloud)]
    out = []
    for name, value, cloud in points:
        segments, _ = _segments_for(spec, cloud, spec.scenario.link_distance)

        def one_trial(t: int, cloud=cloud, segments=segments) -> float:
            field = generate_field(dataclasses.replace(
                cloud, rng_seed=trial_seed(spec.master_seed, t)))
            phases = path_phase(field, segments, spec.physics)
            return capacity_bits(los_channel(spec.scenario, phases),
                                 spec.scenario.snr_db)

        caps = np.array(_run_trials(one_trial, spec.trials, spec.threads))
        out.append(SweepPoint(parameter=name, value=value,
                              cdf=CapacityCdf(samples=np.sort(caps),
                                              trial_count=spec.trials)))
    return out


# ============================================================
# Correlation and compensated-capacity distance sweeps
# ============================================================

@dataclasses.dataclass(frozen=True)
class DistanceSweepResult:
    """Per-distance ensemble summaries plus raw per-trial values."""

    distances: np.ndarray
    with_cloud: np.ndarray      # ensemble summary with cloud
    without_cloud: np.ndarray   # deterministic no-cloud value
    engaged: np.ndarray         # bool: any ray touches the layer
    trial_values: list          # per distance: (trials,) array or None


def _distance_scenario(spec: ExperimentSpec, distance: float,
                       compensated: bool | None = None) -> MimoScenario:
    scen = dataclasses.replace(spec.scenario, link_distance=distance)
    if compensated is not None:
        scen = dataclasses.replace(scen, compensated=compensated)
    return scen


def run_correlation_sweep(spec: ExperimentSpec) -> DistanceSweepResult:
    """Sub-channel correlation with and without cloud over a distance grid.

    Distances where no ray reaches the layer reuse the no-cloud value
    exactly; engaged distances average the per-trial coherence over the
    ensemble of cloud realizations.
    """
    distances = np.array(spec.distance_grid, dtype=float)
    with_cloud = np.zeros_like(distances)
    without = np.zeros_like(distances)
    engaged = np.zeros(distances.shape, dtype=bool)
    trial_values: list = []
    for i, d in enumerate(distances):
        scen = _distance_scenario(spec, float(d))
        clear = subchannel_correlation([los_channel(scen)])
        segments, hit = _segments_for(spec, spec.cloud, float(d))
        without[i] = clear
        engaged[i] = hit
        if not hit:
            with_cloud[i] = clear
            trial_values.append(None)
            continue

        def one_trial(t: int, scen=scen, segments=segments) -> float:
            field = generate_field(dataclasses.replace(
                spec.cloud, rng_seed=trial_seed(spec.master_seed, t)))
            phases = path_phase(field, segments, spec.physics)
            return subchannel_correlation([los_channel(scen, phases)])

        vals = np.array(_run_trials(one_trial, spec.trials, spec.threads))
        with_cloud[i] = float(vals[0]) if np.all(vals == vals[0]) \
            else float(vals.mean())
        trial_values.append(vals)
    return DistanceSweepResult(distances=distances, with_cloud=with_cloud,
                               without_cloud=without, engaged=engaged,
                               trial_values=trial_values)


def run_compensated_sweep(spec: ExperimentSpec) -> DistanceSweepResult:
    """Median compensated capacity with and without cloud over distances.

    Gains are forced to unity so only phase structure drives the capacity;
    the no-cloud capacity at each distance is deterministic.
    """
    distances = np.array(spec.distance_grid, dtype=float)
    with_cloud = np.zeros_like(distances)
    without = np.zeros_like(distances)
    engaged = np.zeros(distances.shape, dtype=bool)
    trial_values: list = []
    for i, d in enumerate(distances):
        scen = _distance_scenario(spec, float(d), compensated=True)
        clear = capacity_bits(los_channel(scen), scen.snr_db)
        segments, hit = _segments_for(spec, spec.cloud, float(d))
        without[i] = clear
        engaged[i] = hit
        if not hit:
            with_cloud[i] = clear
            trial_values.append(None)
            continue

        def one_trial(t: int, scen=scen, segments=segments) -> float:
            field = generate_field(dataclasses.replace(
                spec.cloud, rng_seed=trial_seed(spec.master_seed, t)))
            phases = path_phase(field, segments, spec.physics)
            return capacity_bits(los_channel(scen, phases), scen.snr_db)

        vals = np.array(_run_trials(one_trial, spec.trials, spec.threads))
        with_cloud[i] = float(np.median(vals))
        trial_values.append(vals)
    return DistanceSweepResult(distances=distances, with_cloud=with_cloud,
                               without_cloud=without, engaged=engaged,
                               trial_values=trial_values)


# ============================================================
# Monte Carlo vs analytic phase comparison
# ============================================================

@dataclasses.dataclass(frozen=True)
class PhaseCompareResult:
    """Empirical single-ray phase statistics beside the analytic model."""

    samples: np.ndarray
    empirical_mean: float
    empirical_variance: float
    empirical_excess_kurtosis: float
    cloudlet_counts: np.ndarray
    analytic: PhaseDistribution
    ks_distance: float
    bin_centres: np.ndarray
    empirical_density: np.ndarray
    analytic_density: np.ndarray


def run_phase_compare(spec: ExperimentSpec) -> PhaseCompareResult:
    """Histogram the Monte Carlo single-ray phase against the Laplace model.

    One centre ray is traced per trial through a fresh field.  This is a
    pure comparison: the analytic constants were fitted elsewhere, so no
    agreement is enforced, only measured.
    """
    link = broadside_link(
        num_tx=1, num_rx=1, tx_spacing=0.0, rx_spacing=0.0,
        link_distance=spec.scenario.link_distance,
        elevation_deg=spec.elevation_deg,
        cloud_upper_altitude=spec.cloud_upper_altitude,
        layer_thickness=spec.cloud.thickness_d)
    segments = map_rays_to_field(build_rays(link), link, spec.cloud)

    def one_trial(t: int) -> tuple[float, int]:
        field = generate_field(dataclasses.replace(
            spec.cloud, rng_seed=trial_seed(spec.master_seed, t)))
        result = path_phase(field, segments, spec.physics)
        return float(result.per_ray_phase[0]), \
            int(result.per_ray_cloudlet_count[0])

    pairs = _run_trials(one_trial, spec.trials, spec.threads)
    samples = np.array([p for p, _ in pairs])
    counts = np.array([k for _, k in pairs])
    analytic = stationary_distribution(AnalyticParams(spec.cloud, spec.physics))

    if analytic.sigma_c2 > 0.0:
        scale = math.sqrt(analytic.sigma_c2 / 2.0)
        ks = float(sstats.kstest(samples, sstats.laplace(
            loc=analytic.phi0, scale=scale).cdf).statistic)
    else:
        # Point-mass reference: the KS distance is the worst-case gap
        # between the empirical CDF and a unit step at phi0.
        below = float(np.mean(samples < analytic.phi0))
        at_or_below = float(np.mean(samples <= analytic.phi0))
        ks = max(below, 1.0 - at_or_below)

    lo, hi = float(samples.min()), float(samples.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    density, edges = np.histogram(samples, bins=101, range=(lo, hi),
                                  density=True)
    centres = (edges[:-1] + edges[1:]) / 2.0
    if analytic.sigma_c2 > 0.0:
        analytic_density = np.asarray(laplace_pdf(centres, analytic))
    else:
        analytic_density = np.zeros_like(centres)
    return PhaseCompareResult(
        samples=samples, empirical_mean=float(samples.mean()),
        empirical_variance=float(samples.var()),
        empirical_excess_kurtosis=float(sstats.kurtosis(samples)),
        cloudlet_counts=counts, analytic=analytic, ks_distance=ks,
        bin_centres=centres, empirical_density=density,
        analytic_density=analytic_density)


# ============================================================
# Operation counting
# ============================================================

@dataclasses.dataclass(frozen=True)
class MacCountResult:
    """Average multiply-accumulate count per simulation round.

    One round is one field generation plus one ray's phase accrual.  The
    counting convention: every scalar multiply, multiply-add, division and
    random draw counts one; additions, comparisons and square roots are
    free.
    """

    per_round: np.ndarray
    average: float
    rounds: int
    reference: int = REFERENCE_MAC_PER_ROUND
    grid_model_reference: int = GRID_MODEL_REFERENCE_MAC

    @property
    def within_order_of_magnitude(self) -> bool:
        if self.average <= 0.0:
            return False
        ratio = self.reference / self.average
        return 0.1 <= ratio <= 10.0


def _instrumented_round(cloud: CloudConfig, segment, physics: PhysicsParams,
                        seed: int) -> tuple[int, float]:
    """Scalar mirror of one generation + single-ray phase round.

    Re-implements the production arithmetic operation by operation with an
    explicit counter so the count reflects work actually performed; the
    returned phase must (and does, see tests) match the vectorized path.
    """
    mac = 0
    rng = np.random.default_rng(seed)
    ratio = cloud.thickness_d / cloud.max_thickness_dmax
    mac += 1                                     # thickness ratio division
    radius = cloud.smoothness_alpha * cloud.width_w * math.sqrt(ratio) / 2.0
    mac += 3                                     # two multiplies, one division
    mean = cloud.density_lambda_s * cloud.width_w * cloud.thickness_d
    mac += 2
    n = int(rng.poisson(mean))
    mac += 1                                     # one draw
    xs = rng.uniform(0.0, cloud.width_w, n)
    ys = rng.uniform(0.0, cloud.thickness_d, n)
    iwc = rng.uniform(0.0, cloud.max_iwc_c, n)
    mac += 6 * n                                 # three draws + three scalings

    eps = physics.ice_permittivity_real
    coef = (3.0 * physics.sphere_density_n * physics.sphere_volume_vice
            * (1.0 / 0.6) * (eps - 1.0) / (eps + 1.0))
    mac += 6
    lam0 = SPEED_OF_LIGHT / physics.carrier_frequency
    k0 = 2.0 * math.pi / lam0
    mac += 3
    r2 = radius * radius
    mac += 1

    ax, ay = float(segment.start[0]), float(segment.start[1])
    length = segment.length
    phi = 0.0
    if length > 0.0:
        ux = (float(segment.end[0]) - ax) / length
        uy = (float(segment.end[1]) - ay) / length
        mac += 2
        for j in range(n):
            wx = xs[j] - ax
            wy = ys[j] - ay
            t = wx * ux + wy * uy
            mac += 2
            perp2 = wx * wx + wy * wy - t * t
            mac += 3
            half2 = r2 - perp2
            if half2 <= 0.0:
                continue
            half = math.sqrt(half2)
            s_lo = max(t - half, 0.0)
            s_hi = min(t + half, length)
            chord = s_hi - s_lo
            if chord <= 0.0:
                continue
            eps_c = coef * iwc[j]
            phi += k0 * chord * eps_c
            mac += 3
    return mac, phi


def run_mac_count(spec: ExperimentSpec) -> MacCountResult:
    """Average the instrumented per-round operation count over many rounds."""
    link = broadside_link(
        num_tx=1, num_rx=1, tx_spacing=0.0, rx_spacing=0.0,
        link_distance=spec.scenario.link_distance,
        elevation_deg=spec.elevation_deg,
        cloud_upper_altitude=spec.cloud_upper_altitude,
        layer_thickness=spec.cloud.thickness_d)
    segment = map_rays_to_field(build_rays(link), link, spec.cloud)[0]
    counts = np.zeros(spec.trials, dtype=np.int64)
    for t in range(spec.trials):
        counts[t], _ = _instrumented_round(
            spec.cloud, segment, spec.physics,
            trial_seed(spec.master_seed, t))
    return MacCountResult(per_round=counts, average=float(counts.mean()),
                          rounds=spec.trials)


# ============================================================
# Run artifacts
# ============================================================

def spec_to_flat(spec: ExperimentSpec) -> dict:
    """Flatten a spec to the dotted-key config mapping used everywhere."""
    def fmt_list(values):
        return None if values is None else list(values)

    return {
        "cloud.width_w": spec.cloud.width_w,
        "cloud.thickness_d": spec.cloud.thickness_d,
        "cloud.max_thickness_dmax": spec.cloud.max_thickness_dmax,
        "cloud.lambda_s": spec.cloud.density_lambda_s,
        "cloud.alpha": spec.cloud.smoothness_alpha,
        "cloud.max_iwc_c": spec.cloud.max_iwc_c,
        "cloud.drift_speed_vb": spec.cloud.drift_speed_vb,
        "physics.sphere_density_n": spec.physics.sphere_density_n,
        "physics.sphere_volume_vice": spec.physics.sphere_volume_vice,
        "physics.ice_permittivity_real": spec.physics.ice_permittivity_real,
        "physics.carrier_frequency_hz": spec.physics.carrier_frequency,
        "mimo.num_tx": spec.scenario.num_tx,
        "mimo.num_rx": spec.scenario.num_rx,
        "mimo.tx_spacing_m": spec.scenario.tx_spacing,
        "mimo.rx_spacing_m": spec.scenario.rx_spacing,
        "mimo.snr_db": spec.scenario.snr_db,
        "mimo.compensated": spec.scenario.compensated,
        "link.distance_m": spec.scenario.link_distance,
        "link.elevation_deg": spec.elevation_deg,
        "link.cloud_upper_altitude_m": spec.cloud_upper_altitude,
        "run.mode": spec.mode,
        "run.trials": spec.trials,
        "run.master_seed": spec.master_seed,
        "run.sweep_rwc": fmt_list(spec.sweep_rwc),
        "run.sweep_thickness_m": fmt_list(spec.sweep_thickness),
        "run.distance_grid_m": fmt_list(spec.distance_grid),
        "run.dt_s": spec.dt,
        "run.outage_probability": spec.outage_probability,
    }


def spec_from_flat(flat: dict, threads: int = 1) -> ExperimentSpec:
    """Build a spec from the dotted-key mapping (inverse of spec_to_flat)."""
    def tup(key):
        value = flat.get(key)
        return None if value is None else tuple(float(v) for v in value)

    cloud = CloudConfig(
        width_w=float(flat["cloud.width_w"]),
        thickness_d=float(flat["cloud.thickness_d"]),
        max_thickness_dmax=float(flat["cloud.max_thickness_dmax"]),
        density_lambda_s=float(flat["cloud.lambda_s"]),
        smoothness_alpha=float(flat["cloud.alpha"]),
        max_iwc_c=float(flat["cloud.max_iwc_c"]),
        drift_speed_vb=float(flat["cloud.drift_speed_vb"]),
        rng_seed=int(flat["run.master_seed"]))
    physics = PhysicsParams(
        sphere_density_n=float(flat["physics.sphere_density_n"]),
        sphere_volume_vice=float(flat["physics.sphere_volume_vice"]),
        ice_permittivity_real=float(flat["physics.ice_permittivity_real"]),
        carrier_frequency=float(flat["physics.carrier_frequency_hz"]))
    scenario = MimoScenario(
        num_tx=int(flat["mimo.num_tx"]), num_rx=int(flat["mimo.num_rx"]),
        tx_spacing=float(flat["mimo.tx_spacing_m"]),
        rx_spacing=float(flat["mimo.rx_spacing_m"]),
        carrier_frequency=float(flat["physics.carrier_frequency_hz"]),
        snr_db=float(flat["mimo.snr_db"]),
        link_distance=float(flat["link.distance_m"]),
        compensated=bool(flat["mimo.compensated"]))
    return ExperimentSpec(
        scenario=scenario, cloud=cloud, physics=physics,
        elevation_deg=float(flat["link.elevation_deg"]),
        cloud_upper_altitude=float(flat["link.cloud_upper_altitude_m"]),
        mode=str(flat["run.mode"]), trials=int(flat["run.trials"]),
        master_seed=int(flat["run.master_seed"]),
        sweep_rwc=tup("run.sweep_rwc"),
        sweep_thickness=tup("run.sweep_thickness_m"),
        distance_grid=tup("run.distance_grid_m"),
        dt=float(flat["run.dt_s"]),
        outage_probability=float(flat["run.outage_probability"]),
        threads=threads)


def format_csv(header: str, rows) -> str:
    """Render rows with shortest round-trip decimals for byte stability."""
    lines = [header]
    for row in rows:
        lines.append(",".join(
            repr(float(v)) if isinstance(v, (float, np.floating))
            else str(v) for v in row))
    return "\n".join(lines) + "\n"


def results_csv_text(spec: ExperimentSpec, result) -> str:
    """Plot-ready CSV body for any experiment result."""
    if spec.mode == "capacity-cdf":
        rows = []
        for point in result:
            for sample in point.cdf.samples:
                rows.append((point.parameter, float(point.value),
                             float(sample)))
        return format_csv("sweep,sweep_value,capacity_bps_hz", rows)
    if spec.mode == "correlation":
        rows = [(float(d), float(w), float(c)) for d, w, c in
                zip(result.distances, result.with_cloud,
                    result.without_cloud)]
        return format_csv("distance_m,corr_cloud,corr_clear", rows)
    if spec.mode == "compensated":
        rows = [(float(d), float(w), float(c)) for d, w, c in
                zip(result.distances, result.with_cloud,
                    result.without_cloud)]
        return format_csv(
            "distance_m,median_capacity_cloud_bps_hz,"
            "median_capacity_clear_bps_hz", rows)
    if spec.mode == "phase-compare":
        rows = [(float(p), float(e), float(a)) for p, e, a in
                zip(result.bin_centres, result.empirical_density,
                    result.analytic_density)]
        return format_csv("phi_rad,empirical_density,analytic_density", rows)
    if spec.mode == "mac-count":
        rows = [(i, int(c)) for i, c in enumerate(result.per_round)]
        return format_csv("round,mac_count", rows)
    raise ConfigurationError(f"mode {spec.mode!r} has no CSV writer here")


def run_report(spec: ExperimentSpec, result) -> dict:
    """Mode-specific summary embedded in the manifest."""
    if spec.mode == "capacity-cdf":
        return {
            "points": [{
                "parameter": point.parameter, "value": point.value,
                "median_bps_hz": outage_capacity(point.cdf, 0.5),
                "outage_bps_hz": outage_capacity(
                    point.cdf, spec.outage_probability),
                "outage_probability": spec.outage_probability,
            } for point in result],
        }
    if spec.mode in ("correlation", "compensated"):
        return {
            "distances_m": [float(v) for v in result.distances],
            "with_cloud": [float(v) for v in result.with_cloud],
            "without_cloud": [float(v) for v in result.without_cloud],
            "engaged": [bool(v) for v in result.engaged],
        }
    if spec.mode == "phase-compare":
        return {
            "empirical": {
                "mean_rad": result.empirical_mean,
                "variance_rad2": result.empirical_variance,
                "excess_kurtosis": result.empirical_excess_kurtosis,
                "mean_cloudlet_count": float(result.cloudlet_counts.mean()),
            },
            "analytic": {
                "phi0_rad": result.analytic.phi0,
                "sigma_c2_rad2": result.analytic.sigma_c2,
                "excess_kurtosis": 3.0,
            },
            "ks_distance": result.ks_distance,
            "note": ("comparison only: the analytic constants were fitted "
                     "to measurements that are not available here"),
        }
    if spec.mode == "mac-count":
        return {
            "average_mac_per_round": result.average,
            "rounds": result.rounds,
            "reference_mac_per_round": result.reference,
            "grid_model_reference_mac": result.grid_model_reference,
            "within_order_of_magnitude": result.within_order_of_magnitude,
            "scope": ("one round = one field generation plus one ray's "
                      "phase accrual"),
            "convention": ("multiplies, multiply-adds, divisions and random "
                           "draws count 1; additions, comparisons and "
                           "square roots count 0"),
        }
    return {}


ASSUMED_PARAMETER_KEYS = (
    "cloud.alpha", "physics.sphere_density_n",
    "physics.sphere_volume_vice", "physics.ice_permittivity_real",
)


def build_manifest(spec: ExperimentSpec, report: dict,
                   explicit_keys=(), wall_time_s: float = 0.0,
                   version: str = "0.1.0") -> dict:
    """Manifest that reproduces the run when fed back as a config."""
    flat = spec_to_flat(spec)
    assumed = {key: flat[key] for key in ASSUMED_PARAMETER_KEYS
               if key not in set(explicit_keys)}
    return {
        "tool": "cloudmimo",
        "version": version,
        "mode": spec.mode,
        "config": flat,
        "quantile_convention": "nearest-rank lower",
        "geometry": ("ground array centre at altitude 0; airborne array "
                     "centre on the link ray at the configured distance and "
                     "elevation; broadside uniform linear arrays in the "
                     "vertical model plane; layer between "
                     "cloud_upper_altitude_m minus the thickness and "
                     "cloud_upper_altitude_m"),
        "assumed_defaults": assumed,
        "cloudlet_radius_m": cloudlet_radius(spec.cloud),
        "mixture_coefficient_m3_per_g": mixture_coefficient(spec.physics),
        "wall_time_s": wall_time_s,
        "report": report,
    }
