"""Experiment configuration, Monte Carlo runners, and CSV emission.

Config files are flat ``key = value`` text ('#' starts a comment).  A
config plus its seed determines every random draw: trial t of sweep point
p uses the generator keyed by (seed, p, t), so results are identical for
any worker count or scheduling.  Stopping decisions happen only at batch
boundaries, which keeps the trial count itself deterministic.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    ConfigError,
    CPScheme,
    FrameParams,
    RngStream,
    complex_gaussian,
    constellation_by_name,
    map_bits,
    vec,
)
from .channel import (
    PowerDelayProfile,
    apply_td,
    build_effective_dd,
    build_effective_ofdm,
    build_effective_td,
    dd_coupling_coeff,
    identity_channel,
    sample_channel,
)
from .coding import DEFAULT_CODE, conv_encode, rate_from_singular_values, viterbi_decode
from .detection import FactorGraph, detect_cdid, detect_ml, detect_mmse, detect_mpa
from .estimation import DATA, PilotConfig, embed_pilot, estimate_channel, nmse, region_mask
from .modem import TimeDomainFrame, demodulate_dzt, modulate_dzt
from .pulse import rectangular_pulse
from .transforms import td_to_dd_matrix


# ---------------------------------------------------------------------------
#  Config
# ---------------------------------------------------------------------------

_COMMON_KEYS = {
    "schema": int,
    "m": int,
    "n": int,
    "delta_f": float,
    "cp_scheme": str,
    "cp_len": int,
    "constellation": str,
    "channel": str,          # rayleigh (sampled per frame) | awgn (fixed unit gain)
    "paths": int,
    "l_max": int,
    "k_max": int,
    "pdp": str,
    "pdp_exponent": float,
    "fractional_doppler": bool,
    "seed": int,
}

_RUN_KEYS = {
    "snr_db": list,
    "detector": str,
    "detector_iters": int,
    "mpa_damping": float,
    "cdid_damping": float,
    "coded": bool,
    "estimator": str,
    "pilot_amplitude": float,
    "pilot_l": int,
    "pilot_k": int,
    "threshold_factor": float,
    "min_frame_errors": int,
    "trials_cap": int,
    "batch": int,
}

_RATES_KEYS = {"snr_db": list, "rate_draws": int}

_ESTIMATE_KEYS = {
    "pilot_snr_db": list,
    "trials": int,
    "pilot_amplitude": float,
    "pilot_l": int,
    "pilot_k": int,
    "threshold_factor": float,
}

SCHEMAS = {
    "run": {**_COMMON_KEYS, **_RUN_KEYS},
    "rates": {**_COMMON_KEYS, **_RATES_KEYS},
    "estimate": {**_COMMON_KEYS, **_ESTIMATE_KEYS},
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    m: int
    n: int
    delta_f: float = 15e3
    cp_scheme: str = "reduced"
    cp_len: int = -1                  # -1 -> l_max
    constellation: str = "bpsk"
    channel: str = "rayleigh"
    paths: int = 1
    l_max: int = 0
    k_max: int = 0
    pdp: str = "uniform"
    pdp_exponent: float = 0.1
    fractional_doppler: bool = False
    seed: int = 0
    # run
    snr_db: tuple = ()
    detector: str = "mmse"
    detector_iters: int = 10
    mpa_damping: float = 0.6
    cdid_damping: float = 0.7
    coded: bool = False
    estimator: str = "perfect"
    pilot_amplitude: float = 10.0
    pilot_l: int = -1                 # -1 -> auto placement clear of wrap
    pilot_k: int = -1
    threshold_factor: float = 3.0
    min_frame_errors: int = 100
    trials_cap: int = 10000
    batch: int = 100
    # rates
    rate_draws: int = 100
    # estimate
    pilot_snr_db: tuple = ()
    trials: int = 1000

    def frame_params(self) -> FrameParams:
        cp = self.cp_len if self.cp_len >= 0 else self.l_max
        return FrameParams(self.m, self.n, self.delta_f, CPScheme(self.cp_scheme), cp)

    def profile(self) -> PowerDelayProfile:
        return PowerDelayProfile(
            kind=self.pdp,
            exponent=self.pdp_exponent,
            l_max=self.l_max,
            k_max=self.k_max,
            n_paths=self.paths,
            fractional_doppler=self.fractional_doppler,
        )

    def pilot_config(self) -> PilotConfig:
        l_p = self.pilot_l if self.pilot_l >= 0 else self.l_max
        k_p = self.pilot_k if self.pilot_k >= 0 else 2 * self.k_max
        return PilotConfig(
            pilot_pos=(l_p, k_p),
            pilot_amplitude=self.pilot_amplitude,
            l_max=self.l_max,
            k_max=self.k_max,
            threshold_factor=self.threshold_factor,
        )


def _coerce(key: str, raw: str, typ):
    raw = raw.strip()
    try:
        if typ is bool:
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is list:
            return tuple(float(v) for v in raw.replace(",", " ").split())
        return typ(raw)
    except ValueError:
        raise ConfigError(f"config key '{key}': cannot parse {raw!r} as {typ.__name__}")


def parse_config(text: str, kind: str) -> ExperimentConfig:
    """Parse and validate a key/value config for the given experiment kind."""
    if kind not in SCHEMAS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    schema = SCHEMAS[kind]
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in schema:
            raise ConfigError(f"line {lineno}: unknown config key '{key}' for '{kind}'")
        values[key] = _coerce(key, raw, schema[key])
    if values.pop("schema", 1) != 1:
        raise ConfigError("unsupported config schema version")
    for req in ("m", "n"):
        if req not in values:
            raise ConfigError(f"missing required config key '{req}'")
    cfg = ExperimentConfig(kind=kind, **values)
    if kind == "run" and not cfg.snr_db:
        raise ConfigError("missing required config key 'snr_db'")
    if kind == "rates" and not cfg.snr_db:
        raise ConfigError("missing required config key 'snr_db'")
    if kind == "estimate" and not cfg.pilot_snr_db:
        raise ConfigError("missing required config key 'pilot_snr_db'")
    return cfg


def config_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def wilson_halfwidth(k: int, n: int, z: float = 1.96) -> float:
    """Half-width of the Wilson score interval for k successes in n trials."""
    if n == 0:
        return 0.0
    p = k / n
    denom = 1.0 + z**2 / n
    half = (z / denom) * np.sqrt(p * (1.0 - p) / n + z**2 / (4.0 * n**2))
    return float(half)


# ---------------------------------------------------------------------------
#  Detection trials
# ---------------------------------------------------------------------------

@dataclass
class TrialResult:
    bit_errors: int = 0
    bits: int = 0
    frame_error: int = 0
    bit_errors_iter1: int = 0
    nmse_sum: float = 0.0
    nmse_count: int = 0


def _data_positions(cfg: ExperimentConfig, params: FrameParams):
    if cfg.estimator == "pilot":
        mask = region_mask(cfg.pilot_config(), params)
        return np.flatnonzero(vec(mask) == DATA)
    return np.arange(params.grid_size)


def _posteriors_to_llrs(post: np.ndarray, constellation) -> np.ndarray:
    """Per-bit LLRs (positive favors bit 0) from symbol posteriors."""
    bps = constellation.bits_per_symbol
    labels = constellation.indices_to_bits(np.arange(constellation.size))
    eps = 1e-300
    llrs = np.empty((post.shape[0], bps))
    for j in range(bps):
        p0 = post[:, labels[:, j] == 0].sum(axis=1)
        p1 = post[:, labels[:, j] == 1].sum(axis=1)
        llrs[:, j] = np.log(p0 + eps) - np.log(p1 + eps)
    return np.clip(llrs.ravel(), -60.0, 60.0)


def run_detection_trial(cfg: ExperimentConfig, snr_idx: int, trial: int) -> TrialResult:
    """One full frame: draw channel and bits, transmit, detect, count errors."""
    params = cfg.frame_params()
    rng = RngStream(cfg.seed).generator(snr_idx, trial)
    constellation = constellation_by_name(cfg.constellation)
    snr_db = cfg.snr_db[snr_idx]
    noise_var = 10.0 ** (-snr_db / 10.0)

    if cfg.channel == "awgn":
        ch = identity_channel()
    elif cfg.channel == "rayleigh":
        ch = sample_channel(cfg.profile(), rng)
    else:
        raise ConfigError(f"unknown channel mode {cfg.channel!r}")
    data_pos = _data_positions(cfg, params)
    n_syms = data_pos.size
    code = DEFAULT_CODE
    if cfg.coded:
        n_info = (n_syms * constellation.bits_per_symbol) // 2 - code.memory
        if n_info <= 0:
            raise ConfigError("frame too small for the coded mode")
        info_bits = rng.integers(0, 2, n_info)
        tx_bits = conv_encode(info_bits, code)
    else:
        info_bits = rng.integers(0, 2, n_syms * constellation.bits_per_symbol)
        tx_bits = info_bits
    symbols = map_bits(tx_bits, constellation)

    x_vec = np.zeros(params.grid_size, dtype=np.complex128)
    x_vec[data_pos] = symbols
    x_grid = x_vec.reshape((params.m, params.n), order="F")
    if cfg.estimator == "pilot":
        x_grid, _ = embed_pilot(x_grid, cfg.pilot_config(), params)

    pulse = rectangular_pulse(params)
    tx = modulate_dzt(x_grid, pulse, params)
    rx = apply_td(ch, tx, params)
    noisy = TimeDomainFrame(
        rx.samples + complex_gaussian(rng, rx.samples.shape, noise_var), params
    )
    y_dd = demodulate_dzt(noisy, pulse, params)

    result = TrialResult()
    if cfg.estimator == "pilot":
        known = estimate_channel(y_dd, cfg.pilot_config(), params, noise_var)
        true_eff = build_effective_dd(ch, params)
        est_eff = build_effective_dd(known, params) if known is not None else None
        result.nmse_sum = nmse(true_eff, est_eff)
        result.nmse_count = 1
        if known is None:
            known = ch  # estimation found nothing; fall back rather than abort
    else:
        known = ch

    det = cfg.detector
    if det == "mmse":
        out = detect_mmse(vec(y_dd), build_effective_dd(known, params), noise_var, constellation)
    elif det == "ml":
        out = detect_ml(vec(y_dd), build_effective_dd(known, params), constellation)
    elif det == "mpa":
        graph = FactorGraph.from_channel(known, params)
        out = detect_mpa(
            vec(y_dd), graph, noise_var, constellation,
            max_iter=cfg.detector_iters, damping=cfg.mpa_damping,
        )
    elif det == "cdid":
        out = detect_cdid(
            noisy, known, params, constellation, noise_var,
            max_iter=cfg.detector_iters, damping=cfg.cdid_damping,
        )
    else:
        raise ConfigError(f"unknown detector {det!r}")

    def bit_errors_of(hard_indices) -> int:
        rx_bits = constellation.indices_to_bits(hard_indices[data_pos]).ravel()
        if cfg.coded:
            post = out.posteriors  # full posteriors only meaningful for final pass
            llrs = _posteriors_to_llrs(post[data_pos], constellation)
            decoded = viterbi_decode(llrs, code)
            return int(np.sum(decoded != info_bits))
        return int(np.sum(rx_bits != tx_bits))

    result.bit_errors = bit_errors_of(out.hard)
    result.bits = info_bits.size
    result.frame_error = int(result.bit_errors > 0)
    if det == "cdid" and out.history:
        hard1 = out.history[0]
        rx_bits1 = constellation.indices_to_bits(hard1[data_pos]).ravel()
        if cfg.coded:
            result.bit_errors_iter1 = result.bit_errors
        else:
            result.bit_errors_iter1 = int(np.sum(rx_bits1 != tx_bits))
    return result


def _trial_star(args) -> TrialResult:
    cfg, snr_idx, trial = args
    return run_detection_trial(cfg, snr_idx, trial)


@dataclass
class MetricRecord:
    snr_db: float
    bit_errors: int
    frame_errors: int
    trials: int
    bits: int
    capped: bool
    wall_time: float
    nmse_mean: float | None = None
    ber_iter1: float | None = None

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def fer(self) -> float:
        return self.frame_errors / self.trials if self.trials else 0.0

    @property
    def ber_ci(self) -> float:
        return wilson_halfwidth(self.bit_errors, self.bits)

    @property
    def fer_ci(self) -> float:
        return wilson_halfwidth(self.frame_errors, self.trials)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> list[MetricRecord]:
    """BER/FER sweep with the batched stopping rule (>= min frame errors).

    Trials are keyed by (seed, snr index, trial index), accumulated in
    trial order, and the stopping rule is evaluated at batch boundaries,
    so the output is identical for any worker count.
    """
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        records = []
        for snr_idx in range(len(cfg.snr_db)):
            start = time.perf_counter()
            totals = TrialResult()
            trial = 0
            iter1_errors = 0
            while True:
                batch = list(range(trial, min(trial + cfg.batch, cfg.trials_cap)))
                if not batch:
                    break
                args = [(cfg, snr_idx, t) for t in batch]
                if pool is not None:
                    results = list(pool.map(_trial_star, args, chunksize=8))
                else:
                    results = [_trial_star(a) for a in args]
                for r in results:
                    totals.bit_errors += r.bit_errors
                    totals.bits += r.bits
                    totals.frame_error += r.frame_error
                    totals.nmse_sum += r.nmse_sum
                    totals.nmse_count += r.nmse_count
                    iter1_errors += r.bit_errors_iter1
                trial = batch[-1] + 1
                if totals.frame_error >= cfg.min_frame_errors or trial >= cfg.trials_cap:
                    break
            records.append(MetricRecord(
                snr_db=cfg.snr_db[snr_idx],
                bit_errors=totals.bit_errors,
                frame_errors=totals.frame_error,
                trials=trial,
                bits=totals.bits,
                capped=totals.frame_error < cfg.min_frame_errors,
                wall_time=time.perf_counter() - start,
                nmse_mean=(totals.nmse_sum / totals.nmse_count) if totals.nmse_count else None,
                ber_iter1=(iter1_errors / totals.bits) if cfg.detector == "cdid" and totals.bits else None,
            ))
        return records
    finally:
        if pool is not None:
            pool.shutdown()


def detection_csv(cfg: ExperimentConfig, records: list[MetricRecord]) -> str:
    cols = ["snr_db", "ber", "ber_ci", "fer", "fer_ci", "trials"]
    if cfg.estimator == "pilot":
        cols.append("nmse")
    if cfg.detector == "cdid":
        cols.append("ber_iter1")
    cols.append("capped")
    lines = [",".join(cols)]
    for r in records:
        row = [_fmt(r.snr_db), _fmt(r.ber), _fmt(r.ber_ci), _fmt(r.fer), _fmt(r.fer_ci), str(r.trials)]
        if cfg.estimator == "pilot":
            row.append(_fmt(r.nmse_mean if r.nmse_mean is not None else 0.0))
        if cfg.detector == "cdid":
            row.append(_fmt(r.ber_iter1 if r.ber_iter1 is not None else 0.0))
        row.append("1" if r.capped else "0")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return f"{x:.10g}"


# ---------------------------------------------------------------------------
#  Rate curves
# ---------------------------------------------------------------------------

def rate_curves(cfg: ExperimentConfig):
    """Average Eq-style log-det rates over channel draws.

    Returns (rows, per_draw) where rows average over draws per SNR and
    per_draw holds each draw's (r_otfs, r_nocp, r_cp_time, r_cp_mn) tuples.
    """
    params = cfg.frame_params()
    mn = params.grid_size
    uses_cp = params.n * (params.m + params.cp_len)
    per_draw = {s: [] for s in cfg.snr_db}
    for draw in range(cfg.rate_draws):
        rng = RngStream(cfg.seed).generator(1, draw)
        ch = sample_channel(cfg.profile(), rng)
        sing = {
            "otfs": np.linalg.svd(build_effective_td(ch, params).h, compute_uv=False),
            "nocp": np.linalg.svd(build_effective_ofdm(ch, params, with_cp=False).h, compute_uv=False),
            "cp": np.linalg.svd(build_effective_ofdm(ch, params, with_cp=True).h, compute_uv=False),
        }
        for snr_db in cfg.snr_db:
            snr = 10.0 ** (snr_db / 10.0)
            r_otfs = rate_from_singular_values(sing["otfs"], snr, mn)
            r_nocp = rate_from_singular_values(sing["nocp"], snr, mn)
            r_cp_sum = rate_from_singular_values(sing["cp"], snr, 1)
            per_draw[snr_db].append((r_otfs, r_nocp, r_cp_sum / uses_cp, r_cp_sum / mn))
    rows = []
    for snr_db in cfg.snr_db:
        arr = np.array(per_draw[snr_db])
        rows.append((snr_db, *arr.mean(axis=0)))
    return rows, per_draw


def rates_csv(rows) -> str:
    lines = ["snr_db,rate_otfs,rate_ofdm_nocp,rate_ofdm_cp,rate_ofdm_cp_mn"]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
#  Estimation sweep
# ---------------------------------------------------------------------------

def run_estimation_trial(cfg: ExperimentConfig, snr_idx: int, trial: int) -> float:
    """One pilot-SNR trial; returns the NMSE of the effective-channel estimate.

    The sweep axis is the frame SNR (1/noise_var with unit-RMS data); the
    pilot itself sits pilot_amplitude times above the data RMS.
    """
    params = cfg.frame_params()
    rng = RngStream(cfg.seed).generator(snr_idx, trial)
    constellation = constellation_by_name(cfg.constellation)
    pcfg = cfg.pilot_config()
    snr_db = cfg.pilot_snr_db[snr_idx]
    noise_var = 10.0 ** (-snr_db / 10.0)

    ch = sample_channel(cfg.profile(), rng)
    mask = region_mask(pcfg, params)
    x = np.zeros((params.m, params.n), dtype=np.complex128)
    data = mask == DATA
    bits = rng.integers(0, 2, int(data.sum()) * constellation.bits_per_symbol)
    x[data] = map_bits(bits, constellation)
    x, _ = embed_pilot(x, pcfg, params)

    pulse = rectangular_pulse(params)
    tx = modulate_dzt(x, pulse, params)
    rx = apply_td(ch, tx, params)
    noisy = TimeDomainFrame(
        rx.samples + complex_gaussian(rng, rx.samples.shape, noise_var), params
    )
    y_dd = demodulate_dzt(noisy, pulse, params)
    est = estimate_channel(y_dd, pcfg, params, noise_var)
    true_eff = build_effective_dd(ch, params)
    est_eff = build_effective_dd(est, params) if est is not None else None
    return nmse(true_eff, est_eff)


def estimation_sweep(cfg: ExperimentConfig, workers: int = 1):
    rows = []
    for snr_idx, snr_db in enumerate(cfg.pilot_snr_db):
        args = [(cfg, snr_idx, t) for t in range(cfg.trials)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                values = list(pool.map(_estimation_star, args, chunksize=16))
        else:
            values = [_estimation_star(a) for a in args]
        arr = np.array(values)
        rows.append((snr_db, float(arr.mean()), float(arr.std()), len(values)))
    return rows


def _estimation_star(args) -> float:
    cfg, snr_idx, trial = args
    return run_estimation_trial(cfg, snr_idx, trial)


def estimation_csv(rows) -> str:
    lines = ["snr_db,nmse,nmse_std,trials"]
    for snr_db, mean, std, n in rows:
        lines.append(f"{_fmt(snr_db)},{_fmt(mean)},{_fmt(std)},{n}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
#  Vectorized ML FER sweep (diversity studies on small frames)
# ---------------------------------------------------------------------------

def ml_fer_sweep(
    cfg: ExperimentConfig,
    batch: int = 2000,
) -> list[tuple[float, float, int, int]]:
    """Uncoded ML frame-error sweep, batched across frames for speed.

    Small-grid counterpart of run_experiment(detector='ml'): channels and
    noise follow the same statistics, hypotheses are enumerated exhaustively,
    and whole batches are processed with one einsum.  Returns rows of
    (snr_db, fer, frame_errors, frames).  Uniform profiles only; fractional
    Doppler builds the dense effective matrix per frame.
    """
    params = cfg.frame_params()
    m, n, mn = params.m, params.n, params.grid_size
    constellation = constellation_by_name(cfg.constellation)
    q = constellation.size
    if q**mn > 2**20:
        raise ConfigError("grid too large for exhaustive ML")
    if cfg.pdp != "uniform":
        raise ConfigError("ml_fer_sweep supports uniform profiles only")
    hyp_idx = (np.arange(q**mn)[:, None] // q ** np.arange(mn - 1, -1, -1)) % q
    hyp_syms = constellation.points[hyp_idx]
    hyp_bits = constellation.indices_to_bits(hyp_idx).reshape(q**mn, -1)
    # unit-gain pattern matrix per admissible integer (delay, Doppler) pair
    ll, kk = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    rows = (ll + kk * m).ravel()
    pats = {}
    if not cfg.fractional_doppler:
        for l_i in range(cfg.l_max + 1):
            for k_i in range(-cfg.k_max, cfg.k_max + 1):
                h = np.zeros((mn, mn), dtype=np.complex128)
                cols = ((ll - l_i) % m + ((kk - k_i) % n) * m).ravel()
                np.add.at(h, (rows, cols), dd_coupling_coeff(ll, kk, l_i, k_i, m, n).ravel())
                pats[(l_i, k_i)] = h
    u_dd = td_to_dd_matrix(params)
    td_rows = np.arange(mn)

    out = []
    for snr_idx, snr_db in enumerate(cfg.snr_db):
        rng = RngStream(cfg.seed).generator(snr_idx)
        noise_var = 10.0 ** (-snr_db / 10.0)
        frame_errors = 0
        frames = 0
        while frames < cfg.trials_cap and frame_errors < cfg.min_frame_errors:
            b = min(batch, cfg.trials_cap - frames)
            if cfg.paths > 1:
                extra = np.stack([
                    rng.choice(np.arange(1, cfg.l_max + 1), size=cfg.paths - 1, replace=False)
                    for _ in range(b)
                ])
                delays = np.concatenate([np.zeros((b, 1), dtype=int), np.sort(extra, axis=1)], axis=1)
            else:
                delays = np.zeros((b, 1), dtype=int)
            if cfg.fractional_doppler:
                dopplers = rng.uniform(-cfg.k_max, cfg.k_max, size=(b, cfg.paths))
            else:
                dopplers = rng.integers(-cfg.k_max, cfg.k_max + 1, size=(b, cfg.paths))
            gains = (rng.standard_normal((b, cfg.paths)) + 1j * rng.standard_normal((b, cfg.paths)))
            gains /= np.sqrt(2.0 * cfg.paths)
            if cfg.fractional_doppler:
                h_td = np.zeros((b, mn, mn), dtype=np.complex128)
                frame_idx = np.repeat(np.arange(b), mn)
                for i in range(cfg.paths):
                    cols_i = (td_rows[None, :] - delays[:, i][:, None]) % mn
                    coeff = gains[:, i][:, None] * np.exp(
                        2j * np.pi * dopplers[:, i][:, None]
                        * (td_rows[None, :] - delays[:, i][:, None]) / mn
                    )
                    np.add.at(
                        h_td, (frame_idx, np.tile(td_rows, b), cols_i.ravel()), coeff.ravel()
                    )
                h_all = np.einsum("ij,bjk,lk->bil", u_dd, h_td, np.conj(u_dd))
            else:
                h_all = np.zeros((b, mn, mn), dtype=np.complex128)
                for i in range(cfg.paths):
                    for (l_i, k_i), pat in pats.items():
                        sel = (delays[:, i] == l_i) & (dopplers[:, i] == k_i)
                        if sel.any():
                            h_all[sel] += gains[sel, i][:, None, None] * pat[None]
            tx_bits = rng.integers(0, 2, size=(b, mn * constellation.bits_per_symbol))
            tx_idx = tx_bits.reshape(b, mn, -1) @ (1 << np.arange(constellation.bits_per_symbol - 1, -1, -1))
            x = constellation.points[tx_idx]
            noise = complex_gaussian(rng, (b, mn), noise_var)
            y = np.einsum("bij,bj->bi", h_all, x) + noise
            hyp_rx = np.einsum("bij,hj->bhi", h_all, hyp_syms)
            dist = np.sum(np.abs(y[:, None, :] - hyp_rx) ** 2, axis=2)
            best = np.argmin(dist, axis=1)
            frame_errors += int(np.sum(np.any(hyp_bits[best] != tx_bits, axis=1)))
            frames += b
        out.append((snr_db, frame_errors / frames, frame_errors, frames))
    return out


# ---------------------------------------------------------------------------
#  Output files
# ---------------------------------------------------------------------------

def write_outputs(out_dir, stem: str, csv_text: str, config_text: str, cfg: ExperimentConfig,
                  wall_time: float) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    csv_path.write_text(csv_text)
    manifest = {
        "config_sha256": config_digest(config_text),
        "seed": cfg.seed,
        "kind": cfg.kind,
        "csv": csv_path.name,
        "wall_time_s": round(wall_time, 3),
    }
    (out / f"{stem}_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
