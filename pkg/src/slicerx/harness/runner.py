"""End-to-end link simulation and deterministic parameter sweeps."""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from ..channel import FiberParams, MzmParams, amplify_to_osnr, calibrate_mod_index, mzm_modulate, ook_drive, propagate
from ..equalizers import make_equalizer
from ..frontend import DetectedChannels, SliceBank, SliceSpec, adc, deskew, photodetect, synchronize, wss_apply
from ..metrics import KP4_THRESHOLD, count_ber, hard_decide, wilson_interval
from ..sigkit import generate_bits
from .config import BROADBAND, expand_points

__all__ = ["ResultRecord", "LinkRealization", "simulate_link", "run_point", "run_sweep", "measurement_seeds"]

log = logging.getLogger(__name__)

SUMMARY_SEED = "mean"
CALIBRATION_SYMBOLS = 16384


@dataclass
class ResultRecord:
    distance_km: float
    osnr_db: float
    n_pds: int
    slice_set: str
    equalizer: str
    n_neurons: int | None
    seed: object  # measurement seed, or "mean" for a summary record
    errors: int | None = None
    bits: int | None = None
    ber: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    below_kp4: bool | None = None
    train_mse: float | None = None
    wall_s: float | None = None
    error: str = ""

    @property
    def is_summary(self):
        return self.seed == SUMMARY_SEED

    def to_dict(self):
        return asdict(self)


@dataclass
class LinkRealization:
    """Aligned detector outputs of one simulated link and the symbols sent."""

    channels: DetectedChannels
    symbols: np.ndarray
    lag: int
    sps: int
    wall_s: float


def measurement_seeds(base_seed, measurements):
    return [base_seed ^ i for i in range(measurements)]


@lru_cache(maxsize=16)
def _calibrated_mod_index(baud_gbd, sps, rolloff, span, crest_factor, cspr_db, seed):
    symbols = generate_bits(CALIBRATION_SYMBOLS, seed).symbols()
    drive = ook_drive(symbols, sps, baud_gbd * 1e9 * sps, rolloff, span, crest_factor)
    return calibrate_mod_index(drive, cspr_db)


def resolve_mod_index(cfg):
    t = cfg.transmitter
    if t.mod_index is not None:
        return float(t.mod_index)
    return _calibrated_mod_index(t.baud_gbd, t.sps_sim, t.rolloff, t.rrc_span, t.crest_factor, t.cspr_db, cfg.base_seed)


def simulate_link(cfg, distance_km, osnr_db, receiver, seed, mod_index=None):
    """Bits -> shaped drive -> MZM -> fiber -> ASE -> WSS -> PDs -> ADC -> alignment.

    Parameters
    ----------
    cfg : ExperimentConfig
    distance_km, osnr_db : float
    receiver : {"1pd", "bank"}
        Single broadband photodiode, or every slice of the configured bank.
    seed : int
        Measurement seed; draws the bits and (via ``[seed, 1]``) the noise.
    mod_index : float, optional
        Skip CSPR calibration.

    Raises
    ------
    SyncError
        If the received block cannot be aligned to the transmitted symbols.
    """
    t0 = time.perf_counter()
    t, r = cfg.transmitter, cfg.receiver
    fs = t.baud_gbd * 1e9 * t.sps_sim
    symbols = generate_bits(cfg.symbols, seed).symbols()
    m = resolve_mod_index(cfg) if mod_index is None else mod_index
    field = mzm_modulate(ook_drive(symbols, t.sps_sim, fs, t.rolloff, t.rrc_span, t.crest_factor), MzmParams(m))
    fiber = FiberParams(distance_km, cfg.fiber.dispersion_ps_nm_km, cfg.fiber.loss_db_per_km)
    field = amplify_to_osnr(propagate(field, fiber), osnr_db, [seed, 1])
    if receiver == BROADBAND:
        bank = SliceBank((SliceSpec(0.0, r.broadband_bw_ghz, 4.0),))
    else:
        bank = cfg.bank
    scope = r.scope_rate_gsa * 1e9 if r.scope_rate_gsa else None
    dsp_rate = t.baud_gbd * 1e9 * r.sps_dsp
    detected = [
        adc(photodetect(s, r.pd_bandwidth_ghz), r.adc_bandwidth_ghz, out_rate=scope, dsp_rate=dsp_rate)
        for s in wss_apply(field, bank)
    ]
    rx, lag = synchronize(DetectedChannels.from_waveforms(detected), symbols, r.sps_dsp)
    if r.deskew and rx.n_channels > 1:
        rx, _ = deskew(rx, symbols, r.sps_dsp)
    return LinkRealization(rx, symbols, lag, r.sps_dsp, time.perf_counter() - t0)


def _equalizer_for(point, cfg, seed):
    params = dict(point.params)
    params.setdefault("sps", cfg.receiver.sps_dsp)
    params.setdefault("washout", cfg.training.washout_symbols)
    if point.equalizer in ("esn", "fnn"):
        params.setdefault("seed", seed)
    return make_equalizer(point.equalizer, **params)


def evaluate(point, link, cfg, seed):
    """Train an equalizer on the link's prefix and count errors on the rest."""
    t0 = time.perf_counter()
    rx = link.channels
    if point.subset != BROADBAND:
        rx = rx.select([i - 1 for i in point.subset])
    X = rx.channels.T
    sps, n_train = link.sps, cfg.n_train
    n = link.symbols.size
    eq = _equalizer_for(point, cfg, seed)
    eq.fit(X[: n_train * sps], link.symbols[:n_train])
    soft = eq.predict(X)
    w, guard = cfg.training.washout_symbols, cfg.training.guard_symbols
    tr_soft, tr_bits = soft[w:n_train], link.symbols[w:n_train]
    ok = np.isfinite(tr_soft)
    test = soft[n_train : n - guard]
    if not np.all(np.isfinite(test)):
        raise RuntimeError("equalizer produced non-finite outputs in the counted range")
    decisions = hard_decide(test, tr_soft[ok], tr_bits[ok])
    result = count_ber(decisions, link.symbols[n_train : n - guard].astype(np.uint8))
    return result, eq.train_report_.train_mse, time.perf_counter() - t0


def _record(point, seed, **values):
    return ResultRecord(
        point.distance_km, point.osnr_db, point.n_pds, point.slice_set, point.equalizer, point.n_neurons, seed, **values
    )


def run_point(cfg, point, seed, link=None, mod_index=None):
    """One sweep point for one measurement seed; failures become error records."""
    try:
        if link is None:
            receiver = BROADBAND if point.subset == BROADBAND else "bank"
            link = simulate_link(cfg, point.distance_km, point.osnr_db, receiver, seed, mod_index)
        res, mse, wall = evaluate(point, link, cfg, seed)
    except Exception as exc:  # recorded per point so the sweep carries on
        log.warning("point %s seed %s failed: %s", point, seed, exc)
        return _record(point, seed, error=f"{type(exc).__name__}: {exc}")
    return _record(
        point,
        seed,
        errors=res.errors,
        bits=res.bits,
        ber=res.ber,
        ci_low=res.ci95_low,
        ci_high=res.ci95_high,
        below_kp4=res.below_kp4,
        train_mse=mse,
        wall_s=wall + link.wall_s,
    )


def _run_group(args):
    cfg, key, members, mod_index = args
    distance, osnr, receiver, seed = key
    try:
        link = simulate_link(cfg, distance, osnr, receiver, seed, mod_index)
    except Exception as exc:
        log.warning("link %s failed: %s", key, exc)
        return [(i, _record(p, seed, error=f"{type(exc).__name__}: {exc}")) for i, p in members]
    out = []
    for i, p in members:
        out.append((i, run_point(cfg, p, seed, link=link)))
        log.info("done %s seed %d", p, seed)
    return out


def summarize(point, records):
    """Mean BER over the successful measurements of one point."""
    good = [r for r in records if not r.error]
    failed = len(records) - len(good)
    note = f"{failed}/{len(records)} measurements failed" if failed else ""
    if not good:
        return _record(point, SUMMARY_SEED, error=note)
    errors = sum(r.errors for r in good)
    bits = sum(r.bits for r in good)
    ber = float(np.mean([r.ber for r in good]))
    lo, hi = wilson_interval(errors, bits)
    return _record(
        point,
        SUMMARY_SEED,
        errors=errors,
        bits=bits,
        ber=ber,
        ci_low=lo,
        ci_high=hi,
        below_kp4=ber < KP4_THRESHOLD,
        train_mse=float(np.mean([r.train_mse for r in good])),
        wall_s=float(sum(r.wall_s for r in good)),
        error=note,
    )


def run_sweep(cfg, jobs=1):
    """Every sweep point for every measurement seed, plus one summary per point.

    Points sharing a link realisation (distance, OSNR, receiver, seed) reuse
    one simulation. Work is spread over ``jobs`` processes; records come back
    in config order (point-major, seeds in order, summary last) whatever
    order they finish in.
    """
    points = expand_points(cfg)
    seeds = measurement_seeds(cfg.base_seed, cfg.measurements)
    mod_index = resolve_mod_index(cfg)
    groups = {}
    for pi, p in enumerate(points):
        receiver = BROADBAND if p.subset == BROADBAND else "bank"
        for si, s in enumerate(seeds):
            groups.setdefault((p.distance_km, p.osnr_db, receiver, s), []).append(((pi, si), p))
    tasks = [(cfg, key, members, mod_index) for key, members in groups.items()]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_run_group, tasks))
    else:
        results = [_run_group(t) for t in tasks]
    by_index = dict(item for group in results for item in group)
    records = []
    for pi, p in enumerate(points):
        per_seed = [by_index[(pi, si)] for si in range(len(seeds))]
        records.extend(per_seed)
        records.append(summarize(p, per_seed))
    return records


def failed(records):
    return [r for r in records if r.error]
