"""DD-domain detectors: linear MMSE, message passing, cross-domain iterative
detection, and an exhaustive ML/MAP oracle for small instances.

All detectors return a :class:`DetectionResult` whose per-symbol posteriors
sum to one and whose hard decisions are the posterior argmax (lowest
constellation index on ties).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .core import (
    ConfigError,
    Constellation,
    CPScheme,
    FrameParams,
    ResourceLimitError,
    ShapeError,
    vec,
)
from .channel import (
    ChannelRealization,
    EffectiveChannel,
    build_td_matrix,
    dd_coupling_coeff,
)
from .modem import TimeDomainFrame, remove_cp
from .transforms import dzt, idzt


@dataclass(frozen=True)
class DetectionResult:
    """Hard symbol indices plus per-symbol posteriors over the constellation."""

    hard: np.ndarray                  # (K,) constellation indices
    posteriors: np.ndarray            # (K, Q), rows sum to 1
    iterations_used: int = 1
    converged: bool = True
    flags: tuple = ()
    history: tuple = ()               # per-iteration hard decisions, if tracked

    def __post_init__(self):
        object.__setattr__(self, "hard", np.asarray(self.hard, dtype=np.int64))
        post = np.asarray(self.posteriors, dtype=float)
        object.__setattr__(self, "posteriors", post)
        if np.max(np.abs(post.sum(axis=1) - 1.0)) > 1e-9:
            raise ValueError("posteriors must sum to 1 per symbol")

    def hard_grid(self, params: FrameParams) -> np.ndarray:
        return self.hard.reshape((params.m, params.n), order="F")


def _softmax_rows(logp: np.ndarray) -> np.ndarray:
    shifted = logp - logp.max(axis=1, keepdims=True)
    w = np.exp(shifted)
    return w / w.sum(axis=1, keepdims=True)


def _as_matrix(h) -> np.ndarray:
    m = h.h if isinstance(h, EffectiveChannel) else np.asarray(h, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError("effective channel must be square")
    return m


# ---------------------------------------------------------------------------
#  Linear MMSE
# ---------------------------------------------------------------------------

def detect_mmse(y: np.ndarray, h, noise_var: float, c: Constellation) -> DetectionResult:
    """LMMSE equalization with a Gaussian per-symbol demapper.

    x_hat = H^H (H H^H + noise_var I)^{-1} y; the demapper models
    x_hat_q = mu_q x_q + eta with Var(eta) = mu_q (1 - mu_q) for
    unit-energy symbols.
    """
    hm = _as_matrix(h)
    y = np.asarray(y, dtype=np.complex128).ravel()
    if y.size != hm.shape[0]:
        raise ShapeError("received vector does not match the channel size")
    gram = hm @ hm.conj().T
    flags = ()
    reg = noise_var
    try:
        low, _ = sla.cho_factor(gram + reg * np.eye(len(y)), lower=True)
    except np.linalg.LinAlgError:
        reg = noise_var + 1e-12 * max(float(np.abs(gram).max()), 1.0)
        low, _ = sla.cho_factor(gram + reg * np.eye(len(y)), lower=True)
        flags = ("regularized",)
    x_hat = hm.conj().T @ sla.cho_solve((low, True), y)
    # signal coefficient mu_q = [H^H (HH^H + s2 I)^{-1} H]_qq via L^{-1} H
    w_tri = sla.solve_triangular(low, hm, lower=True)
    mu = np.sum(np.abs(w_tri) ** 2, axis=0)
    mu = np.clip(mu.real, 1e-12, 1.0 - 1e-12)
    var = mu * (1.0 - mu)
    logp = -np.abs(x_hat[:, None] - mu[:, None] * c.points[None, :]) ** 2 / var[:, None]
    post = _softmax_rows(logp)
    hard = np.argmax(post, axis=1)
    return DetectionResult(hard, post, iterations_used=1, converged=True, flags=flags)


# ---------------------------------------------------------------------------
#  Message passing on the DD factor graph
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FactorGraph:
    """Sparse bipartite graph of the integer-Doppler DD input-output relation.

    Edge e couples observation bin obs[e] (flat index l + k*M) to variable
    bin var[e] with complex coefficient coeff[e]; every node has degree
    exactly P.
    """

    n_bins: int
    obs: np.ndarray
    var: np.ndarray
    coeff: np.ndarray
    degree: int

    @classmethod
    def from_channel(
        cls, ch: ChannelRealization, params: FrameParams, ideal_pulse: bool = False
    ) -> "FactorGraph":
        """Build the graph from a channel realization.

        ``ideal_pulse=False`` uses the exact reduced-CP coupling phases
        (matching :func:`otfs.channel.build_effective_dd`); ``True`` uses
        the ideal-pulse coefficients h_i e^{-j 2 pi nu_i tau_i}.
        """
        if not ch.is_integer:
            raise ConfigError("message passing requires integer Doppler indices")
        seen = {(p.delay % params.m, int(round(p.doppler)) % params.n) for p in ch.paths}
        if len(seen) != ch.n_paths:
            raise ConfigError("paths collide on the DD grid; graph degree would drop")
        m, n, mn = params.m, params.n, params.grid_size
        ll, kk = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
        rows = (ll + kk * m).ravel()
        obs, var, coeff = [], [], []
        for p in ch.paths:
            ki = int(round(p.doppler))
            cols = ((ll - p.delay) % m + ((kk - ki) % n) * m).ravel()
            if ideal_pulse:
                ce = np.full(mn, p.gain * np.exp(-2j * np.pi * ki * p.delay / mn))
            else:
                ce = (p.gain * dd_coupling_coeff(ll, kk, p.delay, ki, m, n)).ravel()
            obs.append(rows)
            var.append(cols)
            coeff.append(ce)
        graph = cls(
            n_bins=mn,
            obs=np.concatenate(obs),
            var=np.concatenate(var),
            coeff=np.concatenate(coeff).astype(np.complex128),
            degree=ch.n_paths,
        )
        assert np.all(np.bincount(graph.obs, minlength=mn) == graph.degree)
        assert np.all(np.bincount(graph.var, minlength=mn) == graph.degree)
        return graph


def detect_mpa(
    y_dd: np.ndarray,
    graph: FactorGraph,
    noise_var: float,
    c: Constellation,
    max_iter: int = 30,
    damping: float = 0.6,
    tol: float = 1e-6,
) -> DetectionResult:
    """Gaussian-approximated message passing with a flooding schedule.

    Observation-to-variable messages model the interference of the other
    P-1 neighbors as Gaussian (mean/variance from the current symbol
    beliefs); variable-to-observation messages are damped probability
    vectors.  Stops when the largest probability change drops below tol.
    """
    y = vec(np.asarray(y_dd)) if np.asarray(y_dd).ndim == 2 else np.asarray(y_dd).ravel()
    if y.size != graph.n_bins:
        raise ShapeError("received grid does not match the graph")
    pts = c.points
    e_count = graph.obs.size
    p_ve = np.full((e_count, len(pts)), 1.0 / len(pts))
    abs2 = np.abs(pts) ** 2
    coeff = graph.coeff
    noise_floor = max(noise_var, 1e-30)
    converged = False
    iterations = max_iter
    log_belief = np.zeros((graph.n_bins, len(pts)))
    for it in range(1, max_iter + 1):
        mu_e = p_ve @ pts
        var_e = (p_ve @ abs2 - np.abs(mu_e) ** 2).real
        tot_mean = np.zeros(graph.n_bins, dtype=np.complex128)
        np.add.at(tot_mean, graph.obs, coeff * mu_e)
        tot_var = np.zeros(graph.n_bins)
        np.add.at(tot_var, graph.obs, (np.abs(coeff) ** 2) * var_e)
        mean_excl = tot_mean[graph.obs] - coeff * mu_e
        var_excl = tot_var[graph.obs] - (np.abs(coeff) ** 2) * var_e + noise_floor
        var_excl = np.maximum(var_excl, 1e-30)
        resid = y[graph.obs] - mean_excl
        log_m = -(np.abs(resid[:, None] - coeff[:, None] * pts[None, :]) ** 2) / var_excl[:, None]
        log_m -= log_m.max(axis=1, keepdims=True)
        log_belief = np.zeros((graph.n_bins, len(pts)))
        np.add.at(log_belief, graph.var, log_m)
        p_new = _softmax_rows(log_belief[graph.var] - log_m)
        p_new = damping * p_new + (1.0 - damping) * p_ve
        delta = np.max(np.abs(p_new - p_ve))
        p_ve = p_new
        if delta < tol:
            converged = True
            iterations = it
            break
    post = _softmax_rows(log_belief)
    hard = np.argmax(post, axis=1)
    return DetectionResult(hard, post, iterations_used=iterations, converged=converged)


# ---------------------------------------------------------------------------
#  Cross-domain iterative detection
# ---------------------------------------------------------------------------

def detect_cdid(
    r_td,
    ch: ChannelRealization,
    params: FrameParams,
    c: Constellation,
    noise_var: float,
    max_iter: int = 10,
    damping: float = 0.7,
    tol: float = 1e-6,
) -> DetectionResult:
    """Alternate TD-domain LMMSE equalization and DD-domain denoising.

    Extrinsic means/variances from the TD LMMSE step pass through the
    unitary DZT to the DD domain, where a per-symbol Gaussian denoiser
    computes constellation posteriors; damped posterior moments feed back
    as the next TD priors.  With uninformative priors, iteration 1 is the
    plain MMSE equalizer followed by the slicer.
    """
    if isinstance(r_td, TimeDomainFrame):
        if r_td.params.cp_scheme != CPScheme.REDUCED:
            raise ConfigError("cross-domain detection expects a reduced-CP frame")
        payload = remove_cp(r_td)
    else:
        payload = np.asarray(r_td, dtype=np.complex128).ravel()
    mn = params.grid_size
    if payload.size != mn:
        raise ShapeError("payload length does not match the grid")
    h_t = build_td_matrix(ch, params)
    w, qmat = sla.eigh(h_t @ h_t.conj().T, driver="evr")
    w = np.maximum(w.real, 0.0)
    g = h_t.conj().T @ qmat
    g_abs2 = np.abs(g) ** 2
    pts = c.points
    abs2 = np.abs(pts) ** 2

    xbar_dd = np.zeros(mn, dtype=np.complex128)
    prior_var = 1.0
    post = np.full((mn, len(pts)), 1.0 / len(pts))
    history = []
    converged = False
    iterations = max_iter
    for it in range(1, max_iter + 1):
        xbar_td = idzt(xbar_dd.reshape((params.m, params.n), order="F"))
        d = 1.0 / np.maximum(prior_var * w + noise_var, 1e-30)
        resid = payload - h_t @ xbar_td
        x_hat = xbar_td + prior_var * (g @ (d * (qmat.conj().T @ resid)))
        post_var = prior_var - prior_var**2 * (g_abs2 @ d)
        post_var = np.clip(post_var.real, 1e-12, prior_var * (1.0 - 1e-12))
        v_ext = post_var * prior_var / (prior_var - post_var)
        x_ext = v_ext * (x_hat / post_var - xbar_td / prior_var)
        v_obs = float(np.mean(v_ext))
        z = vec(dzt(x_ext, params.m, params.n))
        logp = -np.abs(z[:, None] - pts[None, :]) ** 2 / v_obs
        new_post = _softmax_rows(logp)
        delta = np.max(np.abs(new_post - post))
        post = new_post
        history.append(np.argmax(post, axis=1))
        mean_dd = post @ pts
        var_dd = (post @ abs2 - np.abs(mean_dd) ** 2).real
        xbar_dd = damping * mean_dd + (1.0 - damping) * xbar_dd
        prior_var = max(damping * float(np.mean(var_dd)) + (1.0 - damping) * prior_var, 1e-9)
        if delta < tol:
            converged = True
            iterations = it
            break
    hard = history[-1]
    return DetectionResult(
        hard,
        post,
        iterations_used=iterations,
        converged=converged,
        history=tuple(history),
    )


# ---------------------------------------------------------------------------
#  Exhaustive ML / MAP oracle
# ---------------------------------------------------------------------------

def detect_ml(
    y: np.ndarray,
    h,
    c: Constellation,
    noise_var: float | None = None,
    search_cap: int = 2**20,
    chunk: int = 2**14,
) -> DetectionResult:
    """Exhaustive search over every constellation sequence.

    Without noise_var, returns the ML sequence (one-hot posteriors).  With
    noise_var, posteriors are the exact per-symbol marginals of
    exp(-||y - Hx||^2 / noise_var) and hard decisions are their argmax
    (symbol-wise MAP).
    """
    hm = _as_matrix(h)
    y = np.asarray(y, dtype=np.complex128).ravel()
    k = hm.shape[0]
    if y.size != k:
        raise ShapeError("received vector does not match the channel size")
    q = c.size
    total = q**k
    if total > search_cap:
        raise ResourceLimitError(f"{q}^{k} hypotheses exceed search cap {search_cap}")
    d = np.empty(total)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        digits = (idx[:, None] // q ** np.arange(k - 1, -1, -1)) % q
        x = c.points[digits]
        d[idx] = np.sum(np.abs(y[None, :] - x @ hm.T) ** 2, axis=1)
    best = int(np.argmin(d))
    best_digits = (best // q ** np.arange(k - 1, -1, -1)) % q
    if noise_var is None:
        post = np.zeros((k, q))
        post[np.arange(k), best_digits] = 1.0
        return DetectionResult(best_digits, post, iterations_used=1, converged=True)
    logw = -(d - d.min()) / max(noise_var, 1e-30)
    weights = np.exp(logw)
    marg = np.zeros((k, q))
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        digits = (idx[:, None] // q ** np.arange(k - 1, -1, -1)) % q
        for pos in range(k):
            marg[pos] += np.bincount(digits[:, pos], weights=weights[idx], minlength=q)
    post = marg / marg.sum(axis=1, keepdims=True)
    hard = np.argmax(post, axis=1)
    return DetectionResult(hard, post, iterations_used=1, converged=True)
