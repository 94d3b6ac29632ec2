"""Temporal-response-function encoding: lagged ridge regression with
leave-one-out cross-validation and predictor-gain (delta-r) statistics.

Protocol notes (fixed here, relied on by the reports):
  - the design covers the nominal lag window extended by a margin on both
    sides; margin lags participate in every fit but are excluded from the
    columns used to form reported predictions;
  - design columns are z-scored with training-set statistics before the
    ridge solve so a single lambda serves all predictors; the bias is
    restored afterwards;
  - lambda is selected per held-out trial by an inner leave-one-out over the
    remaining trials, maximizing mean r over channels, independently for the
    full and reduced models (identical folds).

Everything runs on per-trial sufficient statistics (Gram matrices and cross
products), so no per-sample work remains in the cross-validation loops.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import stats

DEFAULT_LAMBDA_GRID = tuple(10.0 ** np.arange(-3, 7))  # 1e-3 .. 1e6, 10 points


# -- signal utilities ----------------------------------------------------------


def hilbert_envelope(signal: np.ndarray, rate: float = 1.0) -> np.ndarray:
    """Magnitude of the analytic signal (frequency-domain construction)."""
    x = np.asarray(signal, dtype=np.float64).ravel()
    n = x.size
    if n < 4:
        raise ValueError("signal too short for an envelope")
    spec = np.fft.fft(x)
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1 : n // 2] = 2.0
    else:
        h[1 : (n + 1) // 2] = 2.0
    return np.abs(np.fft.ifft(spec * h))


def interpolate_unvoiced(ic_series: np.ndarray, voiced_mask: np.ndarray,
                         rng: np.random.Generator) -> np.ndarray:
    """Replace each unvoiced run with one constant drawn from the voiced values."""
    ic = np.array(ic_series, dtype=np.float64)
    mask = np.asarray(voiced_mask, dtype=bool)
    if ic.shape != mask.shape:
        raise ValueError("series and mask must have equal length")
    voiced_values = ic[mask]
    if voiced_values.size == 0:
        raise ValueError("all-unvoiced series cannot be filled")
    i = 0
    n = ic.size
    while i < n:
        if mask[i]:
            i += 1
            continue
        j = i
        while j < n and not mask[j]:
            j += 1
        ic[i:j] = voiced_values[rng.integers(0, voiced_values.size)]
        i = j
    return ic


# -- lagged design -------------------------------------------------------------


@dataclass(frozen=True)
class LaggedDesign:
    """Design matrix [T, n_pred * n_lags] with its lag bookkeeping."""

    design: np.ndarray
    lags: np.ndarray          # in samples, margin included
    nominal_cols: np.ndarray  # column indices inside the nominal window
    n_pred: int


def lag_samples(lag_window_ms=(-100.0, 700.0), margin_ms: float = 50.0,
                rate: float = 100.0) -> tuple[np.ndarray, np.ndarray]:
    """(margin-extended lags, boolean nominal mask), in samples."""
    lo = round((lag_window_ms[0] - margin_ms) * rate / 1000.0)
    hi = round((lag_window_ms[1] + margin_ms) * rate / 1000.0)
    lags = np.arange(lo, hi + 1)
    nom_lo = round(lag_window_ms[0] * rate / 1000.0)
    nom_hi = round(lag_window_ms[1] * rate / 1000.0)
    nominal = (lags >= nom_lo) & (lags <= nom_hi)
    return lags, nominal


def build_lagged_design(predictors: np.ndarray, lag_window_ms=(-100.0, 700.0),
                        margin_ms: float = 50.0, rate: float = 100.0) -> LaggedDesign:
    """Column (p, lag) holds predictor p shifted by lag samples, zero-padded."""
    preds = np.atleast_2d(np.asarray(predictors, dtype=np.float64))
    n_pred, t_len = preds.shape
    lags, nominal = lag_samples(lag_window_ms, margin_ms, rate)
    if lags.size >= t_len:
        raise ValueError("lag window longer than the series")
    design = np.zeros((t_len, n_pred * lags.size))
    for p in range(n_pred):
        for li, lag in enumerate(lags):
            col = design[:, p * lags.size + li]
            if lag >= 0:
                col[lag:] = preds[p, : t_len - lag] if lag else preds[p]
            else:
                col[:lag] = preds[p, -lag:]
    nominal_cols = np.nonzero(np.tile(nominal, n_pred))[0]
    return LaggedDesign(design=design, lags=lags, nominal_cols=nominal_cols,
                        n_pred=n_pred)


# -- ridge ---------------------------------------------------------------------


def ridge_fit(design: np.ndarray, response: np.ndarray, lam: float) -> np.ndarray:
    """w = (X^T X + lam I)^-1 X^T y via an SPD solve; columns must be centered."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    x = np.asarray(design, dtype=np.float64)
    y = np.asarray(response, dtype=np.float64)
    gram = x.T @ x + lam * np.eye(x.shape[1])
    xty = x.T @ y
    try:
        w = np.linalg.solve(gram, xty)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular ridge system; raise lambda") from exc
    resid = xty - gram @ w
    if np.linalg.norm(resid) > 1e-8 * max(np.linalg.norm(xty), 1e-30):
        raise ValueError("ill-conditioned ridge system; raise lambda")
    return w


@dataclass
class TRFModel:
    """Fitted lag filters in raw predictor units."""

    weights: np.ndarray        # [n_channels, n_pred, n_lags]
    bias: np.ndarray           # [n_channels]
    lam: float
    lags: np.ndarray
    lag_window_ms: tuple = (-100.0, 700.0)
    margin_ms: float = 50.0
    sample_rate: float = 100.0


# -- sufficient statistics -----------------------------------------------------


@dataclass
class TrialStats:
    """Per-trial cross products; everything the CV loops need."""

    gram: np.ndarray     # X^T X            [D, D]
    xsum: np.ndarray     # column sums of X [D]
    xty: np.ndarray      # X^T Y            [D, C]
    ysum: np.ndarray     # column sums of Y [C]
    yy: np.ndarray       # sum of Y^2       [C]
    n: int


def trial_stats(x: np.ndarray, y: np.ndarray) -> TrialStats:
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if y.shape[0] != x.shape[0]:
        y = y.T
    return TrialStats(gram=x.T @ x, xsum=x.sum(axis=0), xty=x.T @ y,
                      ysum=y.sum(axis=0), yy=np.sum(y * y, axis=0), n=x.shape[0])


def _sum_stats(parts: list[TrialStats]) -> TrialStats:
    return TrialStats(gram=sum(p.gram for p in parts),
                      xsum=sum(p.xsum for p in parts),
                      xty=sum(p.xty for p in parts),
                      ysum=sum(p.ysum for p in parts),
                      yy=sum(p.yy for p in parts),
                      n=sum(p.n for p in parts))


@dataclass
class _Standardized:
    mu: np.ndarray
    inv_sd: np.ndarray
    ybar: np.ndarray
    evals: np.ndarray
    evecs: np.ndarray
    vt_b: np.ndarray


def _standardize_and_decompose(train: TrialStats) -> _Standardized:
    """Center/scale the training Gram, eigendecompose it once for all lambdas."""
    n = train.n
    mu = train.xsum / n
    var = np.maximum(np.diag(train.gram) / n - mu * mu, 0.0)
    sd = np.sqrt(var)
    inv_sd = np.where(sd > 0, 1.0 / np.where(sd > 0, sd, 1.0), 1.0)
    gram_c = train.gram - n * np.outer(mu, mu)
    gram_s = gram_c * np.outer(inv_sd, inv_sd)
    ybar = train.ysum / n
    b = (train.xty - np.outer(mu, train.ysum)) * inv_sd[:, None]
    evals, evecs = np.linalg.eigh(gram_s)
    evals = np.maximum(evals, 0.0)
    return _Standardized(mu=mu, inv_sd=inv_sd, ybar=ybar,
                         evals=evals, evecs=evecs, vt_b=evecs.T @ b)


def _solve(std: _Standardized, lam: float) -> np.ndarray:
    """Standardized-space ridge weights [D, C] for one lambda."""
    return std.evecs @ (std.vt_b / (std.evals + lam)[:, None])


def _raw_weights(std: _Standardized, w_std: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Back to raw predictor units: weights and per-channel bias."""
    w_raw = w_std * std.inv_sd[:, None]
    bias = std.ybar - std.mu @ w_raw
    return w_raw, bias


def _holdout_r(held: TrialStats, w_raw: np.ndarray, bias: np.ndarray,
               cols: np.ndarray) -> np.ndarray:
    """Pearson r per channel on a held-out trial, restricted to `cols`.

    Uses only the trial's cross products: with yhat = X[:, cols] w + bias,
    all the moments pearson needs are linear/quadratic in w.
    """
    w = w_raw[cols]
    n = held.n
    sum_yhat = held.xsum[cols] @ w + n * bias
    yhat_sq = np.einsum("dc,de,ec->c", w, held.gram[np.ix_(cols, cols)], w)
    yhat_sq += 2.0 * bias * (held.xsum[cols] @ w) + n * bias * bias
    cross = np.einsum("dc,dc->c", w, held.xty[cols]) + bias * held.ysum
    cov = cross - sum_yhat * held.ysum / n
    var_yhat = np.maximum(yhat_sq - sum_yhat * sum_yhat / n, 0.0)
    var_y = np.maximum(held.yy - held.ysum * held.ysum / n, 0.0)
    denom = np.sqrt(var_yhat * var_y)
    out = np.zeros(held.ysum.size)
    ok = denom > 0
    out[ok] = cov[ok] / denom[ok]
    return np.clip(out, -1.0, 1.0)


# -- leave-one-out cross-validation ---------------------------------------------


@dataclass
class LooResult:
    r: np.ndarray        # [n_trials, n_channels]
    lambdas: np.ndarray  # [n_trials]
    fold_order: np.ndarray = field(default_factory=lambda: np.empty(0))


def _subtract_stats(a: TrialStats, b: TrialStats) -> TrialStats:
    return TrialStats(gram=a.gram - b.gram, xsum=a.xsum - b.xsum,
                      xty=a.xty - b.xty, ysum=a.ysum - b.ysum,
                      yy=a.yy - b.yy, n=a.n - b.n)


def _loo_grouped(stats_j: list[TrialStats], lam_grid: np.ndarray,
                 cols: np.ndarray, groups: list[np.ndarray]) -> LooResult:
    """Shared-design leave-one-out core.

    Channels are partitioned into groups (one per participant when stacked);
    each group selects its own lambda per outer fold by maximizing the inner
    mean r over its channels and the inner folds.  Gram eigendecompositions
    depend only on the shared designs, so they are computed once per fold
    pair regardless of how many channels ride along.
    """
    n_trials = len(stats_j)
    n_chan = stats_j[0].ysum.size
    n_lam = lam_grid.size
    r_out = np.zeros((n_trials, n_chan))
    lam_out = np.zeros((n_trials, len(groups)))
    total = _sum_stats(stats_j)
    for o in range(n_trials):
        train = _subtract_stats(total, stats_j[o])
        inner_scores = np.zeros((n_lam, len(groups)))
        for j in range(n_trials):
            if j == o:
                continue
            std = _standardize_and_decompose(_subtract_stats(train, stats_j[j]))
            for li in range(n_lam):
                w_raw, bias = _raw_weights(std, _solve(std, lam_grid[li]))
                r_ch = _holdout_r(stats_j[j], w_raw, bias, cols)
                for gi, g in enumerate(groups):
                    inner_scores[li, gi] += r_ch[g].mean()
        std = _standardize_and_decompose(train)
        best = np.argmax(inner_scores, axis=0)  # ties resolve to the smaller lambda
        for li in np.unique(best):
            w_raw, bias = _raw_weights(std, _solve(std, lam_grid[li]))
            r_ch = _holdout_r(stats_j[o], w_raw, bias, cols)
            for gi, g in enumerate(groups):
                if best[gi] == li:
                    r_out[o, g] = r_ch[g]
                    lam_out[o, gi] = lam_grid[li]
    return LooResult(r=r_out, lambdas=lam_out, fold_order=np.arange(n_trials))


def loo_cv(trials: list[tuple[np.ndarray, np.ndarray]],
           lambda_grid=DEFAULT_LAMBDA_GRID,
           nominal_cols: np.ndarray | None = None) -> LooResult:
    """Outer leave-one-out over trials with nested inner lambda selection.

    trials: list of (design [T, D], response [T, C]).  Reporting (and inner
    scoring) restricts predictions to nominal_cols; the full column set
    participates in every fit.
    """
    if len(trials) < 3:
        raise ValueError("loo_cv needs at least 3 trials")
    stats_j = [trial_stats(x, y) for x, y in trials]
    d = stats_j[0].gram.shape[0]
    cols = np.arange(d) if nominal_cols is None else np.asarray(nominal_cols)
    lam_grid = np.asarray(lambda_grid, dtype=np.float64)
    n_chan = stats_j[0].ysum.size
    res = _loo_grouped(stats_j, lam_grid, cols, [np.arange(n_chan)])
    return LooResult(r=res.r, lambdas=res.lambdas[:, 0], fold_order=res.fold_order)


def fit_trf(trials: list[tuple[np.ndarray, np.ndarray]], lam: float,
            lags: np.ndarray, n_pred: int, lag_window_ms=(-100.0, 700.0),
            margin_ms: float = 50.0, sample_rate: float = 100.0) -> TRFModel:
    """Fit on all trials at a fixed lambda; weights back in raw units."""
    std = _standardize_and_decompose(_sum_stats([trial_stats(x, y) for x, y in trials]))
    w_raw, bias = _raw_weights(std, _solve(std, lam))
    n_lags = lags.size
    weights = np.transpose(w_raw.reshape(n_pred, n_lags, -1), (2, 0, 1))
    return TRFModel(weights=weights, bias=bias, lam=lam, lags=lags,
                    lag_window_ms=tuple(lag_window_ms), margin_ms=margin_ms,
                    sample_rate=sample_rate)


# -- delta-r pipeline ------------------------------------------------------------


@dataclass
class EncodingResult:
    r_full: np.ndarray             # [P, n_trials, C]
    r_reduced: np.ndarray
    delta_r: np.ndarray
    lambda_full: np.ndarray        # [P, n_trials]
    lambda_reduced: np.ndarray
    participant_summary: np.ndarray  # [P]: median over channels of trial-mean delta r
    channel_delta: np.ndarray      # [P, C]: trial-mean delta r
    channel_p: np.ndarray          # [C] two-tailed p per channel
    channel_test: list             # "t" | "wilcoxon" per channel
    fdr_reject: np.ndarray         # [C] raw FDR rejection of the two-tailed test
    significant: np.ndarray        # [C] IC-tracking flag: FDR reject AND gain > 0


def delta_r_pipeline(responses: np.ndarray, sample_rate: float,
                     ic_predictor: np.ndarray, envelope_predictor: np.ndarray,
                     lag_window_ms=(-100.0, 700.0), margin_ms: float = 50.0,
                     lambda_grid=DEFAULT_LAMBDA_GRID, alpha: float = 0.05) -> EncodingResult:
    """Full (IC + envelope) vs reduced (envelope) encoding comparison.

    responses: [n_participants, n_trials, T, n_channels]; predictors
    [n_trials, T] shared across participants.  Folds and the lambda grid are
    identical between models; lambda is selected independently per model.
    Per channel, participants' trial-mean delta r values are tested against
    zero (paired t if Anderson-Darling keeps normality, else Wilcoxon), with
    FDR correction across channels.

    A channel is flagged as tracking the IC predictor (`significant`) when
    the corrected test rejects AND the group-mean gain is positive.  Nested
    cross-validated comparisons carry a small negative delta-r artifact on
    channels the predictor does not drive (the extra columns absorb a bit of
    noise), so an undirected rejection alone does not witness IC tracking.
    """
    ic = np.atleast_2d(ic_predictor)
    env = np.atleast_2d(envelope_predictor)
    n_part, n_trials, t_len, n_chan = responses.shape
    if ic.shape != env.shape or ic.shape[0] != n_trials or ic.shape[1] != t_len:
        raise ValueError("predictors must be [n_trials, T] aligned with responses")
    designs_full, designs_red = [], []
    for tr in range(n_trials):
        full = build_lagged_design(np.stack([ic[tr], env[tr]]), lag_window_ms,
                                   margin_ms, sample_rate)
        red = build_lagged_design(env[tr][None, :], lag_window_ms, margin_ms,
                                  sample_rate)
        designs_full.append(full)
        designs_red.append(red)
    nominal_full = designs_full[0].nominal_cols
    nominal_red = designs_red[0].nominal_cols

    # stack participants as channel groups so the fold eigendecompositions
    # (which depend only on the shared stimuli) are computed once
    stacked = responses.transpose(1, 2, 0, 3).reshape(n_trials, t_len, n_part * n_chan)
    groups = [np.arange(p * n_chan, (p + 1) * n_chan) for p in range(n_part)]
    lam_grid = np.asarray(lambda_grid, dtype=np.float64)
    stats_full = [trial_stats(designs_full[tr].design, stacked[tr]) for tr in range(n_trials)]
    stats_red = [trial_stats(designs_red[tr].design, stacked[tr]) for tr in range(n_trials)]
    res_f = _loo_grouped(stats_full, lam_grid, nominal_full, groups)
    res_r = _loo_grouped(stats_red, lam_grid, nominal_red, groups)
    assert np.array_equal(res_f.fold_order, res_r.fold_order)  # shared folds
    r_full = res_f.r.reshape(n_trials, n_part, n_chan).transpose(1, 0, 2).copy()
    r_red = res_r.r.reshape(n_trials, n_part, n_chan).transpose(1, 0, 2).copy()
    lam_full = res_f.lambdas.T.copy()
    lam_red = res_r.lambdas.T.copy()

    delta = r_full - r_red
    channel_delta = delta.mean(axis=1)  # [P, C]
    participant_summary = np.median(channel_delta, axis=1)
    channel_p = np.zeros(n_chan)
    channel_test = []
    full_means = r_full.mean(axis=1)
    red_means = r_red.mean(axis=1)
    for c in range(n_chan):
        if n_part >= 8:
            _, non_normal = stats.anderson_darling_normality(channel_delta[:, c])
        else:
            non_normal = True  # too few participants to assess normality
        if non_normal:
            _, p_val = stats.wilcoxon_signed_rank(full_means[:, c], red_means[:, c])
            channel_test.append("wilcoxon")
        else:
            _, p_val = stats.paired_t(full_means[:, c], red_means[:, c])
            channel_test.append("t")
        channel_p[c] = p_val
    fdr_reject = stats.fdr_bh(channel_p, q=alpha)
    significant = fdr_reject & (channel_delta.mean(axis=0) > 0)
    return EncodingResult(r_full=r_full, r_reduced=r_red, delta_r=delta,
                          lambda_full=lam_full, lambda_reduced=lam_red,
                          participant_summary=participant_summary,
                          channel_delta=channel_delta, channel_p=channel_p,
                          channel_test=channel_test, fdr_reject=fdr_reject,
                          significant=significant)


RESULTS_CSV_COLUMNS = ["participant", "channel", "trial", "r_full", "r_reduced",
                       "delta_r", "lambda_full", "lambda_reduced", "significant"]
TOPOGRAPHY_CSV_COLUMNS = ["channel", "mean_delta_r", "se_delta_r", "p_value",
                          "test", "significant"]


def write_results_csv(path, result: EncodingResult) -> None:
    n_part, n_trials, n_chan = result.delta_r.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_CSV_COLUMNS)
        for p in range(n_part):
            for c in range(n_chan):
                for tr in range(n_trials):
                    writer.writerow([
                        p, c, tr,
                        repr(float(result.r_full[p, tr, c])),
                        repr(float(result.r_reduced[p, tr, c])),
                        repr(float(result.delta_r[p, tr, c])),
                        repr(float(result.lambda_full[p, tr])),
                        repr(float(result.lambda_reduced[p, tr])),
                        int(result.significant[c]),
                    ])


def write_topography_csv(path, result: EncodingResult) -> None:
    n_chan = result.channel_p.size
    mean_d = result.channel_delta.mean(axis=0)
    se_d = result.channel_delta.std(axis=0, ddof=1) / np.sqrt(result.channel_delta.shape[0])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TOPOGRAPHY_CSV_COLUMNS)
        for c in range(n_chan):
            writer.writerow([c, repr(float(mean_d[c])), repr(float(se_d[c])),
                             repr(float(result.channel_p[c])), result.channel_test[c],
                             int(result.significant[c])])
