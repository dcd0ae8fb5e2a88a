"""Cross-chain convergence diagnostics.

Split-chain rank-normalised R-hat and bulk/tail effective sample sizes,
computed per quantity on a (n_chains, n_draws) array.  Tail ESS is the
smaller of the ESS values of the 5% and 95% quantile exceedance
indicators.  Constant chains yield NaN and are flagged by callers.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

__all__ = ["split_chains", "rank_normalise", "rhat", "ess_bulk", "ess_tail", "autocorrelation"]


def split_chains(chains: np.ndarray) -> np.ndarray:
    """Halve each chain, doubling the chain count (odd tail draw dropped)."""
    chains = np.asarray(chains, dtype=float)
    n_draw = chains.shape[1] // 2
    return np.vstack([chains[:, :n_draw], chains[:, n_draw : 2 * n_draw]])


def rank_normalise(chains: np.ndarray) -> np.ndarray:
    """Map pooled draws to normal scores through their average ranks."""
    flat = np.asarray(chains, dtype=float)
    rank = stats.rankdata(flat, method="average").reshape(flat.shape)
    return stats.norm.ppf((rank - 0.5) / flat.size)


def _rhat_raw(chains: np.ndarray) -> float:
    n_chain, n_draw = chains.shape
    if n_draw < 2:
        return np.nan
    chain_mean = chains.mean(axis=1)
    within = chains.var(axis=1, ddof=1).mean()
    between = n_draw * np.var(chain_mean, ddof=1)
    if not within > 0:
        return np.nan
    var_plus = (n_draw - 1) / n_draw * within + between / n_draw
    return float(np.sqrt(var_plus / within))


def rhat(chains: np.ndarray) -> float:
    """Split-chain R-hat on rank-normalised draws."""
    chains = np.asarray(chains, dtype=float)
    if not np.all(np.isfinite(chains)):
        return np.nan
    if np.allclose(chains, chains.ravel()[0], rtol=0.0, atol=0.0):
        return np.nan
    return _rhat_raw(rank_normalise(split_chains(chains)))


def autocorrelation(x: np.ndarray, max_lag: int | None = None) -> np.ndarray:
    """Autocovariance-based ACF of one chain via FFT, lags 0..max_lag."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if max_lag is None:
        max_lag = n - 1
    if not np.all(np.isfinite(x)):
        out = np.full(max_lag + 1, np.nan)
        out[0] = 1.0
        return out
    xc = x - x.mean()
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f))[: max_lag + 1].real / n
    if acov[0] <= 0:
        out = np.zeros(max_lag + 1)
        out[0] = 1.0
        return out
    return acov / acov[0]


def _ess_raw(chains: np.ndarray) -> float:
    """Combined-chain ESS with Geyer's initial monotone sequence."""
    n_chain, n_draw = chains.shape
    if n_draw < 4:
        return np.nan
    acov = np.empty((n_chain, n_draw))
    for c in range(n_chain):
        x = chains[c]
        rho = autocorrelation(x)
        acov[c] = rho * x.var(ddof=0)
    chain_mean = chains.mean(axis=1)
    mean_var = acov[:, 0].mean() * n_draw / (n_draw - 1.0)
    var_plus = mean_var * (n_draw - 1.0) / n_draw
    if n_chain > 1:
        var_plus += np.var(chain_mean, ddof=1)
    if not var_plus > 0:
        return np.nan

    rho_hat = np.zeros(n_draw)
    rho_hat[0] = 1.0
    rho_even = 1.0
    rho_odd = 1.0 - (mean_var - acov[:, 1].mean()) / var_plus
    rho_hat[1] = rho_odd
    t = 1
    while t < n_draw - 2 and (rho_even + rho_odd) >= 0.0:
        rho_even = 1.0 - (mean_var - acov[:, t + 1].mean()) / var_plus
        rho_odd = 1.0 - (mean_var - acov[:, t + 2].mean()) / var_plus
        rho_hat[t + 1] = rho_even
        if (rho_even + rho_odd) >= 0:
            rho_hat[t + 2] = rho_odd
        t += 2
    max_t = t
    t = 1
    while t <= max_t - 2:
        if rho_hat[t + 1] + rho_hat[t + 2] > rho_hat[t - 1] + rho_hat[t]:
            rho_hat[t + 1] = (rho_hat[t - 1] + rho_hat[t]) / 2.0
            rho_hat[t + 2] = rho_hat[t + 1]
        t += 2
    tau_hat = -1.0 + 2.0 * rho_hat[:max_t].sum() + rho_hat[max_t + 1 : max_t + 2].sum()
    tau_hat = max(tau_hat, 1.0 / np.log10(n_chain * n_draw + 10.0))
    if np.isnan(rho_hat).any():
        return np.nan
    return float(n_chain * n_draw / tau_hat)


def ess_bulk(chains: np.ndarray) -> float:
    chains = np.asarray(chains, dtype=float)
    if not np.all(np.isfinite(chains)):
        return np.nan
    if np.allclose(chains, chains.ravel()[0], rtol=0.0, atol=0.0):
        return np.nan
    return _ess_raw(rank_normalise(split_chains(chains)))


def _ess_quantile(chains: np.ndarray, prob: float) -> float:
    q = np.quantile(chains, prob)
    indicator = (chains <= q).astype(float)
    if np.allclose(indicator, indicator.ravel()[0], rtol=0.0, atol=0.0):
        return np.nan
    return _ess_raw(rank_normalise(split_chains(indicator)))


def ess_tail(chains: np.ndarray) -> float:
    chains = np.asarray(chains, dtype=float)
    if not np.all(np.isfinite(chains)):
        return np.nan
    if np.allclose(chains, chains.ravel()[0], rtol=0.0, atol=0.0):
        return np.nan
    return min(_ess_quantile(chains, 0.05), _ess_quantile(chains, 0.95))
