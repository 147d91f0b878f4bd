"""Pointwise regression of epoch signals on per-word predictors.

One target predictor at a time enters a design alongside the control
predictors, all mean-centered.  Ordinary least squares runs independently at
every (channel, timepoint) cell per subject; group-level inference thresholds
the across-subject t map and corrects over space and time with a cluster-mass
permutation test whose null permutes the design rows.  Region-of-interest
series feed nested-model likelihood-ratio tests with per-subject intercepts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .signals import EpochSet

CENTERING_TOLERANCE = 1e-10


class RegressionError(ValueError):
    pass


@dataclass
class DesignMatrix:
    columns: list
    values: np.ndarray  # (epochs, predictors)
    target: str | None
    centering: dict  # column -> subtracted mean

    def __post_init__(self):
        if self.values.shape[1] != len(self.columns):
            raise RegressionError("column names and value width disagree")
        for j, name in enumerate(self.columns):
            if name == "intercept":
                continue
            mean = self.values[:, j].mean()
            if abs(mean) > CENTERING_TOLERANCE:
                raise RegressionError(f"column {name!r} is not centered (mean {mean})")

    @property
    def n_rows(self):
        return self.values.shape[0]

    def column_index(self, name):
        try:
            return self.columns.index(name)
        except ValueError:
            raise RegressionError(f"design has no column {name!r}") from None


def build_design(metadata, target, controls) -> DesignMatrix:
    """Intercept plus centered controls plus (optionally) one centered target."""
    requested = list(controls) + ([target] if target is not None else [])
    seen = set()
    for name in requested:
        if name in seen:
            raise RegressionError(f"duplicate design column {name!r}")
        seen.add(name)
    columns = ["intercept"]
    n = None
    series = []
    for name in requested:
        if name not in metadata:
            raise RegressionError(f"metadata has no column {name!r}")
        col = np.asarray(metadata[name], dtype=np.float64)
        n = len(col) if n is None else n
        series.append(col)
        columns.append(name)
    if n is None:
        raise RegressionError("design needs at least one predictor column")
    values = np.empty((n, len(columns)))
    values[:, 0] = 1.0
    centering = {}
    for j, (name, col) in enumerate(zip(columns[1:], series), start=1):
        if col.std() == 0.0:
            raise RegressionError(f"column {name!r} is constant")
        mean = col.mean()
        values[:, j] = col - mean
        centering[name] = float(mean)
    return DesignMatrix(columns, values, target, centering)


def permute_design(design: DesignMatrix, seed) -> DesignMatrix:
    """Rows permuted jointly across all columns; deterministic per seed."""
    perm = np.random.default_rng(seed).permutation(design.n_rows)
    return DesignMatrix(list(design.columns), design.values[perm],
                        design.target, dict(design.centering))


def _collinear_columns(x, columns):
    rank = np.linalg.matrix_rank(x)
    involved = []
    for j in range(x.shape[1]):
        reduced = np.delete(x, j, axis=1)
        if np.linalg.matrix_rank(reduced) == rank:
            involved.append(columns[j])
    return involved


@dataclass
class PointwiseFit:
    betas: np.ndarray  # (channels, timepoints, predictors)
    residuals: np.ndarray  # (epochs, channels, timepoints)
    columns: list

    def ar1(self):
        """Mean lag-1 autocorrelation of residuals across cells (diagnostic)."""
        r = self.residuals
        a = r[:-1].reshape(r.shape[0] - 1, -1)
        b = r[1:].reshape(r.shape[0] - 1, -1)
        a = a - a.mean(axis=0)
        b = b - b.mean(axis=0)
        denom = np.sqrt((a * a).sum(axis=0) * (b * b).sum(axis=0))
        ok = denom > 0
        return float(((a * b).sum(axis=0)[ok] / denom[ok]).mean())


def fit_pointwise(epochs: EpochSet, design: DesignMatrix) -> PointwiseFit:
    """Ordinary least squares at every (channel, timepoint) cell."""
    x = design.values
    if x.shape[0] != epochs.n_epochs:
        raise RegressionError(f"design has {x.shape[0]} rows for "
                              f"{epochs.n_epochs} epochs")
    if np.linalg.matrix_rank(x) < x.shape[1]:
        raise RegressionError("rank-deficient design; collinear columns: "
                              f"{_collinear_columns(x, design.columns)}")
    n, c, t = epochs.data.shape
    y = epochs.data.reshape(n, c * t)
    beta = np.linalg.pinv(x) @ y  # (p, c*t)
    resid = (y - x @ beta).reshape(n, c, t)
    betas = beta.T.reshape(c, t, x.shape[1])
    return PointwiseFit(betas, resid, list(design.columns))


# --- cluster-based permutation test ------------------------------------------

@dataclass
class ClusterResult:
    members: list  # (channel, timepoint) cells
    mass: float  # summed statistic, signed
    p_value: float
    polarity: int  # +1 or -1


def _split_by_subject(epochs, design):
    subjects = epochs.metadata.get("subject")
    if subjects is None:
        raise RegressionError("epoch metadata has no 'subject' column")
    order = []
    groups = {}
    for i, s in enumerate(subjects):
        if s not in groups:
            groups[s] = []
            order.append(s)
        groups[s].append(i)
    return [(s, np.asarray(groups[s], dtype=np.intp)) for s in order]


def _subject_target_betas(epochs, design, perm_seeds=None):
    """Per-subject target beta maps, optionally under per-subject permutation."""
    if design.target is None:
        raise RegressionError("cluster test needs a design with a target column")
    target_j = design.column_index(design.target)
    groups = _split_by_subject(epochs, design)
    n, c, t = epochs.data.shape
    betas = np.empty((len(groups), c, t))
    for gi, (subject, rows) in enumerate(groups):
        x = design.values[rows]
        if np.linalg.matrix_rank(x) < x.shape[1]:
            raise RegressionError(f"design is rank-deficient within subject {subject}; "
                                  f"collinear columns: {_collinear_columns(x, design.columns)}")
        pinv_target = np.linalg.pinv(x)[target_j]  # (rows,)
        y = epochs.data[rows].reshape(len(rows), c * t)
        if perm_seeds is not None:
            perm = np.random.default_rng(perm_seeds[gi]).permutation(len(rows))
            inv = np.empty_like(perm)
            inv[perm] = np.arange(len(perm))
            y = y[inv]  # permuting design rows == inverse-permuting data rows
        betas[gi] = (pinv_target @ y).reshape(c, t)
    return betas


def _t_map(betas):
    n = betas.shape[0]
    mean = betas.mean(axis=0)
    sd = betas.std(axis=0, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(sd > 0, mean / (sd / np.sqrt(n)), 0.0)
    return t


def _neighbors_table(n_channels, adjacency):
    table = [[] for _ in range(n_channels)]
    for a, b in adjacency:
        table[a].append(b)
        table[b].append(a)
    return table


def _clusters_from_map(t_map, t_crit, neighbors):
    """Sign-consistent connected components above threshold, with masses."""
    out = []
    for polarity in (1, -1):
        mask = t_map > t_crit if polarity == 1 else t_map < -t_crit
        visited = np.zeros_like(mask)
        n_ch, n_tp = mask.shape
        for c0 in range(n_ch):
            for t0 in np.nonzero(mask[c0] & ~visited[c0])[0]:
                stack = [(c0, int(t0))]
                visited[c0, t0] = True
                members = []
                while stack:
                    c, t = stack.pop()
                    members.append((c, t))
                    for t2 in (t - 1, t + 1):
                        if 0 <= t2 < n_tp and mask[c, t2] and not visited[c, t2]:
                            visited[c, t2] = True
                            stack.append((c, t2))
                    for c2 in neighbors[c]:
                        if mask[c2, t] and not visited[c2, t]:
                            visited[c2, t] = True
                            stack.append((c2, t))
                mass = float(sum(t_map[c, t] for c, t in members))
                out.append((members, mass, polarity))
    return out


def cluster_permutation_test(epochs: EpochSet, design: DesignMatrix, n_perm=1000,
                             threshold_p=0.05, adjacency=None, seed=0, n_threads=1):
    """Group-level cluster-mass permutation test on target coefficients.

    Per subject and cell, the target OLS coefficient is computed; the
    across-subject one-sample t map is thresholded two-sided at threshold_p,
    spatiotemporally connected sign-consistent clusters are formed, and each
    observed cluster mass is referred to the permutation distribution of the
    maximum absolute cluster mass (design rows permuted independently per
    subject).  p uses the (1 + exceedances) / (1 + n_perm) convention, so it
    is never exactly zero.
    """
    if n_perm < 100:
        raise RegressionError("need at least 100 permutations")
    if adjacency is None:
        adjacency = epochs.adjacency
    observed = _subject_target_betas(epochs, design)
    n_subjects = observed.shape[0]
    if n_subjects < 2:
        raise RegressionError("cluster test needs at least two subjects")
    t_crit = float(stats.t.ppf(1.0 - threshold_p / 2.0, n_subjects - 1))
    neighbors = _neighbors_table(epochs.n_channels, adjacency)
    obs_clusters = _clusters_from_map(_t_map(observed), t_crit, neighbors)

    null_max = np.zeros(n_perm)

    def one_perm(i):
        seeds = [np.random.SeedSequence([seed, i, gi]) for gi in range(n_subjects)]
        betas = _subject_target_betas(epochs, design, perm_seeds=seeds)
        clusters = _clusters_from_map(_t_map(betas), t_crit, neighbors)
        return max((abs(m) for _, m, _ in clusters), default=0.0)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            for i, value in enumerate(pool.map(one_perm, range(n_perm))):
                null_max[i] = value
    else:
        for i in range(n_perm):
            null_max[i] = one_perm(i)

    results = []
    for members, mass, polarity in obs_clusters:
        exceed = int((null_max >= abs(mass) - 1e-12).sum())
        p = (1 + exceed) / (1 + n_perm)
        results.append(ClusterResult(members, mass, p, polarity))
    results.sort(key=lambda r: (r.p_value, -abs(r.mass)))
    return results


# --- region-of-interest analysis ---------------------------------------------

def roi_average(epochs: EpochSet, channels, window):
    """Per-epoch mean over the region's channels and time window."""
    if not len(channels):
        raise RegressionError("empty region")
    ch_idx = np.asarray([epochs.channel_index(c) if isinstance(c, str) else int(c)
                         for c in channels], dtype=np.intp)
    tp_idx = epochs.time_indices(*window)
    return epochs.data[:, ch_idx][:, :, tp_idx].mean(axis=(1, 2))


def _subject_dummies(subjects):
    labels = []
    for s in subjects:
        if s not in labels:
            labels.append(s)
    cols = np.zeros((len(subjects), max(0, len(labels) - 1)))
    index = {s: i for i, s in enumerate(labels)}
    for row, s in enumerate(subjects):
        j = index[s]
        if j > 0:
            cols[row, j - 1] = 1.0
    return cols


def _rss(x, y):
    beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    r = y - x @ beta
    return float(r @ r)


def lrt_compare(series, d0: DesignMatrix, d1: DesignMatrix, subjects):
    """Likelihood-ratio comparison of nested designs on a region series.

    Both models receive fixed per-subject intercept columns.  Returns
    (chi2, df, p) with chi2 = n * log(RSS0 / RSS1) and df the column count
    difference.
    """
    y = np.asarray(series, dtype=np.float64)
    n = y.shape[0]
    if d0.n_rows != n or d1.n_rows != n:
        raise RegressionError("design row counts do not match the series")
    set0, set1 = set(d0.columns), set(d1.columns)
    if set0 == set1:
        raise RegressionError("designs are identical; nothing to compare")
    if not set0 < set1:
        raise RegressionError("designs are not nested")
    dummies = _subject_dummies(list(subjects))
    x0 = np.hstack([d0.values, dummies])
    x1 = np.hstack([d1.values, dummies])
    rss0 = _rss(x0, y)
    rss1 = _rss(x1, y)
    df = len(d1.columns) - len(d0.columns)
    chi2 = n * np.log(max(rss0, 1e-300) / max(rss1, 1e-300))
    p = float(stats.chi2.sf(chi2, df))
    return float(chi2), df, p
