"""Monte-Carlo evaluation of the plausible region of parameter vectors.

A parameter vector theta is plausible for given data when its posterior
density exceeds its prior density, which reduces to a likelihood-ratio
test against the maximum-likelihood point:

    lambda(theta) = L(theta) / L(theta_ML) > lambda_pl,
    lambda_pl     = E_prior[ lambda(theta) ].

Both lambda_pl and the region's prior content ("size") and posterior
content ("credibility") are estimated from M prior samples:

    lambda_pl   ~ (1/M) sum_m lambda^(m),
    size        ~ (1/M) sum_m chi(lambda^(m) > lambda_pl),
    credibility ~ sum_m lambda^(m) chi(...) / (M lambda_pl).

The prior draws each Bloch vector isotropically and alpha uniformly on
[0, pi/2] (p0 = cos^2 alpha).  Evaluation is streamed in fixed-size
chunks, two passes over the same deterministic chunk streams: pass one
accumulates the lambda moments that fix the threshold, pass two replays
the identical samples and accumulates the indicator sums, so no lambda
sample is ever stored.  Chunks own SeedSequence-derived substreams and
are reduced in chunk order, which makes reports bitwise reproducible for
any worker count at fixed (seed, chunk_size).

Division by L(theta_ML) keeps the log ratios near zero for typical
samples; with N counts the raw log likelihoods sit around -N log K and
would underflow any direct exponentiation.  Ratios that still underflow
to 0 are legitimate (deep in the implausible tail); only an all-zero
sample aborts, advising a larger M or smaller N.

Size and credibility estimates are scale errors of order 1/sqrt(M); the
attached standard errors come from the per-sample moment sums (delta
method for the credibility ratio), treating the threshold as fixed.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .estimate import log_likelihood
from .povm import get_povm, povm_for_arity
from .qstate import ParamVector, moment_features, random_param_array

# per-outcome stand-in for log 0: large enough that any observed count
# drives lambda to exact 0, finite so that 0*log(0) products stay 0
LOG_ZERO = -1e12
# cap on log lambda: keeps lambda**2 finite even for a suboptimal theta_ml
LOG_CAP = 300.0

DEFAULT_CHUNK = 100_000


class DegenerateSampleError(RuntimeError):
    """Every prior sample had likelihood ratio 0; enlarge M or reduce N."""


def _as_seedseq(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _chunk_children(seed, n_chunks):
    """Index-keyed child SeedSequences; stateless, replayable."""
    ss = _as_seedseq(seed)
    base = tuple(ss.spawn_key)
    return [np.random.SeedSequence(entropy=ss.entropy, spawn_key=base + (i,))
            for i in range(n_chunks)]


@dataclass(frozen=True)
class PriorSampler:
    """Deterministic chunked stream of prior parameter draws."""

    seed: object
    m: int
    chunk_size: int = DEFAULT_CHUNK

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("sample count must be at least 1")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be at least 1")

    @property
    def n_chunks(self):
        return -(-self.m // self.chunk_size)

    def chunk_arrays(self):
        """Yield (b, 5) parameter arrays, b = chunk_size except the tail."""
        children = _chunk_children(self.seed, self.n_chunks)
        left = self.m
        for child in children:
            b = min(self.chunk_size, left)
            rng = np.random.Generator(np.random.Philox(child))
            yield random_param_array(rng, b)
            left -= b


def sample_prior(m, seed):
    """Iterate m prior-distributed ParamVectors."""
    for arr in PriorSampler(seed, m).chunk_arrays():
        for row in arr:
            yield ParamVector.from_array(row)


# --------------------------------------------------------------------------
# Chunk workers (module level for process pools)

def _chunk_stats(args):
    """Per-checkpoint lambda statistics for one prior chunk.

    Pass one (thresholds is None) returns rows
        (sum lambda, sum lambda^2, count lambda > 0);
    pass two returns rows
        (count lambda > threshold, sum lambda above, sum lambda^2 above).
    """
    child, b, povm_name, counts_mat, logl_ml, thresholds = args
    povm = get_povm(povm_name)
    rng = np.random.Generator(np.random.Philox(child))
    rows = random_param_array(rng, b)
    qs = moment_features(rows) @ povm.moment_matrix.T
    logq = np.where(qs > 0.0, np.log(np.maximum(qs, 1e-300)), LOG_ZERO)
    out = np.empty((len(counts_mat), 3))
    for i in range(len(counts_mat)):
        loglam = logq @ counts_mat[i]
        loglam -= logl_ml[i]
        np.minimum(loglam, LOG_CAP, out=loglam)
        lam = np.exp(loglam)
        if thresholds is None:
            out[i] = (lam.sum(), float(lam @ lam), np.count_nonzero(lam))
        else:
            above = lam[lam > thresholds[i]]
            out[i] = (above.size, above.sum(), float(above @ above))
    return out


def _reduce_chunks(tasks, workers):
    """Sum worker outputs in chunk order (fixed reduction order)."""
    total = None
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = pool.map(_chunk_stats, tasks, chunksize=1)
            for r in results:
                total = r if total is None else total + r
    else:
        for t in tasks:
            r = _chunk_stats(t)
            total = r if total is None else total + r
    return total


# --------------------------------------------------------------------------
# Reports

@dataclass(frozen=True)
class PlausibilityReport:
    """Threshold, size and credibility of the plausible region."""

    n_total: int
    lambda_pl: float
    size_pl: float
    credibility_pl: float
    m_samples: int
    se_lambda_pl: float
    se_size: float
    se_credibility: float
    truth_plausible: object = None


def _ratio(theta, counts, povm, logl_ml):
    ll = log_likelihood(theta, counts, povm)
    if ll == -math.inf:
        return 0.0
    return math.exp(min(ll - logl_ml, LOG_CAP))


def plausibility_sweep(counts_list, povm, theta_ml_list, m, seed, truth=None,
                       chunk_size=DEFAULT_CHUNK, workers=None):
    """Plausible-region reports for several checkpoints of one count stream.

    counts_list holds cumulative count vectors (say at N = 100, 200, ...)
    and theta_ml_list the matching ML estimates.  All checkpoints share
    the same prior sample, so the per-sample outcome probabilities are
    computed once; with dozens of checkpoints this dominates the cost of
    separate calls.
    """
    povm = get_povm(povm)
    if len(counts_list) != len(theta_ml_list):
        raise ValueError("one theta_ml per counts vector is required")
    if m < 1:
        raise ValueError("sample count must be at least 1")
    workers = workers if workers else 1
    counts_mat = np.asarray([np.asarray(c, dtype=float) for c in counts_list])
    if counts_mat.ndim != 2 or counts_mat.shape[1] != povm.n_outcomes:
        raise ValueError(f"counts vectors must have {povm.n_outcomes} entries")
    totals = counts_mat.sum(axis=1)

    live = [i for i in range(len(counts_mat)) if totals[i] > 0]
    logl_ml = np.zeros(len(counts_mat))
    for i in live:
        ll = log_likelihood(theta_ml_list[i], counts_mat[i], povm)
        if not math.isfinite(ll):
            raise ValueError(f"theta_ml for checkpoint {i} has zero likelihood")
        logl_ml[i] = ll

    reports = [None] * len(counts_mat)
    for i in range(len(counts_mat)):
        if totals[i] == 0:
            # no data: lambda == 1 identically, everything is plausible
            reports[i] = PlausibilityReport(0, 1.0, 1.0, 1.0, m, 0.0, 0.0, 0.0,
                                            True if truth is not None else None)
    if not live:
        return reports

    live_counts = counts_mat[live]
    live_logl = logl_ml[live]
    sampler = PriorSampler(seed, m, chunk_size)
    children = _chunk_children(seed, sampler.n_chunks)
    sizes = [min(chunk_size, m - k * chunk_size) for k in range(sampler.n_chunks)]

    def tasks(thresholds):
        return [(children[k], sizes[k], povm.name, live_counts, live_logl,
                 thresholds) for k in range(sampler.n_chunks)]

    first = _reduce_chunks(tasks(None), workers)
    sum_lam = first[:, 0]
    sum_lam_sq = first[:, 1]
    for j, i in enumerate(live):
        if first[j, 2] == 0:
            raise DegenerateSampleError(
                f"all {m} likelihood ratios are 0 at N = {int(totals[i])}; "
                "increase the sample count or evaluate a smaller N")
    lambda_pl = sum_lam / m

    second = _reduce_chunks(tasks(lambda_pl), workers)
    n_above = second[:, 0]
    sum_above = second[:, 1]
    sum_sq_above = second[:, 2]

    for j, i in enumerate(live):
        lam_pl = float(lambda_pl[j])
        size = float(n_above[j]) / m
        cred = float(sum_above[j] / sum_lam[j])
        var_lam = max(sum_lam_sq[j] / m - lam_pl ** 2, 0.0)
        se_lam = math.sqrt(var_lam / m)
        se_size = math.sqrt(max(size * (1.0 - size), 0.0) / m)
        # credibility is the ratio mean(lam*chi)/mean(lam): delta method
        a = sum_above[j] / m
        var_a = max(sum_sq_above[j] / m - a ** 2, 0.0)
        cov_ab = sum_sq_above[j] / m - a * lam_pl
        denom = lam_pl * lam_pl
        if denom > 0.0:
            var_c = (var_a - 2.0 * cred * cov_ab + cred ** 2 * var_lam) / denom
            se_cred = math.sqrt(max(var_c, 0.0) / m)
        else:
            # threshold so small its square underflows: no usable error bar
            se_cred = math.inf
        plausible = None
        if truth is not None:
            plausible = _ratio(truth, counts_mat[i], povm, logl_ml[i]) > lam_pl
        reports[i] = PlausibilityReport(int(totals[i]), lam_pl, size, cred, m,
                                        se_lam, se_size, se_cred, plausible)
    return reports


def plausibility(counts, povm, theta_ml, m, seed, truth=None,
                 chunk_size=DEFAULT_CHUNK, workers=None):
    """Plausible-region report for a single count vector."""
    return plausibility_sweep([counts], povm, [theta_ml], m, seed, truth,
                              chunk_size, workers)[0]


def is_plausible(theta, counts, theta_ml, lambda_pl, povm=None):
    """Whether lambda(theta) = L(theta)/L(theta_ml) exceeds lambda_pl."""
    if povm is None:
        povm = povm_for_arity(len(np.asarray(counts)))
    else:
        povm = get_povm(povm)
    logl_ml = log_likelihood(theta_ml, counts, povm)
    if not math.isfinite(logl_ml):
        raise ValueError("theta_ml has zero likelihood for these counts")
    return bool(_ratio(theta, counts, povm, logl_ml) > lambda_pl)


# --------------------------------------------------------------------------
# Large-N asymptotics

@dataclass(frozen=True)
class AsymptoticsReport:
    """Asymptotic predictions from a measured lambda_pl.

    With L = log(1/lambda_pl),

        predicted size            = lambda_pl L^{5/2} / Gamma(7/2),
        predicted 1 - credibility = size (5/(2L) + 15/(4L^2)) + erfc(sqrt(L)),

    and ratio_d divides the measured 1 - credibility by the right-hand
    side evaluated with the measured size; it tends to 1 in the
    asymptotic regime and is the least noise-sensitive of the three
    comparisons.
    """

    n_total: int
    lambda_pl: float
    predicted_size: float
    predicted_one_minus_credibility: float
    ratio_d: object = None


_GAMMA_7_2 = math.gamma(3.5)


def _credibility_bracket(size, big_l):
    return size * (2.5 / big_l + 3.75 / (big_l * big_l)) + math.erfc(math.sqrt(big_l))


def asymptotics(n_total, lambda_pl, size=None, credibility=None):
    """Asymptotic size/credibility predictions, and ratio_d when measured
    values are supplied."""
    if not 0.0 < lambda_pl < 1.0:
        raise ValueError("lambda_pl must lie strictly between 0 and 1")
    big_l = -math.log(lambda_pl)
    predicted_size = lambda_pl * big_l ** 2.5 / _GAMMA_7_2
    predicted_omc = _credibility_bracket(predicted_size, big_l)
    ratio_d = None
    if size is not None and credibility is not None:
        ratio_d = (1.0 - credibility) / _credibility_bracket(size, big_l)
    return AsymptoticsReport(int(n_total), float(lambda_pl), predicted_size,
                             predicted_omc, ratio_d)
