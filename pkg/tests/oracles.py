"""Independent reference implementations used to check the real code.

Everything here is deliberately brute force: finite differences for
gradients and exhaustive enumeration for CRF quantities.  Nothing imports
the dynamic-programming or backward-pass code it is meant to verify.
"""

import itertools

import numpy as np


def finite_difference_grads(loss_fn, arrays, h=1e-5):
    """Central finite differences of ``loss_fn()`` w.r.t. each array entry.

    ``loss_fn`` recomputes the loss from the current array contents; the
    arrays are perturbed in place and restored.
    """
    grads = []
    for arr in arrays:
        grad = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            hi = loss_fn()
            flat[i] = keep - h
            lo = loss_fn()
            flat[i] = keep
            gflat[i] = (hi - lo) / (2 * h)
        grads.append(grad)
    return grads


def relative_error(analytic, numeric):
    num = np.linalg.norm(analytic - numeric)
    den = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    return 0.0 if den == 0 else num / den


def crf_all_sequences(T, K):
    return itertools.product(range(K), repeat=T)


def crf_sequence_score(e, y, transitions, start, end):
    score = start[y[0]] + e[0, y[0]]
    for t in range(1, len(y)):
        score += transitions[y[t - 1], y[t]] + e[t, y[t]]
    return score + end[y[-1]]


def crf_brute_log_partition(e, transitions, start, end):
    T, K = e.shape
    scores = [crf_sequence_score(e, y, transitions, start, end)
              for y in crf_all_sequences(T, K)]
    m = max(scores)
    return m + np.log(sum(np.exp(s - m) for s in scores))


def crf_brute_marginals(e, transitions, start, end):
    T, K = e.shape
    log_z = crf_brute_log_partition(e, transitions, start, end)
    marg = np.zeros((T, K))
    for y in crf_all_sequences(T, K):
        p = np.exp(crf_sequence_score(e, y, transitions, start, end) - log_z)
        for t, label in enumerate(y):
            marg[t, label] += p
    return marg


def crf_brute_viterbi(e, transitions, start, end):
    """Best sequence by exhaustive search.

    Assumes a unique argmax (true almost surely for random real scores);
    crafted tie cases are asserted separately against the documented
    tie-break rule.
    """
    T, K = e.shape
    best_y, best_s = None, -np.inf
    for y in crf_all_sequences(T, K):
        s = crf_sequence_score(e, y, transitions, start, end)
        if s > best_s:
            best_y, best_s = y, s
    return list(best_y), best_s
