"""Slow, literal evaluators used to cross-check the production code.

Sets are frozensets of 0-based source indices; every subset pair is
enumerated with itertools, with no shortcuts.
"""

import itertools
import math


def subsets(items):
    items = sorted(items)
    for k in range(len(items) + 1):
        for combo in itertools.combinations(items, k):
            yield frozenset(combo)


def as_set(dset):
    if isinstance(dset, int):
        return frozenset(i for i in range(dset.bit_length()) if dset >> i & 1)
    return frozenset(dset)


def helper_terms(helpers, rx, mi):
    """(decoding set, helped source, unweighted MI) of every transmission rx heard."""
    return [(as_set(dset), src, mi[node]) for node, dset, src in helpers if node != rx]


def mu_common(group, undecoded, rx, rates, mi, alpha, helpers):
    group, undecoded = frozenset(group), frozenset(undecoded)
    interference = undecoded - group
    heard = helper_terms(helpers, rx, mi)
    for u in subsets(group):
        if not u:
            continue
        rhs = sum(mi[s] for s in u)
        for dset, _, info in heard:
            if (dset & u) and not (dset & interference):
                rhs += alpha * info
        if sum(rates[s] for s in u) > rhs:
            return True
    return False


def mu_individual(s, undecoded, rx, rates, mi, alpha, helpers):
    undecoded = frozenset(undecoded)
    heard = helper_terms(helpers, rx, mi)
    for interference in subsets(undecoded - {s}):
        allowed = undecoded - interference
        some_violation = False
        for u in subsets(allowed):
            if s not in u:
                continue
            rhs = sum(mi[x] for x in u)
            for dset, _, info in heard:
                if s in (dset & u) and not (dset & interference):
                    rhs += alpha * info
            if sum(rates[x] for x in u) > rhs:
                some_violation = True
        if not some_violation:
            return False
    return True


def su_individual(s, rx, rates, mi, alpha, helpers):
    total = mi[s] + sum(alpha * info for _, src, info in helper_terms(helpers, rx, mi) if src == s)
    return rates[s] > total


def cc_individual(s, rx, rates, gains, helpers):
    snr = gains[s] + sum(g for _, src, g in helper_terms(helpers, rx, gains) if src == s)
    return rates[s] > math.log2(1 + snr)
