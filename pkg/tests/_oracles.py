"""Brute-force reference scorers, kept independent of the library code.

These operate on plain tuples and use explicit scans with used-flags instead
of set algebra, so they can cross-check the production scorers.
"""


def _dedup(items):
    seen = []
    for item in items:
        if item not in seen:
            seen.append(item)
    return seen


def brute_force_ner(pred, gold):
    """pred/gold: lists of (surface, type_name) tuples. Returns (tp, fp, fn)."""
    pred = _dedup(pred)
    gold = _dedup(gold)
    used = [False] * len(gold)
    tp = 0
    for p in pred:
        for i, g in enumerate(gold):
            if not used[i] and p[0] == g[0] and p[1] == g[1]:
                used[i] = True
                tp += 1
                break
    return tp, len(pred) - tp, len(gold) - tp


def brute_force_rel(pred, gold, strict):
    """pred/gold: lists of (subj, subj_type, rel, obj, obj_type); types may be None.

    Boundary mode matches on (subj, rel, obj); strict mode additionally needs
    both argument types present on the prediction and equal to gold's.
    """
    pred = _dedup([p[:5] for p in pred])
    gold = _dedup([g[:5] for g in gold])
    # A repeated core counts once regardless of types.
    pred_cores = _dedup([(p[0], p[2], p[3]) for p in pred])
    gold_cores = _dedup([(g[0], g[2], g[3]) for g in gold])

    def types_for(items, core):
        for s, st, r, o, ot in items:
            if (s, r, o) == core:
                return st, ot
        return None, None

    used = [False] * len(gold_cores)
    tp = 0
    for core in pred_cores:
        for i, gcore in enumerate(gold_cores):
            if used[i] or core != gcore:
                continue
            if strict:
                pst, pot = types_for(pred, core)
                gst, got = types_for(gold, gcore)
                if pst is None or pot is None or (pst, pot) != (gst, got):
                    continue
            used[i] = True
            tp += 1
            break
    return tp, len(pred_cores) - tp, len(gold_cores) - tp


def prf_from_counts(tp, fp, fn):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1
