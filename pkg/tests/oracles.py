"""Independent reference implementations used by the tests.

These are deliberately naive: exhaustive search over edit scripts and a
pure-Python greedy code builder that enumerates edit balls directly.
"""
from collections import deque
from itertools import product


def all_strings(max_len):
    for k in range(max_len + 1):
        for t in product("01", repeat=k):
            yield "".join(t)


def _neighbours(s, max_len):
    for i in range(len(s)):
        yield s[:i] + s[i + 1 :]
    if len(s) < max_len:
        for i in range(len(s) + 1):
            yield s[:i] + "0" + s[i:]
            yield s[:i] + "1" + s[i:]


def script_distances(x, max_len):
    """Fewest single-bit insertions/deletions from ``x`` to every string of length <= ``max_len``.

    Breadth-first search over edit scripts.  An optimal script can always do
    its deletions before its insertions, so no intermediate string is longer
    than both endpoints and the search space can be capped at ``max_len``.
    """
    dist = {x: 0}
    todo = deque([x])
    while todo:
        s = todo.popleft()
        for t in _neighbours(s, max_len):
            if t not in dist:
                dist[t] = dist[s] + 1
                todo.append(t)
    return dist


def _delete_one(words):
    return {w[:i] + w[i + 1 :] for w in words for i in range(len(w))}


def _insert_one(words):
    return {w[:i] + b + w[i:] for w in words for i in range(len(w) + 1) for b in "01"}


def edit_ball(s, radius):
    """Equal-length strings within insertion/deletion distance ``radius`` of ``s``.

    Between equal-length strings the distance is ``2h`` for ``h`` deletions
    followed by ``h`` insertions, so ``h`` runs up to ``radius // 2``.
    """
    ball = {s}
    shorter = {s}
    for h in range(1, radius // 2 + 1):
        shorter = _delete_one(shorter)
        grown = shorter
        for _ in range(h):
            grown = _insert_one(grown)
        ball |= grown
    return ball


def greedy_code(n, radius, gen):
    """Greedy packing with a sorted survivor list and the same random draws as the library."""
    survivors = sorted(range(1 << n))
    alive = set(survivors)
    picks = []
    while survivors:
        s = survivors[gen.integers(len(survivors))]
        picks.append(s)
        word = format(s, f"0{n}b") if n else ""
        removed = {int(w, 2) for w in edit_ball(word, radius)}
        alive -= removed
        alive.discard(s)
        survivors = sorted(alive)
    return [format(s, f"0{n}b") for s in picks]
