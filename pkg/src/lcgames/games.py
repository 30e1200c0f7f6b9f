"""Named benchmark games and the XOR-family builders.

Numerical constants (random XOR coefficients, the perturbation table and
the Boolean XOR sign patterns) are loaded from ``data/constants.json``.
"""

from __future__ import annotations

import itertools
import json
import re
from functools import lru_cache
from importlib import resources

import numpy as np

from .game_model import (ConnectivityGraph, GameError, LatencyFunction, Scenario, SimpleLCGame,
                         siso_game)

BITS3 = ["".join(bits) for bits in itertools.product("01", repeat=3)]


@lru_cache(maxsize=1)
def constants():
    text = resources.files("lcgames").joinpath("data/constants.json").read_text()
    return json.loads(text)


def _graph(n, pairs):
    return ConnectivityGraph.bidirected(n, pairs)


def xor_predicate(beta_hat):
    """Predicate max(beta_hat[s] * (-1)^(a1^a2^a3), 0) for a three-party XOR game."""
    beta_hat = np.asarray(beta_hat, dtype=float).reshape(2, 2, 2)
    if np.any(np.abs(beta_hat) > 1):
        raise GameError("XOR coefficients must lie in [-1, 1]")
    parity = np.indices((2, 2, 2)).sum(axis=0) % 2
    signs = 1 - 2 * parity
    return np.maximum(beta_hat[:, :, :, None, None, None] * signs[None, None, None], 0.0)


def xor_game(beta_hat, graph=None, name=None):
    """XOR game scored as a winning probability (Boolean coefficients)."""
    scenario = Scenario((2, 2, 2), (2, 2, 2))
    return SimpleLCGame(scenario, xor_predicate(beta_hat), None, graph, name)


def signed_tables(beta_hat, eta=None, lam=0.0):
    """Predicate and score for the signed payoff (1-lam)*beta_hat*(-1)^(a1^a2^a3) + lam*eta.

    The payoff can be negative, so it is stored as the [0, 1] predicate
    (2(1-lam)max(beta_hat*sign, 0) + lam*eta) / (2-lam) together with the
    affine score that maps winning probabilities back to payoff units.
    The two differ by a per-input constant, so optimisers are unaffected.
    """
    if not 0.0 <= lam <= 1.0:
        raise GameError(f"lambda={lam} is outside [0, 1]")
    eta = np.zeros((2,) * 6) if eta is None else np.asarray(eta, dtype=float).reshape((2,) * 6)
    if np.any(eta < 0) or np.any(eta > 1):
        raise GameError("perturbation entries must lie in [0, 1]")
    clipped = xor_predicate(beta_hat)
    predicate = (2.0 * (1.0 - lam) * clipped + lam * eta) / (2.0 - lam)
    mean_abs = float(np.mean(np.abs(beta_hat)))
    return predicate, (2.0 - lam, -(1.0 - lam) * mean_abs)


def signed_xor_game(beta_hat, eta=None, lam=0.0, graph=None, name=None):
    predicate, score = signed_tables(beta_hat, eta, lam)
    return SimpleLCGame(Scenario((2, 2, 2), (2, 2, 2)), predicate, None, graph, name, score)


def truth_table(function_id, n, m):
    """Truth table of f: [n] x [m] -> {0,1}; f(i, j) is bit m*i+j, leftmost bit most significant."""
    size = n * m
    if not 0 <= function_id < 2 ** size:
        raise GameError(f"ID {function_id} does not fit a {n}x{m} truth table")
    bits = format(function_id, f"0{size}b")
    return [int(b) for b in bits]


def extended_xor_game(function_id, n=3, m=3, graph=None):
    """Party 0 has a fixed input; wins iff a0 == a1 and f(s1, s2) == a0 ^ a2."""
    table = np.array(truth_table(function_id, n, m)).reshape(n, m)
    predicate = np.zeros((1, n, m, 2, 2, 2))
    for s1, s2, a0, a2 in itertools.product(range(n), range(m), range(2), range(2)):
        if table[s1, s2] == a0 ^ a2:
            predicate[0, s1, s2, a0, a0, a2] = 1.0
    graph = graph if graph is not None else _graph(3, [(0, 1)])
    return SimpleLCGame(Scenario((1, n, m), (2, 2, 2)), predicate, None, graph,
                        f"extended-xor:{function_id}")


def distributed_chsh(graph=None):
    predicate = np.zeros((2,) * 6)
    for s0, s1, s2, a0, a2 in itertools.product(range(2), repeat=5):
        if ((s0 ^ s1) & s2) == (a0 ^ a2):
            predicate[s0, s1, s2, a0, a0, a2] = 1.0
    graph = graph if graph is not None else _graph(3, [(0, 1)])
    return SimpleLCGame(Scenario((2, 2, 2), (2, 2, 2)), predicate, None, graph, "distributed-chsh")


def distributed_chsh_nm(n, m, graph=None):
    """Two groups of sizes n and m; each group must agree and the groups play CHSH on input parities."""
    if n < 1 or m < 1:
        raise GameError("both groups need at least one party")
    total = n + m
    predicate = np.zeros((2,) * (2 * total))
    for s in itertools.product(range(2), repeat=total):
        left = sum(s[:n]) % 2
        right = sum(s[n:]) % 2
        for x, y in itertools.product(range(2), repeat=2):
            if (left & right) == (x ^ y):
                predicate[s + (x,) * n + (y,) * m] = 1.0
    if graph is None:
        pairs = [p for p in itertools.combinations(range(n), 2)]
        pairs += [p for p in itertools.combinations(range(n, total), 2)]
        graph = _graph(total, pairs)
    return SimpleLCGame(Scenario((2,) * total, (2,) * total), predicate, None, graph,
                        f"distributed-chsh-nm({n},{m})")


def extended_chsh(graph=None):
    """Parties 0 and 2 play CHSH; party 1 has no input and must copy party 0's answer."""
    predicate = np.zeros((2, 1, 2, 2, 2, 2))
    for s0, s2, a0, a2 in itertools.product(range(2), repeat=4):
        if (s0 & s2) == (a0 ^ a2):
            predicate[s0, 0, s2, a0, a0, a2] = 1.0
    graph = graph if graph is not None else _graph(3, [(0, 1)])
    return SimpleLCGame(Scenario((2, 1, 2), (2, 2, 2)), predicate, None, graph, "extended-chsh")


# Magic-square grid parities: every row multiplies to +1, columns to (+1, +1, -1).
ROW_PARITY = (1, 1, 1)
COLUMN_PARITY = (1, 1, -1)


def _sign(bit):
    return 1 - 2 * bit


def line_signs(code):
    """Signs of the three cells written by the line-filling party for output ``code``."""
    bits = [(code >> 2) & 1, (code >> 1) & 1, code & 1]
    return [_sign(b) for b in bits]


def distributed_magic_square(graph=None):
    """Parties 0 and 1 hold the row and column of one cell; party 2 fills a row (0-2) or column (3-5).

    Outputs of parties 0 and 1 are bits (0 for +1); party 2 answers with three
    bits, most significant first, one per cell of its line.
    """
    predicate = np.zeros((3, 3, 6, 2, 2, 8))
    prior = np.zeros((3, 3, 6))
    for r, c in itertools.product(range(3), repeat=2):
        prior[r, c, r] += 1.0 / 18
        prior[r, c, c + 3] += 1.0 / 18
        for line, cell in ((r, c), (c + 3, r)):
            parity = ROW_PARITY[line] if line < 3 else COLUMN_PARITY[line - 3]
            for code in range(8):
                signs = line_signs(code)
                if signs[0] * signs[1] * signs[2] != parity:
                    continue
                bit = (1 - signs[cell]) // 2
                predicate[r, c, line, bit, bit, code] = 1.0
    graph = graph if graph is not None else _graph(3, [(0, 1)])
    return SimpleLCGame(Scenario((3, 3, 6), (2, 2, 8)), predicate, prior, graph,
                        "distributed-magic-square")


def boolean_xor(name, graph=None):
    table = constants()["boolean_xor"][name]["beta_hat"]
    return xor_game(table, graph, name)


def random_xor(graph=None):
    coefs = constants()["random_xor"]["beta_hat"]
    return signed_xor_game([coefs[k] for k in BITS3], graph=graph, name="random-xor")


def perturbed_xor_parts():
    data = constants()
    beta = [data["random_xor"]["beta_hat"][k] for k in BITS3]
    eta = [data["perturbed_xor"]["eta"][k] for k in BITS3]
    return beta, eta, data["perturbed_xor"]["lambda"]


def perturbed_xor(tau=None):
    """SISO perturbed XOR game on the isosceles-triangle latencies (horizon ``tau``)."""
    beta, eta, lam = perturbed_xor_parts()
    data = constants()["perturbed_xor"]
    tau = max(data["taus"]) if tau is None else tau
    latency = LatencyFunction(data["latency"], tau)
    predicate, score = signed_tables(beta, eta, lam)
    return siso_game(predicate, None, latency, (2, 2, 2), (2, 2, 2), "perturbed-xor", score)


GAMES = {
    "distributed-chsh": ("Three parties; the first two agree and play CHSH on their input parity with the third.",
                         distributed_chsh),
    "distributed-magic-square": ("Magic square with the cell coordinates split between two parties.",
                                 distributed_magic_square),
    "extended-chsh": ("CHSH between parties 0 and 2, with party 1 copying party 0.", extended_chsh),
    "xor1": ("Boolean XOR game with sign (-1)^(s1 s2 s3).", lambda: boolean_xor("xor1")),
    "xor2": ("Boolean XOR game with sign (-1)^(s1 s2).", lambda: boolean_xor("xor2")),
    "xor3": ("Boolean XOR game with sign (-1)^(s1 s3).", lambda: boolean_xor("xor3")),
    "xor4": ("Boolean XOR game with sign (-1)^(s1 (s2 + s3)).", lambda: boolean_xor("xor4")),
    "random-xor": ("Three-party XOR game with fixed random coefficients.", random_xor),
    "perturbed-xor": ("Random XOR game mixed with a perturbation table, on triangle latencies.",
                      perturbed_xor),
}

EXTENDED_XOR = re.compile(r"^extended-xor:(\d+)$")
CHSH_NM = re.compile(r"^distributed-chsh-nm\((\d+),(\d+)\)$")


def catalog_list():
    """Sorted (name, description) pairs; ``extended-xor:<ID>`` is a family."""
    rows = [(name, desc) for name, (desc, _) in GAMES.items()]
    rows.append(("extended-xor:<ID>", "Extended XOR game of a 3x3 Boolean function given by its ID."))
    return sorted(rows)


def get_game(name):
    if name in GAMES:
        return GAMES[name][1]()
    match = EXTENDED_XOR.match(name)
    if match:
        return extended_xor_game(int(match.group(1)))
    match = CHSH_NM.match(name)
    if match:
        return distributed_chsh_nm(int(match.group(1)), int(match.group(2)))
    raise GameError(f"unknown catalog game {name!r}")
