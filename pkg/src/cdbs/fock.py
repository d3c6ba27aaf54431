"""Exact Fock-space simulation of linear-optical circuits.

Fock states are plain tuples of occupation numbers; tuple ordering is the
lexicographic basis order used everywhere (mode 0 most significant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .circuit import (
    TAU_PROB,
    OpticalCircuit,
    PostselectionSpec,
    check,
    interferometer,
    normalize,
)
from .errors import (
    ConservationError,
    DimensionError,
    InfeasiblePostselectionError,
    ResourceLimitError,
)

DEFAULT_BASIS_CAP = 5_000_000
AMPLITUDE_FLOOR = 1e-12

FockState = tuple


def permanent(matrix) -> complex:
    """Permanent by Ryser's inclusion-exclusion formula in Gray-code order.

    Visits the ``2**k`` column subsets so that consecutive subsets differ by a
    single column, updating the row sums in ``O(k)`` per step.
    """
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"permanent needs a square matrix, got shape {a.shape}")
    k = a.shape[0]
    if k == 0:
        return 1 + 0j
    cols = [[complex(x) for x in col] for col in a.T.tolist()]
    rows = [0j] * k
    total = 0j
    sign = 1
    gray = 0
    for i in range(1, 1 << k):
        j = (i & -i).bit_length() - 1
        gray ^= 1 << j
        col = cols[j]
        if (gray >> j) & 1:
            rows = [r + c for r, c in zip(rows, col)]
        else:
            rows = [r - c for r, c in zip(rows, col)]
        sign = -sign
        prod = 1 + 0j
        for r in rows:
            prod *= r
        total += sign * prod
    return -total if k % 2 else total


def _expand(occupations: Sequence[int]) -> list[int]:
    return [mode for mode, count in enumerate(occupations) for _ in range(count)]


def _factorial_norm(s: Sequence[int], t: Sequence[int]) -> float:
    p = 1
    for x in s:
        p *= math.factorial(x)
    for x in t:
        p *= math.factorial(x)
    return math.sqrt(p)


def transition_amplitude(u, input_state: Sequence[int], output_state: Sequence[int]) -> complex:
    """``<output| phi(U) |input>`` for the multi-photon action of ``U``."""
    a = np.asarray(u, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"interferometer must be square, got shape {a.shape}")
    m = a.shape[0]
    if len(input_state) != m or len(output_state) != m:
        raise DimensionError(
            f"states of length {len(input_state)} and {len(output_state)} for a {m}-mode interferometer"
        )
    if sum(input_state) != sum(output_state):
        raise ConservationError(f"input has {sum(input_state)} photons, output has {sum(output_state)}")
    cols = _expand(input_state)
    rows = _expand(output_state)
    sub = a[np.ix_(rows, cols)]
    return permanent(sub) / _factorial_norm(input_state, output_state)


def basis_size(n: int, m: int) -> int:
    return math.comb(n + m - 1, n) if m > 0 else int(n == 0)


def fock_basis(n: int, m: int) -> Iterator[FockState]:
    """All ``n``-photon states on ``m`` modes in ascending lexicographic order."""
    if m == 0:
        if n == 0:
            yield ()
        return
    if m == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in fock_basis(n - first, m - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class Distribution:
    """Finite distribution over outcome tuples plus postselection success."""

    probabilities: Mapping = field(default_factory=dict)
    success_probability: float = 1.0

    def __post_init__(self):
        items = sorted(self.probabilities.items())
        object.__setattr__(self, "probabilities", dict(items))

    def __getitem__(self, key) -> float:
        return self.probabilities.get(tuple(key), 0.0)

    def __iter__(self):
        return iter(self.probabilities)

    def __len__(self) -> int:
        return len(self.probabilities)

    def items(self):
        return self.probabilities.items()

    def total(self) -> float:
        return math.fsum(self.probabilities.values())

    def support(self, floor: float = 0.0) -> list:
        return [k for k, p in self.probabilities.items() if p > floor]

    def marginal(self, positions: Sequence[int]) -> "Distribution":
        acc: dict = {}
        for k, p in self.probabilities.items():
            key = tuple(k[i] for i in positions)
            acc[key] = acc.get(key, 0.0) + p
        return Distribution(acc, self.success_probability)

    def max_abs_diff(self, other: "Distribution") -> float:
        keys = set(self.probabilities) | set(other.probabilities)
        return max((abs(self[k] - other[k]) for k in keys), default=0.0)

    def tvd(self, other: "Distribution") -> float:
        keys = set(self.probabilities) | set(other.probabilities)
        return 0.5 * math.fsum(abs(self[k] - other[k]) for k in keys)


def output_distribution(circuit: OpticalCircuit, cap: int = DEFAULT_BASIS_CAP) -> Distribution:
    """Probabilities of every output Fock state, by permanents of the interferometer."""
    check(circuit)
    n, m = circuit.n_photons, circuit.m
    size = basis_size(n, m)
    if size > cap:
        raise ResourceLimitError(f"Fock basis of {n} photons in {m} modes has {size} states (cap {cap})", size, cap)
    u = interferometer(circuit)
    probs = {t: abs(transition_amplitude(u, circuit.input, t)) ** 2 for t in fock_basis(n, m)}
    return Distribution(probs)


def postselect(d: Distribution, spec: PostselectionSpec | Mapping[int, int]) -> Distribution:
    """Condition ``d`` on the required counts and drop the postselected positions."""
    if not isinstance(spec, PostselectionSpec):
        spec = PostselectionSpec(spec)
    req = spec.as_dict()
    if not req:
        return d
    width = len(next(iter(d.probabilities))) if d.probabilities else 0
    if any(k < 0 or k >= width for k in req):
        raise DimensionError(f"postselected modes {sorted(req)} outside a {width}-mode distribution")
    keep = [i for i in range(width) if i not in req]
    acc: dict = {}
    for state, p in d.items():
        if all(state[k] == c for k, c in req.items()):
            key = tuple(state[i] for i in keep)
            acc[key] = acc.get(key, 0.0) + p
    success = math.fsum(acc.values())
    if success < TAU_PROB:
        raise InfeasiblePostselectionError(
            f"postselection {dict(req)} has success probability {success:.3e}", success
        )
    return Distribution({k: p / success for k, p in acc.items()}, d.success_probability * success)


def postselected_distribution(circuit: OpticalCircuit, cap: int = DEFAULT_BASIS_CAP) -> Distribution:
    """Same result as ``postselect(output_distribution(c), c.postselection)``.

    Only outcomes that satisfy the postselection are enumerated, so the cost
    scales with the free modes rather than the whole Fock basis.
    """
    check(circuit)
    req = circuit.postselection.as_dict()
    if not req:
        return output_distribution(circuit, cap)
    n, m = circuit.n_photons, circuit.m
    free = [i for i in range(m) if i not in req]
    left = n - sum(req.values())
    if left < 0:
        raise InfeasiblePostselectionError(f"postselection asks for more than {n} photons", 0.0)
    size = basis_size(left, len(free))
    if size > cap:
        raise ResourceLimitError(
            f"{size} postselected outcomes of {left} photons in {len(free)} modes (cap {cap})", size, cap
        )
    u = interferometer(circuit)
    acc = {}
    full = [0] * m
    for k, c in req.items():
        full[k] = c
    for part in fock_basis(left, len(free)):
        for i, c in zip(free, part):
            full[i] = c
        acc[part] = abs(transition_amplitude(u, circuit.input, full)) ** 2
    success = math.fsum(acc.values())
    if success < TAU_PROB:
        raise InfeasiblePostselectionError(f"postselection {req} has success probability {success:.3e}", success)
    return Distribution({k: p / success for k, p in acc.items()}, success)


def sample_distribution(d: Distribution, shots: int, seed: int) -> list:
    """Inverse-CDF sampling over the lexicographically ordered support."""
    if shots < 0:
        raise ValueError("shots must be non-negative")
    if shots == 0:
        return []
    keys = list(d.probabilities)
    cdf = np.cumsum([d.probabilities[k] for k in keys])
    cdf /= cdf[-1]
    rng = np.random.default_rng(seed)
    idx = np.searchsorted(cdf, rng.random(shots), side="right")
    idx = np.minimum(idx, len(keys) - 1)
    return [keys[i] for i in idx]


def sample(circuit: OpticalCircuit, shots: int, seed: int, cap: int = DEFAULT_BASIS_CAP) -> list:
    """Seeded i.i.d. samples from the exact (postselected, if requested) distribution."""
    if shots == 0:
        return []
    if circuit.postselection:
        d = postselected_distribution(circuit, cap)
    else:
        d = output_distribution(circuit, cap)
    return sample_distribution(d, shots, seed)


def two_mode_sector(u, photons: int) -> np.ndarray:
    """Action of a 2x2 mode unitary on the ``photons``-photon sector.

    Entry ``[k, j]`` is the amplitude for ``|j, N-j> -> |k, N-k>``. Built by
    expanding the transformed creation-operator polynomial, so it does not go
    through :func:`permanent`.
    """
    u = np.asarray(u, dtype=complex)
    n = photons
    out = np.zeros((n + 1, n + 1), dtype=complex)
    for j in range(n + 1):
        # (u00 a + u10 b)^j (u01 a + u11 b)^(n-j), coefficients of a^k b^(n-k)
        poly = np.zeros(n + 1, dtype=complex)
        for p in range(j + 1):
            cp = math.comb(j, p) * u[0, 0] ** p * u[1, 0] ** (j - p)
            for q in range(n - j + 1):
                poly[p + q] += cp * math.comb(n - j, q) * u[0, 1] ** q * u[1, 1] ** (n - j - q)
        norm_in = math.sqrt(math.factorial(j) * math.factorial(n - j))
        for k in range(n + 1):
            out[k, j] = poly[k] * math.sqrt(math.factorial(k) * math.factorial(n - k)) / norm_in
    return out


def evolve(circuit: OpticalCircuit, n_layers: int | None = None, floor: float = 0.0, start: dict | None = None) -> dict:
    """Sparse gate-by-gate Fock evolution; returns ``{state: amplitude}``.

    Starts from the circuit input unless ``start`` supplies a state.
    """
    state = {tuple(circuit.input): 1 + 0j} if start is None else start
    layers = circuit.layers if n_layers is None else circuit.layers[:n_layers]
    for layer in layers:
        for p in layer.phases:
            e = complex(np.exp(1j * p.phase))
            state = {s: a * e ** s[p.mode] for s, a in state.items()}
        for g in layer.gates:
            ma, mb = g.modes
            cache: dict[int, np.ndarray] = {}
            new: dict = {}
            for s, amp in state.items():
                n = s[ma] + s[mb]
                if n not in cache:
                    cache[n] = two_mode_sector(g.matrix, n)
                col = cache[n][:, s[ma]]
                base = list(s)
                for k in range(n + 1):
                    c = col[k]
                    if c == 0:
                        continue
                    base[ma], base[mb] = k, n - k
                    t = tuple(base)
                    new[t] = new.get(t, 0j) + amp * c
            state = {s: a for s, a in new.items() if abs(a) > floor}
    return state


def _max_occupation(state: dict, floor: float) -> int:
    return max((max(s, default=0) for s, a in state.items() if abs(a) > floor), default=0)


def occupancy_support(circuit: OpticalCircuit, after_layer: int, floor: float = AMPLITUDE_FLOOR) -> int:
    """Largest single-mode photon count with non-negligible amplitude after ``after_layer`` layers.

    Layers are counted as in :func:`depth`, on the normalized circuit.
    """
    c = normalize(circuit)
    if not 0 <= after_layer <= len(c.layers):
        raise IndexError(f"after_layer {after_layer} outside 0..{len(c.layers)}")
    return _max_occupation(evolve(c, after_layer, floor), floor)


def occupancy_profile(circuit: OpticalCircuit, floor: float = AMPLITUDE_FLOOR) -> list[int]:
    """``occupancy_support`` for every layer count 0..depth in one evolution pass."""
    c = normalize(circuit)
    out = [max(c.input, default=0)]
    state = {tuple(c.input): 1 + 0j}
    for k in range(1, len(c.layers) + 1):
        state = evolve(OpticalCircuit(c.m, c.input, c.layers[k - 1:k]), floor=floor, start=state)
        out.append(_max_occupation(state, floor))
    return out
