"""The 42-symbol typing alphabet and its biased illumination randomization.

Symbols are presented in cycles of 7 groups of 6. Group membership is drawn
each cycle by inverse-transform sampling without replacement from a symbol
frequency table, so frequent symbols tend to land in early groups and the
expected wait before the attended symbol lights up is shortened relative to
uniform block randomization.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

__all__ = [
    "SPACE",
    "BACKSPACE",
    "EXIT",
    "CharacterSet",
    "FrequencyTable",
    "Cdf",
    "IlluminationCycle",
    "GroupStats",
    "default_character_set",
    "default_frequency_table",
    "uniform_frequency_table",
    "load_frequency_table",
    "build_cdf",
    "lookup",
    "draw_permutation",
    "draw_permutations",
    "form_cycle",
    "monte_carlo_group_stats",
]

SPACE = ">"
BACKSPACE = "<"
EXIT = "*"

_LETTERS = tuple("ABCDEFGHIJKLMNOPQRSTUVWXYZ")
_DIGITS = tuple("0123456789")
_PUNCT = (".", ",", "?")


@dataclass(frozen=True)
class CharacterSet:
    """An ordered 42-symbol alphabet laid out on a 6x7 grid (row-major)."""

    symbols: tuple[str, ...]
    rows: int = 6
    cols: int = 7
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.symbols) != self.rows * self.cols:
            raise ValueError(
                f"need {self.rows * self.cols} symbols, got {len(self.symbols)}"
            )
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("symbols must be distinct")
        for required in (SPACE, BACKSPACE, EXIT):
            if required not in self.symbols:
                raise ValueError(f"missing required symbol {required!r}")
        for letter in _LETTERS:
            if letter not in self.symbols:
                raise ValueError(f"missing letter {letter!r}")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.symbols)})

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def index(self, symbol: str) -> int:
        return self._index[symbol]

    def position(self, symbol: str) -> tuple[int, int]:
        """Grid (row, column) of a symbol."""
        i = self._index[symbol]
        return divmod(i, self.cols)

    def symbol_at(self, row: int, col: int) -> str:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise ValueError(f"grid position out of range: {(row, col)}")
        return self.symbols[row * self.cols + col]


def default_character_set() -> CharacterSet:
    """Letters, digits, space/backspace/exit and basic punctuation (42 total)."""
    return CharacterSet(_LETTERS + _DIGITS + (SPACE, BACKSPACE, EXIT) + _PUNCT)


@dataclass(frozen=True)
class FrequencyTable:
    """Per-symbol selection probabilities, the bias source for randomization."""

    symbols: tuple[str, ...]
    probs: np.ndarray
    source: str = ""

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float)
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        if len(self.symbols) != probs.size:
            raise ValueError("symbol/probability length mismatch")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("symbols must be distinct")
        if not np.all(np.isfinite(probs)) or np.any(probs <= 0.0):
            raise ValueError("probabilities must be finite and strictly positive")
        total = float(np.sum(probs))
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1 (got {total!r})")
        if SPACE not in self.symbols:
            raise ValueError(f"table must contain the space symbol {SPACE!r}")
        # the space symbol must carry the largest mass (ties allowed: uniform table)
        if float(probs[self.symbols.index(SPACE)]) < float(np.max(probs)) - 1e-15:
            raise ValueError("space symbol must carry the largest probability")

    def prob(self, symbol: str) -> float:
        return float(self.probs[self.symbols.index(symbol)])

    def restrict(self, subset: tuple[str, ...]) -> "FrequencyTable":
        """Renormalized table over a subset of symbols, preserving table order.

        Used for repeated single-symbol illumination passes, where the draw is
        biased by the same relative frequencies. Exempt from the space-symbol
        dominance rule since subsets usually exclude it.
        """
        keep = [s for s in self.symbols if s in set(subset)]
        if len(keep) != len(subset):
            raise ValueError("subset contains symbols not in the table")
        p = np.array([self.probs[self.symbols.index(s)] for s in keep])
        p = p / p.sum()
        table = object.__new__(FrequencyTable)
        object.__setattr__(table, "symbols", tuple(keep))
        p.flags.writeable = False
        object.__setattr__(table, "probs", p)
        object.__setattr__(table, "source", self.source)
        return table


def uniform_frequency_table(symbols: tuple[str, ...]) -> FrequencyTable:
    n = len(symbols)
    return FrequencyTable(tuple(symbols), np.full(n, 1.0 / n), source="uniform")


def load_frequency_table(path) -> FrequencyTable:
    """Load a two-column text file: symbol, probability; '#' starts a comment."""
    symbols: list[str] = []
    probs: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'symbol probability'")
            symbols.append(parts[0])
            try:
                probs.append(float(parts[1]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad probability {parts[1]!r}") from exc
    return FrequencyTable(tuple(symbols), np.array(probs), source=str(path))


def default_frequency_table() -> FrequencyTable:
    """The bundled English table (see data/frequency_en.txt for provenance)."""
    ref = resources.files("spellersim").joinpath("data/frequency_en.txt")
    with resources.as_file(ref) as path:
        table = load_frequency_table(path)
    return FrequencyTable(table.symbols, table.probs, source="builtin English table")


@dataclass(frozen=True)
class Cdf:
    """Cumulative lookup table over a fixed symbol order."""

    symbols: tuple[str, ...]
    breakpoints: np.ndarray

    def __post_init__(self) -> None:
        br = np.asarray(self.breakpoints, dtype=float)
        br.flags.writeable = False
        object.__setattr__(self, "breakpoints", br)
        if br.size != len(self.symbols):
            raise ValueError("breakpoint/symbol length mismatch")
        if np.any(np.diff(br) <= 0.0) or br[0] <= 0.0:
            raise ValueError("breakpoints must be strictly increasing and positive")
        if abs(float(br[-1]) - 1.0) > 1e-12:
            raise ValueError("final breakpoint must equal 1")

    @property
    def masses(self) -> np.ndarray:
        return np.diff(self.breakpoints, prepend=0.0)


def build_cdf(freq: FrequencyTable) -> Cdf:
    """Integrate the frequency table into a cumulative lookup table."""
    return Cdf(freq.symbols, np.cumsum(freq.probs))


def lookup(cdf: Cdf, u: float) -> str:
    """Inverse-transform lookup: the symbol whose interval contains u in [0,1)."""
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0,1), got {u!r}")
    k = int(np.searchsorted(cdf.breakpoints, u, side="right"))
    return cdf.symbols[min(k, len(cdf.symbols) - 1)]


def _draw_batch(masses: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Weighted permutations without replacement, one per row of u.

    Each position consumes one uniform: the remaining masses are accumulated,
    the uniform is scaled onto the remaining total and inverted through the
    running CDF, and the drawn symbol's mass is zeroed (proportional
    renormalization). Row r consumes u[r, 0], u[r, 1], ... in order, so a
    batch of n rows is bit-identical to n sequential single draws.
    """
    n_runs, n_syms = u.shape
    m = np.repeat(masses[None, :], n_runs, axis=0)
    out = np.empty((n_runs, n_syms), dtype=np.int64)
    rows = np.arange(n_runs)
    for k in range(n_syms):
        cum = np.cumsum(m, axis=1)
        target = u[:, k] * cum[:, -1]
        hit = cum > target[:, None]
        j = hit.argmax(axis=1)
        stuck = ~hit[rows, j]  # u rounded up onto the full remaining mass
        if stuck.any():
            j[stuck] = n_syms - 1 - (m[stuck, ::-1] > 0.0).argmax(axis=1)
        out[:, k] = j
        m[rows, j] = 0.0
    return out


def draw_permutation(cdf: Cdf, rng: np.random.Generator) -> tuple[str, ...]:
    """Draw one biased permutation of all symbols without replacement.

    Parameters
    ----------
    cdf : Cdf
        Cumulative table built from the frequency table.
    rng : numpy Generator
        Consumes exactly len(cdf.symbols) uniforms.

    Returns
    -------
    tuple of symbols, most-probable-first in expectation.
    """
    u = rng.random(len(cdf.symbols))
    idx = _draw_batch(cdf.masses, u[None, :])[0]
    return tuple(cdf.symbols[int(i)] for i in idx)


def draw_permutations(cdf: Cdf, n_runs: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n_runs independent permutations at once; returns symbol indices.

    Distribution and stream consumption match n_runs sequential calls to
    draw_permutation exactly (row r uses the r-th block of 42 uniforms).
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    u = rng.random((n_runs, len(cdf.symbols)))
    return _draw_batch(cdf.masses, u)


@dataclass(frozen=True)
class IlluminationCycle:
    """One full pass over the alphabet: a permutation cut into groups of 6."""

    order: tuple[str, ...]
    groups: tuple[tuple[str, ...], ...]

    def group_index(self, symbol: str) -> int:
        """1-based index of the group containing symbol."""
        for g, group in enumerate(self.groups, start=1):
            if symbol in group:
                return g
        raise KeyError(symbol)


def form_cycle(permutation: tuple[str, ...], group_size: int = 6) -> IlluminationCycle:
    """Cut a permutation into consecutive groups (stage-1 illumination sets).

    The within-group order is the draw order, which is also the stage-2
    single-symbol illumination order.
    """
    perm = tuple(permutation)
    if len(set(perm)) != len(perm):
        raise ValueError("input is not a permutation (repeated symbols)")
    if len(perm) % group_size != 0:
        raise ValueError(f"{len(perm)} symbols do not split into groups of {group_size}")
    groups = tuple(perm[i : i + group_size] for i in range(0, len(perm), group_size))
    return IlluminationCycle(order=perm, groups=groups)


@dataclass(frozen=True)
class GroupStats:
    """Monte Carlo statistics of symbol placement over many drawn cycles."""

    symbols: tuple[str, ...]
    mean_group: np.ndarray      # per symbol, 1-based group index average
    mean_position: np.ndarray   # per symbol, 1-based draw position average
    first_draw_counts: np.ndarray
    n_runs: int

    def mean_group_of(self, symbol: str) -> float:
        return float(self.mean_group[self.symbols.index(symbol)])


def monte_carlo_group_stats(
    freq: FrequencyTable,
    n_runs: int,
    rng: np.random.Generator,
    *,
    group_size: int = 6,
) -> GroupStats:
    """Estimate per-symbol mean group index and mean draw position.

    Statistics are over n_runs independent permutations; deterministic for a
    given stream.
    """
    cdf = build_cdf(freq)
    orders = draw_permutations(cdf, n_runs, rng)
    n_syms = len(freq.symbols)
    positions = np.empty_like(orders)
    rows = np.arange(n_runs)[:, None]
    positions[rows, orders] = np.arange(n_syms)[None, :]
    return GroupStats(
        symbols=freq.symbols,
        mean_group=(positions // group_size + 1).mean(axis=0),
        mean_position=(positions + 1).mean(axis=0),
        first_draw_counts=np.bincount(orders[:, 0], minlength=n_syms),
        n_runs=n_runs,
    )
