"""Two-stage selection state machine.

Stage 1 cycles biased 6-symbol groups; an oddball decision on a group opens
stage 2, which illuminates that group's characters one at a time. A second
oddball selects the character. Three side channels modify the loop: a
dictionary-completion mode (1 to 5 next-character candidates, only inside a
word), a posterior-integration shortcut (same strict accumulator argmax on
10 consecutive trials selects outright), and a notification pause after
every selection except the terminal exit symbol.

The machine is a single-owner sequential object: call next_stimulus(),
classify the resulting trial elsewhere, feed the decision to step(), then
advance_clock() with the trial's timing. It never inspects signals; only
decisions and posteriors enter.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .alphabet import (
    EXIT,
    BACKSPACE,
    CharacterSet,
    FrequencyTable,
    build_cdf,
    default_character_set,
    default_frequency_table,
    draw_permutation,
    form_cycle,
)

__all__ = [
    "STAGE1",
    "STAGE2",
    "COMPLETION",
    "PAUSED",
    "EXITED",
    "INTEGRATION",
    "SelectionEvent",
    "Dictionary",
    "load_dictionary",
    "default_dictionary",
    "current_word",
    "completion_candidates",
    "apply_selection",
    "Speller",
    "SessionLog",
    "load_session_log",
]

STAGE1 = "Stage1"
STAGE2 = "Stage2"
COMPLETION = "CompletionMode"
PAUSED = "Paused"
EXITED = "Exited"

# selection mechanisms: STAGE2 and COMPLETION double as mode names
INTEGRATION = "Integration"

_CLAMP = 1e-12
_LETTERS = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZ")


@dataclass
class SelectionEvent:
    """One committed symbol. time_s is stamped by advance_clock."""

    symbol: str
    mechanism: str
    pause_s: float
    time_s: float | None = None


class Dictionary:
    """Uppercase word list with next-character prefix lookup."""

    def __init__(self, words) -> None:
        cleaned = sorted({w.strip().upper() for w in words if w.strip()})
        for word in cleaned:
            if not set(word) <= _LETTERS:
                raise ValueError(f"dictionary word {word!r} contains non-letters")
        self.words: tuple[str, ...] = tuple(cleaned)

    def lookup(self, prefix: str) -> tuple[str, ...]:
        """Distinct next characters of words strictly extending prefix, sorted."""
        prefix = prefix.upper()
        chars = {w[len(prefix)] for w in self.words if w.startswith(prefix) and len(w) > len(prefix)}
        return tuple(sorted(chars))

    def __len__(self) -> int:
        return len(self.words)


def load_dictionary(path) -> Dictionary:
    with open(path, "r", encoding="utf-8") as fh:
        words = [line.split("#", 1)[0].strip() for line in fh]
    return Dictionary(w for w in words if w)


def default_dictionary() -> Dictionary:
    ref = resources.files("spellersim").joinpath("data/dictionary_en.txt")
    with resources.as_file(ref) as path:
        return load_dictionary(path)


def current_word(prompt: str) -> str:
    """Trailing run of letters; empty at a word boundary."""
    end = len(prompt)
    start = end
    while start > 0 and prompt[start - 1] in _LETTERS:
        start -= 1
    return prompt[start:end]


def completion_candidates(dictionary: Dictionary, prompt: str) -> tuple[str, ...]:
    """Completion characters to offer, or empty when completion stays off.

    Off at a word boundary (every word would match) and when more than 5
    continuations exist."""
    partial = current_word(prompt)
    if not partial:
        return ()
    chars = dictionary.lookup(partial)
    if 1 <= len(chars) <= 5:
        return chars
    return ()


def apply_selection(prompt: str, symbol: str) -> str:
    """Prompt after committing symbol.

    Backspace drops the last character (no-op when empty). The exit symbol
    is appended like any other; the caller handles session termination. The
    typed transcript therefore ends with the exit symbol, matching how the
    benchmark sentence is counted."""
    if symbol == BACKSPACE:
        return prompt[:-1]
    return prompt + symbol


class Speller:
    """Selection state machine over one character set.

    Drive it one trial at a time:

        stimulus = speller.next_stimulus()
        ... synthesize + classify the trial ...
        events = speller.step(is_oddball, posterior)
        speller.advance_clock(iti_ms, events, overhead_ms)
    """

    def __init__(
        self,
        rng: np.random.Generator,
        charset: CharacterSet | None = None,
        frequency: FrequencyTable | None = None,
        dictionary: Dictionary | None = None,
        *,
        pause_s: float = 3.0,
        streak_target: int = 10,
        stage2_max_cycles: int = 3,
        completion_max_cycles: int = 3,
    ) -> None:
        if pause_s < 0.0:
            raise ValueError("pause must be nonnegative")
        if streak_target < 1 or stage2_max_cycles < 1 or completion_max_cycles < 1:
            raise ValueError("limits must be >= 1")
        self.rng = rng
        self.charset = charset if charset is not None else default_character_set()
        self.frequency = frequency if frequency is not None else default_frequency_table()
        self.dictionary = dictionary if dictionary is not None else default_dictionary()
        if self.frequency.symbols != self.charset.symbols:
            self.frequency = self.frequency.restrict(self.charset.symbols)
        self.pause_s = pause_s
        self.streak_target = streak_target
        self.stage2_max_cycles = stage2_max_cycles
        self.completion_max_cycles = completion_max_cycles

        self._cdf = build_cdf(self.frequency)
        self._index = {s: i for i, s in enumerate(self.charset.symbols)}
        self._log_reset = math.log(1.0 / len(self.charset.symbols))

        self.mode = STAGE1
        self.prompt = ""
        self.n_trials = 0
        self._trial_ms = 0.0
        self._pause_ms = 0.0

        self._cycle = None
        self._cycle_pos = 0
        self._group: tuple[str, ...] | None = None
        self._stage2_order: tuple[str, ...] = ()
        self._stage2_pos = 0
        self._stage2_cycles = 0
        self._stage2_cdf = None
        self._candidates: tuple[str, ...] = ()
        self._completion_order: tuple[str, ...] = ()
        self._completion_pos = 0
        self._completion_cycles = 0
        self._resume = STAGE1
        self._resume_candidates: tuple[str, ...] = ()
        self._pending: tuple[str, ...] | None = None

        self._log_acc = np.full(len(self.charset.symbols), self._log_reset)
        self._streak = 0
        self._streak_idx: int | None = None

    # -- read-only views ----------------------------------------------------

    @property
    def clock_ms(self) -> float:
        return self._trial_ms + self._pause_ms

    @property
    def clock_s(self) -> float:
        return self.clock_ms / 1000.0

    @property
    def trial_time_ms(self) -> float:
        return self._trial_ms

    @property
    def pause_time_ms(self) -> float:
        return self._pause_ms

    @property
    def streak(self) -> int:
        return self._streak

    @property
    def selected_group(self) -> tuple[str, ...] | None:
        return self._group if self.mode == STAGE2 else None

    @property
    def integration(self) -> np.ndarray:
        """Accumulated per-symbol evidence as normalized probabilities."""
        shifted = self._log_acc - self._log_acc.max()
        weights = np.exp(shifted)
        return weights / weights.sum()

    # -- the trial loop -----------------------------------------------------

    def next_stimulus(self) -> tuple[str, ...]:
        """Symbols illuminated on the upcoming trial.

        Resolves a pending pause first: the mode that follows the pause was
        fixed when the selection happened. Idempotent until step() consumes
        the stimulus."""
        if self.mode == EXITED:
            raise RuntimeError("session has exited")
        if self._pending is not None:
            return self._pending
        if self.mode == PAUSED:
            if self._resume == COMPLETION:
                self._enter_completion(self._resume_candidates)
            else:
                self.mode = STAGE1
                self._cycle = None
        if self.mode == STAGE1:
            if self._cycle is None or self._cycle_pos >= len(self._cycle.groups):
                self._cycle = form_cycle(draw_permutation(self._cdf, self.rng))
                self._cycle_pos = 0
            stimulus = self._cycle.groups[self._cycle_pos]
        elif self.mode == STAGE2:
            stimulus = (self._stage2_order[self._stage2_pos],)
        elif self.mode == COMPLETION:
            stimulus = (self._completion_order[self._completion_pos],)
        else:  # pragma: no cover - modes are exhaustive
            raise RuntimeError(f"cannot illuminate in mode {self.mode}")
        self._pending = stimulus
        return stimulus

    def step(self, is_oddball: bool, posterior: float) -> list[SelectionEvent]:
        """Consume one classified trial; returns selection events (0 or 1)."""
        if self.mode == EXITED:
            raise RuntimeError("session has exited")
        if self._pending is None:
            raise RuntimeError("call next_stimulus() before step()")
        stimulus = self._pending
        self._pending = None

        self.update_integration(stimulus, posterior)

        selected: str | None = None
        mechanism = ""
        if self.mode == STAGE1:
            if is_oddball:
                self._enter_stage2(stimulus)
            else:
                self._cycle_pos += 1
        elif self.mode == STAGE2:
            if is_oddball:
                selected, mechanism = stimulus[0], STAGE2
            else:
                self._stage2_pos += 1
                if self._stage2_pos >= len(self._stage2_order):
                    self._stage2_cycles += 1
                    if self._stage2_cycles >= self.stage2_max_cycles:
                        self.mode = STAGE1
                        self._cycle = None
                    else:
                        self._stage2_order = draw_permutation(self._stage2_cdf, self.rng)
                        self._stage2_pos = 0
        elif self.mode == COMPLETION:
            if is_oddball:
                selected, mechanism = stimulus[0], COMPLETION
            else:
                self._completion_pos += 1
                if self._completion_pos >= len(self._completion_order):
                    self._completion_cycles += 1
                    if self._completion_cycles >= self.completion_max_cycles:
                        self.mode = STAGE1
                        self._cycle = None
                    else:
                        self._completion_order = self._permute_candidates()
                        self._completion_pos = 0
        else:
            raise RuntimeError(f"cannot step in mode {self.mode}")

        # integrated evidence can select outright, skipping stage 2; a
        # same-trial single-trial selection takes precedence
        if selected is None and self._streak >= self.streak_target:
            idx = int(np.argmax(self._log_acc))
            selected, mechanism = self.charset.symbols[idx], INTEGRATION

        events: list[SelectionEvent] = []
        if selected is not None:
            self.prompt = apply_selection(self.prompt, selected)
            self._reset_integration()
            if selected == EXIT:
                self.mode = EXITED
                pause = 0.0
            else:
                pause = self.pause_s
                candidates = completion_candidates(self.dictionary, self.prompt)
                self._resume = COMPLETION if candidates else STAGE1
                self._resume_candidates = candidates
                self.mode = PAUSED
            events.append(SelectionEvent(symbol=selected, mechanism=mechanism, pause_s=pause))
        return events

    def advance_clock(self, iti_ms: float, events: list[SelectionEvent], overhead_ms: float = 0.0) -> None:
        """Account one trial's time plus any selection pauses."""
        if iti_ms <= 0.0:
            raise ValueError("iti must be positive")
        if overhead_ms < 0.0:
            raise ValueError("overhead must be nonnegative")
        self.n_trials += 1
        self._trial_ms += iti_ms + overhead_ms
        for event in events:
            event.time_s = self.clock_s
            self._pause_ms += event.pause_s * 1000.0

    # -- internals ----------------------------------------------------------

    def _enter_stage2(self, group: tuple[str, ...]) -> None:
        self._group = group
        # first pass keeps the stage-1 draw order; later passes redraw with
        # the same frequency bias restricted to the group
        self._stage2_order = group
        self._stage2_pos = 0
        self._stage2_cycles = 0
        self._stage2_cdf = build_cdf(self.frequency.restrict(group))
        self.mode = STAGE2

    def _enter_completion(self, candidates: tuple[str, ...]) -> None:
        self._candidates = candidates
        self._completion_order = self._permute_candidates()
        self._completion_pos = 0
        self._completion_cycles = 0
        self.mode = COMPLETION

    def _permute_candidates(self) -> tuple[str, ...]:
        order = self.rng.permutation(len(self._candidates))
        return tuple(self._candidates[int(i)] for i in order)

    def update_integration(self, stimulus: tuple[str, ...], posterior: float) -> None:
        """Fold one trial's posterior into the per-symbol evidence sums.

        Illuminated symbols gain log(p), the rest log(1 - p), both clamped
        away from log(0); only differences matter for the argmax. step()
        calls this on every trial, whatever the mode."""
        if not (math.isfinite(posterior) and 0.0 <= posterior <= 1.0):
            raise ValueError(f"posterior must lie in [0, 1], got {posterior!r}")
        p = min(max(posterior, _CLAMP), 1.0 - _CLAMP)
        lit = np.zeros(self._log_acc.size, dtype=bool)
        for symbol in stimulus:
            if symbol not in self._index:
                raise ValueError(f"unknown symbol {symbol!r}")
            lit[self._index[symbol]] = True
        self._log_acc[lit] += math.log(p)
        self._log_acc[~lit] += math.log(1.0 - p)
        top = self._log_acc.max()
        winners = np.flatnonzero(self._log_acc == top)
        if winners.size == 1:
            idx = int(winners[0])
            self._streak = self._streak + 1 if idx == self._streak_idx else 1
            self._streak_idx = idx
        else:
            self._streak = 0
            self._streak_idx = None

    def _reset_integration(self) -> None:
        self._log_acc.fill(self._log_reset)
        self._streak = 0
        self._streak_idx = None


# -- session logging ---------------------------------------------------------

SCHEMA_VERSION = 1


@dataclass
class SessionLog:
    """JSON-lines record of every trial and selection in one session."""

    meta: dict = field(default_factory=dict)
    records: list = field(default_factory=list)

    def trial(self, t_s: float, mode: str, illuminated, decision: str, posterior: float) -> None:
        self.records.append(
            {
                "record": "trial",
                "t_s": float(t_s),
                "mode": mode,
                "illuminated": list(illuminated),
                "decision": decision,
                "posterior": float(posterior),
            }
        )

    def selection(self, event: SelectionEvent) -> None:
        self.records.append(
            {
                "record": "selection",
                "t_s": float(event.time_s) if event.time_s is not None else None,
                "symbol": event.symbol,
                "mechanism": event.mechanism,
                "pause_s": float(event.pause_s),
            }
        )

    def write(self, path) -> None:
        header = {"record": "header", "schema_version": SCHEMA_VERSION, "meta": self.meta}
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for record in self.records:
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    def selections(self) -> list[dict]:
        return [r for r in self.records if r["record"] == "selection"]

    def trials(self) -> list[dict]:
        return [r for r in self.records if r["record"] == "trial"]


def load_session_log(path) -> SessionLog:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("record") != "header":
        raise ValueError("session log must start with a header record")
    header = lines[0]
    if header.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {header.get('schema_version')!r}")
    return SessionLog(meta=header.get("meta", {}), records=lines[1:])
