"""Single-fault mutation corpus for exercising the error classifier.

Each mutation takes a sound demonstration and damages exactly one thing:
the final answer digits, a copied digit, a layout digit, a comparison
verdict word, a subtraction no-op result, or (for the catch-all category)
the tail of the transcript.  The intended category is recorded alongside
so classifier fidelity can be measured.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass

from .actions import Action, Look, NoOp, Write, serialize_actions
from .demonstrate import Variant, demonstrate, final_remainder_from_noop
from .evaluation import ErrorCategory, SessionRecord
from .questions import Problem, render_question

_VERDICT_RE = re.compile(r"^(\S) , (\S) (equal|larger|smaller)$")
_SUB_RE = re.compile(r"^((?:\d )*\d) - (\d|_) = (\d)$")
_RELATIONS = ("equal", "larger", "smaller")


@dataclass(frozen=True)
class FaultCase:
    record: SessionRecord
    intended: ErrorCategory


def _other_digit(digit: str, rng: random.Random) -> str:
    return rng.choice([d for d in "0123456789" if d != digit])


def _replace_pair_symbol(action: Write | Look, index: int, symbol: str):
    pairs = list(action.pairs)
    rc, _ = pairs[index]
    pairs[index] = (rc, symbol)
    return type(action)(tuple(pairs))


def _copy_write_indices(actions: list[Action]) -> list[tuple[int, int]]:
    """(action index, pair index) of digits written by copy steps."""
    found: list[tuple[int, int]] = []
    for i, action in enumerate(actions):
        if not isinstance(action, Write) or i == 0:
            continue
        symbols = [s for _, s in action.pairs]
        prev = actions[i - 1]
        if (
            len(symbols) == 1
            and symbols[0].isdigit()
            and isinstance(prev, Look)
            and len(prev.pairs) == 1
            and prev.pairs[0][1].isdigit()
        ):
            found.append((i, 0))  # bring-down
        elif (
            symbols
            and all(s.isdigit() for s in symbols)
            and isinstance(prev, Write)
            and len(prev.pairs) == 1
            and prev.pairs[0][1] == "-"
        ):
            found.extend((i, k) for k in range(len(symbols)))  # subtrahend copy
        elif "+" in symbols:
            plus = symbols.index("+")
            found.extend(
                (i, k) for k in range(plus + 1, len(symbols)) if symbols[k].isdigit()
            )  # divisor copied to an addend row
    return found


def _mutate(actions: list[Action], category: ErrorCategory, rng: random.Random) -> list[Action] | None:
    actions = list(actions)
    if category is ErrorCategory.FINAL_TRANSCRIPTION:
        last = actions[-1]
        if not isinstance(last, NoOp) or final_remainder_from_noop(last) is None:
            return None
        prefix, digits = last.text.rsplit(" ", 1)
        pos = rng.randrange(len(digits))
        mutated = digits[:pos] + _other_digit(digits[pos], rng) + digits[pos + 1 :]
        actions[-1] = NoOp(f"{prefix} {mutated}")
        return actions
    if category is ErrorCategory.INITIAL_TRANSCRIPTION:
        layout = actions[0]
        if not isinstance(layout, Write):
            return None
        digit_slots = [k for k, (_, s) in enumerate(layout.pairs) if s.isdigit()]
        if not digit_slots:
            return None
        k = rng.choice(digit_slots)
        actions[0] = _replace_pair_symbol(layout, k, _other_digit(layout.pairs[k][1], rng))
        return actions
    if category is ErrorCategory.COMPARISON:
        slots = [
            i for i, a in enumerate(actions)
            if isinstance(a, NoOp) and _VERDICT_RE.match(a.text)
        ]
        if not slots:
            return None
        i = rng.choice(slots)
        a, b, rel = _VERDICT_RE.match(actions[i].text).groups()
        wrong = rng.choice([r for r in _RELATIONS if r != rel])
        actions[i] = NoOp(f"{a} , {b} {wrong}")
        return actions
    if category is ErrorCategory.SUBTRACTION:
        slots = [
            i for i, a in enumerate(actions)
            if isinstance(a, NoOp) and _SUB_RE.match(a.text)
        ]
        if not slots:
            return None
        i = rng.choice(slots)
        lhs, sub, result = _SUB_RE.match(actions[i].text).groups()
        actions[i] = NoOp(f"{lhs} - {sub} = {_other_digit(result, rng)}")
        return actions
    if category is ErrorCategory.INTER_AREA_COPY:
        slots = _copy_write_indices(actions)
        if not slots:
            return None
        i, k = rng.choice(slots)
        write = actions[i]
        actions[i] = _replace_pair_symbol(write, k, _other_digit(write.pairs[k][1], rng))
        return actions
    if category is ErrorCategory.OTHER:
        if len(actions) < 4:
            return None
        cut = rng.randrange(max(1, len(actions) // 2), len(actions))
        return actions[:cut]  # the final-remainder no-op is always dropped
    return None


def make_fault_corpus(
    per_category: int = 100,
    seed: int = 0,
    max_digits: int = 4,
) -> list[FaultCase]:
    """Mutated sessions, ``per_category`` of each category, from random
    problems rich enough to carry the targeted fault."""
    rng = random.Random(seed)
    remaining = {cat: per_category for cat in ErrorCategory}
    cases: list[FaultCase] = []
    while any(remaining.values()):
        d_len = rng.randint(2, max_digits)
        v_len = rng.randint(1, max(1, d_len - 1))
        dividend = rng.randint(10 ** (d_len - 1), 10**d_len - 1)
        divisor = rng.randint(10 ** (v_len - 1) if v_len > 1 else 2, 10**v_len - 1)
        problem = Problem(dividend, divisor)
        base = list(demonstrate(problem, Variant.FULL).actions)
        for category, left in remaining.items():
            if left == 0:
                continue
            mutated = _mutate(base, category, rng)
            if mutated is None:
                continue
            answer = None
            if mutated and isinstance(mutated[-1], NoOp):
                answer = final_remainder_from_noop(mutated[-1])
            record = SessionRecord(
                question=render_question(problem),
                dividend=dividend,
                divisor=divisor,
                template=problem.template.value,
                variant="fault",
                status="answered" if answer is not None else "unterminated",
                answer=answer,
                correct=False,
                forcing_events=0,
                rounds=1,
                transcript=serialize_actions(mutated),
            )
            cases.append(FaultCase(record, category))
            remaining[category] -= 1
    return cases
