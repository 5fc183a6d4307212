"""Question/answer ingestion, split sampling, and training-file emission.

Source files are plain text with alternating question and answer lines
(the layout of the pre-generated remainder-task files).  Splits draw an
equal number from each difficulty pool, never duplicate a question string
across splits, and are fully determined by the seed.  Training records are
``encoded question | serialized demonstration`` joined by an
end-of-document marker.
"""

from __future__ import annotations

import hashlib
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .actions import serialize_actions
from .demonstrate import Variant, demonstrate
from .questions import Problem, Template, UnrecognizedTemplate, encode_question, parse_question, render_question

log = logging.getLogger(__name__)

DEFAULT_MARKER = "<|endoftext|>"

# dividend/divisor digit-length ceilings for the synthetic difficulty strata
_SYNTH_DIGITS = {"easy": 4, "medium": 6, "hard": 8, "interpolated": 8}


class Source(Enum):
    TRAIN_EASY = "train-easy"
    TRAIN_MEDIUM = "train-medium"
    TRAIN_HARD = "train-hard"
    INTERPOLATED = "interpolated"


DIFFICULTY_POOLS = (Source.TRAIN_EASY, Source.TRAIN_MEDIUM, Source.TRAIN_HARD)


class OddLineCount(ValueError):
    pass


class InsufficientPool(ValueError):
    pass


@dataclass(frozen=True)
class QAPair:
    question: str
    answer: str
    source: Source

    @property
    def problem(self) -> Problem:
        return parse_question(self.question)


@dataclass(frozen=True)
class SplitPlan:
    train: int = 200
    validation: int = 100
    test_mixed: int = 500
    test_interpolated: int = 500
    rng_seed: int = 0


@dataclass
class Splits:
    train: list[QAPair] = field(default_factory=list)
    validation: list[QAPair] = field(default_factory=list)
    test_mixed: list[QAPair] = field(default_factory=list)
    test_interpolated: list[QAPair] = field(default_factory=list)

    def as_dict(self) -> dict[str, list[QAPair]]:
        return {
            "train": self.train,
            "validation": self.validation,
            "test_mixed": self.test_mixed,
            "test_interpolated": self.test_interpolated,
        }


def load_qa_file(path: str | Path, source: Source) -> list[QAPair]:
    """Read alternating question/answer lines.

    Unparseable questions are skipped with a warning naming the line; an
    odd line count is a hard error.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if len(lines) % 2 != 0:
        raise OddLineCount(f"{path}: {len(lines)} lines (question/answer pairs expected)")
    pairs = []
    for i in range(0, len(lines), 2):
        question, answer = lines[i].strip(), lines[i + 1].strip()
        try:
            parse_question(question)
        except UnrecognizedTemplate:
            log.warning("%s line %d: unrecognized question skipped: %r", path, i + 1, question)
            continue
        if not answer.isdigit():
            log.warning("%s line %d: non-integer answer skipped: %r", path, i + 2, answer)
            continue
        pairs.append(QAPair(question, answer, source))
    return pairs


def per_pool_counts(total: int) -> dict[Source, int]:
    """Equal share per difficulty pool; the remainder goes to train-easy,
    then train-medium."""
    base, rem = divmod(total, len(DIFFICULTY_POOLS))
    return {
        pool: base + (1 if i < rem else 0)
        for i, pool in enumerate(DIFFICULTY_POOLS)
    }


def synth_pool(source: Source, count: int, rng: random.Random) -> list[QAPair]:
    """Generate question/answer pairs offline, stratified by digit length."""
    max_digits = _SYNTH_DIGITS[source.value if source is Source.INTERPOLATED else source.value[len("train-"):]]
    pairs: list[QAPair] = []
    seen: set[str] = set()
    while len(pairs) < count:
        d_len = rng.randint(1, max_digits)
        v_len = rng.randint(1, max_digits)
        dividend = rng.randint(10 ** (d_len - 1) if d_len > 1 else 0, 10**d_len - 1)
        divisor = rng.randint(10 ** (v_len - 1) if v_len > 1 else 1, 10**v_len - 1)
        template = rng.choice([Template.WHAT_IS, Template.CALCULATE])
        question = render_question(Problem(dividend, divisor, template))
        if question in seen:
            continue
        seen.add(question)
        pairs.append(QAPair(question, str(dividend % divisor), source))
    return pairs


def synth_pools(plan: SplitPlan, margin: float = 1.5) -> dict[Source, list[QAPair]]:
    """Offline pools big enough to satisfy ``plan`` with sampling slack."""
    rng = random.Random(plan.rng_seed ^ 0x5EED)
    need = per_pool_counts(plan.train + plan.validation + plan.test_mixed)
    pools = {
        pool: synth_pool(pool, int(count * margin) + 8, rng)
        for pool, count in need.items()
    }
    pools[Source.INTERPOLATED] = synth_pool(
        Source.INTERPOLATED, int(plan.test_interpolated * margin) + 8, rng
    )
    return pools


def _draw(pool: list[QAPair], count: int, used: set[str], rng: random.Random) -> list[QAPair]:
    order = list(pool)
    rng.shuffle(order)
    taken = []
    for qa in order:
        if len(taken) == count:
            break
        if qa.question in used:
            continue
        used.add(qa.question)
        taken.append(qa)
    if len(taken) < count:
        raise InsufficientPool(f"needed {count}, pool only provided {len(taken)} unused questions")
    return taken


def sample_splits(pools: dict[Source, list[QAPair]], plan: SplitPlan) -> Splits:
    """Draw all four splits; question strings never repeat across splits."""
    rng = random.Random(plan.rng_seed)
    used: set[str] = set()
    splits = Splits()
    for name, total in (("train", plan.train), ("validation", plan.validation), ("test_mixed", plan.test_mixed)):
        drawn: list[QAPair] = []
        for pool, count in per_pool_counts(total).items():
            drawn.extend(_draw(pools.get(pool, []), count, used, rng))
        rng.shuffle(drawn)
        setattr(splits, name, drawn)
    splits.test_interpolated = _draw(
        pools.get(Source.INTERPOLATED, []), plan.test_interpolated, used, rng
    )
    return splits


def make_record(qa: QAPair, variant: Variant, glyph: str | None = None) -> str:
    problem = qa.problem
    demo = demonstrate(problem, variant) if glyph is None else demonstrate(problem, variant, glyph)
    return encode_question(qa.question) + " | " + serialize_actions(list(demo.actions))


def build_training_file(
    split: list[QAPair],
    variant: Variant,
    out_path: str | Path,
    marker: str = DEFAULT_MARKER,
    seed: int | None = None,
    synthetic: bool = False,
) -> dict[str, str]:
    """Write one record per pair, separated by the end-of-document marker.

    Returns the manifest (also written next to the file as key=value text).
    """
    out_path = Path(out_path)
    records = [make_record(qa, variant) for qa in split]
    body = ("\n" + marker + "\n").join(records) + "\n"
    out_path.write_text(body, encoding="utf-8")
    manifest = {
        "records": str(len(records)),
        "variant": variant.value,
        "marker": marker,
        "seed": "" if seed is None else str(seed),
        "synthetic": str(synthetic).lower(),
        "sha256": hashlib.sha256(body.encode("utf-8")).hexdigest(),
    }
    manifest_path = out_path.with_suffix(out_path.suffix + ".manifest")
    manifest_path.write_text(
        "".join(f"{k}={v}\n" for k, v in manifest.items()), encoding="utf-8"
    )
    return manifest


def split_training_file(text: str, marker: str = DEFAULT_MARKER) -> list[str]:
    """Inverse of build_training_file's record framing."""
    return [r.strip() for r in text.split(marker) if r.strip()]


def write_qa_file(pairs: list[QAPair], path: str | Path) -> None:
    Path(path).write_text(
        "".join(f"{qa.question}\n{qa.answer}\n" for qa in pairs), encoding="utf-8"
    )
