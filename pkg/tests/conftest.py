import pytest

from depoaspect.transcript import QAPair

TABLE3_QUESTION = "Were you able to do physical exercises before the accident?"
TABLE3_ANSWER = "Yes. I used to play tennis before. Now I cannot stand for more than 5 minutes."
TABLE3_CANONICAL = (
    "I was able to do physical exercises before the accident. "
    "I used to play tennis before. Now I cannot stand for more than 5 minutes."
)


@pytest.fixture
def table3_pair() -> QAPair:
    return QAPair(index=0, question=TABLE3_QUESTION, answer=TABLE3_ANSWER)


def build_fixture_transcript(n_lines: int = 200) -> str:
    """Deterministic transcript with exactly n_lines raw lines.

    Mixes numbered lines, headers, colloquy, parentheticals, blank
    lines, soft-wrapped questions, and hyphen-wrapped answers so the
    parser's line accounting is exercised end to end.
    """
    lines: list[str] = [
        "UNITED STATES DISTRICT COURT",
        "DEPOSITION OF JANE ROE",
        "",
    ]
    block = 0
    while len(lines) + 10 <= n_lines - 2:
        block += 1
        lines.extend(
            [
                f"{len(lines) + 1:>2}  MR. SMITH: Objection to form.",
                f"{len(lines) + 2:>2}  Q. Did you inspect unit {block} on the",
                f"{len(lines) + 3:>2}  morning of the incident?",
                f"{len(lines) + 4:>2}  A. Yes. The unit was leak-",
                f"{len(lines) + 5:>2}  ing at the seal.",
                f"{len(lines) + 6:>2}  THE COURT: Noted.",
                f"{len(lines) + 7:>2}  (Exhibit {block} marked for identification.)",
                f"{len(lines) + 8:>2}  Q. What happened next?",
                f"{len(lines) + 9:>2}  A. We shut the system down.",
                "",
            ]
        )
    while len(lines) < n_lines - 2:
        lines.append(f"{len(lines) + 1:>2}  THE VIDEOGRAPHER: Off the record.")
    lines.extend(
        [
            "Q. Is there anything else?",
            "A. No, that is everything.",
        ]
    )
    assert len(lines) == n_lines
    return "\n".join(lines)


@pytest.fixture
def fixture_transcript() -> str:
    return build_fixture_transcript()
