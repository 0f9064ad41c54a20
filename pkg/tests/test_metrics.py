from __future__ import annotations

import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import FIXTURES
from prograg.errors import PreconditionError
from prograg.evaluation import exact_match, normalize_answer, reward, token_f1

TABLE = json.loads((FIXTURES / "metrics_table.json").read_text(encoding="utf-8"))


def test_table_has_twenty_pairs():
    assert len(TABLE) == 20


@pytest.mark.parametrize("row", TABLE, ids=lambda r: r["prediction"][:24] or "<empty>")
def test_metrics_match_frozen_table(row):
    pred, golds = row["prediction"], row["golds"]
    assert exact_match(pred, golds) == row["em"]
    assert token_f1(pred, golds) == pytest.approx(row["f1"], abs=1e-12)
    assert reward(pred, golds) == pytest.approx(0.7 * row["f1"] + 0.3 * row["em"], abs=1e-9)


@pytest.mark.parametrize(
    "text, expected",
    [("No", "no"), ("YG Entertainment.", "yg entertainment"), ("The  Beatles!", "beatles"), ("theory", "theory")],
)
def test_normalize_answer(text, expected):
    assert normalize_answer(text) == expected


def test_two_thirds_f1_and_reward():
    assert token_f1("Robinson", ["Nate Robinson"]) == pytest.approx(2 / 3)
    assert reward("Robinson", ["Nate Robinson"]) == pytest.approx(0.7 * 2 / 3, abs=1e-9)


def test_multi_token_prediction_against_shorter_gold():
    # five prediction tokens, two shared: P = 2/5, R = 1
    assert token_f1("Pedro Rodríguez and Sergio Pérez", ["Pedro Rodríguez"]) == pytest.approx(4 / 7)


def test_missing_prediction_scores_zero():
    assert exact_match(None, ["x"]) == 0 and token_f1(None, ["x"]) == 0.0 and reward(None, ["x"]) == 0.0


def test_both_empty_after_normalization():
    assert token_f1("the", ["a"]) == 1.0
    assert token_f1("", ["x"]) == 0.0


@pytest.mark.parametrize("golds", ["a string", [], ()])
def test_golds_must_be_a_non_empty_sequence(golds):
    with pytest.raises(PreconditionError):
        exact_match("x", golds)


WORDS = ["the", "a", "an", "Nate", "robinson", "YG", "entertainment", "29", "no", "Pérez", "", "x-y", "U.S."]


def random_pair(rng: random.Random) -> tuple[str, str]:
    words = [rng.choice(WORDS) for _ in range(rng.randint(0, 5))]
    base = " ".join(words)
    noisy = " ".join(w.upper() if rng.random() < 0.5 else w for w in words)
    noisy = rng.choice(["", " ", ".", "!"]) + noisy + rng.choice(["", "  ", "?", ","])
    return base, noisy


def test_em_implies_f1_on_ten_thousand_pairs():
    rng = random.Random(7)
    for _ in range(10_000):
        pred, gold = random_pair(rng)
        assert normalize_answer(pred) == normalize_answer(gold)
        assert exact_match(pred, [gold]) == 1
        assert token_f1(pred, [gold]) == 1.0
        assert reward(pred, [gold]) == 1.0


@given(st.text(max_size=20), st.lists(st.text(max_size=20), min_size=1, max_size=3))
def test_reward_bounds(pred, golds):
    value = reward(pred, golds)
    assert 0.0 <= value <= 1.0
    assert (value == 1.0) == (exact_match(pred, golds) == 1 and token_f1(pred, golds) == 1.0)
    if exact_match(pred, golds):
        assert token_f1(pred, golds) == 1.0
