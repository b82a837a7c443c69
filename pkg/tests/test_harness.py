import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from paysim.harness import cli
from paysim.harness.dsl import (ScriptSyntaxError, UndeclaredActor, UnknownVerb, format_value, parse_scenario,
                                parse_value, serialize_scenario)
from paysim.harness.runner import ExpectationFailed, operations_exercised, patterns_exercised, run_scenario
from paysim.harness.verbs import OPERATIONS, PATTERNS, VERBS

CORPUS = sorted((Path(__file__).parents[1] / "src" / "paysim" / "scenarios").glob("*.scn"))


def test_empty_file():
    script = parse_scenario("")
    assert script.steps == [] and script.actors == []
    t = run_scenario(script)
    assert t["steps"] == [] and len(t["final_digest"]) == 64


def test_unknown_verb_line():
    with pytest.raises(UnknownVerb) as exc:
        parse_scenario("actor a\n\n# note\na.spwan_token_class name=X symbol=X\n")
    assert exc.value.line == 4


def test_undeclared_actor():
    with pytest.raises(UndeclaredActor) as exc:
        parse_scenario("actor a\na.pay_native to=@b amount=1\n")
    assert exc.value.line == 2
    with pytest.raises(UndeclaredActor):
        parse_scenario("b.pay_native to=@b amount=1\nactor b\n")


@pytest.mark.parametrize("text", [
    "actor a\na.pay_native to=@a",
    "actor a\na.pay_native to=@a amount=1 amount=2",
    "actor a\nactor a",
    "actor a\na.pay_native to=@a amount='unterminated",
    "expect nonsense equals=1",
    "actor a\na.pay_native to=@a amount=0xZZ",
    "seed=-1",
    "actor a\npay_native to=@a amount=1",
])
def test_syntax_errors(text):
    with pytest.raises(ScriptSyntaxError):
        parse_scenario(text)


def test_expectation_failure_carries_diff():
    text = "actor a\nmine 2\nexpect height equals=3\n"
    with pytest.raises(ExpectationFailed) as exc:
        run_scenario(text)
    assert (exc.value.expected, exc.value.actual, exc.value.line) == (3, 2, 3)


def test_rejections_are_recorded_not_fatal():
    t = run_scenario("actor a\nactor b\na.pay_native to=@b amount=5000\nexpect reason equals=InsufficientBalance\n")
    assert t["steps"][0]["status"] == "rejected" and t["steps"][0]["fee"] == 1


_names = st.from_regex(r"[a-z][a-z0-9_]{0,6}", fullmatch=True)


def _plain_string(text: str) -> bool:
    """Strings the parser reads back as themselves, not as another literal."""
    try:
        return parse_value(text, 0) == text
    except ScriptSyntaxError:
        return False


_scalar = st.one_of(st.integers(-10**6, 10**6), st.booleans(), st.none(), st.binary(max_size=8),
                    st.text(st.characters(min_codepoint=32, max_codepoint=126), min_size=1, max_size=8)
                    .filter(_plain_string))


@settings(max_examples=60, deadline=None)
@given(st.lists(_names, min_size=1, max_size=3, unique=True), st.data())
def test_round_trip(actors, data):
    lines = [f"seed={data.draw(st.integers(0, 2**64 - 1))}", "description=round trip"]
    lines += [f"actor {a}" for a in actors]
    for _ in range(data.draw(st.integers(0, 6))):
        name = data.draw(st.sampled_from(sorted(VERBS)))
        verb = VERBS[name]
        keys = sorted(verb.required) + data.draw(st.lists(st.sampled_from(sorted(verb.optional) or ["_"]),
                                                          unique=True, max_size=2))
        args = []
        for k in keys:
            if k == "_":
                continue
            v = data.draw(st.one_of(_scalar, st.sampled_from(actors).map(lambda a: "@" + a),
                                    _names.map(lambda n: "$" + n), st.lists(st.integers(0, 9), max_size=3)))
            args.append(f"{k}={v if isinstance(v, str) and v[:1] in '@$' else format_value(v)}")
        lines.append(f"{data.draw(st.sampled_from(actors))}.{name} " + " ".join(args))
    first = parse_scenario("\n".join(lines))
    again = parse_scenario(serialize_scenario(first))
    assert again == first
    assert serialize_scenario(again) == serialize_scenario(first)


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
def test_corpus_runs_deterministically(path):
    text = path.read_text()
    a, b = run_scenario(text), run_scenario(text)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_escrow_timeout_hand_oracle():
    t = run_scenario((CORPUS[0].parent / "escrow_timeout.scn").read_text())
    claims = [s for s in t["steps"] if s["verb"] == "claim_escrow"]
    assert [(c["status"], c["value"], c["height"]) for c in claims] == [
        ("success", "not_yet", 5), ("success", "refunded", 6), ("rejected", None, 6)]
    moves = [ev["payload"] for c in claims for ev in c["events"] if ev["name"] == "Unlocked"]
    buyer = t["header"]["actors"]["buyer"]
    assert [(m["from"], m["to"], m["amount"]) for m in moves] == [(buyer, buyer, 200)]


def test_seed_override_changes_digest():
    text = (CORPUS[0].parent / "lifecycle.scn").read_text()
    assert run_scenario(text)["final_digest"] != run_scenario(text, seed=8)["final_digest"]


# -- CLI ---------------------------------------------------------------------------


def test_cli_run_twice_identical(tmp_path):
    src = str(CORPUS[0].parent / "lifecycle.scn")
    outs = [tmp_path / "a.json", tmp_path / "b.json"]
    for out in outs:
        assert cli.main(["run", src, "--seed", "7", "--out", str(out)]) == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert cli.main(["digest", str(outs[0])]) == 0
    assert cli.main(["run", src, "--format", "text", "--out", str(tmp_path / "t.txt")]) == 0
    assert "final_digest" in (tmp_path / "t.txt").read_text()


def test_cli_check_bad_file(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text("actor a\n\na.nonsense x=1\n")
    assert cli.main(["check", str(bad)]) == 2
    assert "line 3" in capsys.readouterr().err
    assert cli.main(["run", str(bad)]) == 2
    assert cli.main(["check", str(CORPUS[0])]) == 0


def test_cli_expectation_failure_and_usage(tmp_path):
    f = tmp_path / "f.scn"
    f.write_text("mine 1\nexpect height equals=5\n")
    assert cli.main(["run", str(f), "--out", str(tmp_path / "o.json")]) == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2


def test_cli_missing_file_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", str(tmp_path / "missing.scn")])
    assert exc.value.code == 2


def test_cli_digest_detects_tampering(tmp_path):
    out = tmp_path / "t.json"
    assert cli.main(["run", str(CORPUS[0].parent / "escrow_timeout.scn"), "--out", str(out)]) == 0
    raw = out.read_bytes()
    digest_at = raw.index(b'"final_digest": "') + len(b'"final_digest": "')
    for pos in (digest_at, raw.index(b'"height": ') + 10, len(raw) // 2):
        tampered = bytearray(raw)
        tampered[pos] = ord("0") if tampered[pos] != ord("0") else ord("1")
        bad = tmp_path / f"bad{pos}.json"
        bad.write_bytes(bytes(tampered))
        assert cli.main(["digest", str(bad)]) == 1, pos


def test_corpus_covers_every_operation(tmp_path):
    exercised = set()
    for path in CORPUS:
        exercised |= operations_exercised(parse_scenario(path.read_text()))
        if cli.main(["run", str(path), "--out", str(tmp_path / f"{path.stem}.json")]) == 0:
            exercised.add("cli")
    assert set(OPERATIONS) - exercised == set()
    assert all(p in {q for path in CORPUS for q in patterns_exercised(parse_scenario(path.read_text()))}
               for p in PATTERNS)
