import json

import pytest

from attnet.ingest import (
    Gazetteer,
    GazetteerEntry,
    IngestError,
    Kind,
    assign_user_countries,
    load_categories,
    parse_events,
    resolve_country,
    tokenize,
    write_events_jsonl,
)
from conftest import retweet, tweet

WINDOW = (0, 1000)


def line(**kw):
    return json.dumps(kw)


def test_parse_basic_tweet_and_retweet():
    lines = [
        line(id="t1", author_id="alice", ts=10, kind="tweet"),
        line(id="r1", author_id="bob", ts=20, kind="retweet", rt_author_id="alice", rt_id="t1"),
    ]
    events, report = parse_events(lines, WINDOW)
    assert [e.tweet_id for e in events] == ["t1", "r1"]
    assert events[0].kind is Kind.ORIGINAL
    assert events[1].retweeted_author_id == "alice"
    assert report.kept == 2 and report.retweets == 1 and report.originals == 1


def test_accounting_invariant_and_precedence():
    lines = [
        "not json at all",
        line(id="t1", author_id="a", ts=10, kind="tweet"),
        line(id="t2", author_id="a", ts=5000, kind="tweet"),  # out of window
        line(id="t1", author_id="a", ts=11, kind="tweet"),  # duplicate
        line(id="t3", author_id="a", ts=9999, kind="bogus"),  # malformed wins over window
        '{"id": "", "author_id": "a", "ts": 1, "kind": "tweet"}',  # empty id
    ]
    events, report = parse_events(lines, WINDOW)
    assert report.lines_in == 6
    assert report.malformed == 3
    assert report.out_of_window == 1
    assert report.duplicates == 1
    assert report.kept == 1
    assert report.accounted()
    assert len(events) == 1


def test_blank_lines_skipped():
    lines = ["", "   ", line(id="t1", author_id="a", ts=1, kind="tweet")]
    _, report = parse_events(lines, WINDOW)
    assert report.lines_in == 1 and report.kept == 1


def test_duplicate_keeps_earliest_timestamp():
    lines = [
        line(id="t1", author_id="a", ts=50, kind="tweet"),
        line(id="t1", author_id="a", ts=10, kind="tweet"),
    ]
    events, report = parse_events(lines, WINDOW)
    assert events[0].timestamp == 10
    assert report.duplicates == 1


def test_events_sorted_by_time():
    lines = [
        line(id=f"t{i}", author_id="a", ts=ts, kind="tweet")
        for i, ts in enumerate([30, 10, 20])
    ]
    events, _ = parse_events(lines, WINDOW)
    assert [e.timestamp for e in events] == [10, 20, 30]


def test_iso_timestamps():
    lines = [
        line(id="t1", author_id="a", ts="1970-01-01T00:01:40Z", kind="tweet"),
        line(id="t2", author_id="a", ts="1970-01-01T00:01:41+00:00", kind="tweet"),
    ]
    events, report = parse_events(lines, WINDOW)
    assert report.kept == 2
    assert [e.timestamp for e in events] == [100, 101]


def test_retweet_requires_rt_author():
    lines = [line(id="r1", author_id="b", ts=1, kind="retweet")]
    _, report = parse_events(lines, WINDOW)
    assert report.malformed == 1


def test_window_is_half_open():
    lines = [
        line(id="t1", author_id="a", ts=0, kind="tweet"),
        line(id="t2", author_id="a", ts=1000, kind="tweet"),
    ]
    _, report = parse_events(lines, WINDOW)
    assert report.kept == 1 and report.out_of_window == 1


def test_self_retweet_counted():
    lines = [line(id="r1", author_id="a", ts=1, kind="retweet", rt_author_id="a")]
    events, report = parse_events(lines, WINDOW)
    assert events[0].is_self_retweet
    assert report.self_retweets == 1


def test_jsonl_roundtrip(tmp_path):
    events = [
        tweet("t1", "alice", 10, loc="Paris, France"),
        retweet("r1", "bob", 20, "alice", rt_id="t1"),
        tweet("t2", "café user", 30),
    ]
    path = tmp_path / "events.jsonl"
    write_events_jsonl(events, path)
    for raw in path.read_text().splitlines():
        json.loads(raw)  # every line is standalone JSON
    back, report = parse_events(path.read_text().splitlines(), WINDOW)
    assert back == events
    assert report.accounted()


def test_write_is_deterministic(tmp_path):
    events = [tweet("t1", "a", 10), retweet("r1", "b", 20, "a")]
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_events_jsonl(events, p1)
    write_events_jsonl(events, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_categories_rejects_unknown(tmp_path):
    p = tmp_path / "cats.csv"
    p.write_text("user_id,category\nu1,Science\nu2,Astrology\n")
    with pytest.raises(IngestError):
        load_categories(p)
    p.write_text("user_id,category\nu1,Science\nu2,Government & Politics\n")
    assert load_categories(p) == {"u1": "Science", "u2": "Government & Politics"}


def test_tokenize():
    assert tokenize("Paris, France!") == ["paris", "france"]
    assert tokenize("  New   York-City ") == ["new", "york", "city"]
    assert tokenize("") == []


def _gaz():
    return Gazetteer(
        [
            GazetteerEntry(("france",), "FR", 10),
            GazetteerEntry(("paris",), "FR", 5),
            GazetteerEntry(("mexico",), "MX", 10),
            GazetteerEntry(("mexico", "city"), "MX", 11),
            GazetteerEntry(("georgia",), "GE", 10),
        ]
    )


def test_resolve_country_priority_and_length():
    g = _gaz()
    assert resolve_country("Paris", g) == "FR"
    assert resolve_country("Mexico City", g) == "MX"
    assert resolve_country("nowhere special", g) is None
    assert resolve_country("", g) is None
    # country-level pattern (priority 10) outranks the city (priority 5)
    assert resolve_country("Paris, Georgia", g) == "GE"
    assert resolve_country("paris france", g) == "FR"


def test_gazetteer_rejects_duplicate_and_bad_prefix():
    with pytest.raises(IngestError):
        Gazetteer([GazetteerEntry(("x",), "AA", 1), GazetteerEntry(("x",), "BB", 1)])
    with pytest.raises(IngestError):
        # two-token pattern must outrank its one-token prefix
        Gazetteer(
            [GazetteerEntry(("a",), "AA", 5), GazetteerEntry(("a", "b"), "BB", 5)]
        )


def test_builtin_gazetteer_loads():
    from attnet.cli import _DATA_DIR

    g = Gazetteer.load(_DATA_DIR / "gazetteer.tsv")
    assert resolve_country("Berlin, Germany", g) == "DE"
    assert resolve_country("somewhere in the USA", g) == "US"


def test_assign_user_countries_majority_and_tiebreak():
    g = _gaz()
    events = [
        tweet("t1", "u1", 1, loc="Paris"),
        tweet("t2", "u1", 2, loc="France"),
        tweet("t3", "u1", 3, loc="Mexico"),
        tweet("t4", "u2", 4, loc="Mexico"),
        tweet("t5", "u2", 5, loc="France"),  # tie: first-seen country wins
        tweet("t6", "u3", 6),  # no location at all
    ]
    out = assign_user_countries(events, g)
    assert out["u1"] == "FR"
    assert out["u2"] == "MX"
    assert "u3" not in out
