"""Smoke test for the tracequery extension module.

Build and install it first:
    pip install --no-build-isolation -e crates/py
"""

import os
import sys
import tempfile

import tracequery

HERE = os.path.dirname(os.path.abspath(__file__))
NPE_TRACE = os.path.join(HERE, "..", "crates", "core", "fixtures", "traveling_null_pointer.jel")


def main():
    t = tracequery.Trace.from_file(NPE_TRACE)
    assert len(t) == 17, len(t)
    assert t.threads() == ["main"]

    assert t.query("call-chain 15") == [1, 2, 4, 13, 14]
    assert t.query("pre-called 13") == [[5, 6], [9, 10]]
    assert t.query("post-called 5") == [[9, 10]]
    assert t.query("where-exception main")["id"] == 14
    assert t.query("exists thread-exited main") is True
    assert t.query_json("threads") == '{"main":"exited"}'
    assert "call_id" in t.query_table("call-chain 15")

    window = t.restrict(0, 12)
    assert window.query("threads") == {"main": "running"}

    again = tracequery.Trace.parse(t.serialize())
    assert again.serialize() == t.serialize()

    try:
        t.query("call-chain 99")
    except tracequery.QueryError:
        pass
    else:
        raise AssertionError("expected QueryError")
    try:
        t.query("call-chan 1")
    except tracequery.ParseError:
        pass
    else:
        raise AssertionError("expected ParseError")

    fixed = tracequery.Trace.parse(
        open(NPE_TRACE).read()
        .replace("'doSomeThing', 'null'", "'doSomeThing', 'some result'")
        .replace("lv('result', 'null')", "lv('result', 'some result')")
        .replace("'m2',['null']", "'m2',['some result']")
    )
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "s.tqs")
        s = tracequery.Session(path)
        s.save_query("m2 args", "args-history m2")
        d1 = s.diff("m2 args", "m2 args", t, fixed)
        assert d1["only_in_a"] == [{"args": ["null"]}], d1
        assert d1["only_in_b"] == [{"args": [{"scalar": "some result"}]}], d1
        s.run_saved("m2 args", t)
        assert s.evaluation_count("m2 args") == 2
        reopened = tracequery.Session(path)
        assert reopened.names() == ["m2 args"]
        reopened.run_saved("m2 args", t)
        assert reopened.evaluation_count("m2 args") == 2

    g = tracequery.Trace.generate(seed=3, threads=2, max_events=500)
    assert 0 < len(g) <= 500
    assert tracequery.Trace.generate(seed=3, threads=2, max_events=500).serialize() == g.serialize()

    assert tracequery.canonical_query("call-chain   15") == "call-chain 15"
    assert any(v == "scan" for v, _ in tracequery.query_verbs())
    print("smoke test passed")


if __name__ == "__main__":
    sys.exit(main())
