"""Smoke test for the `healthdial` extension module.

Build and install first, e.g. `pip install ./crates/python`, then run
`python python/smoke_test.py`.
"""

import json
import pathlib
import tempfile

import healthdial

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures" / "pipeline"

ONE_STATE = 'HEALTHDIAL-FSM v1\n\nDIALOGUE s1 "Intro"\n  STATE s1 ENTRY\n    AGENT "Hi"\n'


def markup():
    [(sid, title, fsm)] = healthdial.parse(ONE_STATE)
    assert (sid, title, fsm.entry, len(fsm)) == ("s1", "Intro", "s1", 1)
    assert healthdial.serialize([(title, fsm)]) == ONE_STATE
    assert fsm.validate() == []
    assert healthdial.Fsm.from_dict(fsm.to_dict()) == fsm

    errors = healthdial.check(ONE_STATE.replace('"Hi"\n', '"Hi"\n    OPTION "Go" -> nowhere\n'))
    assert errors and errors[0].startswith("6:"), errors
    try:
        healthdial.parse("nonsense")
    except healthdial.MarkupError:
        pass
    else:
        raise AssertionError("parse accepted nonsense")


def play():
    [(_, _, fsm)] = healthdial.parse((FIXTURES / "golden.hdfsm").read_text().split("\n\nDIALOGUE s2")[0] + "\n")
    session = healthdial.PlaySession(fsm)
    assert session.options == ["Okay, let's start", "What's that?"]
    for choice in (1, 1):
        session.choose(choice)
    assert session.finished
    lines = [json.loads(l) for l in session.transcript_jsonl().splitlines()]
    assert [l["speaker"] for l in lines] == ["agent", "patient", "agent", "patient", "agent"]
    assert [t["utterance"] for t in fsm.replay([1, 1])] == [t["utterance"] for t in session.transcript()]
    assert all(not p["truncated"] for p in fsm.paths(8))


def project():
    p = healthdial.Project("Screening", "Screening saves lives.")
    base = p.content_hash
    p.apply({"kind": "add-topic", "session": "t1", "title": "Why", "key_points": ["saves lives"]})
    assert p.revision_count == 1 and p.can_undo
    p.undo()
    assert p.content_hash == base and p.can_redo
    try:
        p.apply({"kind": "delete-topic", "session": "nope"})
    except healthdial.EditRefused as e:
        assert "unknown-target" in str(e)
    else:
        raise AssertionError("edit of a missing topic was accepted")


def engine():
    with tempfile.TemporaryDirectory() as store:
        eng = healthdial.Engine(store, fixtures=str(FIXTURES))
        pid = eng.create_project("Colon cancer screening", (FIXTURES / "material.txt").read_text())
        plan = eng.plan(pid)
        assert [s["id"] for s in plan["sessions"]] == ["s1", "s2", "s3"]
        eng.approve_plan(pid)
        fsms = eng.generate_all(pid)
        assert [f.session_id for f in fsms] == ["s1", "s2", "s3"]
        assert eng.export(pid) == (FIXTURES / "golden.hdfsm").read_text()
        outcome = eng.edit(pid, {"kind": "edit-utterance", "session": "s1", "state": "who", "text": "Adults over 45."})
        assert outcome["revision_count"] == 1
        assert eng.stats(pid)["revision_count"] == 1
        assert eng.suggest(pid, "s3", "colo") == ["Does it hurt?", "How long does it take?", "Got it"]
        transcript = eng.play(pid, "s1", [0, 1])
        assert len(transcript.splitlines()) == 5
        assert eng.progress(pid)["sessions"]["s1"]["status"] == "completed"
        try:
            eng.plan(pid)
        except healthdial.ProviderError:
            pass
        else:
            raise AssertionError("exhausted fixtures did not raise")


if __name__ == "__main__":
    for check in (markup, play, project, engine):
        check()
        print(f"ok  {check.__name__}")
