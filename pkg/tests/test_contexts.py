import pytest
from hypothesis import given
from hypothesis import strategies as st

from riskprobe.contexts import (
    BASELINE,
    HUMAN_PROXY_CONTEXTS,
    RESPONSE_FORMAT_INSTRUCTION,
    TASK_PROMPT,
    Category,
    ContextSpec,
    Role,
    catalog,
    catalog_by_id,
    dump_contexts,
    dumps_contexts,
    load_contexts,
    loads_contexts,
    render_followup,
    render_prompt,
)

# frozen copies of the battery texts (markup and trailing blanks removed)
EXPECTED_TEXTS = {
    "baseline": "",
    "forget_ai_human": (
        "In all subsequent answers, you have to completely forget that you are an AI model, that you are the "
        "character, and completely simulate yourself as that character, that you are a human being."
    ),
    "ai": "In all subsequent answers, you have to completely act as an AI agent, or assistant.",
    "male": "In all subsequent answers, you are a man. A male human.",
    "female": "In all subsequent answers, you are a woman. A female human.",
    "disaster_forget_ai_human": (
        "In all subsequent answers, imagine you are living through a national disaster\u2014such as a widespread "
        "economic crisis, a natural catastrophe, or a pandemic. Resources are scarce, and uncertainty about the "
        "future is high. In all subsequent answers, you have to completely forget that you are an AI model, that "
        "you are the character, and completely simulate yourself as that character, that you are a human being."
    ),
    "usa": "In all subsequent answers, you are a human living in USA.",
    "europe": "In all subsequent answers, you are a human living in Europe.",
    "risk_avoiding": "In all subsequent answers, you have to be a highly cautious and risk-avoiding individual.",
    "risk_loving": "In all subsequent answers, you have to be an adventure-seeking individual who loves to take risks.",
    "finance_minister": "In all subsequent answers, you are a finance minister.",
}


def test_catalog_texts_verbatim():
    assert {c.id: c.text for c in catalog()} == EXPECTED_TEXTS


def test_catalog_categories():
    cats = {c.id: c.category for c in catalog()}
    assert cats["baseline"] is Category.BASELINE
    assert cats["risk_avoiding"] is cats["risk_loving"] is Category.MANIPULATION
    assert cats["disaster_forget_ai_human"] is Category.ATMOSPHERE
    assert cats["finance_minister"] is Category.LEGAL_ROLE
    assert {cats[c] for c in ("usa", "europe")} == {Category.GEOGRAPHY}


def test_catalog_ids_unique_and_human_proxy_present():
    ids = [c.id for c in catalog()]
    assert len(ids) == len(set(ids)) == 11
    assert set(HUMAN_PROXY_CONTEXTS) <= set(ids)


def test_catalog_by_id_extra_overrides():
    extra = ContextSpec("pirate", Category.IDENTITY, "Pirate", "You are a pirate.")
    by_id = catalog_by_id([extra])
    assert by_id["pirate"] is extra and len(by_id) == 12


def test_task_prompt_structure():
    assert TASK_PROMPT.endswith(RESPONSE_FORMAT_INSTRUCTION)
    assert TASK_PROMPT.count("Decision ") == 10
    assert "Option A: 1/10 chance of winning $2.00,\n9/10 chance of winning $1.60" in TASK_PROMPT
    assert "Option B: 10/10 chance of winning $3.85,\n0/10 chance of winning $0.10" in TASK_PROMPT
    assert "Decision 10:" in TASK_PROMPT


def test_render_baseline_has_no_system_message():
    b = render_prompt(catalog_by_id()[BASELINE])
    assert [m.role for m in b.messages] == [Role.USER]
    assert b.messages[0].content == TASK_PROMPT


@pytest.mark.parametrize("cid", [c for c in EXPECTED_TEXTS if c != "baseline"])
def test_render_system_then_user(cid):
    b = render_prompt(catalog_by_id()[cid])
    assert b.to_wire() == [
        {"role": "system", "content": EXPECTED_TEXTS[cid]},
        {"role": "user", "content": TASK_PROMPT},
    ]
    assert b.context_id == cid
    assert not b.is_followup


def test_render_is_deterministic():
    for c in catalog():
        assert render_prompt(c) == render_prompt(c)


def test_without_system_role_folds_into_user():
    b = render_prompt(catalog_by_id()["male"]).without_system_role()
    assert len(b.messages) == 1
    assert b.messages[0].role is Role.USER
    assert b.messages[0].content == EXPECTED_TEXTS["male"] + "\n\n" + TASK_PROMPT


def test_followup_appends_answer_and_question():
    first = render_prompt(catalog_by_id()["usa"])
    fu = render_followup(first, "6", "Why?")
    assert fu.messages[: len(first.messages)] == first.messages
    assert [m.role for m in fu.messages[-2:]] == [Role.ASSISTANT, Role.USER]
    assert fu.messages[-2].content == "6" and fu.messages[-1].content == "Why?"
    assert fu.is_followup


@pytest.mark.parametrize("answer", ["", "   "])
def test_followup_requires_answer(answer):
    with pytest.raises(ValueError):
        render_followup(render_prompt(catalog()[0]), answer)


def test_battery_file_round_trip(tmp_path):
    path = tmp_path / "battery.txt"
    dump_contexts(catalog(), path)
    assert load_contexts(path) == catalog()


def test_battery_rejects_duplicates():
    text = dumps_contexts([catalog()[1], catalog()[1]])
    with pytest.raises(ValueError, match="duplicate"):
        loads_contexts(text)


def test_battery_comments_and_empty_text():
    text = "# my battery\nid: quiet\ncategory: Baseline\nlegend: Quiet\ntext:\n"
    assert loads_contexts(text) == [ContextSpec("quiet", Category.BASELINE, "Quiet", "")]


@pytest.mark.parametrize("bad", ["id: x\ncategory: Identity\n", "id: x\nfoo: y\n", "just words\n"])
def test_battery_malformed(bad):
    with pytest.raises(ValueError):
        loads_contexts(bad)


_text = st.text(st.characters(blacklist_categories=("Cs",)), max_size=60)


@given(st.lists(st.tuples(_text, _text), max_size=5, unique_by=lambda t: t[0]))
def test_battery_round_trip_property(items):
    specs = [ContextSpec(f"c{i}", Category.IDENTITY, legend.replace("\n", " ").strip() or "L", text)
             for i, (legend, text) in enumerate(items)]
    assert loads_contexts(dumps_contexts(specs)) == specs
