import pytest
from hypothesis import given
from hypothesis import strategies as st

from reflectmem import StructuredReflection, parse_reflection_sections, render_reflection
from reflectmem.errors import UnparseableReflection
from reflectmem.generation import HeuristicReflector
from reflectmem.extraction import fill_extraction_prompt

from conftest import make_task
from reflectmem import Step, Trajectory


def test_all_five_sections():
    text = """1. Useful Subgoals:
- open the search page
2. Backtracking & Unexpected Challenges Faced:
- the filter did nothing
3. Limited Functionalities Learned:
- no rating filter
4. Shortcuts Suggestions:
- type the SKU in search
5. Other Feedback:
- check the sort menu first
"""
    r = parse_reflection_sections(text)
    assert r == StructuredReflection(
        ("open the search page",), ("the filter did nothing",), ("no rating filter",),
        ("type the SKU in search",), ("check the sort menu first",),
    )


def test_partial_input():
    r = parse_reflection_sections("Shortcuts Suggestions:\n- a\n- b\n- c\n")
    assert r.shortcuts == ("a", "b", "c")
    assert r.useful_subgoals == r.backtracking_challenges == r.limited_functionalities == r.other_feedback == ()


def test_prose_is_unparseable():
    with pytest.raises(UnparseableReflection):
        parse_reflection_sections("The agent wandered around and eventually gave up.")


def test_markdown_variants_and_continuations():
    text = """Some intro sentence.
### 3) **Limited Functionality**:
* no rating filter
  on the results page
**Shortcuts**
1. search by SKU
## Feedback: be specific
"""
    r = parse_reflection_sections(text)
    assert r.limited_functionalities == ("no rating filter on the results page",)
    assert r.shortcuts == ("search by SKU",)
    assert r.other_feedback == ("Some intro sentence.", "be specific")


def test_headers_without_content_are_unparseable():
    with pytest.raises(UnparseableReflection):
        parse_reflection_sections("1. Useful Subgoals:\n2. Other Feedback:\n")


item = st.text(
    alphabet=st.characters(blacklist_categories=("Cc", "Cs", "Zl", "Zp")), min_size=1, max_size=40
).map(str.strip).filter(bool)
section = st.lists(item, max_size=4).map(tuple)


@given(st.builds(StructuredReflection, section, section, section, section, section).filter(lambda r: not r.is_empty()))
def test_render_parse_round_trip(r):
    assert parse_reflection_sections(render_reflection(r)) == r


def test_heuristic_reflector_surfaces_notes():
    steps = (
        Step("[home] Visible actions: search. Shortcut: type SKUs into search.", "search"),
        Step("[results] Visible actions: filter.", "filter"),
        Step("[results] Action 'filter' had no effect. Limitation: no rating filter.", "filter"),
    )
    traj = Trajectory("t1", steps, 0)
    prompt = fill_extraction_prompt("web_reflection_extraction", traj, make_task())
    out = HeuristicReflector().generate(prompt).text
    r = parse_reflection_sections(out)
    assert r.limited_functionalities == ("Limitation: no rating filter.",)
    assert r.shortcuts == ("Shortcut: type SKUs into search.",)
    assert any("filter" in b for b in r.backtracking_challenges)

    summary = HeuristicReflector().generate(fill_extraction_prompt("summary_extraction", traj, make_task())).text
    assert "no rating filter" in summary and "It failed." in summary
