import pytest

from btplanner import bt
from btplanner.agents import (
    Answer,
    AnswerSource,
    ClarificationQuestion,
    DEFAULT_AGENTS,
    render_agent_response,
)
from btplanner.planner import (
    DraftParseFailure,
    IncompleteAnswers,
    NotConverged,
    PlannerConfig,
    QuestionParseFailure,
    ScriptedHuman,
    SessionStatus,
    UnknownLabel,
    draft_turn,
    finalize,
    parse_question_lines,
    run_to_convergence,
    start_session,
    strip_code_fence,
    submit_human_answers,
)
from btplanner.providers import ChatRequest, ScriptedChatProvider


VALID_XML = '<Root><Sequence name="s"><Action name="wait"/></Sequence></Root>'


def chat_script(drafts, question_lists, agent_answers=None):
    """Scripted chat mimicking the planner's three request shapes."""
    state = {"draft": 0, "questions": 0}
    agent_answers = agent_answers or {}

    def respond(request: ChatRequest) -> str:
        prompt = request.prompt
        if prompt.startswith("You are a task planner"):
            text = drafts[min(state["draft"], len(drafts) - 1)]
            state["draft"] += 1
            return text
        if prompt.startswith("Review the behavior tree"):
            qs = question_lists[min(state["questions"], len(question_lists) - 1)]
            state["questions"] += 1
            return "\n".join(qs) if qs else "NONE"
        for agent in DEFAULT_AGENTS.agents:
            if agent.persona in prompt:
                lines = prompt.split("# Questions\n")[1].splitlines()
                questions = []
                for line in lines:
                    label, _, text = line.partition(": ")
                    questions.append(ClarificationQuestion(label=label, text=text))
                answers = {
                    q.label: agent_answers[agent.agent_id][q.label]
                    for q in questions
                    if q.label in agent_answers.get(agent.agent_id, {})
                }
                return render_agent_response(questions, answers)
        raise AssertionError("unrecognized prompt")

    return ScriptedChatProvider(respond)


class TestStartSession:
    @pytest.mark.parametrize("instruction", ["Make a cocktail.", "Make a smoothie."])
    def test_new_session(self, instruction):
        session = start_session(instruction)
        assert session.status is SessionStatus.AWAITING_MODEL
        assert session.prerequisites == []
        assert session.turns == []

    def test_empty_instruction_rejected(self):
        with pytest.raises(ValueError):
            start_session("   ")


class TestDraftTurn:
    def test_moa_answers_two_of_five(self):
        chat = chat_script(
            [VALID_XML],
            [["q one?", "q two?", "q three?", "q four?", "q five?"]],
            {"robot_expert": {"Q1": "a", "Q4": "b"}},
        )
        session = start_session("Make a smoothie.")
        turn = draft_turn(session, chat)
        assert len(turn.questions) == 5
        assert len(turn.answers) == 2
        assert len(turn.residual_for_human) == 3
        assert session.status is SessionStatus.AWAITING_HUMAN
        assert len(session.prerequisites) == 2

    def test_zero_questions_converges(self):
        chat = chat_script([VALID_XML], [[]])
        session = start_session("Make a smoothie.")
        draft_turn(session, chat)
        assert session.status is SessionStatus.CONVERGED

    def test_malformed_twice_aborts(self):
        chat = chat_script(["<not xml", "<still broken"], [[]])
        session = start_session("x")
        with pytest.raises(DraftParseFailure):
            draft_turn(session, chat)
        assert session.status is SessionStatus.ABORTED
        assert session.raw_transcript  # raw output retained

    def test_malformed_once_recovers(self):
        chat = chat_script(["<broken", VALID_XML], [[]])
        session = start_session("x")
        draft_turn(session, chat)
        assert session.status is SessionStatus.CONVERGED

    def test_empty_question_response_aborts(self):
        chat = chat_script([VALID_XML], [None])

        def respond(request):
            if request.prompt.startswith("You are a task planner"):
                return VALID_XML
            return "   "

        session = start_session("x")
        with pytest.raises(QuestionParseFailure):
            draft_turn(session, ScriptedChatProvider(respond))
        assert session.status is SessionStatus.ABORTED

    def test_moa_disabled_all_residual(self):
        chat = chat_script([VALID_XML], [["one?", "two?"]])
        session = start_session("x", PlannerConfig(moa_enabled=False))
        turn = draft_turn(session, chat)
        assert turn.answers == []
        assert len(turn.residual_for_human) == 2


class TestSubmitHumanAnswers:
    def _awaiting_human(self):
        chat = chat_script([VALID_XML], [["one?", "two?", "three?"]])
        session = start_session("x", PlannerConfig(moa_enabled=False))
        draft_turn(session, chat)
        return session

    def test_exact_cover(self):
        session = self._awaiting_human()
        answers = [Answer(f"Q{i}", "a", AnswerSource.HUMAN) for i in (1, 2, 3)]
        submit_human_answers(session, answers)
        assert session.status is SessionStatus.AWAITING_MODEL
        assert len(session.prerequisites) == 3

    def test_incomplete_names_missing(self):
        session = self._awaiting_human()
        answers = [Answer(f"Q{i}", "a", AnswerSource.HUMAN) for i in (1, 2)]
        with pytest.raises(IncompleteAnswers) as err:
            submit_human_answers(session, answers)
        assert err.value.missing == ["Q3"]

    def test_unknown_label(self):
        session = self._awaiting_human()
        answers = [
            Answer("Q1", "a", AnswerSource.HUMAN),
            Answer("Q2", "a", AnswerSource.HUMAN),
            Answer("Q9", "a", AnswerSource.HUMAN),
        ]
        with pytest.raises(UnknownLabel):
            submit_human_answers(session, answers)


class TestRunToConvergence:
    def test_two_turn_session(self):
        chat = chat_script([VALID_XML, VALID_XML], [["one?"], []])
        session = start_session("x", PlannerConfig(moa_enabled=False))
        run_to_convergence(session, chat, ScriptedHuman({"Q1": "fine"}))
        assert session.status is SessionStatus.CONVERGED
        assert len(session.turns) == 2

    def test_turn_budget_forces_convergence(self):
        chat = chat_script([VALID_XML], [["always another?"]])
        session = start_session("x", PlannerConfig(max_turns=5, moa_enabled=False))
        run_to_convergence(session, chat, ScriptedHuman({}))
        assert session.status is SessionStatus.CONVERGED
        assert len(session.turns) == 5

    def test_single_turn_no_questions(self):
        chat = chat_script([VALID_XML], [[]])
        session = start_session("x")
        run_to_convergence(session, chat, ScriptedHuman({}))
        assert len(session.turns) == 1

    def test_prerequisites_monotone(self):
        chat = chat_script([VALID_XML] * 3, [["one?"], ["two?"], []])
        session = start_session("x", PlannerConfig(moa_enabled=False))
        snapshots = []

        original = submit_human_answers

        def capture(event):
            if event.get("event") == "turn_drafted":
                snapshots.append(list(session.prerequisites))

        session.on_event = capture
        run_to_convergence(session, chat, ScriptedHuman({"Q1": "a", "Q2": "b"}))
        for earlier, later in zip(snapshots, snapshots[1:]):
            assert later[: len(earlier)] == earlier

    def test_no_moa_means_all_human(self):
        chat = chat_script([VALID_XML, VALID_XML], [["one?", "two?"], []])
        session = start_session("x", PlannerConfig(moa_enabled=False))
        run_to_convergence(session, chat, ScriptedHuman({}))
        assert all(a.source is AnswerSource.HUMAN for a in session.all_answers())


class TestFinalize:
    def test_converged_session(self):
        chat = chat_script([VALID_XML], [[]])
        session = start_session("x")
        run_to_convergence(session, chat, ScriptedHuman({}))
        tree = finalize(session)
        assert tree.source is bt.TreeSource.FINAL
        assert bt.validate(tree).ok

    def test_not_converged(self):
        chat = chat_script([VALID_XML], [["one?"]])
        session = start_session("x", PlannerConfig(moa_enabled=False))
        draft_turn(session, chat)
        with pytest.raises(NotConverged):
            finalize(session)


class TestParsingHelpers:
    def test_strip_code_fence(self):
        assert strip_code_fence("```xml\n<Root/>\n```") == "<Root/>"
        assert strip_code_fence("<Root/>") == "<Root/>"

    def test_question_lines_with_markers(self):
        raw = "- first?\n2. second?\nQ7: third?"
        assert parse_question_lines(raw) == ["first?", "second?", "third?"]

    def test_none_means_zero(self):
        assert parse_question_lines("NONE") == []
        assert parse_question_lines("none") == []
