"""Builtin scripted dialogue agents for the virtual point-of-care rooms.

Two slot-filling state machines: a triage interviewer that assigns one of
five colour priority codes from symptom severity, duration, and breathing
difficulty, and an anamnesis interviewer that re-confirms the symptom and
collects medical history. Plus an echo agent used by benchmarks.

All parsing is deliberately plain token matching: answers that cannot be
parsed re-ask the same question, and after three failed attempts a slot
falls back to a default so any conversation terminates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .errors import IncompleteTriage, UnknownAgent

# Substituted by the gateway when the transcript comes back empty; agents
# answer it with a fixed apology and leave their state untouched.
REPROMPT_INSTRUCTION = "<reprompt>"
REPROMPT_REPLY = "Sorry, I did not catch that. Could you repeat?"

MAX_RETRIES = 3

_WORD_NUMBERS = {
    "zero": 0,
    "one": 1,
    "two": 2,
    "three": 3,
    "four": 4,
    "five": 5,
    "six": 6,
    "seven": 7,
    "eight": 8,
    "nine": 9,
    "ten": 10,
}
_YES_WORDS = frozenset({"yes", "yeah", "yep", "sure", "correct", "y"})
_NO_WORDS = frozenset({"no", "nope", "nah", "n"})
_PUNCT_STRIP = ".,!?;:()\"'"


def _clean_tokens(text: str) -> list:
    return [t.strip(_PUNCT_STRIP).lower() for t in text.split()]


def extract_severity(text: str) -> int | None:
    """First token reading as an integer 0-10, digits or number words."""
    for token in _clean_tokens(text):
        try:
            value = int(token)
        except ValueError:
            value = _WORD_NUMBERS.get(token)
        if value is not None and 0 <= value <= 10:
            return value
    return None


def extract_duration_hours(text: str) -> float | None:
    """First number in the text, scaled by a trailing time unit.

    Bare numbers read as hours; minutes, days, and weeks convert.
    """
    tokens = _clean_tokens(text)
    value = None
    value_idx = -1
    for i, token in enumerate(tokens):
        try:
            value = float(token)
        except ValueError:
            value = _WORD_NUMBERS.get(token)
            if value is not None:
                value = float(value)
        if value is not None:
            value_idx = i
            break
    if value is None:
        return None
    factor = 1.0
    for token in tokens[value_idx + 1 :]:
        if token.startswith(("minute", "min")):
            factor = 1.0 / 60.0
            break
        if token.startswith(("hour", "hr")) or token == "h":
            factor = 1.0
            break
        if token.startswith("day"):
            factor = 24.0
            break
        if token.startswith("week"):
            factor = 168.0
            break
    return value * factor


def extract_yes_no(text: str) -> bool | None:
    for token in _clean_tokens(text):
        if token in _YES_WORDS:
            return True
        if token in _NO_WORDS:
            return False
    return None


# --------------------------------------------------------------------------
# Triage
# --------------------------------------------------------------------------


class ColourCode(str, Enum):
    CYAN = "cyan"
    GREEN = "green"
    YELLOW = "yellow"
    ORANGE = "orange"
    RED = "red"


class TriageStep(str, Enum):
    GREET = "greet"
    ASK_SYMPTOM = "ask_symptom"
    ASK_SEVERITY = "ask_severity"
    ASK_DURATION = "ask_duration"
    ASK_BREATHING = "ask_breathing"
    DONE = "done"


TRIAGE_GREETING = "Welcome to triage. What symptom brings you in today?"
_ASK_SEVERITY = "On a scale from zero to ten, how severe is it?"
_ASK_DURATION = "How long have you had it, in hours or days?"
_ASK_BREATHING = "Do you have difficulty breathing, yes or no?"
_RETRY_PROMPTS = {
    TriageStep.ASK_SYMPTOM: "Could you describe your main symptom?",
    TriageStep.ASK_SEVERITY: "Please give a number from zero to ten. How severe is it?",
    TriageStep.ASK_DURATION: "Please tell me how long, for example two hours or three days.",
    TriageStep.ASK_BREATHING: "Please answer yes or no. Do you have difficulty breathing?",
}
_MOVE_ON = "Let us move on."

# Fallback slot values applied after repeated unparseable answers.
_TRIAGE_DEFAULTS = {
    TriageStep.ASK_SYMPTOM: "unspecified",
    TriageStep.ASK_SEVERITY: 5,
    TriageStep.ASK_DURATION: 1.0,
    TriageStep.ASK_BREATHING: False,
}


@dataclass(frozen=True)
class TriageState:
    step: TriageStep = TriageStep.GREET
    symptom: str | None = None
    severity: int | None = None
    duration_hours: float | None = None
    breathing_difficulty: bool | None = None
    code: ColourCode | None = None
    retries: int = 0


def assign_colour(
    severity: int | None,
    duration_hours: float | None,
    breathing_difficulty: bool | None,
) -> ColourCode:
    """Priority rubric: total over the slot domain, monotone in severity."""
    if severity is None or duration_hours is None or breathing_difficulty is None:
        raise IncompleteTriage("all triage slots must be filled before assigning a code")
    if breathing_difficulty:
        return ColourCode.RED
    if severity >= 8:
        return ColourCode.ORANGE
    if severity >= 5 or duration_hours >= 48:
        return ColourCode.YELLOW
    if severity >= 1:
        return ColourCode.GREEN
    return ColourCode.CYAN


def _triage_announcement(code: ColourCode) -> str:
    return f"Thank you. Your triage code is {code.value}. A clinician will see you shortly."


def _advance_triage(state: TriageState, **slots) -> tuple:
    """Fill slots, move to the next step, and build the outgoing prompt."""
    order = [
        TriageStep.GREET,
        TriageStep.ASK_SYMPTOM,
        TriageStep.ASK_SEVERITY,
        TriageStep.ASK_DURATION,
        TriageStep.ASK_BREATHING,
        TriageStep.DONE,
    ]
    next_step = order[order.index(state.step) + 1]
    new = replace(state, step=next_step, retries=0, **slots)
    if next_step is TriageStep.ASK_SEVERITY:
        reply = _ASK_SEVERITY
    elif next_step is TriageStep.ASK_DURATION:
        reply = _ASK_DURATION
    elif next_step is TriageStep.ASK_BREATHING:
        reply = _ASK_BREATHING
    else:
        code = assign_colour(new.severity, new.duration_hours, new.breathing_difficulty)
        new = replace(new, code=code)
        reply = _triage_announcement(code)
    return new, reply


def triage_step(state: TriageState, user_text: str) -> tuple:
    """Advance the triage interview by at most one step.

    Returns ``(new_state, replies)``. Unparseable answers re-ask the same
    question; the third consecutive failure fills the slot with a default
    and moves on.
    """
    if state.step is TriageStep.GREET:
        return replace(state, step=TriageStep.ASK_SYMPTOM, retries=0), [TRIAGE_GREETING]
    if state.step is TriageStep.DONE:
        return state, [f"Your triage is complete. Your code is {state.code.value}."]

    slot_name = {
        TriageStep.ASK_SYMPTOM: "symptom",
        TriageStep.ASK_SEVERITY: "severity",
        TriageStep.ASK_DURATION: "duration_hours",
        TriageStep.ASK_BREATHING: "breathing_difficulty",
    }[state.step]
    if state.step is TriageStep.ASK_SYMPTOM:
        value = user_text.strip() or None
    elif state.step is TriageStep.ASK_SEVERITY:
        value = extract_severity(user_text)
    elif state.step is TriageStep.ASK_DURATION:
        value = extract_duration_hours(user_text)
    else:
        value = extract_yes_no(user_text)

    if value is not None:
        new, reply = _advance_triage(state, **{slot_name: value})
        return new, [reply]
    if state.retries + 1 >= MAX_RETRIES:
        default = _TRIAGE_DEFAULTS[state.step]
        new, reply = _advance_triage(state, **{slot_name: default})
        return new, [f"{_MOVE_ON} {reply}"]
    return replace(state, retries=state.retries + 1), [_RETRY_PROMPTS[state.step]]


# --------------------------------------------------------------------------
# Anamnesis
# --------------------------------------------------------------------------


class AnamnesisStep(str, Enum):
    GREET = "greet"
    CONFIRM_SYMPTOM = "confirm_symptom"
    ASK_ALLERGIES = "ask_allergies"
    ASK_MEDICATIONS = "ask_medications"
    ASK_CONDITIONS = "ask_conditions"
    DONE = "done"


ANAMNESIS_GREETING = "Before we continue, do you still have the symptom you reported at triage?"
_ASK_ALLERGIES = "Do you have any allergies?"
_ASK_MEDICATIONS = "Are you taking any medications at the moment?"
_ASK_CONDITIONS = "Do you have any prior medical conditions?"
_CONFIRM_RETRY = "Please answer yes or no. Do you still have the symptom?"
_ANAMNESIS_DONE = "Your history is recorded. A doctor will be with you shortly."


@dataclass(frozen=True)
class AnamnesisState:
    step: AnamnesisStep = AnamnesisStep.GREET
    symptom_confirmed: bool | None = None
    allergies: str | None = None
    medications: str | None = None
    prior_conditions: str | None = None
    retries: int = 0


def anamnesis_summary(state: AnamnesisState) -> str:
    """Summary sentence over all collected slots; only valid once done."""
    if state.step is not AnamnesisStep.DONE:
        raise IncompleteTriage("anamnesis summary is only available when the interview is done")
    confirmed = "yes" if state.symptom_confirmed else "no"
    return (
        f"Thank you. Symptom still present, {confirmed}. "
        f"Allergies, {state.allergies}. Medications, {state.medications}. "
        f"Prior conditions, {state.prior_conditions}. "
        "A doctor will review your history shortly."
    )


def anamnesis_step(state: AnamnesisState, user_text: str) -> tuple:
    """Advance the anamnesis interview by at most one step."""
    if state.step is AnamnesisStep.GREET:
        return replace(state, step=AnamnesisStep.CONFIRM_SYMPTOM), [ANAMNESIS_GREETING]
    if state.step is AnamnesisStep.DONE:
        return state, [_ANAMNESIS_DONE]

    if state.step is AnamnesisStep.CONFIRM_SYMPTOM:
        value = extract_yes_no(user_text)
        if value is None:
            if state.retries + 1 >= MAX_RETRIES:
                new = replace(
                    state, step=AnamnesisStep.ASK_ALLERGIES, symptom_confirmed=False, retries=0
                )
                return new, [f"{_MOVE_ON} {_ASK_ALLERGIES}"]
            return replace(state, retries=state.retries + 1), [_CONFIRM_RETRY]
        new = replace(state, step=AnamnesisStep.ASK_ALLERGIES, symptom_confirmed=value, retries=0)
        return new, [_ASK_ALLERGIES]

    # The free-text history questions take the answer verbatim; only blank
    # input counts as unparseable.
    text = user_text.strip()
    slot_name, next_step, next_prompt = {
        AnamnesisStep.ASK_ALLERGIES: ("allergies", AnamnesisStep.ASK_MEDICATIONS, _ASK_MEDICATIONS),
        AnamnesisStep.ASK_MEDICATIONS: (
            "medications",
            AnamnesisStep.ASK_CONDITIONS,
            _ASK_CONDITIONS,
        ),
        AnamnesisStep.ASK_CONDITIONS: ("prior_conditions", AnamnesisStep.DONE, None),
    }[state.step]
    if not text:
        if state.retries + 1 >= MAX_RETRIES:
            text = "none reported"
        else:
            return replace(state, retries=state.retries + 1), [REPROMPT_REPLY]
    new = replace(state, step=next_step, retries=0, **{slot_name: text})
    if next_step is AnamnesisStep.DONE:
        return new, [anamnesis_summary(new)]
    return new, [next_prompt]


# --------------------------------------------------------------------------
# Conversation wrappers and the builtin registry
# --------------------------------------------------------------------------


class TriageConversation:
    """Stateful wrapper: one instance per patient conversation."""

    def __init__(self):
        self.state = TriageState()

    def respond(self, text: str) -> list:
        self.state, replies = triage_step(self.state, text)
        return replies


class AnamnesisConversation:
    def __init__(self):
        self.state = AnamnesisState()

    def respond(self, text: str) -> list:
        self.state, replies = anamnesis_step(self.state, text)
        return replies


class EchoConversation:
    """Replies with the message verbatim; handy for load tests."""

    def respond(self, text: str) -> list:
        return [text]


BUILTIN_AGENTS = {
    "triage": TriageConversation,
    "anamnesis": AnamnesisConversation,
    "echo": EchoConversation,
}


def create_builtin_agent(name: str):
    try:
        return BUILTIN_AGENTS[name]()
    except KeyError:
        raise UnknownAgent(f"no builtin agent named {name!r}") from None
