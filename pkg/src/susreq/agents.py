"""Agent runtime: chat providers, tools, buffer memory, and the ReAct loop.

Every reasoning agent in the pipeline runs through run_react(): the model
alternates Thought/Action steps with injected Observations until it emits a
Final Answer or hits the step bound. Transcripts record every step plus the
provider id and prompt hash, and replay byte-identically with a scripted
provider.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence, runtime_checkable

import httpx

from susreq.errors import (
    EmptyMemory,
    ProviderUnavailable,
    UnparseableStep,
)


@runtime_checkable
class ChatProvider(Protocol):
    provider_id: str

    def complete(self, prompt: str) -> str: ...


class HTTPChatProvider:
    """Client for a hosted chat endpoint.

    POSTs ``{"model": ..., "messages": [{"role": "user", ...}],
    "temperature": ...}`` and expects ``{"text": ...}``. Bounded retries,
    then ProviderUnavailable.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        *,
        temperature: float = 0.3,
        max_output_tokens: int | None = None,
        api_key_env: str = "SUSREQ_CHAT_API_KEY",
        timeout: float = 120.0,
        max_retries: int = 3,
    ) -> None:
        if temperature < 0:
            raise ValueError("temperature must be >= 0")
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.max_output_tokens = max_output_tokens
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_retries = max_retries
        self.provider_id = f"http/{model}"

    def complete(self, prompt: str) -> str:
        payload: dict = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        if self.max_output_tokens is not None:
            payload["max_output_tokens"] = self.max_output_tokens
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                response = httpx.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
                response.raise_for_status()
                return str(response.json()["text"])
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_error = exc
                time.sleep(0.2 * (attempt + 1))
        raise ProviderUnavailable(
            f"chat endpoint {self.endpoint} unreachable after "
            f"{self.max_retries} attempts: {last_error}"
        )


@dataclass
class ScriptEntry:
    response: str
    when_contains: tuple[str, ...] = ()
    once: bool = False
    used: bool = False


class MockChatProvider:
    """Deterministic scripted provider for tests and offline runs.

    Two script shapes:

    * a plain list of strings — consumed strictly in order, one per call;
    * a list of ``{"response": ..., "when_contains": [...], "once": bool}``
      objects — on each call the first entry whose substrings all appear in
      the prompt answers; keyed entries are reusable unless ``once``.

    Raises ProviderUnavailable when no entry matches, so a drifting prompt
    fails loudly instead of silently answering the wrong thing.
    """

    def __init__(self, script: Sequence[str | dict], provider_id: str = "mock") -> None:
        self.provider_id = provider_id
        self._sequential = all(isinstance(entry, str) for entry in script)
        self._entries: list[ScriptEntry] = []
        for entry in script:
            if isinstance(entry, str):
                self._entries.append(ScriptEntry(response=entry, once=True))
            else:
                when = entry.get("when_contains", [])
                if isinstance(when, str):
                    when = [when]
                self._entries.append(
                    ScriptEntry(
                        response=entry["response"],
                        when_contains=tuple(when),
                        once=bool(entry.get("once", False)),
                    )
                )
        self._lock = threading.Lock()
        self.calls = 0

    @classmethod
    def from_script_file(cls, path: str | Path, provider_id: str | None = None) -> "MockChatProvider":
        script = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(script, provider_id=provider_id or f"mock/{Path(path).name}")

    def reset(self) -> None:
        with self._lock:
            for entry in self._entries:
                entry.used = False
            self.calls = 0

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.calls += 1
            for entry in self._entries:
                if entry.used and (entry.once or self._sequential):
                    continue
                if all(needle in prompt for needle in entry.when_contains):
                    entry.used = True
                    return entry.response
        raise ProviderUnavailable(
            f"mock script has no response for this prompt (call {self.calls}); "
            f"prompt starts: {prompt[:120]!r}"
        )


# --- tools -----------------------------------------------------------------


@dataclass(frozen=True)
class Tool:
    name: str
    description: str
    handler: Callable[[str], str]


class ToolRegistry:
    def __init__(self, tools: Sequence[Tool] = ()) -> None:
        self._tools: dict[str, Tool] = {}
        for tool in tools:
            self.register(tool)

    def register(self, tool: Tool) -> None:
        if tool.name in self._tools:
            raise ValueError(f"tool {tool.name!r} already registered")
        self._tools[tool.name] = tool

    def names(self) -> list[str]:
        return list(self._tools)

    def get(self, name: str) -> Tool | None:
        return self._tools.get(name)

    def __len__(self) -> int:
        return len(self._tools)

    def render_tools(self) -> str:
        """The {tools} block: one 'name: description' line per tool."""
        return "\n".join(f"{t.name}: {t.description}" for t in self._tools.values())

    def render_tool_names(self) -> str:
        """The {tool_names} list."""
        return ", ".join(self._tools)


def retriever_tool(
    name: str,
    description: str,
    index,
    *,
    k: int = 4,
    min_score: float | None = None,
    observed_ids: list[str] | None = None,
) -> Tool:
    """Wrap a SemanticIndex as a retriever tool.

    Hits are rendered one per line as ``[record_id] (score=...) text`` so the
    agent can cite record ids; every hit id is also appended to
    ``observed_ids`` when given (classification provenance).
    """

    def handler(query: str) -> str:
        hits = index.query(query, k=k, min_score=min_score)
        if not hits:
            return "No matching records."
        if observed_ids is not None:
            observed_ids.extend(h.record_id for h in hits)
        return "\n".join(
            f"[{h.record_id}] (score={h.score:.4f}) {h.record.text}" for h in hits
        )

    return Tool(name=name, description=description, handler=handler)


# --- step parsing -------------------------------------------------------------


class StepKind(enum.Enum):
    THOUGHT = "Thought"
    ACTION = "Action"
    OBSERVATION = "Observation"
    FINAL_ANSWER = "FinalAnswer"


@dataclass(frozen=True)
class AgentStep:
    kind: StepKind
    text: str
    tool_name: str | None = None
    tool_input: str | None = None
    tool_known: bool = True

    def to_jsonable(self) -> dict:
        out: dict = {"kind": self.kind.value, "text": self.text}
        if self.kind is StepKind.ACTION:
            out["tool_name"] = self.tool_name
            out["tool_input"] = self.tool_input
            out["tool_known"] = self.tool_known
        return out


_FINAL_ANSWER = "Final Answer:"
_ACTION = re.compile(r"(?:^|\n)Action:[ \t]*(.+)")
_ACTION_INPUT = re.compile(r"(?:^|\n)Action Input:[ \t]*")
_THOUGHT = re.compile(r"(?:^|\n)Thought:[ \t]*")


def parse_step(model_text: str, tool_names: set[str] | frozenset[str]) -> list[AgentStep]:
    """Parse one model reply into its steps.

    Returns the Thought step (when present) followed by the decisive step:
    an Action (with ``tool_known`` False when the tool is not registered —
    a recoverable signal, not an error) or a FinalAnswer. Text after a
    hallucinated ``Observation:`` marker is discarded. No recognized marker
    at all raises UnparseableStep.
    """
    if not model_text or not model_text.strip():
        raise UnparseableStep("empty model reply")
    # The runtime injects real observations; anything the model wrote after
    # its own Observation marker is speculation.
    cut = model_text.find("\nObservation:")
    text = model_text[:cut] if cut != -1 else model_text

    steps: list[AgentStep] = []
    final_at = text.find(_FINAL_ANSWER)
    action_match = _ACTION.search(text)
    if final_at != -1 and (action_match is None or final_at < action_match.start()):
        head = text[:final_at]
        thought = _strip_thought_marker(head)
        if thought:
            steps.append(AgentStep(StepKind.THOUGHT, thought))
        answer = text[final_at + len(_FINAL_ANSWER) :].strip()
        steps.append(AgentStep(StepKind.FINAL_ANSWER, answer))
        return steps
    if action_match is not None:
        head = text[: action_match.start()]
        thought = _strip_thought_marker(head)
        if thought:
            steps.append(AgentStep(StepKind.THOUGHT, thought))
        tool_name = action_match.group(1).strip()
        input_match = _ACTION_INPUT.search(text, action_match.end())
        tool_input = text[input_match.end() :].strip() if input_match else ""
        steps.append(
            AgentStep(
                StepKind.ACTION,
                text[action_match.start() :].strip(),
                tool_name=tool_name,
                tool_input=tool_input,
                tool_known=tool_name in tool_names,
            )
        )
        return steps
    thought_match = _THOUGHT.search("\n" + text)
    if thought_match:
        thought = _strip_thought_marker(text)
        return [AgentStep(StepKind.THOUGHT, thought or text.strip())]
    raise UnparseableStep(f"no Thought/Action/Final Answer marker in: {text[:80]!r}")


def _strip_thought_marker(text: str) -> str:
    stripped = text.strip()
    if stripped.startswith("Thought:"):
        stripped = stripped[len("Thought:") :].strip()
    return stripped


# --- the loop -------------------------------------------------------------


@dataclass
class AgentTranscript:
    """Full record of one agent loop.

    ``step_count`` counts model iterations (bounded by max_steps); the
    ``steps`` list additionally holds injected Observation steps.
    """

    steps: list[AgentStep]
    final_answer: str | None
    provider_id: str
    prompt_hash: str
    step_count: int
    status: str  # "ok" | "failed"
    failure_reason: str | None = None
    observed_record_ids: list[str] = field(default_factory=list)

    def to_jsonable(self) -> dict:
        return {
            "prompt_hash": self.prompt_hash,
            "provider_id": self.provider_id,
            "steps": [s.to_jsonable() for s in self.steps],
            "final_answer": self.final_answer,
            "status": self.status,
            "failure_reason": self.failure_reason,
            "step_count": self.step_count,
        }


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


_REPAIR_NOTE = (
    "\n(Your previous reply did not follow the required format. Continue using "
    "exactly the Thought / Action / Action Input / Final Answer format.)\nThought: "
)


def run_react(
    provider: ChatProvider,
    prompt: str,
    tools: ToolRegistry,
    max_steps: int = 8,
) -> AgentTranscript:
    """Run one ReAct loop to Final Answer or the step bound.

    Tool failures and unknown tool names come back to the model as
    Observations rather than aborting the loop; an unparseable reply gets
    one repair re-ask, then fails hard. A transcript that ran out of steps
    is returned with status "failed" and no final answer.
    """
    if len(tools) < 1:
        raise ValueError("run_react needs at least one registered tool")
    tool_names = frozenset(tools.names())
    conversation = prompt
    steps: list[AgentStep] = []
    observed_ids: list[str] = []
    initial_hash = prompt_hash(prompt)

    for iteration in range(1, max_steps + 1):
        model_text = provider.complete(conversation)
        try:
            parsed = parse_step(model_text, tool_names)
        except UnparseableStep:
            model_text = provider.complete(conversation + model_text + _REPAIR_NOTE)
            parsed = parse_step(model_text, tool_names)  # second failure propagates
        steps.extend(parsed)
        conversation += model_text
        last = parsed[-1]
        if last.kind is StepKind.FINAL_ANSWER:
            return AgentTranscript(
                steps=steps,
                final_answer=last.text,
                provider_id=provider.provider_id,
                prompt_hash=initial_hash,
                step_count=iteration,
                status="ok",
                observed_record_ids=observed_ids,
            )
        if last.kind is StepKind.ACTION:
            if not last.tool_known:
                observation = (
                    f"Unknown tool {last.tool_name!r}. "
                    f"Available tools: {', '.join(sorted(tool_names))}."
                )
            else:
                tool = tools.get(last.tool_name or "")
                assert tool is not None
                before = len(observed_ids)
                try:
                    observation = tool.handler(last.tool_input or "")
                except Exception as exc:  # fault containment: feed back, go on
                    del observed_ids[before:]
                    observation = f"Tool {last.tool_name!r} failed: {exc}"
            steps.append(AgentStep(StepKind.OBSERVATION, observation))
            conversation += f"\nObservation: {observation}\nThought: "
        else:
            conversation += "\n"

    return AgentTranscript(
        steps=steps,
        final_answer=None,
        provider_id=provider.provider_id,
        prompt_hash=initial_hash,
        step_count=max_steps,
        status="failed",
        failure_reason=f"StepLimitExceeded: no final answer within {max_steps} steps",
        observed_record_ids=observed_ids,
    )


# --- conversational buffer memory ------------------------------------------


@dataclass(frozen=True)
class MemoryEntry:
    chunk_id: str
    summary_text: str


class BufferMemory:
    """Ordered per-stage memory: one entry per processed chunk."""

    def __init__(self) -> None:
        self._entries: list[MemoryEntry] = []

    def __len__(self) -> int:
        return len(self._entries)

    def entries(self) -> list[MemoryEntry]:
        return list(self._entries)

    def append(self, chunk_id: str, summary_text: str) -> None:
        self._entries.append(MemoryEntry(chunk_id, summary_text))

    def clear(self) -> None:
        self._entries.clear()

    def render(self) -> str:
        """The {memory_entries} block, entries in insertion order."""
        return "\n\n".join(e.summary_text for e in self._entries)


def memory_append(memory: BufferMemory, chunk_id: str, summary: str) -> None:
    memory.append(chunk_id, summary)


def synthesize(
    provider: ChatProvider,
    memory: BufferMemory,
    tools: ToolRegistry,
    *,
    template_id: str = "context_synthesis",
    task: str = "Summarize the stored memory entries into the final analysis.",
    max_steps: int = 8,
) -> tuple[str, AgentTranscript]:
    """Run the synthesis loop over the accumulated memory entries."""
    from susreq.prompts import render_prompt

    if len(memory) == 0:
        raise EmptyMemory("cannot synthesize from an empty memory")
    prompt = render_prompt(
        template_id,
        {
            "memory_entries": memory.render(),
            "tools": tools.render_tools(),
            "tool_names": tools.render_tool_names(),
            "input": task,
            "agent_scratchpad": "",
        },
    )
    transcript = run_react(provider, prompt, tools, max_steps=max_steps)
    if transcript.status != "ok" or transcript.final_answer is None:
        raise ProviderUnavailable(
            f"synthesis loop failed: {transcript.failure_reason or 'no final answer'}"
        )
    return transcript.final_answer, transcript
