"""Chat-completion backends behind one small interface.

Two implementations of the OpenAI-compatible chat-with-tools contract:
``MockBackend`` replays a deterministic script (the test double every loop in
this package runs against), and ``OpenAIBackend`` speaks the real wire format
over HTTPS with retry handling and optional streaming.
"""

from __future__ import annotations

import json
import math
import os
import re
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Protocol

import requests

from .errors import (
    AuthError,
    ContextBudgetError,
    MalformedReplyError,
    RateLimitedError,
    ScriptExhaustedError,
    TransportError,
)

_TOOL_NAME_RE = re.compile(r"^[a-z_]+$")
ChunkSink = Callable[[str], None]


@dataclass(frozen=True)
class ToolCallRequest:
    """One tool invocation requested by the model."""

    id: str
    tool_name: str
    arguments: dict[str, Any]


@dataclass(frozen=True)
class ChatMessage:
    """One chat turn in the completions wire shape."""

    role: str
    content: str = ""
    tool_calls: tuple[ToolCallRequest, ...] = ()
    tool_call_id: str | None = None

    def __post_init__(self) -> None:
        if self.role not in {"system", "user", "assistant", "tool"}:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role == "tool" and not self.tool_call_id:
            raise ValueError("tool messages must carry tool_call_id")
        if self.role != "assistant" and self.tool_calls:
            raise ValueError("only assistant messages may carry tool_calls")

    def to_wire(self) -> dict[str, Any]:
        wire: dict[str, Any] = {"role": self.role, "content": self.content}
        if self.tool_calls:
            wire["tool_calls"] = [
                {
                    "id": call.id,
                    "type": "function",
                    "function": {
                        "name": call.tool_name,
                        "arguments": json.dumps(call.arguments, ensure_ascii=False),
                    },
                }
                for call in self.tool_calls
            ]
        if self.tool_call_id:
            wire["tool_call_id"] = self.tool_call_id
        return wire


def system(content: str) -> ChatMessage:
    return ChatMessage(role="system", content=content)


def user(content: str) -> ChatMessage:
    return ChatMessage(role="user", content=content)


def assistant(content: str = "", tool_calls: tuple[ToolCallRequest, ...] = ()) -> ChatMessage:
    return ChatMessage(role="assistant", content=content, tool_calls=tool_calls)


def tool_result(tool_call_id: str, content: str) -> ChatMessage:
    return ChatMessage(role="tool", content=content, tool_call_id=tool_call_id)


@dataclass(frozen=True)
class ToolSpec:
    """A declared tool: name, description, JSON-schema parameters."""

    name: str
    description: str
    parameter_schema: dict[str, Any]

    def __post_init__(self) -> None:
        if not _TOOL_NAME_RE.match(self.name):
            raise ValueError(f"tool name {self.name!r} must match [a-z_]+")

    def to_wire(self) -> dict[str, Any]:
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": self.parameter_schema,
            },
        }


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass(frozen=True)
class CompletionResult:
    """The backend's next turn: assistant text or a batch of tool calls."""

    text: str | None = None
    tool_calls: tuple[ToolCallRequest, ...] = ()
    usage: TokenUsage = field(default_factory=TokenUsage)

    def __post_init__(self) -> None:
        if (self.text is None) == (not self.tool_calls):
            raise ValueError("exactly one of text or tool_calls must be populated")
        ids = [call.id for call in self.tool_calls]
        if len(ids) != len(set(ids)):
            raise ValueError("tool call ids must be unique within one result")

    @property
    def is_tool_calls(self) -> bool:
        return bool(self.tool_calls)


@dataclass
class BackendConfig:
    """Connection settings for the live OpenAI-compatible backend.

    Temperature defaults to 0.0: response variability is the main risk this
    design guards against, and lowering temperature is the standard
    mitigation. The API key is only ever read from the named environment
    variable, never from configuration files.
    """

    model_name: str = "gpt-4-1106-preview"
    temperature: float = 0.0
    seed: int | None = None
    max_output_tokens: int = 1024
    base_url: str = "https://api.openai.com/v1"
    api_key_source: str = "OPENAI_API_KEY"
    request_timeout: float = 30.0
    max_retries: int = 3
    context_token_budget: int = 128_000

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")
        if self.request_timeout <= 0:
            raise ValueError("request_timeout must be > 0")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")


def estimate_tokens(text: str) -> int:
    """Character/4 heuristic; guards gross context overflow only."""
    return math.ceil(len(text) / 4)


def _validate_conversation(messages: list[ChatMessage]) -> None:
    if not messages:
        raise ValueError("messages must be non-empty")
    if messages[0].role != "system":
        raise ValueError("first message must have role system")


# ---------------------------------------------------------------------------
# Scripted mock backend
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmitText:
    """Script step: reply with text. Templates may reference {last_user},
    {tool_results}, and {catalog_names}."""

    template: str


@dataclass(frozen=True)
class CallTool:
    """Script step: request a tool call. String argument values may use the
    same placeholders as EmitText."""

    tool_name: str
    arguments: dict[str, Any]


ScriptStep = EmitText | CallTool


class Backend(Protocol):
    def complete(
        self,
        messages: list[ChatMessage],
        tools: list[ToolSpec] | None = None,
        on_chunk: ChunkSink | None = None,
    ) -> CompletionResult: ...


class MockBackend:
    """Deterministic scripted backend.

    Successive ``complete()`` calls consume script steps in order; after
    exhaustion the final step repeats if it emits text, otherwise the next
    call raises ``ScriptExhaustedError``. Output is a pure function of the
    script and the message history.
    """

    def __init__(self, steps: Iterable[ScriptStep]):
        self._steps: list[ScriptStep] = list(steps)
        if not self._steps:
            raise ValueError("script must contain at least one step")
        self._cursor = 0
        self._next_call_id = 0
        self.calls: list[tuple[list[ChatMessage], list[ToolSpec]]] = []

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def _substitutions(
        self, messages: list[ChatMessage], tools: list[ToolSpec]
    ) -> dict[str, str]:
        last_user = ""
        tool_results: list[str] = []
        for message in messages:
            if message.role == "user":
                last_user = message.content
                tool_results = []
            elif message.role == "tool":
                tool_results.append(message.content)
        catalog_names: list[str] = []
        for spec in tools:
            items = spec.parameter_schema.get("properties", {}).get("names", {}).get("items", {})
            catalog_names.extend(items.get("enum", []))
        return {
            "last_user": last_user,
            "tool_results": "\n".join(tool_results),
            "catalog_names": ", ".join(catalog_names),
        }

    @staticmethod
    def _render(template: str, substitutions: dict[str, str]) -> str:
        rendered = template
        for key, value in substitutions.items():
            rendered = rendered.replace("{" + key + "}", value)
        return rendered

    def _render_arguments(self, value: Any, substitutions: dict[str, str]) -> Any:
        if isinstance(value, str):
            return self._render(value, substitutions)
        if isinstance(value, list):
            return [self._render_arguments(v, substitutions) for v in value]
        if isinstance(value, dict):
            return {k: self._render_arguments(v, substitutions) for k, v in value.items()}
        return value

    def complete(
        self,
        messages: list[ChatMessage],
        tools: list[ToolSpec] | None = None,
        on_chunk: ChunkSink | None = None,
    ) -> CompletionResult:
        _validate_conversation(messages)
        tools = tools or []
        self.calls.append((list(messages), list(tools)))

        if self._cursor < len(self._steps):
            step = self._steps[self._cursor]
            self._cursor += 1
        else:
            step = self._steps[-1]
            if not isinstance(step, EmitText):
                raise ScriptExhaustedError("script ended on a tool call")

        substitutions = self._substitutions(messages, tools)
        if isinstance(step, EmitText):
            text = self._render(step.template, substitutions)
            if on_chunk:
                for chunk in re.findall(r"\S+\s*", text) or [text]:
                    on_chunk(chunk)
            prompt_tokens = sum(estimate_tokens(m.content) for m in messages)
            return CompletionResult(
                text=text,
                usage=TokenUsage(prompt_tokens=prompt_tokens, completion_tokens=estimate_tokens(text)),
            )

        call_id = f"call_{self._next_call_id}"
        self._next_call_id += 1
        arguments = self._render_arguments(step.arguments, substitutions)
        return CompletionResult(
            tool_calls=(ToolCallRequest(id=call_id, tool_name=step.tool_name, arguments=arguments),),
            usage=TokenUsage(prompt_tokens=sum(estimate_tokens(m.content) for m in messages)),
        )


def script_from_spec(steps: list[dict[str, Any]]) -> list[ScriptStep]:
    """Parse the documented JSON script form into script steps."""
    parsed: list[ScriptStep] = []
    for step in steps:
        kind = step.get("kind")
        if kind == "emit_text":
            parsed.append(EmitText(template=str(step["text"])))
        elif kind == "call_tool":
            parsed.append(CallTool(tool_name=str(step["tool"]), arguments=dict(step.get("arguments", {}))))
        else:
            raise ValueError(f"unknown script step kind {kind!r}")
    return parsed


# ---------------------------------------------------------------------------
# Live OpenAI-compatible backend
# ---------------------------------------------------------------------------


class OpenAIBackend:
    """Blocking client for the OpenAI-compatible chat-completions endpoint."""

    def __init__(
        self,
        config: BackendConfig | None = None,
        http: requests.Session | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self.config = config or BackendConfig()
        self._http = http or requests.Session()
        self._sleep = sleeper

    def _api_key(self) -> str:
        key = os.environ.get(self.config.api_key_source, "")
        if not key:
            raise AuthError(
                f"environment variable {self.config.api_key_source!r} is empty or unset"
            )
        return key

    def _payload(
        self, messages: list[ChatMessage], tools: list[ToolSpec], stream: bool
    ) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "model": self.config.model_name,
            "messages": [m.to_wire() for m in messages],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
        }
        if tools:
            payload["tools"] = [t.to_wire() for t in tools]
        if self.config.seed is not None:
            payload["seed"] = self.config.seed
        if stream:
            payload["stream"] = True
        return payload

    def _check_budget(self, payload: dict[str, Any]) -> None:
        estimate = estimate_tokens(json.dumps(payload, ensure_ascii=False))
        if estimate > self.config.context_token_budget:
            raise ContextBudgetError(
                f"estimated {estimate} tokens exceeds budget {self.config.context_token_budget}"
            )

    def _post_with_retries(self, url: str, payload: dict[str, Any], key: str, stream: bool):
        waited = 0.0
        attempt = 0
        while True:
            try:
                response = self._http.post(
                    url,
                    json=payload,
                    headers={"Authorization": f"Bearer {key}"},
                    timeout=self.config.request_timeout,
                    stream=stream,
                )
            except requests.RequestException as exc:
                raise TransportError(str(exc)) from exc
            if response.status_code == 429:
                retry_after = _parse_retry_after(response)
                wait = retry_after if retry_after is not None else min(2.0**attempt, 30.0)
                attempt += 1
                exhausted = attempt > self.config.max_retries
                over_budget = waited + wait > self.config.request_timeout
                if exhausted or over_budget:
                    raise RateLimitedError(
                        f"rate limited after {attempt - 1} retries", retry_after=retry_after
                    )
                self._sleep(wait)
                waited += wait
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"backend rejected credentials (HTTP {response.status_code})")
            if response.status_code >= 400:
                raise TransportError(f"HTTP {response.status_code}: {response.text[:300]}")
            return response

    def complete(
        self,
        messages: list[ChatMessage],
        tools: list[ToolSpec] | None = None,
        on_chunk: ChunkSink | None = None,
    ) -> CompletionResult:
        _validate_conversation(messages)
        tools = tools or []
        key = self._api_key()
        stream = on_chunk is not None
        payload = self._payload(messages, tools, stream)
        self._check_budget(payload)
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        response = self._post_with_retries(url, payload, key, stream)
        if stream:
            return self._read_stream(response, on_chunk)
        return self._read_body(response)

    @staticmethod
    def _parse_tool_calls(raw_calls: list[dict[str, Any]]) -> tuple[ToolCallRequest, ...]:
        calls = []
        for raw in raw_calls:
            function = raw.get("function") or {}
            try:
                arguments = json.loads(function.get("arguments") or "{}")
            except json.JSONDecodeError as exc:
                raise MalformedReplyError(f"tool call arguments are not JSON: {exc}") from exc
            if not isinstance(arguments, dict):
                raise MalformedReplyError("tool call arguments must be a JSON object")
            calls.append(
                ToolCallRequest(
                    id=str(raw.get("id", "")),
                    tool_name=str(function.get("name", "")),
                    arguments=arguments,
                )
            )
        return tuple(calls)

    def _read_body(self, response: requests.Response) -> CompletionResult:
        try:
            body = response.json()
            message = body["choices"][0]["message"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedReplyError(f"unparseable completion body: {exc}") from exc
        usage_raw = body.get("usage") or {}
        usage = TokenUsage(
            prompt_tokens=int(usage_raw.get("prompt_tokens", 0)),
            completion_tokens=int(usage_raw.get("completion_tokens", 0)),
        )
        raw_calls = message.get("tool_calls")
        if raw_calls:
            return CompletionResult(tool_calls=self._parse_tool_calls(raw_calls), usage=usage)
        content = message.get("content")
        if content is None:
            raise MalformedReplyError("reply carries neither content nor tool calls")
        return CompletionResult(text=str(content), usage=usage)

    def _read_stream(self, response: requests.Response, on_chunk: ChunkSink) -> CompletionResult:
        text_parts: list[str] = []
        partial_calls: dict[int, dict[str, str]] = {}
        saw_delta = False
        for line in response.iter_lines(decode_unicode=True):
            if not line or not line.startswith("data:"):
                continue
            data = line[len("data:") :].strip()
            if data == "[DONE]":
                break
            try:
                event = json.loads(data)
                delta = event["choices"][0].get("delta", {})
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise MalformedReplyError(f"unparseable stream event: {exc}") from exc
            saw_delta = True
            content = delta.get("content")
            if content:
                text_parts.append(content)
                on_chunk(content)
            for fragment in delta.get("tool_calls") or []:
                index = int(fragment.get("index", 0))
                slot = partial_calls.setdefault(index, {"id": "", "name": "", "arguments": ""})
                if fragment.get("id"):
                    slot["id"] = fragment["id"]
                function = fragment.get("function") or {}
                if function.get("name"):
                    slot["name"] = function["name"]
                slot["arguments"] += function.get("arguments", "")
        if not saw_delta:
            raise MalformedReplyError("stream closed without any completion delta")
        if partial_calls:
            raw_calls = [
                {"id": slot["id"], "function": {"name": slot["name"], "arguments": slot["arguments"]}}
                for _, slot in sorted(partial_calls.items())
            ]
            return CompletionResult(tool_calls=self._parse_tool_calls(raw_calls))
        return CompletionResult(text="".join(text_parts))


def _parse_retry_after(response: requests.Response) -> float | None:
    header = response.headers.get("Retry-After")
    if header is None:
        return None
    try:
        return max(float(header), 0.0)
    except ValueError:
        return None


def backend_from_spec(spec: dict[str, Any]) -> Backend:
    """Build a backend from its documented JSON description.

    ``{"type": "mock", "script": [...]}`` or ``{"type": "live", ...}`` with
    optional BackendConfig field overrides (``api_key_env`` names the key's
    environment variable).
    """
    backend_type = spec.get("type", "mock")
    if backend_type == "mock":
        return MockBackend(script_from_spec(spec.get("script") or [{"kind": "emit_text", "text": "OK"}]))
    if backend_type == "live":
        config = BackendConfig(
            model_name=spec.get("model", BackendConfig.model_name),
            temperature=float(spec.get("temperature", BackendConfig.temperature)),
            seed=spec.get("seed"),
            max_output_tokens=int(spec.get("max_output_tokens", BackendConfig.max_output_tokens)),
            base_url=spec.get("base_url", BackendConfig.base_url),
            api_key_source=spec.get("api_key_env", BackendConfig.api_key_source),
            request_timeout=float(spec.get("timeout", BackendConfig.request_timeout)),
            max_retries=int(spec.get("max_retries", BackendConfig.max_retries)),
        )
        return OpenAIBackend(config)
    raise ValueError(f"unknown backend type {backend_type!r}")
