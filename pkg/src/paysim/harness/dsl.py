"""Line-oriented scenario scripts.

::

    # comments start with '#'
    seed=7
    description=voucher lifecycle
    actor issuer
    actor alice
    issuer.spawn_token_class name=Voucher symbol=VCH fungibility=voucher supply=1 as=v
    issuer.allocate class=$v to=@alice token=1
    mine 2
    expect state class=$v token=1 equals=allocated

Values: integers, ``0x``-prefixed hex bytes, ``@actor`` addresses,
``$name`` bindings, ``true``/``false``/``none``, ``[a,b,...]`` lists and
bare or quoted strings. ``as=name`` binds the step's result.
"""

from __future__ import annotations

import re
import shlex
from dataclasses import dataclass, field
from typing import Any

from .verbs import BUILTINS, VERBS

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_INT = re.compile(r"-?[0-9]+\Z")
_HEX = re.compile(r"0x([0-9a-fA-F]{2})*\Z")


class ScenarioError(Exception):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class ScriptSyntaxError(ScenarioError):
    pass


class UnknownVerb(ScenarioError):
    pass


class UndeclaredActor(ScenarioError):
    pass


@dataclass(frozen=True)
class ActorRef:
    name: str


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class Step:
    line: int
    actor: str | None
    verb: str
    args: dict[str, Any] = field(default_factory=dict)
    bind: str | None = None
    positional: tuple[Any, ...] = ()

    def key(self) -> tuple:
        return (self.actor, self.verb, tuple(sorted(self.args.items(), key=lambda kv: kv[0])), self.bind,
                self.positional)


@dataclass
class Script:
    seed: int = 0
    description: str = ""
    actors: list[str] = field(default_factory=list)
    steps: list[Step] = field(default_factory=list)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Script):
            return NotImplemented
        return (self.seed, self.description, self.actors, [s.key() for s in self.steps]) == (
            other.seed, other.description, other.actors, [s.key() for s in other.steps])


def parse_value(text: str, line: int) -> Any:
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return [] if not inner else [parse_value(part.strip(), line) for part in inner.split(",")]
    if text in ("true", "false"):
        return text == "true"
    if text == "none":
        return None
    if _INT.match(text):
        return int(text)
    if text.startswith("0x"):
        if not _HEX.match(text):
            raise ScriptSyntaxError(line, f"bad hex literal {text!r}")
        return bytes.fromhex(text[2:])
    if text[:1] in "@$":
        if not _NAME.match(text[1:]):
            raise ScriptSyntaxError(line, f"bad reference {text!r}")
        return ActorRef(text[1:]) if text[0] == "@" else VarRef(text[1:])
    return text


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, bytes):
        return "0x" + value.hex()
    if isinstance(value, ActorRef):
        return "@" + value.name
    if isinstance(value, VarRef):
        return "$" + value.name
    if isinstance(value, list):
        return "[" + ",".join(format_value(v) for v in value) + "]"
    text = str(value)
    needs_quote = (shlex.quote(text) != text or any(c in "#[]," for c in text)
                   or text in ("true", "false", "none") or _INT.match(text) or text[:1] in "@$" or text.startswith("0x"))
    return shlex.quote(text) if needs_quote else text


def _known_actor(name: str, actors: list[str], line: int) -> None:
    if name not in actors:
        raise UndeclaredActor(line, f"actor {name!r} used before declaration")


def _check_refs(value: Any, actors: list[str], line: int) -> None:
    if isinstance(value, ActorRef):
        _known_actor(value.name, actors, line)
    elif isinstance(value, list):
        for v in value:
            _check_refs(v, actors, line)


def parse_scenario(text: str) -> Script:
    script = Script()
    seen_step = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if not seen_step and stripped.startswith("seed="):
            value = stripped[5:].strip()
            if not _INT.match(value) or not 0 <= int(value) < 2**64:
                raise ScriptSyntaxError(lineno, "seed must be a 64-bit unsigned integer")
            script.seed = int(value)
            continue
        if not seen_step and stripped.startswith("description="):
            script.description = stripped[len("description="):].strip()
            continue
        try:
            words = shlex.split(stripped, comments=True)
        except ValueError as exc:
            raise ScriptSyntaxError(lineno, str(exc)) from None
        if not words:
            continue
        head, rest = words[0], words[1:]
        if head == "actor":
            if len(rest) != 1 or not _NAME.match(rest[0]):
                raise ScriptSyntaxError(lineno, "expected 'actor <name>'")
            if rest[0] in script.actors:
                raise ScriptSyntaxError(lineno, f"actor {rest[0]!r} declared twice")
            script.actors.append(rest[0])
            continue
        seen_step = True
        positional: list[Any] = []
        args: dict[str, Any] = {}
        for word in rest:
            if "=" in word:
                key, _, val = word.partition("=")
                if not _NAME.match(key):
                    raise ScriptSyntaxError(lineno, f"bad argument name {key!r}")
                if key in args:
                    raise ScriptSyntaxError(lineno, f"argument {key!r} repeated")
                args[key] = parse_value(val, lineno)
            elif args:
                raise ScriptSyntaxError(lineno, f"positional value {word!r} after key=value arguments")
            else:
                positional.append(parse_value(word, lineno))
        bind = args.pop("as", None)
        if bind is not None and (not isinstance(bind, str) or not _NAME.match(bind)):
            raise ScriptSyntaxError(lineno, "as= needs a plain name")
        if head in BUILTINS:
            actor, verb = None, head
        else:
            actor, dot, verb = head.partition(".")
            if not dot or not verb:
                if head in VERBS:
                    raise ScriptSyntaxError(lineno, f"verb {head!r} needs an actor: '<actor>.{head}'")
                raise UnknownVerb(lineno, f"unknown verb {head!r}")
            if verb not in VERBS:
                raise UnknownVerb(lineno, f"unknown verb {verb!r}")
            _known_actor(actor, script.actors, lineno)
            if positional:
                raise ScriptSyntaxError(lineno, "operation arguments must be key=value")
        for v in list(args.values()) + positional:
            _check_refs(v, script.actors, lineno)
        BUILTINS.get(verb, VERBS.get(verb)).check_syntax(lineno, positional, args, ScriptSyntaxError)
        script.steps.append(Step(lineno, actor, verb, args, bind, tuple(positional)))
    return script


def serialize_scenario(script: Script) -> str:
    out = [f"seed={script.seed}"]
    if script.description:
        out.append(f"description={script.description}")
    out += [f"actor {a}" for a in script.actors]
    for step in script.steps:
        head = step.verb if step.actor is None else f"{step.actor}.{step.verb}"
        parts = [head] + [format_value(v) for v in step.positional]
        parts += [f"{k}={format_value(v)}" for k, v in step.args.items()]
        if step.bind:
            parts.append(f"as={step.bind}")
        out.append(" ".join(parts))
    return "\n".join(out) + "\n"
