"""Scene description language: parsing and reproducible sampling.

A scene file declares opaque type names, entities with typed fields, and an
optional instance block that assigns fields literals or distribution calls.
Grammar (``#`` starts a line comment)::

    scene          := "scene" IDENT "{" (type_decl | entity_decl)* instance_block? "}"
    type_decl      := "type" IDENT
    entity_decl    := "entity" IDENT "{" (IDENT ":" IDENT)* "}"
    instance_block := "instance" "{" (IDENT "." IDENT "=" value)* "}"
    value          := NUMBER | STRING | IDENT "(" (IDENT "=" value ("," IDENT "=" value)*)? ")"

A field's type may name a declared type or a declared entity; declaration
order does not matter, so an entity may be used as a type before its own
declaration. An entity that appears as a field type acts as a value
template: its fields describe the shape of values (for example a ``uniform``
entity with ``low``/``high``), so instances never assign them. Fields whose
type is such an entity are distribution-valued and must be assigned before
sampling; fields of plain declared types may be left unassigned. A scene
without an instance block parses fine and supports inspection.

Sampling draws one generator per scene index from the shared stream scheme
(see :mod:`bowtie_risk.rngstreams`), so configuration ``i`` of a batch is
identical no matter how many configurations are drawn around it.

Distributions: ``uniform(low=, high=)`` (two integer literals draw integers
inclusive of both ends, otherwise reals in ``[low, high)``), ``choice(...)``
(uniform over its argument values; the keyword labels are only labels), and
``fixed(value=)``, which a bare literal abbreviates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from .errors import ModelFormatError, SdlParseError
from .rngstreams import SCENE_STREAM, substream

_PUNCT = set("{}():=.,")
_KEYWORDS = {"scene", "type", "entity", "instance"}


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "number" | "string" | punctuation char | "eof"
    text: str
    value: object
    line: int
    column: int


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch in _PUNCT:
            tokens.append(Token(ch, ch, ch, line, start_col))
            i += 1
            col += 1
            continue
        if ch == '"':
            i += 1
            col += 1
            buf = []
            while i < n and text[i] != '"':
                c = text[i]
                if c == "\n":
                    raise SdlParseError("unterminated string literal", line, start_col)
                if c == "\\" and i + 1 < n:
                    esc = text[i + 1]
                    buf.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                    i += 2
                    col += 2
                    continue
                buf.append(c)
                i += 1
                col += 1
            if i >= n:
                raise SdlParseError("unterminated string literal", line, start_col)
            i += 1
            col += 1
            tokens.append(Token("string", '"' + "".join(buf) + '"', "".join(buf), line, start_col))
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            seen_dot = seen_exp = False
            while j < n:
                c = text[j]
                if c.isdigit():
                    j += 1
                elif c == "." and not seen_dot and not seen_exp and j + 1 < n and text[j + 1].isdigit():
                    seen_dot = True
                    j += 1
                elif c in "eE" and not seen_exp and j + 1 < n and (
                    text[j + 1].isdigit() or text[j + 1] in "+-"
                ):
                    seen_exp = True
                    j += 2 if text[j + 1] in "+-" else 1
                else:
                    break
            lexeme = text[i:j]
            value: object = float(lexeme) if (seen_dot or seen_exp) else int(lexeme)
            tokens.append(Token("number", lexeme, value, line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            lexeme = text[i:j]
            tokens.append(Token("ident", lexeme, lexeme, line, start_col))
            col += j - i
            i = j
            continue
        raise SdlParseError(f"unexpected character {ch!r}", line, start_col)
    tokens.append(Token("eof", "", None, line, col))
    return tokens


@dataclass(frozen=True)
class FieldDecl:
    name: str
    type_name: str


@dataclass(frozen=True)
class EntityDecl:
    name: str
    fields: tuple[FieldDecl, ...]


@dataclass(frozen=True)
class Call:
    """A distribution call on the right side of an assignment."""

    name: str
    args: tuple[tuple[str, object], ...]


@dataclass(frozen=True)
class Assignment:
    entity: str
    fieldname: str
    value: object  # int | float | str | Call


@dataclass(frozen=True)
class SceneModel:
    name: str
    types: tuple[str, ...]
    entities: tuple[EntityDecl, ...]
    assignments: tuple[Assignment, ...]
    has_instance_block: bool

    def entity(self, name: str) -> EntityDecl:
        for e in self.entities:
            if e.name == name:
                return e
        raise KeyError(name)

    def declared_fields(self) -> list[tuple[str, str]]:
        return [(e.name, f.name) for e in self.entities for f in e.fields]

    @property
    def template_entities(self) -> frozenset[str]:
        """Entities referenced as a field type; they describe value shapes
        and take no instance assignments themselves."""
        names = {e.name for e in self.entities}
        return frozenset(
            f.type_name for e in self.entities for f in e.fields if f.type_name in names
        )

    def required_fields(self) -> list[tuple[str, str]]:
        """Fields that must be assigned before sampling: the
        distribution-valued ones of non-template entities."""
        names = {e.name for e in self.entities}
        templates = self.template_entities
        return [
            (e.name, f.name)
            for e in self.entities
            if e.name not in templates
            for f in e.fields
            if f.type_name in names
        ]


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def _fail(self, message: str) -> SdlParseError:
        t = self.current
        where = f"{t.kind} {t.text!r}" if t.kind != "eof" else "end of input"
        return SdlParseError(f"{message}, found {where}", t.line, t.column)

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.current
        if t.kind != kind or (text is not None and t.text != text):
            raise self._fail(f"expected {text or kind}")
        self.pos += 1
        return t

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        t = self.current
        if t.kind == kind and (text is None or t.text == text):
            self.pos += 1
            return t
        return None

    def parse_scene(self) -> SceneModel:
        self.expect("ident", "scene")
        name = self.ident("scene name")
        self.expect("{")
        types: list[str] = []
        entities: list[EntityDecl] = []
        field_sites: list[tuple[str, FieldDecl, Token]] = []
        while True:
            if self.accept("ident", "type"):
                t = self.ident("type name")
                if t in types:
                    raise self._fail_at(f"type {t!r} declared twice")
                types.append(t)
            elif self.current.kind == "ident" and self.current.text == "entity":
                decl = self.parse_entity(field_sites)
                if any(e.name == decl.name for e in entities):
                    raise self._fail_at(f"entity {decl.name!r} declared twice")
                entities.append(decl)
            else:
                break
        # Field types resolve against every declaration in the scene, so an
        # entity may be referenced as a type before it is declared.
        known = set(types) | {e.name for e in entities}
        for owner, fdecl, token in field_sites:
            if fdecl.type_name not in known:
                raise SdlParseError(
                    f"field {owner}.{fdecl.name} uses undeclared type {fdecl.type_name!r}",
                    token.line,
                    token.column,
                )
        assignments: list[Assignment] = []
        has_instance = False
        instance_token: Token | None = None
        if self.current.kind == "ident" and self.current.text == "instance":
            instance_token = self.current
            self.pos += 1
            has_instance = True
            self.expect("{")
            while self.current.kind == "ident":
                assignments.append(self.parse_assignment(entities))
            self.expect("}")
        self.expect("}")
        self.expect("eof")
        scene = SceneModel(
            name=name,
            types=tuple(types),
            entities=tuple(entities),
            assignments=tuple(assignments),
            has_instance_block=has_instance,
        )
        if has_instance:
            missing = _missing_assignments(scene)
            if missing:
                assert instance_token is not None
                raise SdlParseError(
                    "instance block leaves distribution fields unassigned: "
                    + ", ".join(missing),
                    instance_token.line,
                    instance_token.column,
                )
        return scene

    def parse_entity(
        self, field_sites: list[tuple[str, FieldDecl, Token]]
    ) -> EntityDecl:
        self.expect("ident", "entity")
        name = self.ident("entity name")
        self.expect("{")
        fields: list[FieldDecl] = []
        while self.current.kind == "ident":
            fname = self.ident("field name")
            self.expect(":")
            type_token = self.current
            tname = self.ident("type name")
            if any(f.name == fname for f in fields):
                raise self._fail_at(f"field {fname!r} declared twice in entity {name!r}")
            decl = FieldDecl(fname, tname)
            fields.append(decl)
            field_sites.append((name, decl, type_token))
        self.expect("}")
        return EntityDecl(name, tuple(fields))

    def parse_assignment(self, entities: Sequence[EntityDecl]) -> Assignment:
        entity = self.ident("entity name")
        self.expect(".")
        fieldname = self.ident("field name")
        decl = next((e for e in entities if e.name == entity), None)
        if decl is None:
            raise self._fail_at(f"assignment targets undeclared entity {entity!r}")
        if not any(f.name == fieldname for f in decl.fields):
            raise self._fail_at(f"entity {entity!r} has no field {fieldname!r}")
        self.expect("=")
        return Assignment(entity, fieldname, self.parse_value())

    def parse_value(self) -> object:
        t = self.current
        if t.kind == "number" or t.kind == "string":
            self.pos += 1
            return t.value
        if t.kind == "ident":
            name = self.ident("value")
            self.expect("(")
            args: list[tuple[str, object]] = []
            if self.current.kind != ")":
                while True:
                    key = self.ident("argument name")
                    self.expect("=")
                    args.append((key, self.parse_value()))
                    if not self.accept(","):
                        break
            self.expect(")")
            return Call(name, tuple(args))
        raise self._fail("expected a number, string, or distribution call")

    def ident(self, what: str) -> str:
        t = self.current
        if t.kind != "ident":
            raise self._fail(f"expected {what}")
        if t.text in _KEYWORDS:
            raise self._fail(f"expected {what}, not keyword {t.text!r}")
        self.pos += 1
        return t.text

    def _fail_at(self, message: str) -> SdlParseError:
        # Report at the token just consumed, not the lookahead.
        t = self.tokens[max(self.pos - 1, 0)]
        return SdlParseError(message, t.line, t.column)


def parse_scene(text: str) -> SceneModel:
    """Parse one scene from source text."""
    return _Parser(_tokenize(text)).parse_scene()


def format_scene(scene: SceneModel) -> str:
    """Canonical text for a scene; parsing it back gives an equal model."""
    lines = [f"scene {scene.name} {{"]
    for t in scene.types:
        lines.append(f"  type {t}")
    for e in scene.entities:
        lines.append(f"  entity {e.name} {{")
        for f in e.fields:
            lines.append(f"    {f.name} : {f.type_name}")
        lines.append("  }")
    if scene.has_instance_block:
        lines.append("  instance {")
        for a in scene.assignments:
            lines.append(f"    {a.entity}.{a.fieldname} = {_format_value(a.value)}")
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _format_value(value: object) -> str:
    if isinstance(value, Call):
        args = ", ".join(f"{k} = {_format_value(v)}" for k, v in value.args)
        return f"{value.name}({args})"
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, float):
        return repr(value)
    return str(value)


# -- sampling -------------------------------------------------------------

_DISTRIBUTIONS = ("uniform", "choice", "fixed")


@dataclass(frozen=True)
class SceneConfig:
    """One sampled configuration: flat ``entity.field`` values plus the
    provenance needed to regenerate it."""

    scene: str
    seed: int
    index: int
    values: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))


def _missing_assignments(scene: SceneModel) -> list[str]:
    assigned = {(a.entity, a.fieldname) for a in scene.assignments}
    return [f"{e}.{f}" for e, f in scene.required_fields() if (e, f) not in assigned]


def _check_samplable(scene: SceneModel) -> None:
    missing = _missing_assignments(scene)
    if missing:
        raise ModelFormatError(
            f"scene {scene.name!r} cannot be sampled; unassigned distribution "
            "fields: " + ", ".join(missing)
        )
    for a in scene.assignments:
        _check_value(scene, a, a.value)


def _check_value(scene: SceneModel, a: Assignment, value: object) -> None:
    if not isinstance(value, Call):
        return
    if value.name not in _DISTRIBUTIONS:
        raise ModelFormatError(
            f"{a.entity}.{a.fieldname}: unknown distribution {value.name!r} "
            f"(known: {', '.join(_DISTRIBUTIONS)})"
        )
    if value.name == "uniform":
        keys = [k for k, _ in value.args]
        if sorted(keys) != ["high", "low"]:
            raise ModelFormatError(
                f"{a.entity}.{a.fieldname}: uniform needs exactly low= and high="
            )
        bounds = dict(value.args)
        for k in ("low", "high"):
            if isinstance(bounds[k], Call):
                raise ModelFormatError(
                    f"{a.entity}.{a.fieldname}: uniform bounds must be literals"
                )
        # Equal bounds give a constant draw; only an inverted range is wrong.
        if float(bounds["low"]) > float(bounds["high"]):  # type: ignore[arg-type]
            raise ModelFormatError(f"{a.entity}.{a.fieldname}: uniform needs low <= high")
    elif value.name == "choice":
        if not value.args:
            raise ModelFormatError(f"{a.entity}.{a.fieldname}: choice needs options")
        for _, option in value.args:
            if isinstance(option, Call):
                raise ModelFormatError(
                    f"{a.entity}.{a.fieldname}: choice options must be literals"
                )
    else:  # fixed
        if [k for k, _ in value.args] != ["value"]:
            raise ModelFormatError(f"{a.entity}.{a.fieldname}: fixed takes exactly value=")
        if isinstance(value.args[0][1], Call):
            raise ModelFormatError(f"{a.entity}.{a.fieldname}: fixed value must be a literal")


def _draw_value(value: object, rng) -> object:
    if not isinstance(value, Call):
        return value
    if value.name == "fixed":
        return value.args[0][1]
    if value.name == "choice":
        options = [v for _, v in value.args]
        return options[int(rng.integers(len(options)))]
    bounds = dict(value.args)
    low, high = bounds["low"], bounds["high"]
    if isinstance(low, int) and isinstance(high, int):
        return int(rng.integers(low, high + 1))  # integer bounds: inclusive
    return float(rng.uniform(float(low), float(high)))  # type: ignore[arg-type]


def sample_scene(
    scene: SceneModel, seed: int, count: int = 1, start_index: int = 0
) -> list[SceneConfig]:
    """Draw ``count`` configurations, one independent stream per index.

    Fields are drawn in assignment order inside each configuration;
    configuration ``start_index + i`` depends only on the seed and its own
    index, never on ``count``.
    """
    if count < 0 or start_index < 0:
        raise ValueError("count and start_index must be >= 0")
    _check_samplable(scene)
    configs = []
    for i in range(start_index, start_index + count):
        rng = substream(seed, SCENE_STREAM, i)
        values = {
            f"{a.entity}.{a.fieldname}": _draw_value(a.value, rng)
            for a in scene.assignments
        }
        configs.append(SceneConfig(scene=scene.name, seed=seed, index=i, values=values))
    return configs


def iter_scene_configs(
    scene: SceneModel, seed: int, count: int, start_index: int = 0
) -> Iterator[SceneConfig]:
    """Streaming variant of :func:`sample_scene`."""
    _check_samplable(scene)
    for i in range(start_index, start_index + count):
        rng = substream(seed, SCENE_STREAM, i)
        values = {
            f"{a.entity}.{a.fieldname}": _draw_value(a.value, rng)
            for a in scene.assignments
        }
        yield SceneConfig(scene=scene.name, seed=seed, index=i, values=values)
