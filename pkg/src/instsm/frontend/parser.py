"""Recursive-descent parser for ``.sm`` and ``.map`` files (grammar in docs/dsl.md)."""
from __future__ import annotations

from .._syntax import (
    Span,
    SyntaxErr,
    Token,
    TokenStream,
    parse_guard_expr,
    parse_int_expr,
    tokenize,
)
from ..actions import Assign, Send
from ..errors import DSLError
from .ast import (
    ActionDecl,
    ActionsBlock,
    Arity,
    Diagnostic,
    DomainDecl,
    ImportDecl,
    InitDecl,
    MachineBlock,
    MapEntry,
    MorphismBlock,
    MsgPattern,
    Name,
    ProductDecl,
    ProtocolTransitionDecl,
    RefineDecl,
    SentenceDecl,
    SourceModel,
    TransitionDecl,
)

MAP_SECTIONS = ("states", "events", "completions", "actions", "messages", "vars")


def parse(text: str, file: str = "<input>") -> SourceModel:
    """Parse DSL text.  Raises DSLError carrying diagnostics on failure."""
    try:
        parser = _Parser(TokenStream(tokenize(text)), file)
        model = parser.source()
    except SyntaxErr as exc:
        raise DSLError([Diagnostic("error", "E001", exc.message, exc.span, file)]) from None
    if parser.diagnostics:
        raise DSLError(parser.diagnostics)
    return model


def parse_file(path) -> SourceModel:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), str(path))


class _Parser:
    def __init__(self, ts: TokenStream, file: str):
        self.ts = ts
        self.file = file
        self.diagnostics: list[Diagnostic] = []

    # helpers -------------------------------------------------------------

    def dup(self, what: str, name, span: Span):
        self.diagnostics.append(Diagnostic("error", "E002", f"duplicate {what} {name}", span, self.file))

    def ident(self, what="identifier") -> Token:
        return self.ts.expect_ident(what)

    def keyword(self, word: str) -> Token:
        tok = self.ts.peek
        if not self.ts.at(word, "ident"):
            raise SyntaxErr(f"expected {word!r}, found {tok.value or 'end of input'!r}", tok.span)
        return self.ts.next()

    def comma_list(self, item, close: str | None = None):
        """``item {"," item}``; empty if the next token is ``close``."""
        if close is not None and self.ts.at(close):
            return []
        out = [item()]
        while self.ts.accept(","):
            out.append(item())
        return out

    def state(self) -> Name:
        tok = self.ts.peek
        if self.ts.accept("("):
            first = self.state()
            self.ts.expect(",")
            second = self.state()
            self.ts.expect(")")
            return Name((first, second), tok.span)
        return Name(self.ident("state name").value, tok.span)

    def arity(self) -> Arity:
        tok = self.ident()
        n = 0
        if self.ts.accept("/"):
            n = self.ts.expect_int()
            if n < 0:
                raise SyntaxErr("arity must be non-negative", tok.span)
        return Arity(tok.value, n, tok.span)

    def guard_in_brackets(self):
        self.ts.expect("[")
        g = parse_guard_expr(self.ts)
        self.ts.expect("]")
        return g

    def int_args(self):
        self.ts.expect("(")
        args = self.comma_list(lambda: parse_int_expr(self.ts), ")")
        self.ts.expect(")")
        return tuple(args)

    def param_list(self) -> tuple[str, ...]:
        if not self.ts.accept("("):
            return ()
        params = self.comma_list(lambda: self.ident("parameter").value, ")")
        self.ts.expect(")")
        if len(set(params)) != len(params):
            self.dup("parameter in", ", ".join(params), self.ts.peek.span)
        return tuple(params)

    def msg_pattern(self) -> MsgPattern:
        tok = self.ident("message")
        args = self.int_args() if self.ts.at("(") else ()
        return MsgPattern(tok.value, args, tok.span)

    def braced_names(self) -> tuple[str, ...]:
        self.ts.expect("{")
        names = self.comma_list(lambda: self.ident().value, "}")
        self.ts.expect("}")
        return tuple(names)

    # top level -----------------------------------------------------------

    def source(self) -> SourceModel:
        decls = []
        seen: dict[str, Span] = {}
        while self.ts.peek.kind != "eof":
            tok = self.ts.peek
            if self.ts.at("import", "ident"):
                d = self.import_decl()
            elif self.ts.at("actions", "ident"):
                d = self.actions_block()
            elif self.ts.at("machine", "ident") or self.ts.at("protocol", "ident"):
                d = self.machine_block()
            elif self.ts.at("morphism", "ident"):
                d = self.morphism_block()
            elif self.ts.at("product", "ident"):
                d = self.product_decl()
            elif self.ts.at("refine", "ident"):
                d = self.refine_decl()
            else:
                raise SyntaxErr(f"expected a declaration, found {tok.value!r}", tok.span)
            name = getattr(d, "name", None)
            if name is not None:
                if name in seen:
                    self.dup("declaration", name, tok.span)
                seen[name] = tok.span
            decls.append(d)
        return SourceModel(tuple(decls), self.file)

    def import_decl(self) -> ImportDecl:
        start = self.keyword("import")
        tok = self.ts.peek
        if tok.kind != "str":
            raise SyntaxErr("expected a quoted path", tok.span)
        self.ts.next()
        self.ts.expect(";")
        return ImportDecl(tok.value, start.span)

    def actions_block(self) -> ActionsBlock:
        start = self.keyword("actions")
        name = self.ident("actions name").value
        self.ts.expect("{")
        domains, messages, actions, sentences = [], [], [], []
        arg_range = None
        seen_vars, seen_msgs, seen_actions = set(), set(), set()
        while not self.ts.accept("}"):
            tok = self.ts.peek
            if self.ts.at("domain", "ident"):
                self.ts.next()
                var = self.ident("variable")
                self.keyword("in")
                lo = self.ts.expect_int()
                self.ts.expect("..")
                hi = self.ts.expect_int()
                self.ts.expect(";")
                if lo > hi:
                    raise SyntaxErr(f"empty range {lo}..{hi}", var.span)
                if var.value in seen_vars:
                    self.dup("variable", var.value, var.span)
                seen_vars.add(var.value)
                domains.append(DomainDecl(var.value, lo, hi, var.span))
            elif self.ts.at("args", "ident"):
                self.ts.next()
                lo = self.ts.expect_int()
                self.ts.expect("..")
                hi = self.ts.expect_int()
                self.ts.expect(";")
                if lo > hi:
                    raise SyntaxErr(f"empty range {lo}..{hi}", tok.span)
                if arg_range is not None:
                    self.dup("argument range in", name, tok.span)
                arg_range = (lo, hi)
            elif self.ts.at("messages", "ident"):
                self.ts.next()
                for a in self.comma_list(self.arity):
                    if a.name in seen_msgs:
                        self.dup("message", a.name, a.span)
                    seen_msgs.add(a.name)
                    messages.append(a)
                self.ts.expect(";")
            elif self.ts.at("action", "ident"):
                self.ts.next()
                a = self.ident("action name")
                params = self.param_list()
                body = self.program()
                if a.value in seen_actions:
                    self.dup("action", a.value, a.span)
                seen_actions.add(a.value)
                actions.append(ActionDecl(a.value, params, body, a.span))
            elif self.ts.at("sentence", "ident"):
                sentences.append(self.sentence())
            else:
                raise SyntaxErr(f"unexpected {tok.value or 'end of input'!r} in actions block", tok.span)
        return ActionsBlock(name, tuple(domains), arg_range, tuple(messages), tuple(actions),
                            tuple(sentences), start.span)

    def program(self) -> tuple:
        self.ts.expect("{")
        body = []
        while not self.ts.accept("}"):
            body.append(self.statement())
            if not self.ts.accept(";"):
                self.ts.expect("}")
                break
        return tuple(body)

    def statement(self):
        if self.ts.at("send", "ident") and self.ts.lookahead().kind == "ident":
            self.ts.next()
            m = self.ident("message")
            return Send(m.value, self.int_args())
        var = self.ident("variable")
        self.ts.expect(":=")
        return Assign(var.value, parse_int_expr(self.ts))

    def sentence(self) -> SentenceDecl:
        start = self.keyword("sentence")
        pre = self.guard_in_brackets()
        a = self.ident("action")
        args = ()
        if self.ts.accept("("):
            args = tuple(self.comma_list(self.ts.expect_int, ")"))
            self.ts.expect(")")
        post = self.guard_in_brackets()
        msgs = ()
        if self.ts.accept("/"):
            self.ts.expect("{")
            msgs = tuple(self.comma_list(self.msg_pattern, "}"))
            self.ts.expect("}")
        self.ts.expect(";")
        return SentenceDecl(pre, a.value, args, post, msgs, start.span)

    def machine_block(self) -> MachineBlock:
        start = self.ts.next()
        kind = start.value
        name = self.ident("machine name").value
        over = None
        if self.ts.at("over", "ident"):
            self.ts.next()
            over = self.ident("actions name").value
        elif kind == "machine":
            raise SyntaxErr("expected 'over'", self.ts.peek.span)
        self.ts.expect("{")
        events, comps, states, transitions = [], [], [], []
        init = error = None
        seen_events, seen_comps, seen_states = set(), set(), set()
        while not self.ts.accept("}"):
            tok = self.ts.peek
            if self.ts.at("events", "ident"):
                self.ts.next()
                for a in self.comma_list(self.arity):
                    if a.name in seen_events:
                        self.dup("event", a.name, a.span)
                    seen_events.add(a.name)
                    events.append(a)
                self.ts.expect(";")
            elif self.ts.at("completions", "ident"):
                self.ts.next()
                for a in self.comma_list(lambda: self.ident("completion event")):
                    if a.value in seen_comps:
                        self.dup("completion event", a.value, a.span)
                    seen_comps.add(a.value)
                    comps.append(Arity(a.value, 0, a.span))
                self.ts.expect(";")
            elif self.ts.at("states", "ident") or self.ts.at("state", "ident"):
                self.ts.next()
                while True:
                    s = self.state()
                    if s.plain() in seen_states:
                        self.dup("state", s.plain(), s.span)
                    seen_states.add(s.plain())
                    states.append(s)
                    self.ts.accept(",")
                    if self.ts.accept(";"):
                        break
            elif self.ts.at("init", "ident"):
                self.ts.next()
                s = self.state()
                g = self.guard_in_brackets() if self.ts.at("[") else None
                self.ts.expect(";")
                if init is not None:
                    self.dup("init declaration in", name, tok.span)
                init = InitDecl(s, g, tok.span)
            elif self.ts.at("error", "ident"):
                self.ts.next()
                if kind != "protocol":
                    raise SyntaxErr("only protocols declare an error state", tok.span)
                if error is not None:
                    self.dup("error declaration in", name, tok.span)
                error = self.state()
                self.ts.expect(";")
            elif self.ts.at("transition", "ident"):
                self.ts.next()
                transitions.append(self.transition(kind == "protocol", tok.span))
            else:
                raise SyntaxErr(f"unexpected {tok.value or 'end of input'!r} in {kind} block", tok.span)
        return MachineBlock(kind, name, over, tuple(events), tuple(comps), tuple(states), init,
                            error, tuple(transitions), start.span)

    def transition(self, protocol: bool, span: Span):
        source = self.state()
        self.ts.expect("-")
        if protocol:
            pre = self.guard_in_brackets() if self.ts.at("[") else None
            trig = self.ident("trigger").value
            params = self.param_list()
            post = self.guard_in_brackets() if self.ts.at("[") else None
            msgs = ()
            if self.ts.accept("/"):
                self.ts.expect("{")
                msgs = tuple(self.comma_list(self.msg_pattern, "}"))
                self.ts.expect("}")
            comps = self.braced_names() if self.ts.accept(",") else ()
            self.ts.expect("->")
            target = self.state()
            self.ts.expect(";")
            return ProtocolTransitionDecl(source, pre, trig, params, post, msgs, comps, target, span)
        trig = self.ident("trigger").value
        params = self.param_list()
        guard = self.guard_in_brackets() if self.ts.at("[") else None
        action, args = None, ()
        if self.ts.accept("/"):
            action = self.ident("action").value
            if self.ts.at("("):
                args = self.int_args()
        comps = self.braced_names() if self.ts.accept(",") else ()
        self.ts.expect("->")
        target = self.state()
        self.ts.expect(";")
        return TransitionDecl(source, trig, params, guard, action, args, comps, target, span)

    def morphism_block(self) -> MorphismBlock:
        start = self.keyword("morphism")
        name = self.ident("morphism name").value
        self.ts.expect(":")
        src = self.ident("source").value
        self.ts.expect("->")
        tgt = self.ident("target").value
        self.ts.expect("{")
        sections: dict[str, list[MapEntry]] = {}
        while not self.ts.accept("}"):
            tok = self.ts.peek
            if tok.kind != "ident" or tok.value not in MAP_SECTIONS:
                raise SyntaxErr(f"expected one of {', '.join(MAP_SECTIONS)}, found {tok.value!r}", tok.span)
            self.ts.next()
            entries = sections.setdefault(tok.value, [])
            seen = {e.source.plain() for e in entries}

            def entry():
                a = self.state()
                self.ts.expect("->")
                b = self.state()
                return MapEntry(a, b, a.span)

            for e in self.comma_list(entry):
                if e.source.plain() in seen:
                    self.dup(f"{tok.value} mapping for", e.source.plain(), e.span)
                seen.add(e.source.plain())
                entries.append(e)
            self.ts.expect(";")
        ordered = tuple((k, tuple(sections[k])) for k in MAP_SECTIONS if k in sections)
        return MorphismBlock(name, src, tgt, ordered, start.span)

    def product_decl(self) -> ProductDecl:
        start = self.keyword("product")
        name = self.ident().value
        self.ts.expect("=")
        left = self.ident().value
        self.ts.expect("||")
        right = self.ident().value
        self.ts.expect(";")
        return ProductDecl(name, left, right, start.span)

    def refine_decl(self) -> RefineDecl:
        start = self.keyword("refine")
        abstract = self.ident().value
        self.keyword("by")
        concrete = self.ident().value
        self.keyword("via")
        theta = self.ident().value
        self.ts.expect(",")
        sigma = self.ident().value
        self.ts.expect(";")
        return RefineDecl(abstract, concrete, theta, sigma, start.span)
