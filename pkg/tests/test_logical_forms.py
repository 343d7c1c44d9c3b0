import pytest

from locco.logical_forms import (
    EmptyExpression, EmptySlot, MalformedForm, MissingTag, SExpr, Triple, TripleSet, UnbalancedDelimiters,
    apply_prompt, linearize, parse_form, parse_paren_sexpr, parse_paren_triples, parse_part, parse_sexpr,
    parse_triples, part_counts, parts, split_camel_case,
)


class TestParseSexpr:
    def test_nested_lambda(self):
        form = parse_sexpr("<SE> lambda $0 e <SE> loc:t ap0 $0 </SE> </SE>")
        assert form.children[:3] == ("lambda", "$0", "e")
        assert form.children[3] == SExpr(("loc:t", "ap0", "$0"))

    def test_single_atom(self):
        assert parse_sexpr("<SE> a </SE>") == SExpr(("a",))

    def test_unbalanced(self):
        with pytest.raises(UnbalancedDelimiters):
            parse_sexpr("<SE> a <SE> b")

    def test_empty_expression(self):
        with pytest.raises(EmptyExpression):
            parse_sexpr("<SE> </SE>")

    def test_two_roots_rejected(self):
        with pytest.raises(MalformedForm):
            parse_sexpr("<SE> a </SE> <SE> b </SE>")

    def test_triple_tag_inside(self):
        with pytest.raises(MalformedForm):
            parse_sexpr("<SE> a <S> b </SE>")

    def test_tags_without_spaces(self):
        assert parse_sexpr("<SE>a<SE>b</SE></SE>") == parse_paren_sexpr("(a (b))")


class TestParseTriples:
    def test_aarhus(self):
        form = parse_triples('<S> Aarhus Airport <R> city served <O> "Aarhus, Denmark"')
        assert form == TripleSet([Triple("Aarhus Airport", "city served", '"Aarhus, Denmark"')])

    def test_duplicates_collapse(self):
        seg = "<S> a <R> b <O> c"
        assert len(parse_triples(f"{seg} {seg}")) == 1

    def test_missing_relation(self):
        with pytest.raises(MissingTag):
            parse_triples("<S> x <O> y")

    def test_empty_slot(self):
        with pytest.raises(EmptySlot):
            parse_triples("<S> x <R> <O> y")

    def test_empty_text_is_empty_set(self):
        assert parse_triples("") == TripleSet()

    def test_parenthesized_display_form(self):
        form = parse_paren_triples("(<S> a <R> b <O> c) (<S> d <R> e <O> f)")
        assert form == parse_triples("<S> a <R> b <O> c <S> d <R> e <O> f")

    def test_parenthesized_rejects_stray_text(self):
        with pytest.raises(MalformedForm):
            parse_paren_triples("junk (<S> a <R> b <O> c)")


class TestLinearize:
    def test_sexpr(self):
        form = SExpr(("lambda", "$0", "e", SExpr(("loc:t", "ap0", "$0"))))
        assert linearize(form) == "<SE> lambda $0 e <SE> loc:t ap0 $0 </SE> </SE>"

    def test_empty_set(self):
        assert linearize(TripleSet()) == ""

    def test_order_independent(self):
        a, b = Triple("b", "r", "o"), Triple("a", "r", "o")
        assert linearize(TripleSet([a, b])) == linearize(TripleSet([b, a]))
        assert linearize(TripleSet([a, b])).startswith("<S> a ")

    def test_parse_form_dispatch(self):
        assert parse_form("<SE> a </SE>", "sexpr") == SExpr(("a",))
        with pytest.raises(ValueError):
            parse_form("x", "amr")


class TestParts:
    def test_lambda(self):
        assert parts(parse_paren_sexpr("(lambda $0 e (loc:t ap0 $0))")) == {
            "(loc:t ap0 $0)", "(lambda $0 e (loc:t ap0 $0))"}

    def test_single_triple(self):
        form = parse_triples("<S> a <R> b <O> c")
        assert parts(form) == {"(<S> a <R> b <O> c)"}

    def test_and_parts(self):
        got = parts(parse_paren_sexpr("(and (flight $0) (from $0 ci1))"))
        assert {"(flight $0)", "(from $0 ci1)", "(and (flight $0) (from $0 ci1))"} == got

    def test_repeated_subtree_counts_twice(self):
        counts = part_counts(parse_paren_sexpr("(and (f $0) (f $0))"))
        assert counts["(f $0)"] == 2

    def test_parse_part_round_trip(self):
        for p in ("(f $0)", "(<S> a <R> b <O> c)"):
            assert parts(parse_part(p)) == {p}
        with pytest.raises(MalformedForm):
            parse_part("f")


class TestCamelCase:
    @pytest.mark.parametrize("token,words", [
        ("AarhusAirport", ["Aarhus", "Airport"]),
        ("isPartOf", ["is", "Part", "Of"]),
        ("NASA", ["NASA"]),
        ("XMLFile", ["XML", "File"]),
    ])
    def test_examples(self, token, words):
        assert split_camel_case(token) == words


class TestPrompt:
    def test_prompts(self):
        assert apply_prompt("text_to_structure", "x") == "Text to Graph: x"
        assert apply_prompt("structure_to_text", "z") == "Graph to Text: z"
        assert apply_prompt("text_to_structure", "") == "Text to Graph: "

    def test_unknown(self):
        with pytest.raises(ValueError):
            apply_prompt("sideways", "x")
