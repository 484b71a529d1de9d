from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from wfmigrate.templates import RenderError, Template, TemplateSyntaxError, lookup, render_template, sanitize_ident


def render(text: str, ctx: dict) -> str:
    return render_template(Template.parse(text), ctx)


def test_substitution_and_braced_var():
    assert render("a {{x}} b", {"x": "1"}) == "a 1 b"
    assert render("n={{{x}}}", {"x": 5}) == "n={5}"
    assert render("{{flag}}", {"flag": True}) == "true"


def test_each_standalone_lines_removed():
    text = "<ul>\n  {{#each items}}\n  <li>{{name}}</li>\n  {{/each}}\n</ul>\n"
    out = render(text, {"items": [{"name": "a"}, {"name": "b"}]})
    assert out == "<ul>\n  <li>a</li>\n  <li>b</li>\n</ul>\n"


def test_each_over_empty_list_leaves_nothing():
    assert render("[\n{{#each xs}}\n{{v}}\n{{/each}}\n]", {"xs": []}) == "[\n]"


def test_standalone_var_reindents_multiline_value():
    assert render("x\n    {{body}}\ny", {"body": "l1\nl2"}) == "x\n    l1\n    l2\ny"


def test_standalone_var_after_section_keeps_indent():
    text = "{{#each xs}}\n  {{body}}\n{{/each}}\n"
    assert render(text, {"xs": [{"body": "a\nb"}]}) == "  a\n  b\n"


def test_if_guards_use_nearest_props():
    text = "{{#if has_prop(MaxLength)}}m={{props.MaxLength}}{{/if}}!"
    assert render(text, {"props": {"MaxLength": "3"}}) == "m=3!"
    assert render(text, {"props": {}}) == "!"
    nested = "{{#each kids}}{{#if prop_eq(k, v)}}y{{/if}}{{/each}}"
    assert render(nested, {"props": {"k": "v"}, "kids": [{"props": {"k": "v"}}, {"props": {}}]}) == "y"


def test_ident_helper_uses_style():
    assert render("{{ident name}}", {"name": "9 foo-bar", "identStyle": "pascal"}) == "_9FooBar"


def test_lookup_is_dotted_and_scoped():
    assert lookup([{"a": {"b": 1}}, {"a": {"c": 2}}], "a.b") == 1
    assert lookup([{"a": {"b": 1}}, {"a": {"b": 2}}], "a.b") == 2
    assert render("{{a.b.c}}", {"a": {"b.c": "dot"}}) == "dot"


@pytest.mark.parametrize("text", [
    "{{#each x}}", "{{/if}}", "{{#if bogus(x)}}{{/if}}", "{{a b c}}", "{{#each a}}{{/if}}",
])
def test_syntax_errors(text):
    with pytest.raises(TemplateSyntaxError):
        Template.parse(text)


def test_render_errors():
    with pytest.raises(RenderError):
        render("{{nope}}", {})
    with pytest.raises(RenderError):
        render("{{x}}", {"x": [1]})


def test_referenced_props():
    t = Template.parse("{{props.a.b}} {{#if prop_eq(c, d)}}{{attr.e}}{{/if}} {{name}}")
    assert t.referenced_props() == {"a", "a.b", "c", "e"}


@pytest.mark.parametrize("name,style,expected", [
    ("lbl-Name", "preserve", "lblName"),
    ("my_field", "preserve", "my_field"),
    ("short description", "pascal", "ShortDescription"),
    ("Short description", "camel", "shortDescription"),
    ("---", "pascal", "_"),
    ("1abc", "preserve", "_1abc"),
])
def test_sanitize_ident(name, style, expected):
    assert sanitize_ident(name, style) == expected


@given(st.text(max_size=30), st.sampled_from(["preserve", "pascal", "camel"]))
def test_sanitize_ident_is_identifier(name, style):
    out = sanitize_ident(name, style)
    assert out.isidentifier() and out.isascii()


_plain = st.text(alphabet=st.characters(blacklist_characters="{}", blacklist_categories=("Cs",)), max_size=40)


@given(_plain)
def test_text_without_tags_renders_verbatim(text):
    assert render(text, {}) == text


@given(_plain, st.text(alphabet="abcxyz \n", max_size=20))
def test_rendering_is_deterministic(prefix, value):
    t = Template.parse(prefix + "{{v}}")
    assert render_template(t, {"v": value}) == render_template(t, {"v": value})
