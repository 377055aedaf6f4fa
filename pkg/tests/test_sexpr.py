import pytest

from weirdc.sexpr import Atom, ParseError, SList, read_all, read_one


def test_nested_lists_and_positions():
    node = read_one("(a (b c)\n  d)")
    assert isinstance(node, SList)
    assert [str(x) for x in node if isinstance(x, Atom)] == ["a", "d"]
    assert node[2].line == 2 and node[2].col == 3
    assert (node.line, node.col) == (1, 1)


def test_comments_are_skipped():
    assert len(read_all("; nothing here\n(x) ; trailing\n(y)")) == 2


def test_brackets_read_as_lists():
    node = read_one("[a b]")
    assert isinstance(node, SList) and len(node) == 2


@pytest.mark.parametrize("text,where", [("(a b", (1, 1)), ("a)", (1, 2)), ("\n  (x (y)", (2, 3))])
def test_unbalanced_input_reports_position(text, where):
    with pytest.raises(ParseError) as exc:
        read_all(text)
    assert (exc.value.line, exc.value.col) == where


def test_read_one_rejects_two_forms():
    with pytest.raises(ParseError):
        read_one("(a) (b)")
