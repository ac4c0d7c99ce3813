from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from modix.errors import (
    DuplicateModule,
    EmptyModule,
    HeaderClaimedTwice,
    ModuleNotFound,
    ParseError,
)
from modix.modulemap import (
    ModuleDef,
    Origin,
    Overlay,
    SearchPaths,
    apply_overlay,
    concat_modulemaps,
    parse_modulemap,
    parse_overlay,
    resolve_module_path,
)


class TestParseModulemap:
    def test_single_module(self):
        defs = parse_modulemap('module Gpad { header "Gpad.dh" }')
        assert defs == [ModuleDef("Gpad", ("Gpad.dh",), "<text>")]

    def test_empty_text(self):
        assert parse_modulemap("") == []

    def test_empty_module_rejected(self):
        with pytest.raises(EmptyModule):
            parse_modulemap("module M { }")

    def test_comments_and_multiple_headers(self):
        defs = parse_modulemap(
            "// per-library map\nmodule M {\n  header \"a.dh\"\n  header \"b.dh\" // two\n}"
        )
        assert defs[0].headers == ("a.dh", "b.dh")

    def test_duplicate_header_in_one_module_rejected(self):
        with pytest.raises(ParseError):
            parse_modulemap('module M { header "a.dh" header "a.dh" }')

    def test_garbage_rejected(self):
        with pytest.raises(ParseError):
            parse_modulemap("module M ( )")
        with pytest.raises(ParseError):
            parse_modulemap('header "a.dh"')


class TestConcat:
    def _defs(self, name, *headers):
        return [ModuleDef(name, headers, f"{name}.modulemap")]

    def test_positional_ids(self):
        m = concat_modulemaps(
            [("A.modulemap", self._defs("A", "a.dh")), ("B.modulemap", self._defs("B", "b.dh"))]
        )
        assert m.module_id("A") == 0
        assert m.module_id("B") == 1
        assert m.names == ("A", "B")

    def test_duplicate_module_rejected(self):
        with pytest.raises(DuplicateModule) as excinfo:
            concat_modulemaps(
                [("f1", self._defs("X", "a.dh")), ("f2", self._defs("X", "b.dh"))]
            )
        assert (excinfo.value.file_a, excinfo.value.file_b) == ("f1", "f2")

    def test_header_claimed_twice_rejected(self):
        with pytest.raises(HeaderClaimedTwice) as excinfo:
            concat_modulemaps(
                [("f1", self._defs("A", "h.dh")), ("f2", self._defs("B", "h.dh"))]
            )
        assert (excinfo.value.module_a, excinfo.value.module_b) == ("A", "B")

    def test_concat_is_associative(self):
        parts = [
            ("f1", self._defs("A", "a.dh")),
            ("f2", self._defs("B", "b.dh")),
            ("f3", self._defs("C", "c.dh")),
        ]
        flat = concat_modulemaps(parts)
        nested_defs = concat_modulemaps(parts[:2]).defs + concat_modulemaps(parts[2:]).defs
        assert tuple(d.name for d in flat.defs) == tuple(d.name for d in nested_defs)
        assert flat.module_id("C") == 2

    def test_stable_under_identical_input(self):
        parts = [("f1", self._defs("A", "a.dh")), ("f2", self._defs("B", "b.dh"))]
        assert concat_modulemaps(parts) == concat_modulemaps(parts)


class TestOverlay:
    def test_basic_remap(self):
        overlay = Overlay((("/virt/x", "/real/x"),))
        assert apply_overlay(overlay, "/virt/x/a.dh") == "/real/x/a.dh"

    def test_no_match_is_identity(self):
        overlay = Overlay((("/virt/x", "/real/x"),))
        assert apply_overlay(overlay, "/other/a.dh") == "/other/a.dh"

    def test_longest_prefix_wins(self):
        overlay = Overlay((("/v", "/r1"), ("/v/w", "/r2")))
        assert apply_overlay(overlay, "/v/w/f") == "/r2/f"
        assert apply_overlay(overlay, "/v/q") == "/r1/q"

    def test_component_boundaries_respected(self):
        overlay = Overlay((("/v/x", "/r"),))
        assert apply_overlay(overlay, "/v/xy/f") == "/v/xy/f"
        assert apply_overlay(overlay, "/v/x") == "/r"

    def test_parse_overlay(self):
        overlay = parse_overlay("# comment\n\n/virt -> /real\n/virt/deep -> /other\n")
        assert overlay.mappings == (("/virt", "/real"), ("/virt/deep", "/other"))

    def test_parse_overlay_rejects_duplicates_and_garbage(self):
        with pytest.raises(ParseError):
            parse_overlay("/a -> /b\n/a -> /c\n")
        with pytest.raises(ParseError):
            parse_overlay("just a line\n")

    @given(st.text(alphabet="ab/", max_size=12))
    def test_overlay_never_changes_unmapped_paths(self, path):
        assert apply_overlay(Overlay(()), path) == path


class TestResolveModulePath:
    def test_release_only(self, tmp_path):
        release = tmp_path / "release"
        release.mkdir()
        (release / "M.pcm").write_bytes(b"x")
        paths = SearchPaths((), str(release))
        assert resolve_module_path(paths, "M") == (str(release / "M.pcm"), Origin.RELEASE)

    def test_local_takes_precedence(self, tmp_path):
        release, local = tmp_path / "release", tmp_path / "local"
        release.mkdir(), local.mkdir()
        (release / "M.pcm").write_bytes(b"r")
        (local / "M.pcm").write_bytes(b"l")
        paths = SearchPaths((str(local),), str(release))
        assert resolve_module_path(paths, "M") == (str(local / "M.pcm"), Origin.LOCAL)

    def test_local_roots_are_ordered(self, tmp_path):
        first, second, release = tmp_path / "a", tmp_path / "b", tmp_path / "rel"
        for d in (first, second, release):
            d.mkdir()
        (second / "M.pcm").write_bytes(b"2")
        paths = SearchPaths((str(first), str(second)), str(release))
        assert resolve_module_path(paths, "M")[0] == str(second / "M.pcm")

    def test_missing_module(self, tmp_path):
        paths = SearchPaths((), str(tmp_path))
        with pytest.raises(ModuleNotFound):
            resolve_module_path(paths, "Nope")

    def test_overlay_applied_to_candidates(self, tmp_path):
        real = tmp_path / "real"
        real.mkdir()
        (real / "M.pcm").write_bytes(b"x")
        overlay = Overlay(((str(tmp_path / "virt"), str(real)),))
        paths = SearchPaths((), str(tmp_path / "virt"))
        path, origin = resolve_module_path(paths, "M", overlay)
        assert path == str(real / "M.pcm")
        assert origin is Origin.RELEASE
