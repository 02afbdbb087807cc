"""Affinity engine: lens generation, refinement bound, exclusive grouping."""

import random

import pytest

from boardengine.affinity import AffinityEngine, in_scope_note_ids
from boardengine.errors import (
    DuplicateLensName,
    EmptyDimensions,
    TooFewNotes,
    UnknownReference,
)

from tests.harness import ScriptedProvider, engine_env


def make_engine(provider=None):
    env = engine_env(provider)
    env.hub.ensure_workspace("ws_t")
    return AffinityEngine(env.hub, env.gateway, env.ids), env


def add_note(env, text, actor="alice", x=0.0, y=0.0):
    note_id = env.ids.note_id()
    env.hub.submit_internal(
        "ws_t",
        {"kind": "CreateNote", "actor": actor, "payload": {"noteId": note_id, "text": text, "x": x, "y": y}},
    )
    return note_id


def basic_candidate(name="Basic Split"):
    return {
        "name": name,
        "description": "two plain buckets",
        "affinities": [
            {"groupName": "G1", "groupDescription": "first"},
            {"groupName": "G2", "groupDescription": "second"},
        ],
        "scope": {"kind": "global"},
        "refinementIncomplete": False,
    }


# --- lens generation ---


class TestGenerateLenses:
    def test_miami_notes_yield_theme_lens(self):
        """The appendix example surfaces Cost/Time/Comfort as one lens."""
        engine, env = make_engine()
        add_note(env, "Plan a trip to the Miami beach")
        add_note(env, "Book flights from Chicago to Miami")
        lenses = engine.generate_lenses("ws_t")
        by_name = {l["name"]: l for l in lenses}
        themes = [a["groupName"] for a in by_name["Common Themes"]["affinities"]]
        assert themes == ["Cost", "Time", "Comfort"]
        assert 2 <= len(lenses) <= 5
        assert all(not l["refinementIncomplete"] for l in lenses)

    def test_customized_scope_steers_generation(self):
        engine, env = make_engine()
        add_note(env, "compare Airbnb vs hotel")
        add_note(env, "book the flights")
        lenses = engine.generate_lenses(
            "ws_t", {"kind": "customized", "instruction": "by planning phase"}
        )
        assert lenses[0]["name"] == "planning and preparation aspects of the ideas"

    def test_single_note_rejected(self):
        engine, env = make_engine()
        add_note(env, "only one")
        with pytest.raises(TooFewNotes):
            engine.generate_lenses("ws_t")

    def test_selected_scope_counts_only_selected(self):
        engine, env = make_engine()
        n1 = add_note(env, "pick me")
        add_note(env, "and me")
        with pytest.raises(TooFewNotes):
            engine.generate_lenses("ws_t", {"kind": "selected", "noteIds": [n1]})

    def test_flood_capped_and_deduped(self):
        """Seven provider lenses with one duplicate name collapse to five."""
        engine, env = make_engine()
        add_note(env, "lens-flood a")
        add_note(env, "lens-flood b")
        lenses = engine.generate_lenses("ws_t")
        assert [l["name"] for l in lenses] == ["L1", "L2", "L3", "L4", "L5"]

    def test_generation_never_mutates_state(self):
        engine, env = make_engine()
        add_note(env, "idea one")
        add_note(env, "idea two")
        before = env.hub.get_state("ws_t").revision
        engine.generate_lenses("ws_t")
        assert env.hub.get_state("ws_t").revision == before


# --- name refinement ---


class TestRefineGroupNames:
    def test_already_distinct_names_pass_in_one_round(self):
        engine, env = make_engine()
        candidate = basic_candidate()
        refined = engine.refine_group_names("ws_t", candidate)
        assert refined["affinities"] == candidate["affinities"]
        assert not refined["refinementIncomplete"]

    def test_colliding_pair_renamed_then_converges(self):
        """0.8 on the first pass, rename applied, 0.4-equivalent second pass."""
        engine, env = make_engine()
        candidate = {
            **basic_candidate("Spending View"),
            "affinities": [
                {"groupName": "Sticker Price", "groupDescription": "upfront cost"},
                {"groupName": "Cost Level", "groupDescription": "overall cost"},
            ],
        }
        refined = engine.refine_group_names("ws_t", candidate)
        names = [a["groupName"] for a in refined["affinities"]]
        assert names == ["Purchase Timing", "Cost Level"]
        assert not refined["refinementIncomplete"]

    def test_stuck_candidate_flagged_after_five_passes(self):
        """A mock that never converges stops at the five-pass bound."""
        provider = PassCounter()
        engine, env = make_engine(provider)
        candidate = {
            **basic_candidate("Stuck View"),
            "affinities": [
                {"groupName": "Twin A", "groupDescription": ""},
                {"groupName": "Twin B", "groupDescription": ""},
            ],
        }
        refined = engine.refine_group_names("ws_t", candidate)
        assert refined["refinementIncomplete"]
        assert provider.count == 5

    def test_similarity_exactly_at_threshold_keeps_refining(self):
        """0.6 is not below 0.6; the loop must not accept it."""
        engine, env = make_engine()
        candidate = {
            **basic_candidate("Boundary View"),
            "affinities": [
                {"groupName": "Boundary One", "groupDescription": ""},
                {"groupName": "Boundary Two", "groupDescription": ""},
            ],
        }
        refined = engine.refine_group_names("ws_t", candidate)
        assert refined["refinementIncomplete"]


class PassCounter:
    """Counts similarity passes behind the regular fixture provider."""

    def __init__(self):
        from boardengine.gateway import MockProvider

        from tests.harness import FIXTURES_DIR

        self._inner = MockProvider(FIXTURES_DIR)
        self.count = 0

    def complete(self, prompt, *, context=None, timeout_s=30.0):
        if context and context.get("templateId") == "group-name-similarity":
            self.count += 1
        return self._inner.complete(prompt, context=context, timeout_s=timeout_s)

    def transcribe(self, audio_b64, *, timeout_s=30.0):
        return self._inner.transcribe(audio_b64, timeout_s=timeout_s)


# --- installation ---


class TestInstallLens:
    def test_install_assigns_every_note(self):
        engine, env = make_engine()
        n1 = add_note(env, "alpha idea")
        n2 = add_note(env, "beta idea")
        n3 = add_note(env, "gamma idea")
        revision, lens_id = engine.install_lens("ws_t", basic_candidate())
        state = env.hub.get_state("ws_t")
        page = state.lenses[lens_id].page
        assert page.assignment == {n1: "G1", n2: "G2", n3: "G1"}
        assert page.rationales == {"G1": "first bucket", "G2": "second bucket"}
        assert state.lenses[lens_id].lens.name == "Basic Split"
        assert revision == state.revision

    def test_duplicate_name_rejected(self):
        engine, env = make_engine()
        add_note(env, "alpha idea")
        engine.install_lens("ws_t", basic_candidate())
        with pytest.raises(DuplicateLensName):
            engine.install_lens("ws_t", basic_candidate())

    def test_unplaced_notes_go_ungrouped(self):
        engine, env = make_engine()
        n1 = add_note(env, "alpha idea")
        n2 = add_note(env, "beta idea")
        _, lens_id = engine.install_lens("ws_t", basic_candidate("Partial Split"))
        page = env.hub.get_state("ws_t").lenses[lens_id].page
        assert page.assignment == {n1: "G1", n2: None}

    def test_unknown_group_from_provider_goes_ungrouped(self):
        engine, env = make_engine()
        n1 = add_note(env, "alpha idea")
        n2 = add_note(env, "beta idea")
        _, lens_id = engine.install_lens("ws_t", basic_candidate("Stray Group"))
        page = env.hub.get_state("ws_t").lenses[lens_id].page
        assert page.assignment == {n1: None, n2: "G2"}

    def test_double_assignment_keeps_first(self):
        engine, env = make_engine()
        n1 = add_note(env, "alpha idea")
        n2 = add_note(env, "beta idea")
        _, lens_id = engine.install_lens("ws_t", basic_candidate("Dup Assign"))
        page = env.hub.get_state("ws_t").lenses[lens_id].page
        assert page.assignment == {n1: "G1", n2: "G2"}

    def test_empty_scope_installs_empty_page_without_provider(self):
        provider = ScriptedProvider([])  # any provider call would blow up
        engine, env = make_engine(provider)
        candidate = {**basic_candidate(), "scope": {"kind": "selected", "noteIds": []}}
        _, lens_id = engine.install_lens("ws_t", candidate)
        page = env.hub.get_state("ws_t").lenses[lens_id].page
        assert page.assignment == {}
        assert provider.calls == []

    def test_install_by_cached_name(self):
        engine, env = make_engine()
        add_note(env, "Plan a trip to the Miami beach")
        add_note(env, "Book flights from Chicago to Miami")
        engine.generate_lenses("ws_t")
        candidate = engine.candidate_named("ws_t", "Common Themes")
        _, lens_id = engine.install_lens("ws_t", candidate)
        assert env.hub.get_state("ws_t").lenses[lens_id].lens.name == "Common Themes"
        with pytest.raises(UnknownReference):
            engine.candidate_named("ws_t", "Never Generated")


# --- incremental regroup ---


class TestRegroupOnSwitch:
    def install_basic(self, engine, env):
        n1 = add_note(env, "alpha idea")
        n2 = add_note(env, "beta idea")
        n3 = add_note(env, "gamma idea")
        _, lens_id = engine.install_lens("ws_t", basic_candidate())
        return lens_id, (n1, n2, n3)

    def test_unchanged_board_is_a_noop(self):
        """No new or edited notes: no provider call, no mutation."""
        provider = PassCounter()
        engine, env = make_engine(provider)
        lens_id, _ = self.install_basic(engine, env)
        before = env.hub.get_state("ws_t").revision
        assert engine.regroup_on_switch("ws_t", lens_id) is None
        assert env.hub.get_state("ws_t").revision == before

    def test_new_note_assigned_incrementally(self):
        """Only the new note goes to the provider; old assignments persist."""
        engine, env = make_engine()
        lens_id, (n1, n2, n3) = self.install_basic(engine, env)
        n4 = add_note(env, "newly added thought")
        revision = engine.regroup_on_switch("ws_t", lens_id)
        assert revision is not None
        page = env.hub.get_state("ws_t").lenses[lens_id].page
        assert page.assignment == {n1: "G1", n2: "G2", n3: "G1", n4: "G2"}
        assert page.rationales["G2"] == "fits the second bucket"

    def test_edited_note_reassigned(self):
        engine, env = make_engine()
        lens_id, (n1, n2, n3) = self.install_basic(engine, env)
        env.hub.submit_internal(
            "ws_t",
            {"kind": "EditNoteText", "actor": "alice", "payload": {"noteId": n2, "text": "edited in place"}},
        )
        engine.regroup_on_switch("ws_t", lens_id)
        page = env.hub.get_state("ws_t").lenses[lens_id].page
        assert page.assignment[n2] == "G1"  # moved buckets after the edit
        assert page.assignment[n1] == "G1" and page.assignment[n3] == "G1"

    def test_deleted_note_needs_no_provider(self):
        provider = PassCounter()
        engine, env = make_engine(provider)
        lens_id, (n1, n2, n3) = self.install_basic(engine, env)
        env.hub.submit_internal(
            "ws_t", {"kind": "DeleteNote", "actor": "alice", "payload": {"noteId": n2}}
        )
        assert engine.regroup_on_switch("ws_t", lens_id) is None
        page = env.hub.get_state("ws_t").lenses[lens_id].page
        assert set(page.assignment) == {n1, n3}

    def test_unknown_lens_rejected(self):
        engine, env = make_engine()
        with pytest.raises(UnknownReference):
            engine.regroup_on_switch("ws_t", "lens_NOPE")

    def test_regroup_updates_last_regroup_revision(self):
        engine, env = make_engine()
        lens_id, _ = self.install_basic(engine, env)
        add_note(env, "newly added thought")
        base = env.hub.get_state("ws_t").revision
        engine.regroup_on_switch("ws_t", lens_id)
        page = env.hub.get_state("ws_t").lenses[lens_id].page
        assert page.last_regroup_revision == base


# --- exclusivity property ---


class TestExclusivityProperty:
    def test_lens_page_partitions_in_scope_notes(self):
        """Random storms: every lens page stays a partition of its scope."""
        rng = random.Random(11)
        for trial in range(10):
            provider = ScriptedProvider()
            engine, env = make_engine(provider)
            note_ids = [add_note(env, f"note {i}") for i in range(rng.randrange(2, 6))]
            # scripted total/partial random assignment for install
            groups = ["G1", "G2", "G3"]
            provider.push(
                {
                    "assignment": [
                        {"idx": i + 1, "group": rng.choice(groups + [None])}
                        for i in range(len(note_ids))
                        if rng.random() < 0.8
                    ],
                    "rationales": {},
                }
            )
            candidate = {
                "name": "Random Lens",
                "description": "",
                "affinities": [{"groupName": g, "groupDescription": ""} for g in groups],
                "scope": {"kind": "global"},
                "refinementIncomplete": False,
            }
            _, lens_id = engine.install_lens("ws_t", candidate)
            for _ in range(rng.randrange(0, 4)):
                add_note(env, f"extra {rng.randrange(100)}")
                provider.push(
                    {"assignment": [{"idx": 1, "group": rng.choice(groups + [None])}], "rationales": {}}
                )
                engine.regroup_on_switch("ws_t", lens_id)
            state = env.hub.get_state("ws_t")
            page = state.lenses[lens_id].page
            scope = in_scope_note_ids(state, state.lenses[lens_id].lens)
            assert set(page.assignment) == scope, f"trial {trial}"
            for group_name in groups:
                members = [n for n, g in page.assignment.items() if g == group_name]
                assert len(members) == len(set(members))


# --- dimensions and hierarchy ---


class TestSuggestDimensions:
    def make_group_with(self, env, texts, title="Accommodation"):
        group_id = env.ids.group_id()
        env.hub.submit_internal(
            "ws_t", {"kind": "CreateGroup", "actor": "alice", "payload": {"groupId": group_id, "title": title}}
        )
        ids = []
        for text in texts:
            nid = add_note(env, text)
            env.hub.submit_internal(
                "ws_t",
                {"kind": "AssignNoteToGroup", "actor": "alice", "payload": {"noteId": nid, "groupId": group_id}},
            )
            ids.append(nid)
        return group_id, ids

    def test_accommodation_dimensions(self):
        engine, env = make_engine()
        group_id, _ = self.make_group_with(env, ["hostel downtown", "beach resort"])
        assert engine.suggest_dimensions("ws_t", group_id) == ["cost tier", "location", "room type"]

    def test_single_member_rejected(self):
        engine, env = make_engine()
        group_id, _ = self.make_group_with(env, ["lonely note"])
        with pytest.raises(TooFewNotes):
            engine.suggest_dimensions("ws_t", group_id)

    def test_over_return_truncated_to_six(self):
        engine, env = make_engine()
        group_id, _ = self.make_group_with(env, ["ten-dims a", "ten-dims b"], title="Wide")
        assert engine.suggest_dimensions("ws_t", group_id) == ["d1", "d2", "d3", "d4", "d5", "d6"]

    def test_repeats_deduplicated(self):
        engine, env = make_engine()
        group_id, _ = self.make_group_with(env, ["repeat-dims a", "repeat-dims b"], title="Rep")
        assert engine.suggest_dimensions("ws_t", group_id) == ["alpha", "beta"]


class TestHierarchicalGroup:
    def make_group_with(self, env, texts, title="Accommodation"):
        group_id = env.ids.group_id()
        env.hub.submit_internal(
            "ws_t", {"kind": "CreateGroup", "actor": "alice", "payload": {"groupId": group_id, "title": title}}
        )
        ids = []
        for text in texts:
            nid = add_note(env, text)
            env.hub.submit_internal(
                "ws_t",
                {"kind": "AssignNoteToGroup", "actor": "alice", "payload": {"noteId": nid, "groupId": group_id}},
            )
            ids.append(nid)
        return group_id, ids

    def test_notes_distributed_into_subgroups(self):
        """Four notes over two dimensions: disjoint subsets, leftovers stay."""
        engine, env = make_engine()
        group_id, notes = self.make_group_with(
            env, ["hostel a", "hostel b", "resort c", "cabin d"]
        )
        result = engine.hierarchical_group(
            "ws_t", group_id, ["cost tier", "location"], actor="alice"
        )
        state = env.hub.get_state("ws_t")
        subs = {s["title"]: s for s in result["subgroups"]}
        assert set(subs) <= {"cost tier", "location"}
        placed = [n for s in result["subgroups"] for n in s["members"]]
        assert len(placed) == len(set(placed))
        assert set(placed) <= set(notes)
        for sub in result["subgroups"]:
            g = state.groups[sub["groupId"]]
            assert g.parent == group_id
            assert set(g.member_notes) == set(sub["members"])
        # the fixture leaves idx 4 unplaced: it stays a direct member
        assert state.notes[notes[3]].group == group_id

    def test_empty_dimensions_rejected(self):
        engine, env = make_engine()
        group_id, _ = self.make_group_with(env, ["a", "b"])
        with pytest.raises(EmptyDimensions):
            engine.hierarchical_group("ws_t", group_id, [], actor="alice")
        with pytest.raises(EmptyDimensions):
            engine.hierarchical_group("ws_t", group_id, ["  "], actor="alice")

    def test_rerun_replaces_previous_subgroups(self):
        """Running twice leaves one generation of subgroups, not two."""
        engine, env = make_engine()
        group_id, notes = self.make_group_with(env, ["hostel a", "hostel b", "resort c"])
        first = engine.hierarchical_group("ws_t", group_id, ["cost tier", "location"], actor="alice")
        second = engine.hierarchical_group("ws_t", group_id, ["cost tier", "location"], actor="alice")
        state = env.hub.get_state("ws_t")
        children = [g for g in state.groups.values() if g.parent == group_id]
        assert len(children) == len(second["subgroups"])
        old_ids = {s["groupId"] for s in first["subgroups"]}
        assert all(g.id not in old_ids for g in children)

    def test_unknown_group_rejected(self):
        engine, env = make_engine()
        with pytest.raises(UnknownReference):
            engine.hierarchical_group("ws_t", "grp_NOPE", ["x"], actor="alice")
