from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from candofsm.fsm import (
    CONT,
    MissingTransition,
    StateKind,
    UnknownState,
    Violation,
    check_cando,
    check_roster,
    check_statemap,
    check_totality,
    classify,
    is_errormap,
    is_idmap,
    is_packetmap,
    is_receivemap,
    is_total_statemap,
    lookup_next,
    reachable,
)
from conftest import mutate_table


def codes(violations):
    return [v.constraint_id for v in violations]


class TestClassify:
    def test_stage_one_creator(self, spec):
        assert classify(spec.roster, "set_vLED") is StateKind.CREATOR_STAGE1

    def test_stage_two_creator(self, spec):
        assert classify(spec.roster, "set_sDac") is StateKind.CREATOR_STAGE2

    def test_error_state(self, spec):
        assert classify(spec.roster, "error_") is StateKind.ERROR

    def test_unknown_state(self, spec):
        with pytest.raises(UnknownState):
            classify(spec.roster, "no_such_state")


class TestLookupNext:
    def test_vled_chain_entry(self, spec):
        assert lookup_next(spec.fsm, CONT, "set_vLED") == "send_packet_6"

    def test_send3_pairs_with_receive27(self, spec):
        assert lookup_next(spec.fsm, CONT, "send_packet_3") == "receive_packet_27"

    def test_documented_continue_chain_is_pinned(self, spec):
        pinned = {
            "set_vLED": "send_packet_6",
            "send_packet_6": "receive_packet_28",
            "receive_packet_28": "set_sDac",
            "set_sDac": "send_packet_3",
            "send_packet_3": "receive_packet_27",
            "receive_packet_27": "cmd_finish",
        }
        for frm, to in pinned.items():
            assert lookup_next(spec.fsm, CONT, frm) == to

    def test_send_self_loop(self, spec):
        assert lookup_next(spec.fsm, "SPI_TX_FINISH", "send_packet_6") == "send_packet_6"

    def test_missing_transition(self, spec):
        with pytest.raises(MissingTransition):
            lookup_next({}, CONT, "start")
        with pytest.raises(MissingTransition):
            lookup_next({CONT: {}}, CONT, "start")


class TestCheckStatemap:
    def test_get_cmd_to_start_fires_both_rules(self, spec):
        violations = check_statemap(spec.roster, {"get_cmd": "start"})
        assert codes(violations) == ["C1.1", "C1.8"]

    def test_empty_map_is_vacuously_fine(self, spec):
        assert check_statemap(spec.roster, {}) == []

    def test_cmd_finish_to_get_cmd(self, spec):
        violations = check_statemap(spec.roster, {"cmd_finish": "get_cmd"})
        assert codes(violations) == ["C1.5"]

    def test_receive_self_loop_is_admitted(self, spec):
        assert check_statemap(
            spec.roster, {"receive_packet_21": "receive_packet_21"}) == []

    def test_unknown_state_raises(self, spec):
        with pytest.raises(UnknownState):
            check_statemap(spec.roster, {"nowhere": "start"})

    def test_bundled_maps_all_pass(self, spec):
        for ev in spec.roster.event_names:
            assert check_statemap(spec.roster, spec.fsm[ev], event=ev) == []

    def test_idmap_on_send_states_never_targets_start(self, spec):
        sends = spec.roster.states_of_kind(StateKind.SEND)
        identity = {s: s for s in sends}
        assert is_idmap(identity)
        assert "C1.1" not in codes(check_statemap(spec.roster, identity))

    @settings(max_examples=50, deadline=None)
    @given(data=st.data())
    def test_passing_map_passes_on_any_key_subset(self, spec, data):
        base = spec.fsm[CONT]
        keys = data.draw(st.sets(st.sampled_from(sorted(base))))
        restricted = {k: base[k] for k in keys}
        assert check_statemap(spec.roster, restricted) == []


class TestCheckTotality:
    def test_bundled_table_is_total(self, spec):
        assert check_totality(spec.roster, spec.fsm) == []

    def test_missing_event_reported(self, spec):
        fsm = {e: m for e, m in spec.fsm.items() if e != CONT}
        violations = check_totality(spec.roster, fsm)
        assert len(violations) == 1
        assert violations[0].event == CONT

    def test_missing_state_entry_reported(self, spec):
        mutated = mutate_table(spec, CONT, "LED_off", None)
        violations = check_totality(mutated.roster, mutated.fsm)
        assert len(violations) == 1
        assert (violations[0].event, violations[0].from_state) == (CONT, "LED_off")

    def test_totality_message_cites_both_readings(self, spec):
        fsm = {e: m for e, m in spec.fsm.items() if e != CONT}
        [violation] = check_totality(spec.roster, fsm)
        assert "event" in violation.message and "states" in violation.message


class TestCheckCando:
    def test_bundled_table_passes(self, spec):
        assert check_cando(spec.roster, spec.fsm) == []

    def test_send_to_creator_breaks_c2(self, spec):
        mutated = mutate_table(spec, CONT, "send_packet_6", "set_sDac")
        assert codes(check_cando(mutated.roster, mutated.fsm)) == ["C2"]

    def test_error_to_chip_rst_is_sanctioned(self, spec):
        # the reset hand-off takes precedence over the stay-in-error class rule
        assert spec.fsm[CONT]["error_"] == "chip_rst"
        assert check_cando(spec.roster, spec.fsm) == []

    def test_self_loop_laws_hold_on_checked_tables(self, spec):
        for s in spec.roster.states_of_kind(StateKind.SEND):
            assert lookup_next(spec.fsm, "SPI_TX_FINISH", s) == s
        for r in spec.roster.states_of_kind(StateKind.RECEIVE):
            assert lookup_next(spec.fsm, "SPI_RX_FINISH", r) == r


class TestReachable:
    def test_no_events_no_moves(self, spec):
        assert reachable(spec.fsm, "cmd_finish", ()) == {"cmd_finish"}

    def test_vled_chain_under_cont(self, spec):
        chain = reachable(spec.fsm, "set_vLED", {CONT})
        assert chain >= {
            "send_packet_6", "receive_packet_28", "set_sDac",
            "send_packet_3", "receive_packet_27", "cmd_finish",
        }

    def test_every_state_reachable_from_start(self, spec):
        covered = reachable(spec.fsm, "start", spec.roster.event_names)
        assert covered == set(spec.roster.state_names)

    def test_agrees_with_bfs_oracle(self, spec):
        # independent breadth-first sweep over every (event, state) edge
        frontier = {"start"}
        seen = set()
        while frontier:
            state = frontier.pop()
            seen.add(state)
            for ev in spec.roster.event_names:
                nxt = spec.fsm[ev][state]
                if nxt not in seen:
                    frontier.add(nxt)
        assert reachable(spec.fsm, "start", spec.roster.event_names) == seen


class TestViolationOrdering:
    def test_sorted_by_catalogue_then_location(self):
        violations = [
            Violation("C2", event="CONT", from_state="b"),
            Violation("C1.1", event="CONT", from_state="z"),
            Violation("C2", event="CONT", from_state="a"),
            Violation("TOTALITY", event="CONT"),
        ]
        ordered = sorted(violations, key=Violation.sort_key)
        assert [v.constraint_id for v in ordered] == ["C1.1", "C2", "C2", "TOTALITY"]
        assert [v.from_state for v in ordered[1:3]] == ["a", "b"]

    def test_checkers_are_deterministic(self, spec):
        mutated = mutate_table(spec, CONT, "send_packet_6", "set_sDac")
        first = check_cando(mutated.roster, mutated.fsm)
        second = check_cando(mutated.roster, mutated.fsm)
        assert first == second


class TestRolePredicates:
    def test_total_statemap(self, spec):
        assert is_total_statemap(spec.roster, spec.fsm[CONT])
        assert not is_total_statemap(spec.roster, {"start": "get_cmd"})

    def test_idmap(self):
        assert is_idmap({"a": "a"})
        assert not is_idmap({"a": "b"})

    def test_kind_restricted_maps(self, spec):
        assert is_errormap(spec.roster, {"error_": "chip_rst", "chip_rst": "error_"})
        assert not is_errormap(spec.roster, {"start": "get_cmd"})
        assert is_packetmap(spec.roster, {"set_vLED": "send_packet_6"})
        assert is_receivemap(spec.roster, {"receive_packet_21": "cmd_finish"})

    def test_roster_check_passes_on_bundled(self, spec):
        assert check_roster(spec.roster) == []

    def test_roster_check_flags_missing_distinguished_member(self, spec):
        import dataclasses

        trimmed = dataclasses.replace(
            spec.roster,
            states=tuple(s for s in spec.roster.states if s.name != "chip_rst"))
        assert "ROSTER" in codes(check_roster(trimmed))
