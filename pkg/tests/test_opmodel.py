from __future__ import annotations

import dataclasses

import pytest

from candofsm.fsm import MAX_COUNT, PACKET_LENGTH, UnknownCommand
from candofsm.opmodel import (
    Packet,
    RunError,
    init_model,
    run,
    state_operation,
    step,
)
from conftest import mutate_table


def distinct_states(trace):
    out = []
    for row in trace.rows:
        if not out or out[-1] != row.state:
            out.append(row.state)
    return out


class TestInit:
    def test_starts_in_start_with_cont_pending(self, spec):
        m = init_model(spec, "LED_ON_C")
        assert m.current_state == "start"
        assert m.current_event == "CONT"
        assert m.current_command == "LED_ON_C"

    def test_counters_and_packet_are_clear(self, spec):
        m = init_model(spec, "LED_ON_C")
        assert (m.bytes_sent, m.bytes_received, m.tx_cnt) == (0, 0, 0)
        assert m.packet is None
        assert not (m.command_finish_flag or m.optrode_tx_finish
                    or m.optrode_rx_finish)

    def test_unknown_command_rejected(self, spec):
        with pytest.raises(UnknownCommand):
            init_model(spec, "NO_SUCH_C")

    def test_counter_bounds_enforced_on_construction(self, spec):
        with pytest.raises(ValueError):
            dataclasses.replace(init_model(spec, "LED_ON_C"), bytes_sent=4)
        with pytest.raises(ValueError):
            dataclasses.replace(init_model(spec, "LED_ON_C"), tx_cnt=3)


class TestStateOperation:
    def at(self, spec, state, **fields):
        m = init_model(spec, "LED_ON_C")
        return dataclasses.replace(m, current_state=state, **fields)

    def test_send_in_progress_counts_and_requests_tx(self, spec):
        m, op = state_operation(spec, self.at(spec, "send_packet_6", bytes_sent=2))
        assert (m.bytes_sent, m.current_event) == (3, "SPI_TX_FINISH")
        assert op == "send_packet"

    def test_send_completion_raises_flag_and_counts_transmission(self, spec):
        m, _ = state_operation(
            spec, self.at(spec, "send_packet_6", bytes_sent=PACKET_LENGTH))
        assert m.bytes_sent == 0
        assert m.optrode_tx_finish
        assert m.tx_cnt == 1
        assert m.current_event == "CONT"

    def test_transmission_count_saturates(self, spec):
        m, _ = state_operation(
            spec, self.at(spec, "send_packet_6", bytes_sent=PACKET_LENGTH,
                          tx_cnt=MAX_COUNT))
        assert m.tx_cnt == MAX_COUNT

    def test_receive_mirrors_send_without_a_counter(self, spec):
        m, _ = state_operation(
            spec, self.at(spec, "receive_packet_28", bytes_received=1))
        assert (m.bytes_received, m.current_event) == (2, "SPI_RX_FINISH")
        m, _ = state_operation(
            spec, self.at(spec, "receive_packet_28", bytes_received=PACKET_LENGTH))
        assert m.bytes_received == 0
        assert m.optrode_rx_finish
        assert m.tx_cnt == 0

    def test_stage_one_instantiates_the_template_with_the_command(self, spec):
        m, _ = state_operation(spec, self.at(spec, "set_vLED"))
        assert m.packet == Packet(addr="Optrode_addr", cmd="LED_ON_C",
                                  data="LED_addr")

    def test_stage_two_only_touches_the_data_field(self, spec):
        before = self.at(spec, "set_sDac",
                         packet=Packet("Optrode_addr", "LED_ON_C", "LED_addr"))
        m, _ = state_operation(spec, before)
        assert m.packet == Packet("Optrode_addr", "LED_ON_C", "DAC_value")

    def test_cmd_finish_raises_the_flag(self, spec):
        m, _ = state_operation(spec, self.at(spec, "cmd_finish"))
        assert m.command_finish_flag
        assert m.current_event == "CONT"

    def test_chip_rst_clears_everything_and_requests_get_cmd(self, spec):
        dirty = self.at(spec, "chip_rst", bytes_sent=2, tx_cnt=1,
                        optrode_tx_finish=True,
                        packet=Packet("Optrode_addr", None, None))
        m, _ = state_operation(spec, dirty)
        assert (m.bytes_sent, m.bytes_received, m.tx_cnt) == (0, 0, 0)
        assert m.packet is None
        assert not m.optrode_tx_finish
        assert m.current_event == "GET_CMD_E"


class TestStep:
    def at(self, spec, state, **fields):
        return dataclasses.replace(init_model(spec, "LED_ON_C"),
                                   current_state=state, **fields)

    def test_stage_one_moves_to_its_send_state(self, spec):
        outcome = step(spec, self.at(spec, "set_vLED"))
        assert outcome.next.current_state == "send_packet_6"
        assert outcome.post_violations == ()

    def test_send_in_progress_self_loops(self, spec):
        outcome = step(spec, self.at(spec, "send_packet_6", bytes_sent=1))
        assert outcome.next.current_state == "send_packet_6"

    def test_completed_receive_moves_to_cmd_finish(self, spec):
        outcome = step(spec, self.at(spec, "receive_packet_27",
                                     bytes_received=PACKET_LENGTH))
        assert outcome.next.current_state == "cmd_finish"

    def test_get_cmd_consults_the_dispatch_table(self, spec):
        for cmd, target in spec.dispatch.items():
            m = dataclasses.replace(init_model(spec, cmd), current_state="get_cmd")
            assert step(spec, m).next.current_state == target


class TestRun:
    def test_vled_dispatch_reproduces_the_valid_sequence(self, spec):
        trace = run(spec, "LED_ON_C", 500)
        assert distinct_states(trace) == [
            "start", "get_cmd", "set_vLED", "send_packet_6",
            "receive_packet_28", "set_sDac", "send_packet_3",
            "receive_packet_27", "cmd_finish",
        ]
        assert trace.reason == "cmd_finish"

    def test_counter_invariants_hold_on_every_row(self, spec):
        for cmd in spec.roster.command_names:
            for row in run(spec, cmd, 500).rows:
                assert 0 <= row.bytes_sent <= PACKET_LENGTH
                assert 0 <= row.bytes_received <= PACKET_LENGTH
                assert 0 <= row.tx_cnt <= MAX_COUNT

    def test_budget_of_one_yields_one_row(self, spec):
        trace = run(spec, "LED_ON_C", 1)
        assert len(trace.rows) == 1
        assert trace.reason == "budget"
        assert trace.rows[0].state == "start"

    def test_zero_budget_rejected(self, spec):
        with pytest.raises(ValueError):
            run(spec, "LED_ON_C", 0)

    def test_every_command_finishes_within_200_rounds(self, spec):
        for cmd in spec.roster.command_names:
            trace = run(spec, cmd, 500)
            assert trace.reason == "cmd_finish", cmd
            assert len(trace.rows) <= 200

    def test_runs_are_deterministic(self, spec):
        assert run(spec, "DIAG_DELAY_C", 500) == run(spec, "DIAG_DELAY_C", 500)

    def test_post_condition_contract_is_clean_on_the_bundled_spec(self, spec):
        for cmd in spec.roster.command_names:
            assert run(spec, cmd, 500).violations == ()

    def test_spi_rounds_hold_the_state(self, spec):
        # whenever a row carries an SPI completion event, the transition that
        # produced the next row was a self-loop
        for cmd in spec.roster.command_names:
            rows = run(spec, cmd, 500).rows
            for prev, cur in zip(rows, rows[1:]):
                if prev.event in ("SPI_TX_FINISH", "SPI_RX_FINISH"):
                    assert cur.state == prev.state

    def test_missing_transition_is_tagged_with_the_round(self, spec):
        broken = mutate_table(spec, "CONT", "set_vLED", None)
        with pytest.raises(RunError) as err:
            run(broken, "LED_ON_C", 500)
        assert err.value.round_no == 3

    def test_error_self_loop_table_stops_with_reason_error(self, spec):
        # a table where error_ cannot progress halts the run on entry
        stuck = mutate_table(spec, "CONT", "error_", "error_")
        stuck = mutate_table(stuck, "CONT", "set_vLED", "error_")
        trace = run(stuck, "LED_ON_C", 500)
        assert trace.reason == "error"
        assert trace.rows[-1].state == "error_"


def test_model_state_is_immutable(spec):
    m = init_model(spec, "LED_ON_C")
    with pytest.raises(dataclasses.FrozenInstanceError):
        m.bytes_sent = 1
