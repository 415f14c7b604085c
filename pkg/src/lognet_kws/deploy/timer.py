"""Sampling-timer interrupt frequency calculator (SAMD21 TC3 style)."""

from __future__ import annotations


def timer_interrupt_frequency(f_clk_hz: float, divider: float, compare_value: float) -> float:
    """``f_clk / (divider * (compare_value + 1))``."""
    if f_clk_hz <= 0 or divider <= 0 or compare_value <= 0:
        raise ValueError("clock, divider and compare value must all be positive")
    return f_clk_hz / (divider * (compare_value + 1))


def timer_notes(f_clk_hz: float, divider: float, compare_value: float,
                target_hz: float = 8000.0) -> list[str]:
    """Human-readable caveats for a timer setting."""
    f = timer_interrupt_frequency(f_clk_hz, divider, compare_value)
    notes = [f"deviation from the {target_hz:g} Hz target: {100 * (f - target_hz) / target_hz:+.3f}%"]
    if compare_value != int(compare_value):
        notes.append(
            f"compare value {compare_value:g} is not an integer; a hardware register holds "
            f"{int(compare_value)} ({timer_interrupt_frequency(f_clk_hz, divider, int(compare_value)):.1f} Hz)"
        )
    # The reference setting (CC = 93.75) is listed as ~7979 Hz, yet under this
    # formula 93.75 gives ~7916 Hz; 7979 Hz needs CC = 93, and 8000 Hz arises
    # only from f_clk / (DIV * CC) with CC = 93.75.
    printed = 93.75
    if divider == 64 and f_clk_hz == 48e6:
        notes.append(
            f"reference: CC={printed:g} gives {timer_interrupt_frequency(f_clk_hz, divider, printed):.1f} Hz "
            f"with (CC + 1); the listed ~7979 Hz matches CC=93, and 8000 Hz would need "
            f"f_clk/(DIV*CC) = {f_clk_hz / (divider * printed):.1f} Hz"
        )
    return notes
