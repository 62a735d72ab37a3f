"""Reusable interface components: register bus, video stream, interrupts."""

from .irq import InterruptChecker, InterruptExpectation, check_interrupt
from .srb import BusTxn, SrbAdapter, SrbAgent, SrbBus, SrbInterconnect, SrbSlave, srb_transfer
from .vsp import (FrameAssembler, ObservedFrame, SendFrameSeq, VspAgent, VspBus, VspItem,
                  VspTiming, random_timing, vsp_send_frame)
