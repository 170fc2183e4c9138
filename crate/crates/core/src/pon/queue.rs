use std::collections::VecDeque;

use super::{OnuId, TcontId, TrafficClass};
use crate::ran::FronthaulPacket;
use crate::sim::SimTime;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueuedPacket {
    pub packet: FronthaulPacket,
    pub enqueue_time: SimTime,
    /// Payload bytes already sent in earlier fragments.
    pub sent_bytes: u32,
    pub first_grant_start: Option<SimTime>,
}

impl QueuedPacket {
    pub fn remaining(&self) -> u32 {
        self.packet.bytes - self.sent_bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Queued,
    Dropped,
}

/// ONU-side FIFO for one TCONT.
#[derive(Debug, Clone)]
pub struct TcontQueue {
    pub tcont_id: TcontId,
    pub onu_id: OnuId,
    pub class: TrafficClass,
    fifo: VecDeque<QueuedPacket>,
    occupancy_bytes: u64,
    max_bytes: u64,
    pub enqueued_bytes: u64,
    pub delivered_bytes: u64,
    pub dropped_bytes: u64,
    pub dropped_packets: u64,
}

impl TcontQueue {
    pub fn new(tcont_id: TcontId, onu_id: OnuId, class: TrafficClass, max_bytes: u64) -> Self {
        TcontQueue {
            tcont_id,
            onu_id,
            class,
            fifo: VecDeque::new(),
            occupancy_bytes: 0,
            max_bytes,
            enqueued_bytes: 0,
            delivered_bytes: 0,
            dropped_bytes: 0,
            dropped_packets: 0,
        }
    }

    /// Appends a packet unless it would push occupancy past the limit.
    pub fn enqueue(&mut self, packet: FronthaulPacket, now: SimTime) -> EnqueueOutcome {
        debug_assert!(packet.bytes > 0);
        if self.occupancy_bytes + packet.bytes as u64 > self.max_bytes {
            self.dropped_packets += 1;
            self.dropped_bytes += packet.bytes as u64;
            return EnqueueOutcome::Dropped;
        }
        self.occupancy_bytes += packet.bytes as u64;
        self.enqueued_bytes += packet.bytes as u64;
        self.fifo.push_back(QueuedPacket {
            packet,
            enqueue_time: now,
            sent_bytes: 0,
            first_grant_start: None,
        });
        EnqueueOutcome::Queued
    }

    /// Unsent payload bytes currently buffered.
    pub fn status_report(&self) -> u64 {
        self.occupancy_bytes
    }

    /// Occupancy counting only packets that had arrived by `t`.
    pub fn occupancy_at(&self, t: SimTime) -> u64 {
        self.fifo
            .iter()
            .take_while(|p| p.enqueue_time <= t)
            .map(|p| p.remaining() as u64)
            .sum()
    }

    /// Grant bytes needed to flush everything that had arrived by `t`: the
    /// occupancy plus one fragment header if the head is already split.
    pub fn requirement_at(&self, t: SimTime, header: u32) -> u64 {
        let occ = self.occupancy_at(t);
        match self.fifo.front() {
            Some(h) if h.sent_bytes > 0 && h.enqueue_time <= t => occ + header as u64,
            _ => occ,
        }
    }

    pub fn len(&self) -> usize {
        self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fifo.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &QueuedPacket> {
        self.fifo.iter()
    }

    pub(crate) fn head(&self) -> Option<&QueuedPacket> {
        self.fifo.front()
    }

    pub(crate) fn mark_first_grant(&mut self, t: SimTime) {
        if let Some(h) = self.fifo.front_mut() {
            h.first_grant_start.get_or_insert(t);
        }
    }

    /// Records `bytes` of the head packet as sent; pops and returns it when
    /// complete.
    pub(crate) fn send_from_head(&mut self, bytes: u32) -> Option<QueuedPacket> {
        let head = self.fifo.front_mut()?;
        debug_assert!(bytes <= head.remaining());
        head.sent_bytes += bytes;
        self.occupancy_bytes -= bytes as u64;
        self.delivered_bytes += bytes as u64;
        if head.remaining() == 0 {
            self.fifo.pop_front()
        } else {
            None
        }
    }
}
