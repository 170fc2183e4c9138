use super::mcs::{mcs_entry, prbs_needed, tbs_for};
use super::{RanError, SlotConfig, UeState, UplinkGrant};

/// Max-min fair split of `total` PRBs over `needs` (in priority order).
///
/// UEs needing less than the fair share get exactly their need and the rest is
/// shared again; whatever cannot be split evenly goes one PRB at a time to the
/// earliest entries.
pub fn split_prbs(total: u32, needs: &[u32]) -> Vec<u32> {
    let mut out = vec![0u32; needs.len()];
    let mut active: Vec<usize> = (0..needs.len()).filter(|&i| needs[i] > 0).collect();
    let mut remaining = total;
    while !active.is_empty() && remaining > 0 {
        let share = remaining / active.len() as u32;
        if share == 0 {
            for &i in active.iter().take(remaining as usize) {
                out[i] += 1;
            }
            break;
        }
        let (satisfied, hungry): (Vec<usize>, Vec<usize>) = active
            .iter()
            .partition(|&&i| needs[i] - out[i] <= share);
        if satisfied.is_empty() {
            for &i in &hungry {
                out[i] += share;
            }
            remaining -= share * hungry.len() as u32;
        } else {
            for &i in &satisfied {
                remaining -= needs[i] - out[i];
                out[i] = needs[i];
            }
        }
        active = hungry;
    }
    out
}

/// Round-robin uplink scheduler.
///
/// Each slot, every UE with unscheduled backlog competes for the carrier;
/// PRBs are split max-min fair with the remainder to the lowest `ue_id`. When
/// more UEs are backlogged than there are PRBs, a rotating pointer picks which
/// ones get a single PRB this slot.
#[derive(Debug, Clone, Default)]
pub struct RoundRobinScheduler {
    next_slot: Option<u64>,
    rotation: usize,
}

impl RoundRobinScheduler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Issues this slot's grants and reserves the granted backlog. Buffers
    /// are debited later via [`UeState::complete_grant`] at `tx_slot`.
    pub fn schedule_slot(
        &mut self,
        slot_index: u64,
        ues: &mut [UeState],
        cfg: &SlotConfig,
    ) -> Result<Vec<UplinkGrant>, RanError> {
        if let Some(expected) = self.next_slot {
            if slot_index != expected {
                return Err(RanError::SlotOrder {
                    expected,
                    got: slot_index,
                });
            }
        }
        self.next_slot = Some(slot_index + 1);

        let mut order: Vec<usize> = (0..ues.len())
            .filter(|&i| ues[i].unscheduled_bytes() > 0)
            .collect();
        order.sort_by_key(|&i| ues[i].ue_id);
        if order.is_empty() {
            return Ok(Vec::new());
        }

        let mut needs = Vec::with_capacity(order.len());
        for &i in &order {
            let m = mcs_entry(ues[i].mcs)?;
            let n = prbs_needed(ues[i].unscheduled_bytes(), m).min(cfg.prbs_total as u64);
            needs.push(n as u32);
        }

        let alloc = if order.len() > cfg.prbs_total as usize {
            let k = order.len();
            let mut a = vec![0u32; k];
            for j in 0..cfg.prbs_total as usize {
                a[(self.rotation + j) % k] = 1;
            }
            self.rotation = (self.rotation + cfg.prbs_total as usize) % k;
            a
        } else {
            split_prbs(cfg.prbs_total, &needs)
        };

        let mut grants = Vec::new();
        for (pos, &i) in order.iter().enumerate() {
            let n_prbs = alloc[pos];
            if n_prbs == 0 {
                continue;
            }
            let ue = &mut ues[i];
            let tbs = tbs_for(n_prbs, mcs_entry(ue.mcs)?);
            let payload = (tbs as u64).min(ue.unscheduled_bytes()) as u32;
            ue.granted_pending += payload as u64;
            grants.push(UplinkGrant {
                grant_slot: slot_index,
                tx_slot: slot_index + cfg.k2 as u64,
                ue_id: ue.ue_id,
                n_prbs,
                tbs_bytes: tbs,
                payload_bytes: payload,
            });
        }
        Ok(grants)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::ran::mcs::{tbs_from_prbs, MCS_256QAM_MAX, MCS_QPSK_HALF};
    use crate::ran::{TrafficSource, UeTrafficProfile};
    use crate::sim::RngStream;

    /// Hands out PRBs one at a time, cycling over UEs that still need more.
    fn unit_round_robin(total: u32, needs: &[u32]) -> Vec<u32> {
        let mut out = vec![0u32; needs.len()];
        let mut left = total;
        loop {
            let mut progressed = false;
            for i in 0..needs.len() {
                if left == 0 {
                    return out;
                }
                if out[i] < needs[i] {
                    out[i] += 1;
                    left -= 1;
                    progressed = true;
                }
            }
            if !progressed {
                return out;
            }
        }
    }

    fn ue(id: u16, backlog: u64, mcs: u8) -> UeState {
        let src = TrafficSource::new(UeTrafficProfile::constant(0.0), RngStream::new(0, "t"));
        let mut u = UeState::new(id, mcs, src);
        u.buffer_bytes = backlog;
        u
    }

    #[test]
    fn empty_buffers_yield_no_grants() {
        let mut s = RoundRobinScheduler::new();
        let mut ues = vec![ue(0, 0, 1), ue(1, 0, 1)];
        assert!(s
            .schedule_slot(0, &mut ues, &SlotConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn single_saturated_ue_takes_the_carrier() {
        let mut s = RoundRobinScheduler::new();
        let mut ues = vec![ue(0, 1_000_000, MCS_QPSK_HALF)];
        let g = s.schedule_slot(0, &mut ues, &SlotConfig::default()).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].n_prbs, 51);
        assert_eq!(g[0].tx_slot, 4);
        assert_eq!(g[0].tbs_bytes, tbs_from_prbs(51, MCS_QPSK_HALF).unwrap());
    }

    #[test]
    fn two_saturated_ues_split_26_25() {
        let mut s = RoundRobinScheduler::new();
        let mut ues = vec![ue(1, 1_000_000, 1), ue(0, 1_000_000, 1)];
        let g = s.schedule_slot(0, &mut ues, &SlotConfig::default()).unwrap();
        let by_ue: Vec<(u16, u32)> = g.iter().map(|g| (g.ue_id, g.n_prbs)).collect();
        assert_eq!(by_ue, vec![(0, 26), (1, 25)]);
        assert_eq!(unit_round_robin(51, &[51, 51]), vec![26, 25]);
    }

    #[test]
    fn buffers_are_debited_at_tx_slot_not_grant_slot() {
        let mut s = RoundRobinScheduler::new();
        let cfg = SlotConfig::default();
        let mut ues = vec![ue(0, 500, MCS_256QAM_MAX)];
        let g = s.schedule_slot(0, &mut ues, &cfg).unwrap();
        assert_eq!(ues[0].buffer_bytes, 500);
        assert_eq!(ues[0].unscheduled_bytes(), 0);
        // Nothing left to schedule while the grant is pending.
        assert!(s.schedule_slot(1, &mut ues, &cfg).unwrap().is_empty());
        ues[0].complete_grant(&g[0]);
        assert_eq!(ues[0].buffer_bytes, 0);
        assert_eq!(ues[0].padding_bytes, (g[0].tbs_bytes - 500) as u64);
    }

    #[test]
    fn grant_never_exceeds_backlog_plus_one_prb() {
        let mut s = RoundRobinScheduler::new();
        let cfg = SlotConfig::default();
        let mut ues = vec![ue(0, 1_001, MCS_QPSK_HALF)];
        let g = s.schedule_slot(0, &mut ues, &cfg).unwrap();
        let one_prb = tbs_from_prbs(1, MCS_QPSK_HALF).unwrap();
        assert!(g[0].tbs_bytes >= 1_001);
        assert!(g[0].tbs_bytes <= 1_001 + one_prb);
    }

    #[test]
    fn more_ues_than_prbs_rotates() {
        let mut s = RoundRobinScheduler::new();
        let cfg = SlotConfig {
            prbs_total: 2,
            ..SlotConfig::default()
        };
        let mut ues: Vec<UeState> = (0..3).map(|i| ue(i, 1_000_000, 1)).collect();
        let a: Vec<u16> = s
            .schedule_slot(0, &mut ues, &cfg)
            .unwrap()
            .iter()
            .map(|g| g.ue_id)
            .collect();
        let b: Vec<u16> = s
            .schedule_slot(1, &mut ues, &cfg)
            .unwrap()
            .iter()
            .map(|g| g.ue_id)
            .collect();
        assert_eq!(a, vec![0, 1]);
        assert_eq!(b, vec![0, 2]);
    }

    #[test]
    fn out_of_order_slots_are_rejected() {
        let mut s = RoundRobinScheduler::new();
        let cfg = SlotConfig::default();
        s.schedule_slot(3, &mut [], &cfg).unwrap();
        assert!(matches!(
            s.schedule_slot(5, &mut [], &cfg),
            Err(RanError::SlotOrder { expected: 4, got: 5 })
        ));
    }

    proptest! {
        #[test]
        fn split_matches_unit_round_robin(
            total in 0u32..300,
            needs in proptest::collection::vec(0u32..120, 0..12),
        ) {
            prop_assert_eq!(split_prbs(total, &needs), unit_round_robin(total, &needs));
        }

        #[test]
        fn prb_conservation_and_work_conservation(
            backlogs in proptest::collection::vec(0u64..50_000, 1..10),
            mcs in 0u8..11,
            prbs in 1u32..80,
        ) {
            let cfg = SlotConfig { prbs_total: prbs, ..SlotConfig::default() };
            let mut ues: Vec<UeState> = backlogs
                .iter()
                .enumerate()
                .map(|(i, &b)| ue(i as u16, b, mcs))
                .collect();
            let mut s = RoundRobinScheduler::new();
            let grants = s.schedule_slot(0, &mut ues, &cfg).unwrap();
            let used: u32 = grants.iter().map(|g| g.n_prbs).sum();
            prop_assert!(used <= prbs);
            if backlogs.iter().any(|&b| b > 0) {
                prop_assert!(!grants.is_empty());
            }
            for g in &grants {
                prop_assert!(g.n_prbs > 0 && g.n_prbs <= prbs);
                prop_assert_eq!(g.tbs_bytes, tbs_from_prbs(g.n_prbs, mcs).unwrap());
                prop_assert_eq!(g.tx_slot, g.grant_slot + cfg.k2 as u64);
            }
        }
    }
}
