//! Sequence recovery with a match vector over a 16-bit sequence space.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recovery {
    Accept,
    /// Already seen within the window.
    Duplicate,
    /// Too far from the recovery point to be judged.
    OutOfWindow,
}

#[derive(Debug, Clone)]
pub struct VectorRecovery {
    window: u32,
    /// Highest accepted sequence number, `None` until the first frame.
    recov_seq: Option<u16>,
    /// history[i] = recov_seq - i has been seen.
    history: VecDeque<bool>,
}

impl VectorRecovery {
    pub fn new(window: u32) -> Self {
        assert!(window >= 1 && window <= 1 << 15, "window must lie in 1..=32768");
        VectorRecovery {
            window,
            recov_seq: None,
            history: VecDeque::new(),
        }
    }

    pub fn eliminate_duplicates(&mut self, seq: u16) -> Recovery {
        let Some(recov) = self.recov_seq else {
            self.recov_seq = Some(seq);
            self.history = VecDeque::from(vec![true]);
            return Recovery::Accept;
        };
        let delta = seq.wrapping_sub(recov) as i16 as i32;
        let w = self.window as i32;
        if delta >= w || delta <= -w {
            return Recovery::OutOfWindow;
        }
        if delta > 0 {
            for _ in 1..delta {
                self.history.push_front(false);
            }
            self.history.push_front(true);
            self.history.truncate(self.window as usize);
            self.recov_seq = Some(seq);
            return Recovery::Accept;
        }
        let i = (-delta) as usize;
        match self.history.get(i) {
            Some(true) => Recovery::Duplicate,
            Some(false) => {
                self.history[i] = true;
                Recovery::Accept
            }
            None => {
                self.history.resize(i, false);
                self.history.push_back(true);
                Recovery::Accept
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn repeat_is_discarded() {
        let mut r = VectorRecovery::new(8);
        assert_eq!(r.eliminate_duplicates(5), Recovery::Accept);
        assert_eq!(r.eliminate_duplicates(5), Recovery::Duplicate);
        assert_eq!(r.eliminate_duplicates(6), Recovery::Accept);
        assert_eq!(r.eliminate_duplicates(5), Recovery::Duplicate);
    }

    #[test]
    fn wraparound_is_in_order() {
        let mut r = VectorRecovery::new(8);
        let script = [65533u16, 65534, 65535, 0, 1, 65535, 0, 2];
        let got: Vec<Recovery> = script.iter().map(|&s| r.eliminate_duplicates(s)).collect();
        // Oracle: plain set of unwrapped sequence numbers.
        let unwrapped = [65533u32, 65534, 65535, 65536, 65537, 65535, 65536, 65538];
        let mut seen = std::collections::BTreeSet::new();
        let want: Vec<Recovery> = unwrapped
            .iter()
            .map(|s| if seen.insert(*s) { Recovery::Accept } else { Recovery::Duplicate })
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn stale_and_late_frames() {
        let mut r = VectorRecovery::new(4);
        r.eliminate_duplicates(10);
        assert_eq!(r.eliminate_duplicates(6), Recovery::OutOfWindow);
        assert_eq!(r.eliminate_duplicates(8), Recovery::Accept);
        assert_eq!(r.eliminate_duplicates(8), Recovery::Duplicate);
        assert_eq!(r.eliminate_duplicates(14), Recovery::OutOfWindow);
        assert_eq!(r.eliminate_duplicates(13), Recovery::Accept);
        assert_eq!(r.eliminate_duplicates(10), Recovery::Duplicate);
        assert_eq!(r.eliminate_duplicates(11), Recovery::Accept);
        assert_eq!(r.eliminate_duplicates(9), Recovery::OutOfWindow);
    }

    proptest! {
        // A second copy lagging by `skew` frames and losing some of them yields
        // every sequence number exactly once, in order.
        #[test]
        fn two_members_deliver_exactly_once(
            start in any::<u16>(),
            n in 1usize..400,
            skew in 0usize..6,
            lost in proptest::collection::btree_set(0usize..400, 0..50),
        ) {
            let mut r = VectorRecovery::new(16);
            let seqs: Vec<u16> = (0..n).map(|i| start.wrapping_add(i as u16)).collect();
            let mut arrivals = Vec::new();
            for i in 0..n + skew {
                if i < n {
                    arrivals.push(seqs[i]);
                }
                if i >= skew && !lost.contains(&(i - skew)) {
                    arrivals.push(seqs[i - skew]);
                }
            }
            let mut accepted = Vec::new();
            for s in arrivals {
                if r.eliminate_duplicates(s) == Recovery::Accept {
                    accepted.push(s);
                }
            }
            prop_assert_eq!(accepted, seqs);
        }
    }
}
