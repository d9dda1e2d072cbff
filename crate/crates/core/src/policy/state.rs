use crate::model::{ModelError, Observation, ObservationModel};

/// Per-trial statistics: sum LLR per cell, probe counts and switch count.
///
/// Cells are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeState {
    n: u64,
    sums: Vec<f64>,
    probes: Vec<u64>,
    last_action: Option<usize>,
    switches: u64,
}

impl ProbeState {
    pub fn new(cells: usize) -> Self {
        Self {
            n: 0,
            sums: vec![0.0; cells],
            probes: vec![0; cells],
            last_action: None,
            switches: 0,
        }
    }

    /// Builds a state with the given sums and no recorded history.
    /// Useful for evaluating decision rules at arbitrary points.
    pub fn from_sums(sums: Vec<f64>) -> Self {
        let cells = sums.len();
        Self {
            n: 0,
            sums,
            probes: vec![0; cells],
            last_action: None,
            switches: 0,
        }
    }

    pub fn with_last_action(mut self, cell: usize) -> Self {
        self.last_action = Some(cell);
        self
    }

    pub fn cells(&self) -> usize {
        self.sums.len()
    }

    /// Number of observations taken so far.
    pub fn steps(&self) -> u64 {
        self.n
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn probes(&self) -> &[u64] {
        &self.probes
    }

    pub fn last_action(&self) -> Option<usize> {
        self.last_action
    }

    pub fn switches(&self) -> u64 {
        self.switches
    }

    /// Attributes an observation from `cell` to that cell's sum LLR.
    pub fn update(
        &mut self,
        cell: usize,
        y: Observation,
        model: &ObservationModel,
    ) -> Result<f64, ModelError> {
        let llr = model.llr(y)?;
        self.record(cell, llr);
        Ok(llr)
    }

    /// Adds an already computed LLR to `cell`. The first probe is never a switch.
    pub fn record(&mut self, cell: usize, llr: f64) {
        self.sums[cell] += llr;
        self.probes[cell] += 1;
        self.n += 1;
        if self.last_action.is_some_and(|last| last != cell) {
            self.switches += 1;
        }
        self.last_action = Some(cell);
    }

    /// Index of the largest sum LLR, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.sums)
    }

    /// Largest and second-largest cells (lowest index on ties).
    /// Requires at least two cells.
    pub fn top_two(&self) -> (usize, usize) {
        top_two(&self.sums)
    }

    /// `S_(1) - S_(2)`, the gap between the two largest sums.
    pub fn top_gap(&self) -> f64 {
        let (first, second) = self.top_two();
        self.sums[first] - self.sums[second]
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn top_two(values: &[f64]) -> (usize, usize) {
    let first = argmax(values);
    let mut second: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if i == first {
            continue;
        }
        match second {
            Some(j) if v <= values[j] => {}
            _ => second = Some(i),
        }
    }
    (first, second.expect("top_two needs at least two cells"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn switches_count_transitions_only() {
        let mut s = ProbeState::new(5);
        s.record(1, 0.5);
        assert_eq!(s.switches(), 0);
        s.record(1, 0.5);
        assert_eq!(s.switches(), 0);
        s.record(2, -1.0);
        assert_eq!(s.switches(), 1);
        assert_eq!(s.steps(), 3);
        assert_eq!(s.probes(), &[0, 2, 1, 0, 0]);
        assert_eq!(s.sums(), &[0.0, 1.0, -1.0, 0.0, 0.0]);
        assert_eq!(s.last_action(), Some(2));
    }

    #[test]
    fn update_applies_llr() {
        let model = ObservationModel::poisson(10.0, 1.0).unwrap();
        let mut s = ProbeState::new(3);
        let l = s.update(0, Observation(3), &model).unwrap();
        assert!((l - 2.0922).abs() < 1e-4);
        assert_eq!(s.sums()[0], l);
    }

    #[test]
    fn order_statistics_tie_break_low_index() {
        let s = ProbeState::from_sums(vec![0.0; 5]);
        assert_eq!(s.argmax(), 0);
        assert_eq!(s.top_two(), (0, 1));
        let s = ProbeState::from_sums(vec![3.0, 1.0, 0.0, -1.0, -2.0]);
        assert_eq!(s.top_two(), (0, 1));
        let s = ProbeState::from_sums(vec![-1.0, 2.0, 2.0, 0.0]);
        assert_eq!(s.top_two(), (1, 2));
        let s = ProbeState::from_sums(vec![f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0]);
        assert_eq!(s.top_two(), (2, 0));
    }
}
