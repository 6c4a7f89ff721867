//! Bound reports, their ordering invariants and engine configuration.

use crate::error::{Error, Result};
use crate::linalg::NormKind;
use crate::lowering::Approach;
use crate::par::Execution;
use serde::Serialize;
use std::fmt;

/// Relative slack used when checking the ordering between bounds.
pub const ORDER_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BoundKind {
    #[serde(rename = "K*")]
    KStar,
    K1,
    K2,
    K3,
    K4,
    /// The activation-relaxed constant K, by exhaustive enumeration.
    #[serde(rename = "K")]
    KBrute,
}

impl BoundKind {
    pub const ALL: [BoundKind; 6] =
        [BoundKind::KStar, BoundKind::K1, BoundKind::K2, BoundKind::K3, BoundKind::K4, BoundKind::KBrute];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::KStar => "K*",
            BoundKind::K1 => "K1",
            BoundKind::K2 => "K2",
            BoundKind::K3 => "K3",
            BoundKind::K4 => "K4",
            BoundKind::KBrute => "K",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Enumeration caps and execution strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundConfig {
    /// Maximum number of splits for the subset sums.
    pub depth_cap: usize,
    /// Maximum layer width for the corner enumeration in K2.
    pub width_cap: usize,
    /// Maximum number of selector bits for brute-force K.
    pub neuron_cap: usize,
    pub exec: Execution,
}

impl BoundConfig {
    pub fn dense() -> Self {
        BoundConfig { depth_cap: 24, width_cap: 20, neuron_cap: 22, exec: Execution::default() }
    }

    pub fn conv() -> Self {
        BoundConfig { depth_cap: 22, width_cap: 20, neuron_cap: 20, exec: Execution::default() }
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig::dense()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEntry {
    pub bound: BoundKind,
    pub value: Option<f64>,
    /// Why the bound was not computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    pub time_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terms: Option<u64>,
}

/// All bounds computed for one network, norm and approach.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub model: String,
    pub norm: NormKind,
    /// `None` for dense networks.
    pub approach: Option<Approach>,
    /// Number of splits (ℓ for dense nets, ℓ′ for explicit CNN plans).
    pub effective_depth: usize,
    /// Number of subset terms, `2^effective_depth`.
    pub term_count: u64,
    pub entries: Vec<BoundEntry>,
}

/// Report produced for lowered convolutional plans.
pub type ConvBoundReport = BoundReport;

impl BoundReport {
    pub fn get(&self, kind: BoundKind) -> Option<f64> {
        self.entries.iter().find(|e| e.bound == kind).and_then(|e| e.value)
    }

    pub fn entry(&self, kind: BoundKind) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.bound == kind)
    }

    pub fn approach_label(&self) -> &'static str {
        self.approach.map_or("dense", Approach::as_str)
    }

    /// Every ordering between bounds that theory guarantees, as `(lhs, rhs)` pairs present in this report.
    pub fn ordering_pairs(&self) -> Vec<(BoundKind, BoundKind)> {
        use BoundKind::*;
        let pairs = [
            (KBrute, K4),
            (KBrute, K2),
            (KBrute, K1),
            (KBrute, K3),
            (KBrute, KStar),
            (K4, K1),
            (K4, K3),
            (K1, KStar),
            (K3, KStar),
        ];
        // K2 ≤ K* only follows from its factors telescoping in the spectral norm.
        let spectral = (self.norm == NormKind::L2).then_some((K2, KStar));
        pairs
            .into_iter()
            .chain(spectral)
            .filter(|&(a, b)| self.get(a).is_some() && self.get(b).is_some())
            .collect()
    }

    /// Fails with `InvariantViolation` if any ordering is broken.
    pub fn check_invariants(&self) -> Result<()> {
        for (a, b) in self.ordering_pairs() {
            let (x, y) = (self.get(a).unwrap(), self.get(b).unwrap());
            if !leq_slack(x, y) {
                return Err(Error::InvariantViolation(format!(
                    "{}: {a} = {x} exceeds {b} = {y} ({} {})",
                    self.model,
                    self.norm,
                    self.approach_label()
                )));
            }
        }
        Ok(())
    }
}

/// `a ≤ b` up to the relative ordering slack.
pub fn leq_slack(a: f64, b: f64) -> bool {
    a <= b + ORDER_SLACK * a.abs().max(b.abs())
}

/// Runs `f`, recording its value or the reason it was skipped.
/// Cap and norm-support errors become skip reasons; other errors propagate.
pub(crate) fn timed_entry(bound: BoundKind, f: impl FnOnce() -> Result<(f64, Option<u64>)>) -> Result<BoundEntry> {
    let start = std::time::Instant::now();
    let out = f();
    let time_ms = start.elapsed().as_secs_f64() * 1e3;
    match out {
        Ok((v, terms)) => Ok(BoundEntry { bound, value: Some(v), skipped: None, time_ms, terms }),
        Err(
            e @ (Error::UnsupportedNorm { .. }
            | Error::DepthTooLarge { .. }
            | Error::WidthTooLarge { .. }
            | Error::TooManyNeurons { .. }),
        ) => Ok(BoundEntry { bound, value: None, skipped: Some(format!("{}: {e}", e.code())), time_ms, terms: None }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(norm: NormKind, k2: f64) -> BoundReport {
        let entry = |bound, v| BoundEntry { bound, value: Some(v), skipped: None, time_ms: 0.0, terms: None };
        BoundReport {
            model: "m".into(),
            norm,
            approach: None,
            effective_depth: 1,
            term_count: 2,
            entries: vec![entry(BoundKind::KStar, 10.0), entry(BoundKind::K2, k2), entry(BoundKind::KBrute, 1.0)],
        }
    }

    #[test]
    fn k2_above_kstar_only_fails_in_l2() {
        assert!(report(NormKind::L1, 11.0).check_invariants().is_ok());
        assert!(report(NormKind::Linf, 11.0).check_invariants().is_ok());
        assert!(matches!(report(NormKind::L2, 11.0).check_invariants(), Err(Error::InvariantViolation(_))));
        assert!(matches!(report(NormKind::L1, 0.5).check_invariants(), Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn slack_is_relative() {
        assert!(leq_slack(1e6 + 1e-4, 1e6));
        assert!(!leq_slack(1.0 + 1e-6, 1.0));
    }
}
