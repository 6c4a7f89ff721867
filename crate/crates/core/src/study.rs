//! Multi-network studies: ratio statistics over random nets and bound
//! series with growth rates over generator depth.

use crate::benchgen::{build_random_net, growth_rate, BenchSpec, X2Variant, XyVariant};
use crate::bounds_dense::bound_report;
use crate::error::{Error, Result};
use crate::linalg::NormKind;
use crate::netmodel::NetworkSpec;
use crate::par::map_indexed;
use crate::report::{BoundConfig, BoundKind, BoundReport};
use serde::Serialize;

/// Bounds compared against K* in the random-network study, in column order.
pub const RATIO_BOUNDS: [BoundKind; 5] =
    [BoundKind::KBrute, BoundKind::K1, BoundKind::K2, BoundKind::K3, BoundKind::K4];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Realization {
    pub seed: u64,
    /// `bound / K*` for each of [`RATIO_BOUNDS`].
    pub ratios: [f64; 5],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub max: f64,
    pub avg: f64,
    pub min: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let avg = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - avg) * (v - avg)).sum::<f64>() / n;
        Summary {
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            avg,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomStudy {
    pub dims: Vec<usize>,
    pub norm: NormKind,
    pub realizations: Vec<Realization>,
    /// One summary per column of [`RATIO_BOUNDS`].
    pub summaries: Vec<Summary>,
}

/// Computes every bound and the brute-force constant on `count` random
/// nets with seeds `first_seed..first_seed + count`, and checks the
/// ordering invariants of each report.
pub fn random_study(
    dims: &[usize],
    first_seed: u64,
    count: usize,
    p: NormKind,
    cfg: &BoundConfig,
) -> Result<RandomStudy> {
    if count == 0 {
        return Err(Error::InvalidStructure("study needs at least one realization".into()));
    }
    // Each report runs sequentially; realizations are spread over workers.
    let inner = cfg.with_exec(crate::par::Execution::Sequential);
    let rows = map_indexed(cfg.exec, count, |i| -> Result<Realization> {
        let seed = first_seed + i as u64;
        let net = build_random_net(dims, seed)?;
        let report = bound_report(&net, p, true, &inner)?;
        report.check_invariants()?;
        Ok(Realization { seed, ratios: ratios(&report)? })
    });
    let realizations = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let summaries = (0..RATIO_BOUNDS.len())
        .map(|k| Summary::of(&realizations.iter().map(|r| r.ratios[k]).collect::<Vec<_>>()))
        .collect();
    Ok(RandomStudy { dims: dims.to_vec(), norm: p, realizations, summaries })
}

fn ratios(r: &BoundReport) -> Result<[f64; 5]> {
    let kstar = r.get(BoundKind::KStar).ok_or_else(|| missing(r, BoundKind::KStar))?;
    let mut out = [0.0; 5];
    for (o, &b) in out.iter_mut().zip(&RATIO_BOUNDS) {
        *o = r.get(b).ok_or_else(|| missing(r, b))? / kstar;
    }
    Ok(out)
}

fn missing(r: &BoundReport, b: BoundKind) -> Error {
    let why = r.entry(b).and_then(|e| e.skipped.clone()).unwrap_or_else(|| "not computed".into());
    Error::InvalidStructure(format!("{b} unavailable for {}: {why}", r.model))
}

/// Constructive family indexed by depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    X2(X2Variant),
    /// Indexed by the number of series terms `n`.
    Xy(XyVariant),
}

impl Family {
    pub fn build(self, depth: usize) -> Result<NetworkSpec> {
        match self {
            Family::X2(variant) => BenchSpec::X2 { depth, variant }.build(),
            Family::Xy(variant) => BenchSpec::Xy { terms: depth, variant }.build(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthSeries {
    pub bound: BoundKind,
    pub depths: Vec<usize>,
    pub values: Vec<f64>,
    /// `G` for each consecutive triple; `None` when the middle difference is zero.
    pub growth: Vec<Option<f64>>,
}

/// Bound values over a depth range and their growth rates. Bounds that are
/// skipped at any depth are left out.
pub fn growth_study(
    family: Family,
    depths: std::ops::RangeInclusive<usize>,
    p: NormKind,
    cfg: &BoundConfig,
) -> Result<Vec<GrowthSeries>> {
    let depths: Vec<usize> = depths.collect();
    if depths.len() < 3 {
        return Err(Error::ShapeMismatch(format!("growth needs at least 3 depths, got {}", depths.len())));
    }
    let reports = depths
        .iter()
        .map(|&d| {
            let r = bound_report(&family.build(d)?, p, false, cfg)?;
            r.check_invariants()?;
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for b in [BoundKind::KStar, BoundKind::K1, BoundKind::K2, BoundKind::K3, BoundKind::K4] {
        let Some(values) = reports.iter().map(|r| r.get(b)).collect::<Option<Vec<f64>>>() else {
            continue;
        };
        let growth = values
            .windows(3)
            .map(|w| match growth_rate(w) {
                Ok(g) => Ok(Some(g[0])),
                Err(Error::DegenerateSeries { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(GrowthSeries { bound: b, depths: depths.clone(), values, growth });
    }
    Ok(out)
}
