//! Explicit and implicit bounds for lowered convolutional networks.
//!
//! Both approaches run the same subset engine on a [`SplitChain`] built
//! from the plan. In the explicit approach each pairwise max stage is a
//! split with `W⁺ = M⁺`, `W⁻ = M⁻`; in the implicit approach a max-pool
//! layer is a single split whose `W⁺` and `R` factor are the 𝟙 pattern.

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, NormKind};
use crate::lowering::{lower_network, Approach, LoweredPlan, PlanBlock};
use crate::netmodel::NetworkSpec;
use crate::par::map_indexed;
use crate::report::{timed_entry, BoundConfig, BoundEntry, BoundKind, ConvBoundReport};
use crate::subsets::{self, PartialProducts, SplitChain};

fn check_norm(p: NormKind, bound: &'static str) -> Result<()> {
    if p == NormKind::L2 {
        return Err(Error::UnsupportedNorm { norm: p.to_string(), bound });
    }
    Ok(())
}

fn report(plan: &LoweredPlan, p: NormKind, include_brute: bool, cfg: &BoundConfig) -> Result<ConvBoundReport> {
    check_norm(p, "convolutional bounds")?;
    let chain = SplitChain::from_plan(plan)?;
    let depth = chain.depth();
    if depth > cfg.depth_cap {
        return Err(Error::DepthTooLarge { depth, cap: cfg.depth_cap });
    }
    let pp = PartialProducts::new(&chain, cfg.exec)?;
    let mut entries: Vec<BoundEntry> = vec![
        timed_entry(BoundKind::KStar, || Ok((subsets::k_star(&chain, p)?, None)))?,
        timed_entry(BoundKind::K1, || {
            subsets::k1_sum(&pp, p, cfg.depth_cap, cfg.exec).map(|(v, t)| (v, Some(t)))
        })?,
        timed_entry(BoundKind::K3, || Ok((subsets::k3(&chain, p)?, None)))?,
        timed_entry(BoundKind::K4, || {
            subsets::k4_sum(&pp, p, cfg.depth_cap, cfg.exec).map(|(v, t)| (v, Some(t)))
        })?,
    ];
    if include_brute {
        entries.push(timed_entry(BoundKind::KBrute, || Ok((brute_force_k_conv(plan, p, cfg)?, None)))?);
    }
    Ok(ConvBoundReport {
        model: String::new(),
        norm: p,
        approach: Some(plan.approach),
        effective_depth: depth,
        term_count: 1u64 << depth.min(63),
        entries,
    })
}

fn expect_approach(plan: &LoweredPlan, approach: Approach) -> Result<()> {
    if plan.approach != approach {
        return Err(Error::InvalidStructure(format!(
            "plan was lowered with the {} approach, expected {}",
            plan.approach, approach
        )));
    }
    Ok(())
}

/// K*, K1, K3 and K4 for a plan with max-pools split into pairwise stages.
pub fn conv_bounds_explicit(plan: &LoweredPlan, p: NormKind, cfg: &BoundConfig) -> Result<ConvBoundReport> {
    expect_approach(plan, Approach::Explicit)?;
    report(plan, p, false, cfg)
}

/// K*, K1, K3 and K4 for a plan with max-pools kept whole.
pub fn conv_bounds_implicit(plan: &LoweredPlan, p: NormKind, cfg: &BoundConfig) -> Result<ConvBoundReport> {
    expect_approach(plan, Approach::Implicit)?;
    report(plan, p, false, cfg)
}

/// Lowers `net` and computes the report for its approach, optionally
/// with the brute-force constant (skipped with a reason above the cap).
pub fn network_report(
    net: &NetworkSpec,
    approach: Approach,
    p: NormKind,
    include_brute: bool,
    cfg: &BoundConfig,
) -> Result<ConvBoundReport> {
    let plan = lower_network(net, approach)?;
    let mut r = report(&plan, p, include_brute, cfg)?;
    r.model = net.name().to_string();
    Ok(r)
}

/// One input-dependent factor of the gradient and its number of states.
enum Selector<'a> {
    Relu(usize),
    Stage(&'a crate::lowering::MaxStage),
    Pool(&'a crate::lowering::MaxPoolImplicitBlock),
}

enum Factor<'a> {
    Fixed(&'a CsrMatrix),
    Select(Selector<'a>),
}

impl Selector<'_> {
    /// Radix of each digit this selector consumes.
    fn digits(&self) -> Vec<usize> {
        match self {
            Selector::Relu(w) => vec![2; *w],
            Selector::Stage(s) => vec![2; s.pairs.len()],
            Selector::Pool(m) => vec![m.window_size; m.windows.len()],
        }
    }
}

fn keep_rows(m: &CsrMatrix, digits: &[usize]) -> CsrMatrix {
    let entries = (0..m.rows())
        .filter(|&i| digits[i] == 1)
        .flat_map(|i| m.row(i).map(move |(j, v)| (i, j, v)))
        .collect();
    CsrMatrix::from_triplets(m.rows(), m.cols(), entries).expect("indices in range")
}

/// Exact `max ‖G‖` over every ReLU corner and every max selection, where
/// `G` is the lowered gradient product. Explicit plans enumerate one sign
/// per stage pair, implicit plans one argmax per window.
pub fn brute_force_k_conv(plan: &LoweredPlan, p: NormKind, cfg: &BoundConfig) -> Result<f64> {
    let mut factors = Vec::new();
    for b in &plan.blocks {
        match b {
            PlanBlock::Linear(l) => factors.push(Factor::Fixed(&l.matrix)),
            PlanBlock::Relu { width } => factors.push(Factor::Select(Selector::Relu(*width))),
            PlanBlock::MaxPoolExplicit(m) => {
                factors.extend(m.stages.iter().map(|s| Factor::Select(Selector::Stage(s))));
            }
            PlanBlock::MaxPoolImplicit(m) => factors.push(Factor::Select(Selector::Pool(m))),
        }
    }
    let radices: Vec<usize> = factors
        .iter()
        .flat_map(|f| match f {
            Factor::Select(s) => s.digits(),
            Factor::Fixed(_) => Vec::new(),
        })
        .collect();
    let bits: f64 = radices.iter().map(|&r| (r as f64).log2()).sum();
    let bits = bits.ceil() as usize;
    if bits > cfg.neuron_cap {
        return Err(Error::TooManyNeurons { count: bits, cap: cfg.neuron_cap });
    }
    let total: usize = radices.iter().product();

    let eval = |mut code: usize| -> Result<f64> {
        let mut digits = Vec::with_capacity(radices.len());
        for &r in &radices {
            digits.push(code % r);
            code /= r;
        }
        let mut used = 0;
        let mut g: Option<CsrMatrix> = None;
        for f in &factors {
            let next = match f {
                Factor::Fixed(m) => match &g {
                    None => (*m).clone(),
                    Some(g) => m.matmul(g, crate::par::Execution::Sequential)?,
                },
                Factor::Select(s) => {
                    let n = s.digits().len();
                    let d = &digits[used..used + n];
                    used += n;
                    let g = g.take().unwrap_or_else(|| CsrMatrix::identity(plan.input_dim));
                    match s {
                        Selector::Relu(_) => keep_rows(&g, d),
                        Selector::Stage(st) => {
                            let signs: Vec<f64> = d.iter().map(|&b| if b == 1 { 1.0 } else { -1.0 }).collect();
                            st.with_signs(&signs).matmul(&g, crate::par::Execution::Sequential)?
                        }
                        Selector::Pool(m) => m.with_choices(d).matmul(&g, crate::par::Execution::Sequential)?,
                    }
                }
            };
            g = Some(next);
        }
        g.unwrap_or_else(|| CsrMatrix::identity(plan.input_dim)).norm(p)
    };

    // Contiguous ranges of codes per work item keep the result independent
    // of the thread count.
    let items = total.min(4096);
    let per = total.div_ceil(items);
    let maxima = map_indexed(cfg.exec, items, |k| -> Result<f64> {
        let mut best: f64 = 0.0;
        for code in k * per..((k + 1) * per).min(total) {
            best = best.max(eval(code)?);
        }
        Ok(best)
    });
    maxima.into_iter().try_fold(0.0, |m, v| Ok(f64::max(m, v?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds_dense;
    use crate::linalg::Matrix;
    use crate::netmodel::{ActivationKind, LayerSpec, Pool2d, Shape};

    fn pool_net(h: usize, w: usize, pool: (usize, usize)) -> NetworkSpec {
        let p = Pool2d { pool, stride: pool };
        let (oh, ow) = p.output(h, w).unwrap();
        let n = oh * ow;
        NetworkSpec::new(
            "pool",
            Shape::Image { h, w, c: 1 },
            vec![
                LayerSpec::MaxPool2d(p),
                LayerSpec::Dense { weight: Matrix::identity(n), bias: vec![0.0; n] },
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_pool_explicit_kstar() {
        // a 2×2 pool on a 2×2 input: one row stage then one column stage
        let net = pool_net(2, 2, (2, 2));
        let cfg = BoundConfig::conv();
        let plan = lower_network(&net, Approach::Explicit).unwrap();
        let r = conv_bounds_explicit(&plan, NormKind::Linf, &cfg).unwrap();
        assert_eq!(r.get(BoundKind::KStar), Some(4.0));
        assert_eq!(r.effective_depth, 2);
        assert_eq!(brute_force_k_conv(&plan, NormKind::Linf, &cfg).unwrap(), 1.0);
        let plan = lower_network(&net, Approach::Implicit).unwrap();
        let r = conv_bounds_implicit(&plan, NormKind::Linf, &cfg).unwrap();
        assert_eq!(r.effective_depth, 1);
        assert_eq!(brute_force_k_conv(&plan, NormKind::Linf, &cfg).unwrap(), 1.0);
        r.check_invariants().unwrap();
    }

    #[test]
    fn approach_mismatch_and_l2() {
        let net = pool_net(2, 2, (2, 2));
        let cfg = BoundConfig::conv();
        let plan = lower_network(&net, Approach::Explicit).unwrap();
        assert!(matches!(conv_bounds_implicit(&plan, NormKind::Linf, &cfg), Err(Error::InvalidStructure(_))));
        assert!(matches!(conv_bounds_explicit(&plan, NormKind::L2, &cfg), Err(Error::UnsupportedNorm { .. })));
    }

    #[test]
    fn dense_plan_matches_dense_bounds() {
        let net = crate::benchgen::build_random_net(&[4, 5, 3, 2], 9).unwrap();
        let cfg = BoundConfig::conv();
        for p in [NormKind::L1, NormKind::Linf] {
            let dense = bounds_dense::bound_report(&net, p, true, &BoundConfig::dense()).unwrap();
            for a in [Approach::Explicit, Approach::Implicit] {
                let r = network_report(&net, a, p, true, &cfg).unwrap();
                for kind in [BoundKind::KStar, BoundKind::K1, BoundKind::K3, BoundKind::K4, BoundKind::KBrute] {
                    let (x, y) = (r.get(kind).unwrap(), dense.get(kind).unwrap());
                    assert!((x - y).abs() <= 1e-12 * y.max(1.0), "{a} {p} {kind}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn brute_force_cap() {
        let net = NetworkSpec::new(
            "wide",
            Shape::Flat(1),
            vec![
                LayerSpec::Dense { weight: Matrix::zeros(30, 1), bias: vec![0.0; 30] },
                LayerSpec::Activation(ActivationKind::Relu),
                LayerSpec::Dense { weight: Matrix::zeros(1, 30), bias: vec![0.0] },
            ],
        )
        .unwrap();
        let plan = lower_network(&net, Approach::Implicit).unwrap();
        let e = brute_force_k_conv(&plan, NormKind::Linf, &BoundConfig::conv()).unwrap_err();
        assert_eq!(e, Error::TooManyNeurons { count: 30, cap: 20 });
    }
}
