//! Randomised comparison of the fast split search against the brute-force oracle.

use crate::dgp::{sample_dataset, DgpConfig, ErrorDist, ErrorFamily};
use crate::rng::RngStream;
use crate::splitting::{
    best_split, brute_force_candidates, brute_force_split, coordinate_orders, criterion_profile, SplitRule,
};

/// Relative tolerance for criterion values.
pub const VALUE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleReport {
    pub instances: usize,
    /// Fast and brute-force argmax agree on `(k, l)` for every rule.
    pub argmax_mismatches: Vec<String>,
    /// Criterion values agree at every candidate.
    pub value_mismatches: Vec<String>,
    /// IPW argmax equals CART argmax on transformed outcomes.
    pub ipw_cart_mismatches: Vec<String>,
    /// T-statistic argmax equals DIM argmax whenever both are valid.
    pub tstat_dim_mismatches: Vec<String>,
    /// Two-arm SSE plus the group-variance criterion is constant over candidates.
    pub sse_identity_violations: Vec<String>,
    pub tstat_dim_compared: usize,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.argmax_mismatches.is_empty()
            && self.value_mismatches.is_empty()
            && self.ipw_cart_mismatches.is_empty()
            && self.tstat_dim_mismatches.is_empty()
            && self.sse_identity_violations.is_empty()
    }
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= VALUE_TOL * a.abs().max(b.abs()) + 1e-12 * scale
}

/// A random design: `n` in 2..=50, `p` in 1..=3, varied treatment shares,
/// arm means and error families.
pub fn random_design(stream: &mut RngStream) -> DgpConfig {
    let families = [ErrorFamily::Normal, ErrorFamily::Laplace, ErrorFamily::Uniform, ErrorFamily::CenteredExponential];
    let mut cfg = DgpConfig::null(2 + stream.below(49), 1 + stream.below(3));
    cfg.xi = [0.5, 0.3, 0.7, 0.1][stream.below(4)];
    cfg.c0 = stream.standard_normal();
    cfg.c1 = cfg.c0 + [0.0, 1.0, -2.0][stream.below(3)];
    cfg.err0 = ErrorDist { family: families[stream.below(4)], scale: 0.5 + stream.uniform() };
    cfg.err1 = ErrorDist { family: families[stream.below(4)], scale: 0.5 + stream.uniform() };
    cfg
}

/// Runs every oracle check on `instances` random datasets derived from `seed`.
pub fn oracle_battery(seed: u64, instances: usize) -> OracleReport {
    let mut report = OracleReport { instances, ..Default::default() };
    for i in 0..instances {
        let mut stream = RngStream::derive(seed, "selftest", i as u64);
        let cfg = random_design(&mut stream);
        let data = sample_dataset(&cfg, &mut stream).expect("random designs are valid");
        let orders = coordinate_orders(&data);
        let scale = 1.0 + data.y().iter().map(|v| v * v).sum::<f64>() / cfg.xi.min(1.0 - cfg.xi).powi(2);
        let rules = [SplitRule::CartSse, SplitRule::DimVar, SplitRule::IpwVar { xi: cfg.xi }, SplitRule::SseTwoMeans, SplitRule::TStat];
        for rule in rules {
            let fast = best_split(&data, &orders, rule).unwrap();
            let slow = brute_force_split(&data, rule);
            if (fast.valid, fast.coordinate, fast.index) != (slow.valid, slow.coordinate, slow.index)
                || (fast.valid && !close(fast.value, slow.value, scale))
            {
                report.argmax_mismatches.push(format!("instance {i}, {rule}: fast {fast:?}, oracle {slow:?}"));
            }
            let profile = criterion_profile(&data, &orders, rule).unwrap();
            let candidates = brute_force_candidates(&data, rule);
            for c in &candidates {
                let v = profile.get(c.index, c.coordinate);
                let agree = match (v, c.value) {
                    (Some(a), Some(b)) => close(a, b, scale),
                    (None, None) => true,
                    _ => false,
                };
                if !agree {
                    report.value_mismatches.push(format!("instance {i}, {rule}, k = {}, l = {}: {v:?} vs {:?}", c.index, c.coordinate, c.value));
                }
            }
            if rule == SplitRule::SseTwoMeans {
                let sums: Vec<f64> = candidates.iter().filter_map(|c| Some(c.value? + c.two_arm_sse?)).collect();
                if let Some(&first) = sums.first() {
                    if sums.iter().any(|&s| !close(s, first, scale)) {
                        report.sse_identity_violations.push(format!("instance {i}: {sums:?}"));
                    }
                }
            }
        }
        let ipw = best_split(&data, &orders, SplitRule::IpwVar { xi: cfg.xi }).unwrap();
        let transformed = data.transformed(cfg.xi).unwrap();
        let cart = best_split(&transformed, &orders, SplitRule::CartSse).unwrap();
        if (ipw.valid, ipw.coordinate, ipw.index) != (cart.valid, cart.coordinate, cart.index) {
            report.ipw_cart_mismatches.push(format!("instance {i}: ipw {ipw:?}, cart {cart:?}"));
        }
        // the T statistic is a monotone function of the DIM criterion wherever S^2 > 0
        let t_profile = criterion_profile(&data, &orders, SplitRule::TStat).unwrap();
        let d_profile = criterion_profile(&data, &orders, SplitRule::DimVar).unwrap();
        let comparable = (0..data.p()).all(|l| {
            t_profile.coordinate(l).iter().zip(d_profile.coordinate(l)).all(|(t, d)| t.is_some() == d.is_some())
        });
        if comparable {
            let t = best_split(&data, &orders, SplitRule::TStat).unwrap();
            let d = best_split(&data, &orders, SplitRule::DimVar).unwrap();
            if t.valid && d.valid {
                report.tstat_dim_compared += 1;
                if (t.coordinate, t.index) != (d.coordinate, d.index) {
                    report.tstat_dim_mismatches.push(format!("instance {i}: tstat {t:?}, dim {d:?}"));
                }
            }
        }
    }
    report
}
