//! Superlinear convex weights `Φ_c(s) = 1 + c[(1+s)ln(1+s) - s]` certifying
//! uniform integrability of finite families, and the Young-type constant
//! `aΦ'(b) <= Φ(a) + c₂Φ(b)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Admissible values of `c`, tried from largest to smallest.
pub const DLVP_LADDER: [f64; 21] = {
    let mut out = [1.0; 21];
    let mut i = 1;
    while i < 21 {
        out[i] = out[i - 1] * 0.5;
        i += 1;
    }
    out
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiFunction {
    pub c: f64,
}

/// `(1+s)ln(1+s) - s`.
fn psi0(s: f64) -> f64 {
    (1.0 + s) * s.ln_1p() - s
}

impl PhiFunction {
    pub fn value(&self, s: f64) -> f64 {
        1.0 + self.c * psi0(s)
    }

    pub fn d1(&self, s: f64) -> f64 {
        self.c * s.ln_1p()
    }

    pub fn d2(&self, s: f64) -> f64 {
        self.c / (1.0 + s)
    }

    /// `∫ Φ(|z|)` over a family member stored as cell values.
    pub fn integral(&self, values: &[f64], cell_measure: f64) -> f64 {
        values.iter().map(|z| self.value(z.abs())).sum::<f64>() * cell_measure
    }
}

/// A finite family of functions on a common measure space (cells of a grid
/// or of a space-time slab), ordered along its parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OrliczFamily {
    pub name: String,
    pub cell_measure: f64,
    pub members: Vec<Vec<f64>>,
}

impl OrliczFamily {
    pub fn measure(&self) -> f64 {
        self.members
            .first()
            .map_or(0.0, |m| m.len() as f64 * self.cell_measure)
    }

    /// `sup_j ∫_{|z_j| > K} |z_j|`.
    pub fn tail_mass(&self, level: f64) -> f64 {
        self.members
            .iter()
            .map(|m| {
                m.iter()
                    .filter(|z| z.abs() > level)
                    .map(|z| z.abs())
                    .sum::<f64>()
                    * self.cell_measure
            })
            .fold(0.0, f64::max)
    }

    fn entropy_integrals(&self) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| m.iter().map(|z| psi0(z.abs())).sum::<f64>() * self.cell_measure)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotCheck {
    pub knots: usize,
    pub min_value: f64,
    pub min_d2: f64,
    pub max_s_d2: f64,
    /// `Φ(s_max)/s_max` divided by `min_s Φ(s)/s` over the knots.
    pub growth_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiBuild {
    pub phi: PhiFunction,
    /// `sup_j ∫Φ(|z_j|)` for each family.
    pub sup_integrals: Vec<f64>,
    pub budget: f64,
    pub knots: KnotCheck,
}

const KNOT_COUNT: usize = 10_000;

fn knots() -> Vec<f64> {
    let (lo, hi) = (1e-6f64.ln(), 1e300f64.ln());
    let mut out = vec![0.0];
    let m = KNOT_COUNT - 1;
    out.extend((0..m).map(|i| (lo + (hi - lo) * i as f64 / (m - 1) as f64).exp()));
    out
}

pub fn check_knots(phi: &PhiFunction) -> KnotCheck {
    let ks = knots();
    let mut min_value = f64::INFINITY;
    let mut min_d2 = f64::INFINITY;
    let mut max_s_d2 = 0.0f64;
    let mut min_ratio = f64::INFINITY;
    for &s in &ks {
        min_value = min_value.min(phi.value(s));
        min_d2 = min_d2.min(phi.d2(s));
        max_s_d2 = max_s_d2.max(s * phi.d2(s));
        if s > 0.0 {
            min_ratio = min_ratio.min(phi.value(s) / s);
        }
    }
    let s_max = *ks.last().unwrap();
    let growth_ratio = (phi.value(s_max) / s_max) / min_ratio;
    KnotCheck {
        knots: ks.len(),
        min_value,
        min_d2,
        max_s_d2,
        growth_ratio,
        pass: min_value >= 1.0 && min_d2 >= 0.0 && max_s_d2 <= 1.0 && growth_ratio >= 10.0,
    }
}

/// True when the running supremum of `∫Ψ(|z_j|)` keeps growing in the
/// second half of the family at least half as fast as in the first half,
/// which no bounded sequence of convergent integrals does along a
/// geometric ladder.
fn unsaturated(integrals: &[f64]) -> bool {
    if integrals.len() < 3 {
        return false;
    }
    let mut run = Vec::with_capacity(integrals.len());
    let mut m = f64::NEG_INFINITY;
    for &v in integrals {
        m = m.max(v);
        run.push(m);
    }
    let (j, mid) = (run.len() - 1, (run.len() - 1) / 2);
    let early = run[mid] - run[0];
    let late = run[j] - run[mid];
    late > 0.5 * early && late > 1e-6 * (1.0 + run[j])
}

fn tail_report(families: &[OrliczFamily], levels: &[f64]) -> String {
    let mut out = String::new();
    for f in families {
        out.push_str(&format!("\n  {}:", f.name));
        for &k in levels {
            out.push_str(&format!(" K={k:e}: {:.3e};", f.tail_mass(k)));
        }
    }
    out
}

/// Picks the largest `c` on [`DLVP_LADDER`] with
/// `sup_j ∫Φ_c(|z_j|) <= budget` for every family, after rejecting families
/// whose entropy integrals do not saturate.
pub fn build_dlvp_phi(families: &[OrliczFamily], budget: f64) -> Result<PhiBuild> {
    if families.is_empty() || families.iter().any(|f| f.members.is_empty()) {
        return Err(Error::InvalidArgument(
            "need at least one non-empty family".into(),
        ));
    }
    let dyadic: Vec<f64> = (0..=20).step_by(4).map(|i| 2f64.powi(i)).collect();
    let mut sup_entropy = Vec::with_capacity(families.len());
    for f in families {
        let ints = f.entropy_integrals();
        if unsaturated(&ints) {
            return Err(Error::Refused(format!(
                "family '{}' is not uniformly integrable: ∫(1+|z|)ln(1+|z|) - |z| keeps growing along the family \
                 ({:.4e} -> {:.4e}); tail masses sup_j ∫_{{|z|>K}}|z|:{}",
                f.name,
                ints[0],
                ints[ints.len() - 1],
                tail_report(std::slice::from_ref(f), &dyadic)
            )));
        }
        sup_entropy.push(ints.iter().copied().fold(0.0, f64::max));
    }
    let fits = |c: f64| {
        families
            .iter()
            .zip(&sup_entropy)
            .all(|(f, &e)| f.measure() + c * e <= budget)
    };
    let Some(&c) = DLVP_LADDER.iter().find(|&&c| fits(c)) else {
        let worst = families
            .iter()
            .map(OrliczFamily::measure)
            .fold(0.0, f64::max)
            .max(1e-300);
        let k = budget / worst;
        return Err(Error::Refused(format!(
            "no c in [2^-20, 1] keeps sup ∫Φ_c below the budget {budget:e}; tail masses at K = {k:e} and dyadic levels:{}",
            tail_report(families, &[&[k][..], &dyadic[..]].concat())
        )));
    };
    let phi = PhiFunction { c };
    let sup_integrals = families
        .iter()
        .map(|f| {
            f.members
                .iter()
                .map(|m| phi.integral(m, f.cell_measure))
                .fold(0.0, f64::max)
        })
        .collect();
    let knots = check_knots(&phi);
    Ok(PhiBuild {
        phi,
        sup_integrals,
        budget,
        knots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YoungConstant {
    /// Reported constant, the grid maximum with 10% headroom.
    pub c2: f64,
    pub grid_max: f64,
    pub argmax: [f64; 2],
}

/// Smallest `c₂` with `aΦ'(b) <= Φ(a) + c₂Φ(b)` on an `n × n` grid of
/// `[0, s_max]²`, plus 10% headroom.
pub fn young_constant(phi: &PhiFunction, s_max: f64, n: usize) -> Result<YoungConstant> {
    if !(s_max > 0.0) || n < 2 {
        return Err(Error::InvalidArgument(
            "Young scan needs s_max > 0 and n >= 2".into(),
        ));
    }
    let pts: Vec<f64> = (0..n).map(|i| s_max * i as f64 / (n - 1) as f64).collect();
    let mut best = (0.0f64, [0.0, 0.0]);
    for &a in &pts {
        let pa = phi.value(a);
        for &b in &pts {
            let r = (a * phi.d1(b) - pa) / phi.value(b);
            if r > best.0 {
                best = (r, [a, b]);
            }
        }
    }
    Ok(YoungConstant {
        c2: 1.1 * best.0,
        grid_max: best.0,
        argmax: best.1,
    })
}

/// Worst margin `Φ(a) + c₂Φ(b) - aΦ'(b)` over an `n × n` grid of
/// `[0, s_max]²` shifted by `offset` grid steps.
pub fn young_margin(phi: &PhiFunction, c2: f64, s_max: f64, n: usize, offset: f64) -> f64 {
    let h = s_max / (n - 1) as f64;
    let pts: Vec<f64> = (0..n)
        .map(|i| ((i as f64 + offset) * h).min(s_max))
        .collect();
    let mut worst = f64::INFINITY;
    for &a in &pts {
        for &b in &pts {
            worst = worst.min(phi.value(a) + c2 * phi.value(b) - a * phi.d1(b));
        }
    }
    worst
}
