//! Dense joint pmfs over named finite variables and the entropy kernels
//! built on them. All quantities are in bits, with `0 log 0 = 0`.

use crate::error::{invalid, Error, Result};

/// Default cap on the number of cells in any dense tensor.
pub const DEFAULT_MAX_CELLS: usize = 10_000_000;

/// Environment variable overriding [`DEFAULT_MAX_CELLS`].
pub const MAX_CELLS_ENV: &str = "MACREGIONS_MAX_CELLS";

/// Cells must sum to one within this tolerance.
pub const SUM_TOL: f64 = 1e-9;

/// Cell cap in effect, read from the environment on each call.
pub fn max_cells() -> usize {
    std::env::var(MAX_CELLS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(DEFAULT_MAX_CELLS)
}

/// Product of `sizes`, failing if it overflows or exceeds the cell cap.
pub fn checked_cells(sizes: &[usize]) -> Result<usize> {
    let cap = max_cells();
    let mut n: usize = 1;
    for &s in sizes {
        n = n
            .checked_mul(s)
            .ok_or_else(|| Error::Resource("tensor size overflows usize".into()))?;
    }
    if n > cap {
        return Err(Error::Resource(format!(
            "tensor needs {n} cells, cap is {cap} (set {MAX_CELLS_ENV} to raise it)"
        )));
    }
    Ok(n)
}

#[inline]
pub(crate) fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// A named finite variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Axis {
    pub name: String,
    pub size: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Axis {
            name: name.into(),
            size,
        }
    }
}

/// Joint pmf stored as a dense row-major tensor (last axis fastest).
#[derive(Clone, Debug)]
pub struct JointPMF {
    axes: Vec<Axis>,
    values: Vec<f64>,
}

impl JointPMF {
    /// Validates nonnegativity, normalization and axis-name uniqueness.
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Result<Self> {
        for (i, a) in axes.iter().enumerate() {
            if a.size == 0 {
                return invalid(format!("axis {} has size 0", a.name));
            }
            if axes[..i].iter().any(|b| b.name == a.name) {
                return invalid(format!("duplicate axis name {}", a.name));
            }
        }
        let sizes: Vec<usize> = axes.iter().map(|a| a.size).collect();
        let n = checked_cells(&sizes)?;
        if values.len() != n {
            return invalid(format!("expected {n} cells, got {}", values.len()));
        }
        let mut total = 0.0;
        for &v in &values {
            if !(v >= 0.0) || !v.is_finite() {
                return invalid(format!("cell value {v} is not a probability"));
            }
            total += v;
        }
        if (total - 1.0).abs() > SUM_TOL {
            return invalid(format!("cells sum to {total}, not 1"));
        }
        Ok(JointPMF { axes, values })
    }

    /// Builds a joint by evaluating `f` on every outcome tuple.
    pub fn from_fn(axes: Vec<Axis>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let sizes: Vec<usize> = axes.iter().map(|a| a.size).collect();
        let n = checked_cells(&sizes)?;
        let mut values = Vec::with_capacity(n);
        let mut idx = vec![0usize; sizes.len()];
        for _ in 0..n {
            values.push(f(&idx));
            for k in (0..sizes.len()).rev() {
                idx[k] += 1;
                if idx[k] < sizes[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self::new(axes, values)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.size).collect()
    }

    pub fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::Validation(format!("unknown variable {name}")))
    }

    fn mask_of(&self, vars: &[&str]) -> Result<u64> {
        let mut mask = 0u64;
        for v in vars {
            let i = self.axis_index(v)?;
            if i >= 64 {
                return invalid("at most 64 axes are supported");
            }
            mask |= 1 << i;
        }
        Ok(mask)
    }

    /// Marginal pmf on `vars`, axes kept in the joint's order.
    pub fn marginal(&self, vars: &[&str]) -> Result<JointPMF> {
        let mask = self.mask_of(vars)?;
        let plan = MarginalPlan::new(&self.sizes(), mask);
        let mut out = vec![0.0; plan.len()];
        plan.accumulate(&self.values, &mut out);
        let axes = self
            .axes
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, a)| a.clone())
            .collect();
        Ok(JointPMF { axes, values: out })
    }

    /// Entropy H(vars) in bits. An empty set gives 0.
    pub fn entropy(&self, vars: &[&str]) -> Result<f64> {
        let mask = self.mask_of(vars)?;
        Ok(MarginalPlan::new(&self.sizes(), mask).entropy(&self.values, &mut Vec::new()))
    }

    /// Conditional entropy H(a | c).
    pub fn cond_entropy(&self, a: &[&str], c: &[&str]) -> Result<f64> {
        let ac: Vec<&str> = a.iter().chain(c.iter()).copied().collect();
        Ok((self.entropy(&ac)? - self.entropy(c)?).max(0.0))
    }

    /// I(A;B|C) in bits. The sets must be pairwise disjoint; C may be empty.
    /// Round-off down to -1e-12 is clamped to zero.
    pub fn cond_mutual_info(&self, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
        let ma = self.mask_of(a)?;
        let mb = self.mask_of(b)?;
        let mc = self.mask_of(c)?;
        if ma & mb != 0 || ma & mc != 0 || mb & mc != 0 {
            return invalid("variable sets of a mutual information overlap");
        }
        let sizes = self.sizes();
        let mut scratch = Vec::new();
        let mut h = |m: u64| MarginalPlan::new(&sizes, m).entropy(&self.values, &mut scratch);
        let v = h(ma | mc) + h(mb | mc) - h(ma | mb | mc) - h(mc);
        Ok(clamp_info(v, 1e-12))
    }

    pub fn mutual_info(&self, a: &[&str], b: &[&str]) -> Result<f64> {
        self.cond_mutual_info(a, b, &[])
    }
}

/// Clamps small negative round-off to zero; larger negatives pass through.
pub fn clamp_info(v: f64, tol: f64) -> f64 {
    if v < 0.0 && v >= -tol {
        0.0
    } else {
        v
    }
}

/// Precomputed index map from joint cells to the cells of a marginal.
///
/// Building the plan once and reusing it is much cheaper than re-deriving
/// strides per evaluation; the search loops rely on this.
#[derive(Clone, Debug)]
pub struct MarginalPlan {
    targets: Vec<u32>,
    len: usize,
}

impl MarginalPlan {
    pub fn new(sizes: &[usize], mask: u64) -> Self {
        let k = sizes.len();
        let mut mult = vec![0usize; k];
        let mut len = 1usize;
        for i in (0..k).rev() {
            if mask & (1 << i) != 0 {
                mult[i] = len;
                len *= sizes[i];
            }
        }
        let n: usize = sizes.iter().product();
        let mut targets = Vec::with_capacity(n);
        let mut idx = vec![0usize; k];
        let mut t = 0usize;
        for _ in 0..n {
            targets.push(t as u32);
            for a in (0..k).rev() {
                idx[a] += 1;
                t += mult[a];
                if idx[a] < sizes[a] {
                    break;
                }
                t -= mult[a] * sizes[a];
                idx[a] = 0;
            }
        }
        MarginalPlan { targets, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn accumulate(&self, values: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (&t, &v) in self.targets.iter().zip(values) {
            out[t as usize] += v;
        }
    }

    pub fn entropy(&self, values: &[f64], scratch: &mut Vec<f64>) -> f64 {
        if self.len == 1 {
            return 0.0;
        }
        scratch.resize(self.len, 0.0);
        self.accumulate(values, scratch);
        scratch.iter().map(|&p| plogp(p)).sum()
    }
}

/// Caches marginal plans for one tensor shape, keyed by axis mask.
///
/// Entropies are memoized until [`EntropyCache::invalidate`]; call it
/// whenever the tensor passed to [`EntropyCache::h`] changes.
#[derive(Clone, Debug)]
pub struct EntropyCache {
    sizes: Vec<usize>,
    plans: Vec<(u64, MarginalPlan, Option<f64>)>,
    scratch: Vec<f64>,
}

impl EntropyCache {
    pub fn new(sizes: Vec<usize>) -> Self {
        EntropyCache {
            sizes,
            plans: Vec::new(),
            scratch: Vec::new(),
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Forgets memoized entropies.
    pub fn invalidate(&mut self) {
        self.plans.iter_mut().for_each(|p| p.2 = None);
    }

    /// Entropy of the marginal on the axes in `mask`.
    pub fn h(&mut self, values: &[f64], mask: u64) -> f64 {
        if mask == 0 {
            return 0.0;
        }
        let pos = match self.plans.iter().position(|(m, _, _)| *m == mask) {
            Some(p) => p,
            None => {
                self.plans.push((mask, MarginalPlan::new(&self.sizes, mask), None));
                self.plans.len() - 1
            }
        };
        let (_, plan, memo) = &mut self.plans[pos];
        if let Some(v) = *memo {
            return v;
        }
        let v = plan.entropy(values, &mut self.scratch);
        *memo = Some(v);
        v
    }

    /// I(A;B|C) from masks, without clamping.
    pub fn mi(&mut self, values: &[f64], a: u64, b: u64, c: u64) -> f64 {
        self.h(values, a | c) + self.h(values, b | c) - self.h(values, a | b | c) - self.h(values, c)
    }
}

fn check_prob(name: &str, a: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&a) {
        return invalid(format!("{name} = {a} is outside [0,1]"));
    }
    Ok(())
}

/// h2 without range checks; callers guarantee `a` in [0,1].
#[inline]
pub fn h2(a: f64) -> f64 {
    plogp(a) + plogp(1.0 - a)
}

/// Binary entropy h2(a) in bits.
pub fn binary_entropy(a: f64) -> Result<f64> {
    check_prob("argument", a)?;
    Ok(h2(a))
}

/// p * q = p(1-q) + q(1-p), the crossover of two cascaded BSCs.
pub fn binary_convolve(p: f64, q: f64) -> Result<f64> {
    check_prob("p", p)?;
    check_prob("q", q)?;
    Ok(conv(p, q))
}

#[inline]
pub fn conv(p: f64, q: f64) -> f64 {
    p * (1.0 - q) + q * (1.0 - p)
}

/// The p in [0, 1/2] with h2(p) = t, by bisection.
pub fn inverse_binary_entropy(t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return invalid(format!("entropy {t} is outside [0,1]"));
    }
    if t == 1.0 {
        // h2 is flat to machine precision near 1/2; bisection would stop early.
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if h2(mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
